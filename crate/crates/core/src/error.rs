use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("non-finite coordinate or displacement")]
    NonFinite,
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    UnsupportedChannels(u8),
    #[error("buffer size does not match image dimensions")]
    SizeMismatch,
    #[error("need at least {needed} matches, got {got}")]
    TooFewMatches { needed: usize, got: usize },
    #[error("degenerate geometry: points are collinear or coincident")]
    DegenerateGeometry,
    #[error("pair {pair}: {predicted} predicted landmarks vs {truth} ground-truth landmarks")]
    LengthMismatch {
        pair: usize,
        predicted: usize,
        truth: usize,
    },
    #[error("no landmark pairs to evaluate")]
    NoPairs,
    #[error("pair {pair} has no landmarks")]
    NoLandmarks { pair: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("matcher unavailable at the coarsest level")]
    MatcherUnavailable,
}
