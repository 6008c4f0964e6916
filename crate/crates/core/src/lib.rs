//! Match refinement, dense field interpolation, warping and landmark
//! evaluation for deformable image registration.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `parallel` feature
//! to spread tree building, sampling rounds and rasterization over rayon;
//! results are bit-identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod affine;
pub mod dvf;
pub mod error;
pub mod evaluation;
pub mod iforest;
pub mod local_affine;
pub mod model;
pub mod multiscale;
mod par;
pub mod refinery;
pub mod rng;
pub mod synth;
pub mod tps;
pub mod warp;
pub mod triangulation;

pub use error::{Error, Result};
pub use model::{
    DisplacementVector, DvfRaster, ImageBuffer, ImageMeta, LandmarkSet, MatchPair, MatchSet,
    OutlierMask, Point2,
};
