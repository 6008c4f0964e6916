//! Seeded random streams.
//!
//! Every randomized stage derives an independent ChaCha stream from
//! `(seed, domain, index)`, so work split across threads draws exactly the
//! numbers a sequential run would.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

pub(crate) const DOMAIN_FOREST: u64 = 0x6966_6f72_6573_7431;
pub(crate) const DOMAIN_LOCAL: u64 = 0x6c6f_6361_6c61_6666;
pub(crate) const DOMAIN_SYNTH: u64 = 0x7379_6e74_6865_7469;

/// Independent stream for work item `index` of a stage.
pub fn stream(seed: u64, domain: u64, index: u64) -> StageRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain);
    rng.set_stream(index);
    rng
}
