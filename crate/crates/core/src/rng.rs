//! Seed derivation. Every random stream in a run is a pure function of the
//! base seed plus a small tuple of stream labels.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `labels` into `base` to produce an independent child seed.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(base), |acc, &l| splitmix64(acc ^ splitmix64(l)))
}

pub fn rng_for(base: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, labels))
}

// Stream labels.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_AUGMENT: u64 = 2;
pub(crate) const STREAM_FOLDS: u64 = 3;
pub(crate) const STREAM_TRAIN_NEGATIVES: u64 = 4;
pub(crate) const STREAM_SUPERVISION: u64 = 5;
