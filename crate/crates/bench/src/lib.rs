//! Shared fixtures for the criterion benchmarks.

use peplink_core::synthetic::SyntheticSpec;
use peplink_core::{AlignmentParams, BandwidthMode, HeteroGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";

/// `n` random peptide sequences of length 2..=9.
pub fn random_peptides(n: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(2..=9);
            (0..len).map(|_| RESIDUES[rng.gen_range(0..RESIDUES.len())]).collect()
        })
        .collect()
}

pub fn synthetic_graph() -> HeteroGraph {
    SyntheticSpec::default()
        .generate()
        .and_then(|d| d.graph(&AlignmentParams::default(), 1.0, BandwidthMode::Paper))
        .expect("default synthetic spec is valid")
}

pub fn random_scores(n: usize, seed: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen::<f64>(), rng.gen_bool(0.3))).unzip()
}
