//! Gaussian interaction-profile kernel over binary association profiles.

use serde::{Deserialize, Serialize};

use super::matrix::{EntityClass, SimilarityMatrix};
use crate::graph::AssociationStore;

/// Binary interaction vector of one entity against every entity of another class.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionProfile {
    pub vector: Vec<u8>,
    pub owner_class: EntityClass,
}

impl InteractionProfile {
    pub fn norm(&self) -> f64 {
        (self.vector.iter().filter(|&&v| v != 0).count() as f64).sqrt()
    }

    pub fn squared_distance(&self, other: &InteractionProfile) -> f64 {
        self.vector
            .iter()
            .zip(&other.vector)
            .filter(|(a, b)| a != b)
            .count() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthMode {
    /// gamma = gamma' * mean(||G||), unsquared and multiplicative.
    #[default]
    Paper,
    /// gamma = gamma' / mean(||G||^2), the usual GIP normalization.
    Classic,
}

/// Microbe profiles are rows of the microbe-disease matrix, disease profiles
/// its columns.
pub fn build_profiles(store: &AssociationStore) -> (Vec<InteractionProfile>, Vec<InteractionProfile>) {
    let md = store.microbe_disease();
    let microbes = (0..md.rows())
        .map(|i| InteractionProfile {
            vector: md.row(i).to_vec(),
            owner_class: EntityClass::Microbe,
        })
        .collect();
    let diseases = (0..md.cols())
        .map(|j| InteractionProfile {
            vector: (0..md.rows()).map(|i| md.get(i, j)).collect(),
            owner_class: EntityClass::Disease,
        })
        .collect();
    (microbes, diseases)
}

pub fn compute_bandwidth(profiles: &[InteractionProfile], gamma_prime: f64, mode: BandwidthMode) -> f64 {
    if profiles.is_empty() {
        return 0.0;
    }
    let n = profiles.len() as f64;
    match mode {
        BandwidthMode::Paper => gamma_prime * profiles.iter().map(InteractionProfile::norm).sum::<f64>() / n,
        BandwidthMode::Classic => {
            let mean_sq = profiles.iter().map(|p| p.norm().powi(2)).sum::<f64>() / n;
            if mean_sq == 0.0 {
                0.0
            } else {
                gamma_prime / mean_sq
            }
        }
    }
}

/// `S(i,j) = exp(-gamma * ||G(i) - G(j)||^2)`; `gamma == 0` yields the identity.
pub fn gip_kernel(profiles: &[InteractionProfile], gamma: f64, class: EntityClass) -> SimilarityMatrix {
    let n = profiles.len();
    if gamma == 0.0 {
        return SimilarityMatrix::identity(n, class);
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let s = (-gamma * profiles[i].squared_distance(&profiles[j])).exp();
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    SimilarityMatrix::from_values(n, values, class).expect("square by construction")
}
