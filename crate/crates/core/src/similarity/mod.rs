//! Intra-class similarity: sequence alignment for peptides, interaction-profile
//! kernels for microbes and diseases.

mod align;
mod gip;
mod matrix;

pub use align::{local_align, normalized_identity, residues_match, smith_waterman_score, AlignmentParams, LocalAlignment};
pub use gip::{build_profiles, compute_bandwidth, gip_kernel, BandwidthMode, InteractionProfile};
pub use matrix::{EntityClass, SimilarityMatrix};

pub use align::oracle;

use rayon::prelude::*;

use crate::entities::EntityRegistry;
use crate::error::{Error, Result};
use crate::graph::AssociationStore;

/// `S_p(i,j) = SW(i,j) / sqrt(SW(i,i) * SW(j,j))`.
pub fn build_peptide_similarity(registry: &EntityRegistry, params: &AlignmentParams) -> Result<SimilarityMatrix> {
    let seqs: Vec<&[u8]> = registry.peptides().iter().map(|p| p.sequence.as_bytes()).collect();
    peptide_similarity_from_sequences(&seqs, params)
}

pub fn peptide_similarity_from_sequences(seqs: &[&[u8]], params: &AlignmentParams) -> Result<SimilarityMatrix> {
    let n = seqs.len();
    let self_scores: Vec<f64> = seqs.iter().map(|s| smith_waterman_score(s, s, params)).collect();
    if let Some(i) = self_scores.iter().position(|&s| s <= 0.0) {
        return Err(Error::Internal(format!(
            "peptide {i} has a zero self-alignment score; it contains only unknown residues"
        )));
    }
    // Each row writes only its own upper-triangle cells.
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let raw = smith_waterman_score(seqs[i], seqs[j], params);
                    (raw / (self_scores[i] * self_scores[j]).sqrt()).clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        values[i * n + i] = 1.0;
        for (off, &v) in row.iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_values(n, values, EntityClass::Peptide)
}

#[derive(Debug, Clone)]
pub struct SimilaritySet {
    pub peptide: SimilarityMatrix,
    pub microbe: SimilarityMatrix,
    pub disease: SimilarityMatrix,
    pub gamma_microbe: f64,
    pub gamma_disease: f64,
}

pub fn build_similarities(
    registry: &EntityRegistry,
    store: &AssociationStore,
    params: &AlignmentParams,
    gamma_prime: f64,
    mode: BandwidthMode,
) -> Result<SimilaritySet> {
    let peptide = build_peptide_similarity(registry, params)?;
    let (mp, dp) = build_profiles(store);
    let gamma_microbe = compute_bandwidth(&mp, gamma_prime, mode);
    let gamma_disease = compute_bandwidth(&dp, gamma_prime, mode);
    Ok(SimilaritySet {
        peptide,
        microbe: gip_kernel(&mp, gamma_microbe, EntityClass::Microbe),
        disease: gip_kernel(&dp, gamma_disease, EntityClass::Disease),
        gamma_microbe,
        gamma_disease,
    })
}
