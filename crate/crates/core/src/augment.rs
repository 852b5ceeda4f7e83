//! Prompt-node selection and prompt-guarded random edge dropping.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::HeteroGraph;
use crate::rng::{rng_for, STREAM_AUGMENT};
use crate::similarity::{EntityClass, SimilarityMatrix};
use crate::tensor::Tensor;

/// Which nonzero cells of M may be dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbScope {
    /// Similarity and association edges alike.
    #[default]
    All,
    /// Only cells in the off-diagonal (inter-class) blocks.
    AssociationOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub scores: Vec<f64>,
    /// Peptide global indices (peptides occupy the first block of M).
    pub members: BTreeSet<usize>,
    pub tau: f64,
}

impl PromptSet {
    pub fn contains(&self, node: usize) -> bool {
        self.members.contains(&node)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Mean off-diagonal similarity of each peptide; zero for a lone peptide.
pub fn compute_prompt_scores(sp: &SimilarityMatrix) -> Vec<f64> {
    let n = sp.len();
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| sp.get(i, j)).sum::<f64>() / (n - 1) as f64)
        .collect()
}

/// Peptides whose score strictly exceeds `tau`.
pub fn select_prompt_nodes(scores: &[f64], tau: f64) -> PromptSet {
    PromptSet {
        scores: scores.to_vec(),
        members: scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > tau)
            .map(|(i, _)| i)
            .collect(),
        tau,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub adjacency: Tensor,
    pub drop_rate: f64,
    pub seed: u64,
}

fn validate_drop_rate(p: f64) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("drop rate {p} outside [0, 1)")))
    }
}

/// Draws one Bernoulli(1 - p) keep decision per eligible unordered pair and
/// mirrors it to both cells. Cells touching a prompt node and the diagonal
/// are copied unchanged.
pub fn augment_adjacency(
    m: &Tensor,
    block_of: impl Fn(usize) -> EntityClass,
    prompts: &PromptSet,
    p: f64,
    scope: PerturbScope,
    seed: u64,
) -> Result<AugmentedView> {
    validate_drop_rate(p)?;
    let (n, c) = m.require_matrix("augment_graph")?;
    if n != c {
        return Err(Error::shape("augment_graph", "adjacency must be square"));
    }
    let mut out = m.clone();
    if p > 0.0 {
        let mut rng = rng_for(seed, &[STREAM_AUGMENT]);
        for i in 0..n {
            if prompts.contains(i) {
                continue;
            }
            for j in i + 1..n {
                if m.get(i, j) == 0.0 || prompts.contains(j) {
                    continue;
                }
                if scope == PerturbScope::AssociationOnly && block_of(i) == block_of(j) {
                    continue;
                }
                if !rng.gen_bool(1.0 - p) {
                    out.set(i, j, 0.0);
                    out.set(j, i, 0.0);
                }
            }
        }
    }
    Ok(AugmentedView {
        adjacency: out,
        drop_rate: p,
        seed,
    })
}

pub fn augment_graph(graph: &HeteroGraph, prompts: &PromptSet, p: f64, scope: PerturbScope, seed: u64) -> Result<AugmentedView> {
    let block = block_classifier(graph);
    augment_adjacency(graph.adjacency(), block, prompts, p, scope, seed)
}

pub(crate) fn block_classifier(graph: &HeteroGraph) -> impl Fn(usize) -> EntityClass {
    let (np, nm, _) = graph.counts();
    move |g| {
        if g < np {
            EntityClass::Peptide
        } else if g < np + nm {
            EntityClass::Microbe
        } else {
            EntityClass::Disease
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(rows: &[&[f64]]) -> SimilarityMatrix {
        SimilarityMatrix::from_values(rows.len(), rows.concat(), EntityClass::Peptide).unwrap()
    }

    #[test]
    fn prompt_scores() {
        let s = compute_prompt_scores(&sp(&[&[1.0, 0.6, 0.4], &[0.6, 1.0, 0.0], &[0.4, 0.0, 1.0]]));
        let expected = [0.5, 0.3, 0.2];
        for (a, b) in s.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(compute_prompt_scores(&SimilarityMatrix::identity(4, EntityClass::Peptide)), vec![0.0; 4]);
        assert_eq!(compute_prompt_scores(&sp(&[&[1.0, 1.0], &[1.0, 1.0]])), vec![1.0; 2]);
        assert_eq!(compute_prompt_scores(&sp(&[&[1.0]])), vec![0.0]);
    }

    #[test]
    fn prompt_threshold_is_strict() {
        assert_eq!(select_prompt_nodes(&[0.5, 0.3, 0.2], 0.4).members, BTreeSet::from([0]));
        assert!(select_prompt_nodes(&[0.4], 0.4).is_empty());
    }

    fn dense(n: usize, v: f64) -> Tensor {
        let mut m = Tensor::full(&[n, n], v);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    #[test]
    fn zero_drop_rate_is_identity() {
        let m = dense(10, 0.5);
        let none = select_prompt_nodes(&[0.0; 3], 1.0);
        let v = augment_adjacency(&m, |_| EntityClass::Peptide, &none, 0.0, PerturbScope::All, 3).unwrap();
        assert_eq!(v.adjacency, m);
    }

    #[test]
    fn all_prompt_peptides_shield_every_edge() {
        // 4 peptides all prompts, 3 other nodes; edges only peptide-X.
        let n = 7;
        let mut m = Tensor::identity(n);
        for i in 0..4 {
            for j in 0..n {
                m.set(i, j, 1.0);
                m.set(j, i, 1.0);
            }
        }
        let prompts = select_prompt_nodes(&[1.0; 4], 0.4);
        let v = augment_adjacency(&m, |g| if g < 4 { EntityClass::Peptide } else { EntityClass::Disease }, &prompts, 0.9, PerturbScope::All, 1).unwrap();
        assert_eq!(v.adjacency, m);
    }

    #[test]
    fn invariants_and_reproducibility() {
        let n = 40;
        let m = dense(n, 0.3);
        let prompts = select_prompt_nodes(&(0..10).map(|i| if i % 3 == 0 { 1.0 } else { 0.0 }).collect::<Vec<_>>(), 0.5);
        let block = |g: usize| if g < 10 { EntityClass::Peptide } else { EntityClass::Microbe };
        let a = augment_adjacency(&m, block, &prompts, 0.5, PerturbScope::All, 42).unwrap();
        let b = augment_adjacency(&m, block, &prompts, 0.5, PerturbScope::All, 42).unwrap();
        assert_eq!(a, b);
        let t = &a.adjacency;
        for i in 0..n {
            assert_eq!(t.get(i, i), 1.0);
            for j in 0..n {
                assert_eq!(t.get(i, j), t.get(j, i));
                assert!(t.get(i, j) == m.get(i, j) || t.get(i, j) == 0.0);
                if prompts.contains(i) || prompts.contains(j) {
                    assert_eq!(t.get(i, j), m.get(i, j));
                }
            }
        }
        let c = augment_adjacency(&m, block, &prompts, 0.5, PerturbScope::All, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn association_only_scope_keeps_similarity_blocks() {
        let n = 12;
        let m = dense(n, 1.0);
        let none = select_prompt_nodes(&[], 0.0);
        let block = |g: usize| if g < 6 { EntityClass::Peptide } else { EntityClass::Disease };
        let v = augment_adjacency(&m, block, &none, 0.5, PerturbScope::AssociationOnly, 9).unwrap();
        let mut dropped = 0;
        for i in 0..n {
            for j in 0..n {
                if block(i) == block(j) {
                    assert_eq!(v.adjacency.get(i, j), 1.0);
                } else if v.adjacency.get(i, j) == 0.0 {
                    dropped += 1;
                }
            }
        }
        assert!(dropped > 0);
    }

    #[test]
    fn keep_fraction_near_one_minus_p() {
        // 142 nodes -> 10,011 eligible pairs.
        let n = 142;
        let m = dense(n, 0.7);
        let none = select_prompt_nodes(&[], 0.0);
        let v = augment_adjacency(&m, |_| EntityClass::Peptide, &none, 0.5, PerturbScope::All, 2024).unwrap();
        let eligible = n * (n - 1) / 2;
        let kept = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| v.adjacency.get(i, j) != 0.0).count();
        let frac = kept as f64 / eligible as f64;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn invalid_drop_rate() {
        let none = select_prompt_nodes(&[], 0.0);
        assert!(augment_adjacency(&Tensor::identity(2), |_| EntityClass::Peptide, &none, 1.0, PerturbScope::All, 0).is_err());
    }
}
