use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AssociationStore;
use crate::rng::{rng_for, STREAM_FOLDS};

/// Assignment of known peptide-disease positives and sampled negatives to
/// `k` folds. Pairs are local `(peptide, disease)` indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub ratio: f64,
    pub seed: u64,
    pub positives: Vec<(usize, usize)>,
    pub positive_fold: Vec<usize>,
    pub negatives: Vec<(usize, usize)>,
    pub negative_fold: Vec<usize>,
}

impl FoldPlan {
    fn select(pairs: &[(usize, usize)], folds: &[usize], keep: impl Fn(usize) -> bool) -> Vec<(usize, usize)> {
        pairs.iter().zip(folds).filter(|(_, &f)| keep(f)).map(|(p, _)| *p).collect()
    }

    pub fn test_positives(&self, fold: usize) -> Vec<(usize, usize)> {
        Self::select(&self.positives, &self.positive_fold, |f| f == fold)
    }

    pub fn test_negatives(&self, fold: usize) -> Vec<(usize, usize)> {
        Self::select(&self.negatives, &self.negative_fold, |f| f == fold)
    }

    pub fn train_positives(&self, fold: usize) -> Vec<(usize, usize)> {
        Self::select(&self.positives, &self.positive_fold, |f| f != fold)
    }

    pub fn train_negatives(&self, fold: usize) -> Vec<(usize, usize)> {
        Self::select(&self.negatives, &self.negative_fold, |f| f != fold)
    }

    /// Held-out pairs with labels, positives first.
    pub fn test_set(&self, fold: usize) -> (Vec<(usize, usize)>, Vec<f64>) {
        labelled(self.test_positives(fold), self.test_negatives(fold))
    }

    pub fn train_set(&self, fold: usize) -> (Vec<(usize, usize)>, Vec<f64>) {
        labelled(self.train_positives(fold), self.train_negatives(fold))
    }
}

pub(crate) fn labelled(pos: Vec<(usize, usize)>, neg: Vec<(usize, usize)>) -> (Vec<(usize, usize)>, Vec<f64>) {
    let mut labels = vec![1.0; pos.len()];
    labels.resize(pos.len() + neg.len(), 0.0);
    let mut pairs = pos;
    pairs.extend(neg);
    (pairs, labels)
}

pub(crate) fn validate_ratio(ratio: f64) -> Result<()> {
    if ratio > 0.0 && ratio.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("negative ratio {ratio} must be positive")))
    }
}

/// Draws `round(ratio * positives)` distinct unobserved cells of `A_pd`.
pub(crate) fn sample_negatives(store: &AssociationStore, ratio: f64, rng: &mut impl rand::Rng) -> Result<Vec<(usize, usize)>> {
    validate_ratio(ratio)?;
    let pd = store.peptide_disease();
    let needed = (ratio * pd.count_ones() as f64).round() as usize;
    let pool: Vec<(usize, usize)> = pd.zeros_iter().collect();
    if needed > pool.len() {
        return Err(Error::NegativePoolExhausted {
            needed,
            available: pool.len(),
        });
    }
    Ok(index::sample(rng, pool.len(), needed).into_iter().map(|i| pool[i]).collect())
}

pub fn make_folds(store: &AssociationStore, k: usize, ratio: f64, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k = {k}; cross-validation needs at least 2 folds")));
    }
    let mut positives: Vec<(usize, usize)> = store.peptide_disease().ones().collect();
    if positives.len() < k {
        return Err(Error::Config(format!("{} positives cannot fill {k} folds", positives.len())));
    }
    let mut rng = rng_for(seed, &[STREAM_FOLDS]);
    positives.shuffle(&mut rng);
    let negatives = sample_negatives(store, ratio, &mut rng)?;
    let positive_fold = (0..positives.len()).map(|i| i % k).collect();
    let negative_fold = (0..negatives.len()).map(|i| i % k).collect();
    Ok(FoldPlan {
        k,
        ratio,
        seed,
        positives,
        positive_fold,
        negatives,
        negative_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BinaryMatrix;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn store(np: usize, nd: usize, ones: &[(usize, usize)]) -> AssociationStore {
        let mut pd = BinaryMatrix::zeros(np, nd);
        for &(p, d) in ones {
            pd.set(p, d, true);
        }
        AssociationStore::new(BinaryMatrix::zeros(np, 1), pd, BinaryMatrix::zeros(1, nd)).unwrap()
    }

    #[test]
    fn ten_positives_five_folds() {
        let ones: Vec<_> = (0..10).map(|i| (i, i % 3)).collect();
        let plan = make_folds(&store(10, 6, &ones), 5, 1.0, 1).unwrap();
        for f in 0..5 {
            assert_eq!(plan.test_positives(f).len(), 2);
            assert_eq!(plan.test_negatives(f).len(), 2);
        }
        assert_eq!(plan, make_folds(&store(10, 6, &ones), 5, 1.0, 1).unwrap());
        assert_ne!(plan, make_folds(&store(10, 6, &ones), 5, 1.0, 2).unwrap());
    }

    #[test]
    fn exhausted_pool_reports_counts() {
        let ones: Vec<_> = (0..4).map(|i| (i, 0)).collect();
        match make_folds(&store(4, 2, &ones), 2, 2.0, 0) {
            Err(Error::NegativePoolExhausted { needed, available }) => {
                assert_eq!((needed, available), (8, 4));
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn plan_invariants(seed in any::<u64>(), k in 2usize..6, ratio in 0.5f64..2.5) {
            let ones: Vec<_> = (0..12).flat_map(|p| [(p, p % 7), (p, (p * 3 + 1) % 7)]).collect();
            let s = store(12, 7, &ones);
            let plan = make_folds(&s, k, ratio, seed).unwrap();
            let all: BTreeSet<_> = ones.iter().copied().collect();
            let mut seen = BTreeSet::new();
            for f in 0..k {
                let test: BTreeSet<_> = plan.test_set(f).0.into_iter().collect();
                let (train, _) = plan.train_set(f);
                prop_assert!(train.iter().all(|p| !test.contains(p)));
                seen.extend(plan.test_positives(f));
            }
            prop_assert_eq!(seen, all);
            let negs: BTreeSet<_> = plan.negatives.iter().copied().collect();
            prop_assert_eq!(negs.len(), plan.negatives.len());
            prop_assert!(negs.iter().all(|&(p, d)| !s.peptide_disease().is_set(p, d)));
        }
    }
}
