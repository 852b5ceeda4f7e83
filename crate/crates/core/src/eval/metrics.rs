use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::shape("metrics", format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::shape("metrics", "NaN score"));
    }
    Ok(())
}

/// A score at or above `threshold` counts as a positive prediction.
pub fn compute_confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    check_lengths(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Groups of tied scores in descending score order as (positives, negatives).
fn score_groups(scores: &[f64], labels: &[bool]) -> Vec<(u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(u64, u64)> = Vec::new();
    let mut last: Option<f64> = None;
    for i in order {
        if last != Some(scores[i]) {
            groups.push((0, 0));
            last = Some(scores[i]);
        }
        let g = groups.last_mut().expect("pushed");
        if labels[i] {
            g.0 += 1;
        } else {
            g.1 += 1;
        }
    }
    groups
}

fn class_counts(labels: &[bool]) -> (u64, u64) {
    let p = labels.iter().filter(|&&y| y).count() as u64;
    (p, labels.len() as u64 - p)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` unless both classes are present.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    check_lengths(scores, labels)?;
    let (p, n) = class_counts(labels);
    if p == 0 || n == 0 {
        return Ok(None);
    }
    // Twice the Mann-Whitney count, kept integral.
    let mut twice = 0u128;
    let mut negatives_above = 0u64;
    for (gp, gn) in score_groups(scores, labels) {
        let below = n - negatives_above - gn;
        twice += 2 * gp as u128 * below as u128 + gp as u128 * gn as u128;
        negatives_above += gn;
    }
    Ok(Some(twice as f64 / (2.0 * p as f64 * n as f64)))
}

/// Reference AUROC by explicit comparison of every positive-negative pair.
pub fn auroc_brute_force(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &a in &pos {
        for &b in &neg {
            total += if a > b {
                1.0
            } else if a == b {
                0.5
            } else {
                0.0
            };
        }
    }
    Some(total / (pos.len() * neg.len()) as f64)
}

/// ROC points `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one per score group.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, labels)?;
    let (p, n) = class_counts(labels);
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0, 0);
    for (gp, gn) in score_groups(scores, labels) {
        tp += gp;
        fp += gn;
        pts.push((ratio(fp, n), ratio(tp, p)));
    }
    Ok(pts)
}

/// PR points `(recall, precision)` starting at `(0, 1)`, one per score group.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    check_lengths(scores, labels)?;
    let (p, _) = class_counts(labels);
    let mut pts = vec![(0.0, 1.0)];
    let (mut tp, mut fp) = (0, 0);
    for (gp, gn) in score_groups(scores, labels) {
        tp += gp;
        fp += gn;
        pts.push((ratio(tp, p), ratio(tp, tp + fp)));
    }
    Ok(pts)
}

/// Step-wise area under the PR curve: `sum (R_k - R_{k-1}) P_k`.
pub fn auprc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    let (p, n) = class_counts(labels);
    let curve = pr_curve(scores, labels)?;
    if p == 0 || n == 0 {
        return Ok(None);
    }
    Ok(Some(curve.windows(2).map(|w| (w[1].0 - w[0].0) * w[1].1).sum()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub f1: f64,
    pub accuracy: f64,
    pub recall: f64,
    pub precision: f64,
    pub threshold: f64,
    pub confusion: Confusion,
}

pub fn compute_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let confusion = compute_confusion(scores, labels, threshold)?;
    Ok(Metrics {
        auroc: auroc(scores, labels)?,
        auprc: auprc(scores, labels)?,
        f1: confusion.f1(),
        accuracy: confusion.accuracy(),
        recall: confusion.recall(),
        precision: confusion.precision(),
        threshold,
        confusion,
    })
}
