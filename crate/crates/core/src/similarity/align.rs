//! Smith-Waterman local alignment with affine gaps.
//!
//! A gap run of length `k` costs `gap_open + (k - 1) * gap_extend`. The
//! residue `X` is treated as unknown and never counts as a match, including
//! against another `X`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignmentParams {
    #[serde(rename = "match")]
    pub match_score: f64,
    pub mismatch: f64,
    pub gap_open: f64,
    pub gap_extend: f64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        Self {
            match_score: 2.0,
            mismatch: -1.0,
            gap_open: -2.0,
            gap_extend: -1.0,
        }
    }
}

impl AlignmentParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.match_score, self.mismatch, self.gap_open, self.gap_extend]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("alignment scores must be finite".into()));
        }
        if self.match_score <= 0.0 {
            return Err(Error::Config("alignment match score must be > 0".into()));
        }
        if self.mismatch > 0.0 {
            return Err(Error::Config("alignment mismatch score must be <= 0".into()));
        }
        if self.gap_open > 0.0 || self.gap_extend > 0.0 {
            return Err(Error::Config("alignment gap penalties must be <= 0".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn substitution(&self, a: u8, b: u8) -> f64 {
        if residues_match(a, b) {
            self.match_score
        } else {
            self.mismatch
        }
    }
}

#[inline]
pub fn residues_match(a: u8, b: u8) -> bool {
    a == b && a != b'X'
}

/// Best local alignment summary: the optimal score and, among all alignments
/// achieving it, the largest number of identical aligned residues.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalAlignment {
    pub score: f64,
    pub matches: usize,
}

// (score, matches), ordered lexicographically.
#[derive(Clone, Copy, PartialEq)]
struct Cell(f64, usize);

const NEG: Cell = Cell(f64::NEG_INFINITY, 0);
const ZERO: Cell = Cell(0.0, 0);

impl Cell {
    #[inline]
    fn max(self, other: Cell) -> Cell {
        if other.0 > self.0 || (other.0 == self.0 && other.1 > self.1) {
            other
        } else {
            self
        }
    }

    #[inline]
    fn add(self, score: f64, matches: usize) -> Cell {
        Cell(self.0 + score, self.1 + matches)
    }
}

/// Gotoh-style local alignment in O(|a|·|b|) time and O(|b|) space.
pub fn local_align(a: &[u8], b: &[u8], params: &AlignmentParams) -> LocalAlignment {
    let n = b.len();
    // h: best alignment ending at (i, j); e: ending with a gap consuming b
    // (horizontal); f: ending with a gap consuming a (vertical).
    let mut h_prev = vec![ZERO; n + 1];
    let mut h_cur = vec![ZERO; n + 1];
    let mut f = vec![NEG; n + 1];
    let mut best = ZERO;

    for &ai in a {
        h_cur[0] = ZERO;
        let mut e = NEG;
        for j in 1..=n {
            let bj = b[j - 1];
            e = h_cur[j - 1]
                .add(params.gap_open, 0)
                .max(e.add(params.gap_extend, 0));
            f[j] = h_prev[j]
                .add(params.gap_open, 0)
                .max(f[j].add(params.gap_extend, 0));
            let diag = h_prev[j - 1].add(
                params.substitution(ai, bj),
                usize::from(residues_match(ai, bj)),
            );
            let h = ZERO.max(diag).max(e).max(f[j]);
            h_cur[j] = h;
            best = best.max(h);
        }
        std::mem::swap(&mut h_prev, &mut h_cur);
    }
    LocalAlignment {
        score: best.0,
        matches: best.1,
    }
}

/// Maximum local-alignment score over all alignment paths; always >= 0.
pub fn smith_waterman_score(a: &[u8], b: &[u8], params: &AlignmentParams) -> f64 {
    local_align(a, b, params).score
}

/// Identical residues in the best local alignment divided by the shorter
/// sequence length.
pub fn normalized_identity(a: &[u8], b: &[u8], params: &AlignmentParams) -> f64 {
    let shorter = a.len().min(b.len());
    if shorter == 0 {
        return 0.0;
    }
    local_align(a, b, params).matches as f64 / shorter as f64
}

pub mod oracle {
    //! Exhaustive enumeration of every local alignment: all pairs of
    //! substrings, every global alignment between them. Exponential; only
    //! for cross-checking the dynamic program on short inputs.
    use super::{residues_match, AlignmentParams};

    #[derive(Clone, Copy, PartialEq)]
    enum Last {
        Start,
        Pair,
        GapA,
        GapB,
    }

    #[allow(clippy::too_many_arguments)]
    fn walk(
        a: &[u8],
        b: &[u8],
        i: usize,
        j: usize,
        last: Last,
        score: f64,
        matches: usize,
        p: &AlignmentParams,
        best: &mut (f64, usize),
    ) {
        if i == a.len() && j == b.len() {
            if score > best.0 || (score == best.0 && matches > best.1) {
                *best = (score, matches);
            }
            return;
        }
        if i < a.len() && j < b.len() {
            let m = residues_match(a[i], b[j]);
            walk(a, b, i + 1, j + 1, Last::Pair, score + p.substitution(a[i], b[j]), matches + usize::from(m), p, best);
        }
        if i < a.len() {
            let cost = if last == Last::GapA { p.gap_extend } else { p.gap_open };
            walk(a, b, i + 1, j, Last::GapA, score + cost, matches, p, best);
        }
        if j < b.len() {
            let cost = if last == Last::GapB { p.gap_extend } else { p.gap_open };
            walk(a, b, i, j + 1, Last::GapB, score + cost, matches, p, best);
        }
    }

    /// Returns (best score, max matches among best-scoring alignments).
    pub fn brute_force_local(a: &[u8], b: &[u8], p: &AlignmentParams) -> (f64, usize) {
        let mut best = (0.0, 0);
        for i0 in 0..a.len() {
            for i1 in i0 + 1..=a.len() {
                for j0 in 0..b.len() {
                    for j1 in j0 + 1..=b.len() {
                        walk(&a[i0..i1], &b[j0..j1], 0, 0, Last::Start, 0.0, 0, p, &mut best);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::oracle::brute_force_local;
    use super::*;
    use proptest::prelude::*;

    fn p() -> AlignmentParams {
        AlignmentParams::default()
    }

    #[test]
    fn identical_sequences_score_match_times_length() {
        assert_eq!(smith_waterman_score(b"KK", b"KK", &p()), 4.0);
    }

    #[test]
    fn no_positive_alignment_scores_zero() {
        assert_eq!(smith_waterman_score(b"AAA", b"GGG", &p()), 0.0);
    }

    #[test]
    fn kwk_kak_matches_enumeration() {
        // Frozen from the exhaustive oracle: KWK/KAK ungapped = 2 - 1 + 2.
        let (oracle, _) = brute_force_local(b"KWK", b"KAK", &p());
        assert_eq!(oracle, 3.0);
        assert_eq!(smith_waterman_score(b"KWK", b"KAK", &p()), 3.0);
    }

    #[test]
    fn unknown_residue_never_matches() {
        assert_eq!(smith_waterman_score(b"X", b"X", &p()), 0.0);
        assert_eq!(smith_waterman_score(b"XSYN", b"XSYN", &p()), 6.0);
    }

    #[test]
    fn identity_of_near_duplicates() {
        // KWKW aligned, trailing K/R mismatch excluded: 4 matches / 5.
        assert_eq!(brute_force_local(b"KWKWK", b"KWKWR", &p()).1, 4);
        assert!((normalized_identity(b"KWKWK", b"KWKWR", &p()) - 0.8).abs() < 1e-15);
        assert_eq!(normalized_identity(b"KWKW", b"ACDE", &p()), 0.0);
    }

    #[test]
    fn gapped_alignment_is_found() {
        // AAAAWAAAA vs AAAAAAAA: one gap (-2) beats splitting into halves.
        let a = b"AAAAWAAAA";
        let b = b"AAAAAAAA";
        let (oracle, _) = brute_force_local(a, b, &p());
        assert_eq!(smith_waterman_score(a, b, &p()), oracle);
        assert_eq!(oracle, 14.0);
    }

    fn seq(max: usize) -> impl Strategy<Value = Vec<u8>> {
        prop::collection::vec(prop::sample::select(b"ACGT".to_vec()), 1..=max)
    }

    proptest! {
        #[test]
        fn dp_equals_enumeration(a in seq(5), b in seq(5)) {
            let (score, matches) = brute_force_local(&a, &b, &p());
            let dp = local_align(&a, &b, &p());
            prop_assert_eq!(dp.score, score);
            prop_assert_eq!(dp.matches, matches);
        }

        #[test]
        fn score_is_symmetric(a in seq(9), b in seq(9)) {
            let s1 = local_align(&a, &b, &p());
            let s2 = local_align(&b, &a, &p());
            prop_assert_eq!(s1, s2);
        }

        #[test]
        fn self_score_dominates(a in seq(9), b in seq(9)) {
            prop_assert!(smith_waterman_score(&a, &a, &p()) >= smith_waterman_score(&a, &b, &p()));
            prop_assert!(smith_waterman_score(&a, &b, &p()) >= 0.0);
        }
    }
}
