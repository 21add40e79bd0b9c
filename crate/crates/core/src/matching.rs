//! Thresholded one-to-one matching and its JSON form.

use serde::{Deserialize, Serialize};

use crate::assign::hungarian;
use crate::fusion::SimilarityMatrix;
use crate::trajectory::ObservationSet;

/// Binary one-to-one matching between the rows (modality A) and columns
/// (modality B) of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Matched `(row, col)` pairs in increasing row order.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
}

impl MatchingMatrix {
    /// Builds the matching from pairs; unmatched lists cover valid indices only.
    pub fn from_pairs(mut pairs: Vec<(usize, usize)>, valid_rows: &[bool], valid_cols: &[bool]) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; valid_rows.len()];
        let mut col_used = vec![false; valid_cols.len()];
        for &(i, j) in &pairs {
            assert!(!row_used[i] && !col_used[j], "matching is not one-to-one");
            row_used[i] = true;
            col_used[j] = true;
        }
        let free = |valid: &[bool], used: &[bool]| -> Vec<usize> {
            (0..valid.len()).filter(|&i| valid[i] && !used[i]).collect()
        };
        Self {
            n_rows: valid_rows.len(),
            n_cols: valid_cols.len(),
            unmatched_a: free(valid_rows, &row_used),
            unmatched_b: free(valid_cols, &col_used),
            pairs,
        }
    }

    /// Dense row-major 0/1 entries.
    pub fn entries(&self) -> Vec<u8> {
        let mut e = vec![0; self.n_rows * self.n_cols];
        for &(i, j) in &self.pairs {
            e[i * self.n_cols + j] = 1;
        }
        e
    }
}

/// Masks scores below `tau` and padded entries, then solves the assignment.
pub fn match_similarity(sim: &SimilarityMatrix, tau: f64) -> MatchingMatrix {
    let mut masked = vec![f64::NEG_INFINITY; sim.n_rows * sim.n_cols];
    for i in 0..sim.n_rows {
        for j in 0..sim.n_cols {
            let s = sim.get(i, j);
            if sim.is_valid(i, j) && s >= tau {
                masked[i * sim.n_cols + j] = s;
            }
        }
    }
    let a = hungarian(&masked, sim.n_rows, sim.n_cols, true);
    MatchingMatrix::from_pairs(a.pairs(), &sim.valid_rows, &sim.valid_cols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub a: String,
    pub b: String,
    pub score: f64,
}

/// Serialized matching of one window, keyed by target ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMatching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_a: Vec<String>,
    pub unmatched_b: Vec<String>,
}

impl WindowMatching {
    /// `score` gives the value reported per pair (similarity or negated cost).
    pub fn new(
        m: &MatchingMatrix,
        obs_a: &ObservationSet,
        obs_b: &ObservationSet,
        score: impl Fn(usize, usize) -> f64,
    ) -> Self {
        let id = |o: &ObservationSet, i: usize| o.id(i).unwrap_or_default().to_string();
        Self {
            pairs: m
                .pairs
                .iter()
                .map(|&(i, j)| MatchedPair {
                    a: id(obs_a, i),
                    b: id(obs_b, j),
                    score: score(i, j),
                })
                .collect(),
            unmatched_a: m.unmatched_a.iter().map(|&i| id(obs_a, i)).collect(),
            unmatched_b: m.unmatched_b.iter().map(|&j| id(obs_b, j)).collect(),
        }
    }

    pub fn id_pairs(&self) -> Vec<(String, String)> {
        self.pairs.iter().map(|p| (p.a.clone(), p.b.clone())).collect()
    }
}
