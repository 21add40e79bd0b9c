//! Classical distance-based matchers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assign::hungarian;
use crate::error::{CoreError, Result};
use crate::matching::MatchingMatrix;
use crate::trajectory::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Ed,
    Cd,
    Dtw,
    Pdf,
}

impl BaselineMethod {
    pub const ALL: [BaselineMethod; 4] = [Self::Ed, Self::Cd, Self::Dtw, Self::Pdf];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ed => "ed",
            Self::Cd => "cd",
            Self::Dtw => "dtw",
            Self::Pdf => "pdf",
        }
    }
}

impl fmt::Display for BaselineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineMethod {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CoreError::Config(format!("unknown baseline method {s:?}")))
    }
}

fn euclid(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn chebyshev(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

fn valid_points(o: &ObservationSet, i: usize) -> Vec<[f64; 2]> {
    (0..o.k()).filter(|&t| o.observed(i, t)).map(|t| o.coord(i, t)).collect()
}

fn mean_point(pts: &[[f64; 2]]) -> [f64; 2] {
    let n = pts.len() as f64;
    let s = pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

/// Mean pointwise distance over co-observed steps; falls back to the distance
/// between mean positions.
fn pointwise(a: &ObservationSet, b: &ObservationSet, i: usize, j: usize, d: fn([f64; 2], [f64; 2]) -> f64) -> f64 {
    let co: Vec<f64> = (0..a.k().min(b.k()))
        .filter(|&t| a.observed(i, t) && b.observed(j, t))
        .map(|t| d(a.coord(i, t), b.coord(j, t)))
        .collect();
    if co.is_empty() {
        d(mean_point(&valid_points(a, i)), mean_point(&valid_points(b, j)))
    } else {
        co.iter().sum::<f64>() / co.len() as f64
    }
}

/// Dynamic-time-warping cost with Euclidean local distance.
pub fn dtw(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return if n == m { 0.0 } else { f64::INFINITY };
    }
    let mut dp = vec![f64::INFINITY; (n + 1) * (m + 1)];
    dp[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = dp[(i - 1) * (m + 1) + j]
                .min(dp[i * (m + 1) + j - 1])
                .min(dp[(i - 1) * (m + 1) + j - 1]);
            dp[i * (m + 1) + j] = euclid(a[i - 1], b[j - 1]) + best;
        }
    }
    dp[n * (m + 1) + m]
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Pairwise cost matrix (`N_A × N_B`, row-major); invalid rows or columns
/// hold `+∞`.
pub fn cost_matrix(a: &ObservationSet, b: &ObservationSet, method: BaselineMethod) -> Vec<f64> {
    let (n, m) = (a.n(), b.n());
    let mut c = vec![f64::INFINITY; n * m];
    let rows: Vec<usize> = (0..n).filter(|&i| a.target_valid(i)).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| b.target_valid(j)).collect();
    let bandwidth = if method == BaselineMethod::Pdf {
        let mut disp = Vec::new();
        for &i in &rows {
            for &j in &cols {
                for t in 0..a.k().min(b.k()) {
                    if a.observed(i, t) && b.observed(j, t) {
                        disp.push(euclid(a.coord(i, t), b.coord(j, t)));
                    }
                }
            }
        }
        median(disp).filter(|&h| h > 0.0).unwrap_or(1.0)
    } else {
        1.0
    };
    for &i in &rows {
        for &j in &cols {
            c[i * m + j] = match method {
                BaselineMethod::Ed => pointwise(a, b, i, j, euclid),
                BaselineMethod::Cd => pointwise(a, b, i, j, chebyshev),
                BaselineMethod::Dtw => dtw(&valid_points(a, i), &valid_points(b, j)),
                BaselineMethod::Pdf => pdf_cost(a, b, i, j, bandwidth),
            };
        }
    }
    c
}

/// Mean negative log-likelihood of the displacements under an isotropic
/// zero-mean Gaussian of standard deviation `h`.
fn pdf_cost(a: &ObservationSet, b: &ObservationSet, i: usize, j: usize, h: f64) -> f64 {
    let nll = |r: f64| 0.5 * (r / h).powi(2) + (2.0 * std::f64::consts::PI * h * h).ln();
    let co: Vec<f64> = (0..a.k().min(b.k()))
        .filter(|&t| a.observed(i, t) && b.observed(j, t))
        .map(|t| nll(euclid(a.coord(i, t), b.coord(j, t))))
        .collect();
    if co.is_empty() {
        nll(euclid(mean_point(&valid_points(a, i)), mean_point(&valid_points(b, j))))
    } else {
        co.iter().sum::<f64>() / co.len() as f64
    }
}

/// Minimum-cost one-to-one matching over the valid targets.
pub fn baseline_match(a: &ObservationSet, b: &ObservationSet, method: BaselineMethod) -> MatchingMatrix {
    let cost = cost_matrix(a, b, method);
    let m = b.n();
    let rows: Vec<usize> = (0..a.n()).filter(|&i| a.target_valid(i)).collect();
    let cols: Vec<usize> = (0..m).filter(|&j| b.target_valid(j)).collect();
    let sub: Vec<f64> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost[i * m + j])
        .collect();
    let assigned = hungarian(&sub, rows.len(), cols.len(), false);
    let pairs = assigned.pairs().into_iter().map(|(r, c)| (rows[r], cols[c])).collect();
    MatchingMatrix::from_pairs(pairs, &a.valid_targets(), &b.valid_targets())
}
