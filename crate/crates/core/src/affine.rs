//! Least-squares 2D affine maps between sensor coordinate systems.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// `p ↦ W·p + b`. Serialized as `{"w": [[..],[..]], "b": [..]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform2D {
    pub w: [[f64; 2]; 2],
    pub b: [f64; 2],
}

impl Default for AffineTransform2D {
    fn default() -> Self {
        Self::identity()
    }
}

impl AffineTransform2D {
    pub fn identity() -> Self {
        Self {
            w: [[1.0, 0.0], [0.0, 1.0]],
            b: [0.0, 0.0],
        }
    }

    pub fn new(w: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        Self { w, b }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.w[0][0] * p[0] + self.w[0][1] * p[1] + self.b[0],
            self.w[1][0] * p[0] + self.w[1][1] * p[1] + self.b[1],
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().flatten().chain(&self.b).all(|v| v.is_finite())
    }

    /// Inverse map, if `W` is invertible.
    pub fn inverse(&self) -> Option<Self> {
        let w = Matrix2::new(self.w[0][0], self.w[0][1], self.w[1][0], self.w[1][1]);
        let inv = w.try_inverse()?;
        let b = -(inv * Vector2::new(self.b[0], self.b[1]));
        Some(Self {
            w: [[inv[(0, 0)], inv[(0, 1)]], [inv[(1, 0)], inv[(1, 1)]]],
            b: [b[0], b[1]],
        })
    }
}

pub fn apply_affine(tf: &AffineTransform2D, pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    pts.iter().map(|&p| tf.apply(p)).collect()
}

/// Fits `W, b` minimizing `Σ‖W·source + b − target‖²`.
pub fn fit_affine(pairs: &[([f64; 2], [f64; 2])]) -> Result<AffineTransform2D> {
    if pairs.len() < 3 {
        return Err(CoreError::RankDeficient(format!(
            "need at least 3 point pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len();
    // Center the sources so the conditioning does not depend on the offset.
    let mean = pairs
        .iter()
        .fold([0.0, 0.0], |acc, (s, _)| [acc[0] + s[0] / n as f64, acc[1] + s[1] / n as f64]);
    let mut design = DMatrix::<f64>::zeros(n, 3);
    let mut rhs = DMatrix::<f64>::zeros(n, 2);
    for (r, (s, t)) in pairs.iter().enumerate() {
        design[(r, 0)] = s[0] - mean[0];
        design[(r, 1)] = s[1] - mean[1];
        design[(r, 2)] = 1.0;
        rhs[(r, 0)] = t[0];
        rhs[(r, 1)] = t[1];
    }
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(max > 0.0) || min <= max * 1e-10 {
        return Err(CoreError::RankDeficient(format!(
            "source points are collinear or coincident (singular values {:.3e}..{:.3e})",
            min, max
        )));
    }
    let sol = svd
        .solve(&rhs, max * 1e-12)
        .map_err(|e| CoreError::RankDeficient(e.to_string()))?;
    // sol rows: [w·0, w·1, intercept at the centered origin]
    let w = [[sol[(0, 0)], sol[(1, 0)]], [sol[(0, 1)], sol[(1, 1)]]];
    let b = [
        sol[(2, 0)] - w[0][0] * mean[0] - w[0][1] * mean[1],
        sol[(2, 1)] - w[1][0] * mean[0] - w[1][1] * mean[1],
    ];
    let tf = AffineTransform2D { w, b };
    if !tf.is_finite() {
        return Err(CoreError::RankDeficient("solution is not finite".into()));
    }
    Ok(tf)
}
