//! Matching (binary cross-entropy) and margin contrastive objectives over the
//! scored pairs of a window.

use serde::{Deserialize, Serialize};

use mva_diff::{Session, Tensor, Value};

use crate::error::{CoreError, Result};

const CLAMP: f64 = 1e-7;

/// Sign convention of the contrastive hinge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContrastiveForm {
    /// `max(0, m − S_ij + S_ie)`: positives must beat negatives by `m`.
    #[default]
    Margin,
    /// `max(0, m + S_ij − S_ie)`, kept for comparison.
    Literal,
}

/// `−(1/P) Σ [T log S + (1−T) log(1−S)]` over the `P` scored pairs, with `S`
/// clamped to `[1e-7, 1 − 1e-7]`. `s` is `P × 1`.
pub fn matching_loss(sess: &mut Session<'_>, s: Value, target: &[f64]) -> Result<Value> {
    let p = target.len();
    if p == 0 {
        return Err(CoreError::NoValidPairs);
    }
    let g = &mut sess.graph;
    let sc = g.clamp(s, CLAMP, 1.0 - CLAMP)?;
    let log_s = g.log(sc)?;
    let neg = g.scale(sc, -1.0)?;
    let one_minus = g.add_scalar(neg, 1.0)?;
    let log_1s = g.log(one_minus)?;
    let t = g.constant(Tensor::matrix(p, 1, target.to_vec())?);
    let not_t = g.constant(Tensor::matrix(p, 1, target.iter().map(|v| 1.0 - v).collect())?);
    let a = g.mul(t, log_s)?;
    let b = g.mul(not_t, log_1s)?;
    let sum = g.add(a, b)?;
    let total = g.sum_all(sum)?;
    Ok(g.scale(total, -1.0 / p as f64)?)
}

/// Hinge over each positive pair and the highest-scoring negative in its row,
/// averaged over positives. Rows without negatives contribute zero.
pub fn contrastive_loss(
    sess: &mut Session<'_>,
    s: Value,
    pairs: &[(usize, usize)],
    target: &[f64],
    margin: f64,
    form: ContrastiveForm,
) -> Result<Value> {
    let n_pos = target.iter().filter(|&&t| t > 0.5).count();
    if n_pos == 0 {
        return Err(CoreError::EmptyTruth);
    }
    let scores = sess.value(s).data().to_vec();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (p, &(i, _)) in pairs.iter().enumerate() {
        if target[p] <= 0.5 {
            continue;
        }
        let hardest = pairs
            .iter()
            .enumerate()
            .filter(|&(q, &(r, _))| r == i && target[q] <= 0.5)
            .max_by(|a, b| scores[a.0].total_cmp(&scores[b.0]).then(b.0.cmp(&a.0)))
            .map(|(q, _)| q);
        if let Some(q) = hardest {
            pos.push(p);
            neg.push(q);
        }
    }
    let g = &mut sess.graph;
    if pos.is_empty() {
        let zero = g.scale(s, 0.0)?;
        let z = g.sum_all(zero)?;
        return Ok(z);
    }
    let sp = g.gather_rows(s, &pos)?;
    let sn = g.gather_rows(s, &neg)?;
    let diff = match form {
        ContrastiveForm::Margin => g.sub(sn, sp)?,
        ContrastiveForm::Literal => g.sub(sp, sn)?,
    };
    let shifted = g.add_scalar(diff, margin)?;
    let hinge = g.relu(shifted)?;
    let total = g.sum_all(hinge)?;
    Ok(g.scale(total, 1.0 / n_pos as f64)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub margin: f64,
    pub form: ContrastiveForm,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            gamma1: 1.0,
            gamma2: 0.5,
            margin: 0.2,
            form: ContrastiveForm::Margin,
        }
    }
}

/// `γ₁ · matching + γ₂ · contrastive`.
pub fn total_loss(
    sess: &mut Session<'_>,
    s: Value,
    pairs: &[(usize, usize)],
    target: &[f64],
    w: &LossWeights,
) -> Result<Value> {
    let lm = matching_loss(sess, s, target)?;
    let lc = contrastive_loss(sess, s, pairs, target, w.margin, w.form)?;
    let a = sess.graph.scale(lm, w.gamma1)?;
    let b = sess.graph.scale(lc, w.gamma2)?;
    Ok(sess.graph.add(a, b)?)
}
