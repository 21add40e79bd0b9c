//! Pairwise feature fusion and uncertainty-weighted similarity scores.

use mva_diff::{Session, Tensor, Value};

use crate::error::{CoreError, Result};
use crate::net::{NetConfig, NodeFeatures, N_PHI};
use crate::trajectory::ObservationSet;

const LOGVAR_RANGE: (f64, f64) = (-10.0, 10.0);
const MIN_SPEED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFeatures {
    pub distance: f64,
    /// `(‖v̄_i − v̄_j‖, cos∠(v̄_i, v̄_j))`
    pub phi: [f64; N_PHI],
}

impl GeometricFeatures {
    pub fn as_row(&self) -> [f64; 1 + N_PHI] {
        [self.distance, self.phi[0], self.phi[1]]
    }
}

fn mean_position(obs: &ObservationSet, i: usize) -> Option<[f64; 2]> {
    let mut acc = [0.0, 0.0];
    let mut n = 0.0;
    for t in 0..obs.k() {
        if obs.observed(i, t) {
            let p = obs.coord(i, t);
            acc[0] += p[0];
            acc[1] += p[1];
            n += 1.0;
        }
    }
    (n > 0.0).then(|| [acc[0] / n, acc[1] / n])
}

/// Mean per-timestep velocity over successive valid observations; zero with
/// fewer than two observations.
pub fn mean_velocity(obs: &ObservationSet, i: usize) -> [f64; 2] {
    let mut prev: Option<(usize, [f64; 2])> = None;
    let mut acc = [0.0, 0.0];
    let mut n = 0.0;
    for t in 0..obs.k() {
        if !obs.observed(i, t) {
            continue;
        }
        let p = obs.coord(i, t);
        if let Some((s, q)) = prev {
            let dt = (t - s) as f64;
            acc[0] += (p[0] - q[0]) / dt;
            acc[1] += (p[1] - q[1]) / dt;
            n += 1.0;
        }
        prev = Some((t, p));
    }
    if n > 0.0 {
        [acc[0] / n, acc[1] / n]
    } else {
        [0.0, 0.0]
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Proximity and motion agreement of target `i` in `a` and target `j` in `b`.
pub fn geometric_features(a: &ObservationSet, b: &ObservationSet, i: usize, j: usize) -> Result<GeometricFeatures> {
    let ma = mean_position(a, i).ok_or(CoreError::EmptyTarget(i))?;
    let mb = mean_position(b, j).ok_or(CoreError::EmptyTarget(j))?;
    let k = a.k().min(b.k());
    let co: Vec<f64> = (0..k)
        .filter(|&t| a.observed(i, t) && b.observed(j, t))
        .map(|t| dist(a.coord(i, t), b.coord(j, t)))
        .collect();
    let distance = if co.is_empty() {
        dist(ma, mb)
    } else {
        co.iter().sum::<f64>() / co.len() as f64
    };
    let (va, vb) = (mean_velocity(a, i), mean_velocity(b, j));
    let diff = dist(va, vb);
    let (sa, sb) = (va[0].hypot(va[1]), vb[0].hypot(vb[1]));
    let cos = if sa < MIN_SPEED || sb < MIN_SPEED {
        0.0
    } else {
        ((va[0] * vb[0] + va[1] * vb[1]) / (sa * sb)).clamp(-1.0, 1.0)
    };
    Ok(GeometricFeatures {
        distance,
        phi: [diff, cos],
    })
}

fn target_rows(feats: &NodeFeatures, obs: &ObservationSet, target: usize) -> Vec<bool> {
    (0..feats.n_targets * feats.k)
        .map(|r| r / feats.k == target && obs.observed(target, r % feats.k))
        .collect()
}

/// Mean of the target's valid node rows, `1 × d`.
pub fn pool_target(sess: &mut Session<'_>, feats: &NodeFeatures, obs: &ObservationSet, target: usize) -> Result<Value> {
    let mask = target_rows(feats, obs, target);
    if !mask.iter().any(|&m| m) {
        return Err(CoreError::EmptyTarget(target));
    }
    Ok(sess.graph.mean_rows(feats.values, &mask)?)
}

/// All targets pooled at once, `n_targets × d`; fully invalid targets give
/// zero rows.
pub fn pool_targets(sess: &mut Session<'_>, feats: &NodeFeatures, obs: &ObservationSet) -> Result<Value> {
    let (n, k) = (feats.n_targets, feats.k);
    let mut p = Tensor::zeros(&[n, n * k]);
    for i in 0..n {
        let count = (0..k).filter(|&t| obs.observed(i, t)).count();
        for t in 0..k {
            if obs.observed(i, t) {
                p.set(i, i * k + t, 1.0 / count as f64);
            }
        }
    }
    let p = sess.constant(p);
    Ok(sess.graph.matmul(p, feats.values)?)
}

fn head_output(sess: &mut Session<'_>, z0: Value, head: &str) -> Result<Value> {
    let b0 = sess.param(&format!("ufm.{head}.b0"))?;
    let mut z = sess.graph.add_row(z0, b0)?;
    z = sess.graph.relu(z)?;
    for layer in 1..3 {
        let w = sess.param(&format!("ufm.{head}.w{layer}"))?;
        let b = sess.param(&format!("ufm.{head}.b{layer}"))?;
        z = sess.graph.matmul(z, w)?;
        z = sess.graph.add_row(z, b)?;
        if layer < 2 {
            z = sess.graph.relu(z)?;
        }
    }
    Ok(z)
}

/// `sigmoid(μ · exp(−clamp(logvar)))` from raw head outputs.
fn combine(sess: &mut Session<'_>, mu: Value, logvar_raw: Value) -> Result<(Value, Value)> {
    let lv = sess.graph.clamp(logvar_raw, LOGVAR_RANGE.0, LOGVAR_RANGE.1)?;
    let neg = sess.graph.scale(lv, -1.0)?;
    let inv_var = sess.graph.exp(neg)?;
    let z = sess.graph.mul(mu, inv_var)?;
    Ok((lv, sess.graph.sigmoid(z)?))
}

/// Explicit joint feature `[h_i^A ‖ h_j^B ‖ d_ij ‖ φ_ij]`, `1 × (2d + 3)`.
pub fn pair_features(sess: &mut Session<'_>, ha: Value, hb: Value, geo: &GeometricFeatures) -> Result<Value> {
    let g = sess.constant(Tensor::matrix(1, 1 + N_PHI, geo.as_row().to_vec())?);
    Ok(sess.graph.concat_cols(&[ha, hb, g])?)
}

/// Scores a batch of joint features (`P × (2d + 3)`); returns `(μ, logvar, s)`,
/// each `P × 1`.
pub fn ufm_score(sess: &mut Session<'_>, f: Value) -> Result<(Value, Value, Value)> {
    let mut heads = Vec::with_capacity(2);
    for head in ["mu", "lv"] {
        let w0 = sess.param(&format!("ufm.{head}.w0"))?;
        let z0 = sess.graph.matmul(f, w0)?;
        heads.push(head_output(sess, z0, head)?);
    }
    let (lv, s) = combine(sess, heads[0], heads[1])?;
    Ok((heads[0], lv, s))
}

/// Scores of every valid `(i, j)` pair inside a session.
#[derive(Debug, Clone)]
pub struct PairScores {
    pub pairs: Vec<(usize, usize)>,
    pub mu: Value,
    pub logvar: Value,
    pub s: Value,
    pub n_rows: usize,
    pub n_cols: usize,
    pub valid_rows: Vec<bool>,
    pub valid_cols: Vec<bool>,
}

/// Batched similarity scores. The first MLP layer is applied to each pooled
/// target once and the per-pair pieces are summed, which equals applying it
/// to the concatenated joint feature.
pub fn score_pairs(
    sess: &mut Session<'_>,
    cfg: &NetConfig,
    feat_a: &NodeFeatures,
    feat_b: &NodeFeatures,
    obs_a: &ObservationSet,
    obs_b: &ObservationSet,
) -> Result<PairScores> {
    let d = cfg.d;
    let valid_rows = obs_a.valid_targets();
    let valid_cols = obs_b.valid_targets();
    let mut pairs = Vec::new();
    let mut geo = Vec::new();
    for (i, _) in valid_rows.iter().enumerate().filter(|(_, &v)| v) {
        for (j, _) in valid_cols.iter().enumerate().filter(|(_, &v)| v) {
            pairs.push((i, j));
            geo.extend(geometric_features(obs_a, obs_b, i, j)?.as_row());
        }
    }
    if pairs.is_empty() {
        return Err(CoreError::NoValidPairs);
    }
    let pa = pool_targets(sess, feat_a, obs_a)?;
    let pb = pool_targets(sess, feat_b, obs_b)?;
    let geo = sess.constant(Tensor::matrix(pairs.len(), 1 + N_PHI, geo)?);
    let rows_a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let rows_b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
    let idx_a: Vec<usize> = (0..d).collect();
    let idx_b: Vec<usize> = (d..2 * d).collect();
    let idx_g: Vec<usize> = (2 * d..2 * d + 1 + N_PHI).collect();

    let mut heads = Vec::with_capacity(2);
    for head in ["mu", "lv"] {
        let w0 = sess.param(&format!("ufm.{head}.w0"))?;
        let wa = sess.graph.gather_rows(w0, &idx_a)?;
        let wb = sess.graph.gather_rows(w0, &idx_b)?;
        let wg = sess.graph.gather_rows(w0, &idx_g)?;
        let za = sess.graph.matmul(pa, wa)?;
        let zb = sess.graph.matmul(pb, wb)?;
        let za = sess.graph.gather_rows(za, &rows_a)?;
        let zb = sess.graph.gather_rows(zb, &rows_b)?;
        let zg = sess.graph.matmul(geo, wg)?;
        let z = sess.graph.add(za, zb)?;
        let z = sess.graph.add(z, zg)?;
        heads.push(head_output(sess, z, head)?);
    }
    let (logvar, s) = combine(sess, heads[0], heads[1])?;
    Ok(PairScores {
        pairs,
        mu: heads[0],
        logvar,
        s,
        n_rows: obs_a.n(),
        n_cols: obs_b.n(),
        valid_rows,
        valid_cols,
    })
}

/// Dense `N_A × N_B` similarity matrix; padded entries hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub scores: Vec<f64>,
    pub mu: Vec<f64>,
    pub logvar: Vec<f64>,
    pub valid_rows: Vec<bool>,
    pub valid_cols: Vec<bool>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * self.n_cols + j]
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid_rows[i] && self.valid_cols[j]
    }

    /// All-zero matrix for windows without a valid pair.
    pub fn empty(valid_rows: Vec<bool>, valid_cols: Vec<bool>) -> Self {
        let (n, m) = (valid_rows.len(), valid_cols.len());
        Self {
            n_rows: n,
            n_cols: m,
            scores: vec![0.0; n * m],
            mu: vec![0.0; n * m],
            logvar: vec![0.0; n * m],
            valid_rows,
            valid_cols,
        }
    }
}

impl PairScores {
    pub fn to_matrix(&self, sess: &Session<'_>) -> SimilarityMatrix {
        let mut m = SimilarityMatrix::empty(self.valid_rows.clone(), self.valid_cols.clone());
        let (s, mu, lv) = (sess.value(self.s), sess.value(self.mu), sess.value(self.logvar));
        for (p, &(i, j)) in self.pairs.iter().enumerate() {
            let at = i * self.n_cols + j;
            m.scores[at] = s.data()[p];
            m.mu[at] = mu.data()[p];
            m.logvar[at] = lv.data()[p];
        }
        m
    }
}
