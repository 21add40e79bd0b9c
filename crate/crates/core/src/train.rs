//! Forward pass over a window, training loop and evaluation.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use mva_diff::{AdamConfig, DiffError, ParamStore, Session};

use crate::dataset::Window;
use crate::error::{CoreError, Result};
use crate::fusion::{score_pairs, PairScores, SimilarityMatrix};
use crate::loss::{total_loss, ContrastiveForm, LossWeights};
use crate::matching::{match_similarity, MatchingMatrix};
use crate::metrics::accuracy;
use crate::net::{init_params, Extractor, NetConfig};

pub const TAU_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub margin: f64,
    pub contrastive_form: ContrastiveForm,
    pub clip_norm: f64,
    pub seed: u64,
    pub val_fraction: f64,
    /// Threshold candidates searched on the validation windows.
    pub tau_grid: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            lr: 1e-4,
            gamma1: 1.0,
            gamma2: 0.5,
            margin: 0.2,
            contrastive_form: ContrastiveForm::Margin,
            clip_norm: 5.0,
            seed: 0,
            val_fraction: 0.2,
            tau_grid: TAU_GRID.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if !(self.gamma1 >= 0.0 && self.gamma2 >= 0.0) {
            return bad("loss weights must be non-negative");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.lr >= 0.0) || !(self.clip_norm > 0.0) {
            return bad("lr must be >= 0 and clip_norm > 0");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return bad("val_fraction must lie in [0, 1)");
        }
        if self.tau_grid.is_empty() || self.tau_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("tau grid must be non-empty with values in [0, 1]");
        }
        Ok(())
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            margin: self.margin,
            form: self.contrastive_form,
        }
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            clip_norm: self.clip_norm,
            ..AdamConfig::default()
        }
    }
}

/// Features of both modalities and the scores of every valid pair.
pub fn forward(sess: &mut Session<'_>, net: &NetConfig, w: &Window) -> Result<PairScores> {
    let mut ex = Extractor::new(net);
    let fa = ex.extract(sess, &w.a, &w.ctx_a)?;
    let fb = ex.extract(sess, &w.b, &w.ctx_b)?;
    score_pairs(sess, net, &fa, &fb, &w.a, &w.b)
}

/// Similarity matrix of a window; all zeros when no pair can be scored.
pub fn similarity(store: &ParamStore, net: &NetConfig, w: &Window) -> Result<SimilarityMatrix> {
    let mut sess = Session::new(store);
    match forward(&mut sess, net, w) {
        Ok(p) => Ok(p.to_matrix(&sess)),
        Err(CoreError::NoValidPairs) => Ok(SimilarityMatrix::empty(w.a.valid_targets(), w.b.valid_targets())),
        Err(e) => Err(e),
    }
}

/// Thresholded matching of one window.
pub fn associate(store: &ParamStore, net: &NetConfig, w: &Window, tau: f64) -> Result<(SimilarityMatrix, MatchingMatrix)> {
    let sim = similarity(store, net, w)?;
    let m = match_similarity(&sim, tau);
    Ok((sim, m))
}

/// Window accuracy of a matching; `None` when the window has no truth.
pub fn window_accuracy(w: &Window, m: &MatchingMatrix) -> Option<f64> {
    if w.truth.is_empty() {
        return None;
    }
    let pred: Vec<(String, String)> = m
        .pairs
        .iter()
        .filter_map(|&(i, j)| Some((w.a.id(i)?.to_string(), w.b.id(j)?.to_string())))
        .collect();
    accuracy(&pred, &w.truth).ok()
}

/// Mean window accuracy over windows with truth; `None` if there are none.
pub fn mean_accuracy(accs: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = accs.into_iter().flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean accuracy of the model at threshold `tau`.
pub fn evaluate(store: &ParamStore, net: &NetConfig, windows: &[&Window], tau: f64) -> Result<Option<f64>> {
    let mut accs = Vec::with_capacity(windows.len());
    for w in windows {
        let (_, m) = associate(store, net, w, tau)?;
        accs.push(window_accuracy(w, &m));
    }
    Ok(mean_accuracy(accs))
}

fn window_loss(
    sess: &mut Session<'_>,
    net: &NetConfig,
    w: &Window,
    lw: &LossWeights,
) -> Result<Option<(mva_diff::Value, PairScores)>> {
    let scores = match forward(sess, net, w) {
        Ok(s) => s,
        Err(CoreError::NoValidPairs) => return Ok(None),
        Err(e) => return Err(e),
    };
    let target = w.pair_targets(&scores.pairs);
    if !target.iter().any(|&t| t > 0.5) {
        return Ok(None);
    }
    let loss = total_loss(sess, scores.s, &scores.pairs, &target, lw)?;
    Ok(Some((loss, scores)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_params: ParamStore,
    pub best_params: ParamStore,
    pub best_epoch: usize,
    pub best_tau: f64,
    pub history: Vec<EpochRecord>,
    pub train_windows: Vec<usize>,
    pub val_windows: Vec<usize>,
}

/// Seeded split of window positions into `(train, validation)`.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED));
    let n_val = if n >= 2 && val_fraction > 0.0 {
        ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1)
    } else {
        0
    };
    let mut val = idx.split_off(n - n_val);
    idx.sort_unstable();
    val.sort_unstable();
    (idx, val)
}

/// Validation loss, plus the best accuracy over the threshold grid.
fn validate(store: &ParamStore, net: &NetConfig, windows: &[&Window], cfg: &TrainConfig) -> Result<(f64, f64, f64)> {
    let lw = cfg.loss_weights();
    let mut losses = Vec::new();
    let mut sims = Vec::new();
    for w in windows {
        let mut sess = Session::new(store);
        if let Some((l, scores)) = window_loss(&mut sess, net, w, &lw)? {
            losses.push(sess.value(l).item());
            sims.push((*w, scores.to_matrix(&sess)));
        }
    }
    let val_loss = if losses.is_empty() {
        f64::NAN
    } else {
        losses.iter().sum::<f64>() / losses.len() as f64
    };
    let mut best = (f64::NEG_INFINITY, cfg.tau_grid[0]);
    for &tau in &cfg.tau_grid {
        let acc = mean_accuracy(sims.iter().map(|(w, s)| window_accuracy(w, &match_similarity(s, tau)))).unwrap_or(0.0);
        if acc > best.0 {
            best = (acc, tau);
        }
    }
    Ok((val_loss, best.0.max(0.0), best.1))
}

fn diverged(epoch: usize, window: usize, e: CoreError) -> CoreError {
    match e {
        CoreError::Diff(source) => CoreError::Diverged { epoch, window, source },
        other => other,
    }
}

/// Trains on the windows that carry truth. Validation windows are held out
/// and drive threshold selection and the best-epoch checkpoint (highest
/// accuracy, then lowest loss).
pub fn train(windows: &[Window], cfg: &TrainConfig, net: &NetConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.validate()?;
    let labeled: Vec<&Window> = windows.iter().filter(|w| !w.truth.is_empty()).collect();
    if labeled.is_empty() {
        return Err(CoreError::EmptyTruth);
    }
    let (tr_idx, val_idx) = split_indices(labeled.len(), cfg.val_fraction, cfg.seed);
    let train_set: Vec<&Window> = tr_idx.iter().map(|&i| labeled[i]).collect();
    let val_set: Vec<&Window> = if val_idx.is_empty() {
        train_set.clone()
    } else {
        val_idx.iter().map(|&i| labeled[i]).collect()
    };
    let mut store = init_params(net, cfg.seed)?;
    let adam = cfg.adam();
    let lw = cfg.loss_weights();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, f64, ParamStore)> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &pos in &order {
            let w = train_set[pos];
            let grads = {
                let mut sess = Session::new(&store);
                let Some((loss, _)) = window_loss(&mut sess, net, w, &lw).map_err(|e| diverged(epoch, w.index, e))?
                else {
                    continue;
                };
                let l = sess.value(loss).item();
                if !l.is_finite() {
                    return Err(CoreError::Diverged {
                        epoch,
                        window: w.index,
                        source: DiffError::NonFinite { op: "loss" },
                    });
                }
                total += l;
                count += 1;
                sess.backward(loss).map_err(|e| diverged(epoch, w.index, e.into()))?;
                sess.into_grads()
            };
            store.zero_grad();
            store.accumulate(grads)?;
            store.adam_step(&adam);
        }
        let train_loss = if count == 0 { f64::NAN } else { total / count as f64 };
        let (val_loss, val_acc, tau) = validate(&store, net, &val_set, cfg).map_err(|e| diverged(epoch, 0, e))?;
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            tau,
        });
        let better = match &best {
            None => true,
            Some((acc, loss, ..)) => val_acc > *acc || (val_acc == *acc && val_loss < *loss),
        };
        if better {
            best = Some((val_acc, val_loss, epoch, tau, store.clone()));
        }
    }
    let (best_epoch, best_tau, best_params) = match best {
        Some((_, _, e, t, p)) => (e, t, p),
        None => (0, 0.5, store.clone()),
    };
    Ok(TrainOutcome {
        final_params: store,
        best_params,
        best_epoch,
        best_tau,
        history,
        train_windows: tr_idx.iter().map(|&i| labeled[i].index).collect(),
        val_windows: val_idx.iter().map(|&i| labeled[i].index).collect(),
    })
}

/// `epoch,train_loss,val_loss,val_acc` rows.
pub fn write_history_csv(mut w: impl Write, history: &[EpochRecord]) -> Result<()> {
    writeln!(w, "epoch,train_loss,val_loss,val_acc")?;
    for r in history {
        writeln!(w, "{},{},{},{}", r.epoch, r.train_loss, r.val_loss, r.val_acc)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (a, b) = split_indices(10, 0.2, 3);
        assert_eq!((a.len(), b.len()), (8, 2));
        assert!(b.iter().all(|i| !a.contains(i)));
        assert_eq!(split_indices(10, 0.2, 3), (a, b));
        assert_eq!(split_indices(1, 0.2, 3), (vec![0], vec![]));
    }

    #[test]
    fn history_csv_header() {
        let mut out = Vec::new();
        let rec = EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_loss: 0.25,
            val_acc: 100.0,
            tau: 0.5,
        };
        write_history_csv(&mut out, &[rec]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,train_loss,val_loss,val_acc\n1,0.5,0.25,100\n");
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = TrainConfig {
            margin: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
