//! Graph-attention feature extractor.
//!
//! `embed → TGA layers → (temporal attention ∥ spatial attention) → FFN fusion`.
//! All learnable matrices are stored `in × out` and applied to row vectors.

use serde::{Deserialize, Serialize};

use mva_diff::{ParamStore, Session, Tensor, Value};

use crate::error::{CoreError, Result};
use crate::graph::{GraphOptions, TemporalGraph};
use crate::trajectory::ObservationSet;

/// Hidden widths of the two scoring MLPs.
pub const UFM_HIDDEN: [usize; 2] = [128, 64];
/// Number of behavioral pair features (speed difference, heading cosine).
pub const N_PHI: usize = 2;
/// Width of the embedding input: x, y, sin 2πτ, cos 2πτ.
const EMBED_IN: usize = 4;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpatialScore {
    /// `(W_q h_i)ᵀ (W_k h_j) / √d`
    Dot,
    /// `vᵀ tanh(W_q h_i + W_k h_j)`
    Additive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetConfig {
    pub d: usize,
    pub heads: usize,
    pub tga_layers: usize,
    pub ffn_hidden: usize,
    pub spatial_k: usize,
    pub same_target_only: bool,
    pub use_tga: bool,
    pub use_sta: bool,
    pub spatial_score: SpatialScore,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            d: 64,
            heads: 4,
            tga_layers: 2,
            ffn_hidden: 128,
            spatial_k: 8,
            same_target_only: false,
            use_tga: true,
            use_sta: true,
            spatial_score: SpatialScore::Dot,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.heads == 0 || self.d % self.heads != 0 {
            return Err(CoreError::Config(format!(
                "feature dimension {} must be a positive multiple of the head count {}",
                self.d, self.heads
            )));
        }
        if !self.use_tga && !self.use_sta {
            return Err(CoreError::Config(
                "at least one of the TGA layers and the STA block must be enabled".into(),
            ));
        }
        if self.use_tga && self.tga_layers == 0 {
            return Err(CoreError::Config("TGA enabled with zero layers".into()));
        }
        if self.ffn_hidden == 0 {
            return Err(CoreError::Config("ffn_hidden must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d / self.heads
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            spatial_k: self.spatial_k,
            same_target_only: self.same_target_only,
        }
    }

    /// Length of the joint pair feature `[h_a ‖ h_b ‖ d ‖ φ]`.
    pub fn pair_dim(&self) -> usize {
        2 * self.d + 1 + N_PHI
    }
}

/// Registers every parameter the configuration uses.
pub fn init_params(cfg: &NetConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let (d, dk) = (cfg.d, cfg.head_dim());
    let mut s = ParamStore::new(seed);
    s.init_weight("embed.w", EMBED_IN, d);
    s.init_zeros("embed.b", &[1, d]);
    if cfg.use_tga {
        for l in 0..cfg.tga_layers {
            for k in 0..cfg.heads {
                s.init_weight(&format!("tga.{l}.h{k}.wq"), d, dk);
                s.init_weight(&format!("tga.{l}.h{k}.wk"), d, dk);
                s.init_weight(&format!("tga.{l}.h{k}.w"), d, d);
            }
        }
    }
    if cfg.use_sta {
        for k in 0..cfg.heads {
            s.init_weight(&format!("sta.t.h{k}.wq"), d, dk);
            s.init_weight(&format!("sta.t.h{k}.wk"), d, dk);
            s.init_weight(&format!("sta.t.h{k}.wv"), d, dk);
        }
        s.init_weight("sta.t.wo", d, d);
        s.init_weight("sta.s.wq", d, d);
        s.init_weight("sta.s.wk", d, d);
        s.init_weight("sta.s.ws", d, d);
        if cfg.spatial_score == SpatialScore::Additive {
            s.init_weight("sta.s.v", d, 1);
        }
        s.init_ones("sta.s.ln.g", &[1, d]);
        s.init_zeros("sta.s.ln.b", &[1, d]);
        s.init_ones("sta.f.ln.g", &[1, 2 * d]);
        s.init_zeros("sta.f.ln.b", &[1, 2 * d]);
        s.init_weight("sta.f.w1", 2 * d, cfg.ffn_hidden);
        s.init_zeros("sta.f.b1", &[1, cfg.ffn_hidden]);
        s.init_weight("sta.f.w2", cfg.ffn_hidden, d);
        s.init_zeros("sta.f.b2", &[1, d]);
    }
    for head in ["mu", "lv"] {
        let widths = [cfg.pair_dim(), UFM_HIDDEN[0], UFM_HIDDEN[1], 1];
        for (layer, w) in widths.windows(2).enumerate() {
            s.init_weight(&format!("ufm.{head}.w{layer}"), w[0], w[1]);
            s.init_zeros(&format!("ufm.{head}.b{layer}"), &[1, w[1]]);
        }
    }
    Ok(s)
}

/// Per-node features of one graph, one row per `(target, time)` slot.
#[derive(Debug, Clone, Copy)]
pub struct NodeFeatures {
    pub values: Value,
    pub n_targets: usize,
    pub k: usize,
}

impl NodeFeatures {
    pub fn node_index(&self, target: usize, time: usize) -> usize {
        target * self.k + time
    }

    fn with(&self, values: Value) -> Self {
        Self { values, ..*self }
    }
}

/// Dense masks derived from a graph.
#[derive(Debug, Clone)]
pub struct GraphContext {
    pub temporal: Vec<bool>,
    pub spatial: Vec<bool>,
    pub valid: Vec<bool>,
    pub n_targets: usize,
    pub k: usize,
}

impl GraphContext {
    pub fn new(g: &TemporalGraph) -> Self {
        let k = g.k();
        Self {
            temporal: g.temporal_mask(),
            spatial: g.spatial_mask(),
            valid: g.valid_mask(),
            n_targets: if k == 0 { 0 } else { g.num_nodes() / k },
            k,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.valid.len()
    }

    fn row_mask(&self, sess: &mut Session<'_>, width: usize) -> Value {
        let data = self
            .valid
            .iter()
            .flat_map(|&v| std::iter::repeat(if v { 1.0 } else { 0.0 }).take(width))
            .collect();
        sess.constant(Tensor::matrix(self.num_nodes(), width, data).expect("mask shape"))
    }
}

/// Runs the feature extractor, optionally keeping attention weight matrices
/// for inspection.
pub struct Extractor<'c> {
    pub cfg: &'c NetConfig,
    pub record_attention: bool,
    /// Row-stochastic attention matrices (`num_nodes × num_nodes`) in
    /// evaluation order, when recording.
    pub attention: Vec<Value>,
}

impl<'c> Extractor<'c> {
    pub fn new(cfg: &'c NetConfig) -> Self {
        Self {
            cfg,
            record_attention: false,
            attention: Vec::new(),
        }
    }

    pub fn recording(cfg: &'c NetConfig) -> Self {
        Self {
            record_attention: true,
            ..Self::new(cfg)
        }
    }

    fn log(&mut self, a: Value) {
        if self.record_attention {
            self.attention.push(a);
        }
    }

    /// `W_e·(x, y, sin 2πτ, cos 2πτ) + b_e` per valid node, `τ = t/k`.
    pub fn embed(&mut self, sess: &mut Session<'_>, obs: &ObservationSet, ctx: &GraphContext) -> Result<NodeFeatures> {
        let (n, k) = (obs.n(), obs.k());
        let mut input = Tensor::zeros(&[n * k, EMBED_IN]);
        for i in 0..n {
            for t in 0..k {
                if obs.observed(i, t) {
                    let [x, y] = obs.coord(i, t);
                    let phase = std::f64::consts::TAU * t as f64 / k as f64;
                    input.row_mut(i * k + t).copy_from_slice(&[x, y, phase.sin(), phase.cos()]);
                }
            }
        }
        let x = sess.constant(input);
        let w = sess.param("embed.w")?;
        let b = sess.param("embed.b")?;
        let h = sess.graph.matmul(x, w)?;
        let h = sess.graph.add_row(h, b)?;
        let mask = ctx.row_mask(sess, self.cfg.d);
        let h = sess.graph.mul(h, mask)?;
        Ok(NodeFeatures {
            values: h,
            n_targets: n,
            k,
        })
    }

    /// Masked scaled dot-product attention weights `softmax(Q Kᵀ / √scale)`.
    fn attention_weights(
        &mut self,
        sess: &mut Session<'_>,
        h: Value,
        wq: &str,
        wk: &str,
        scale: usize,
        mask: &[bool],
    ) -> Result<Value> {
        let wq = sess.param(wq)?;
        let wk = sess.param(wk)?;
        let q = sess.graph.matmul(h, wq)?;
        let key = sess.graph.matmul(h, wk)?;
        let kt = sess.graph.transpose(key)?;
        let logits = sess.graph.matmul(q, kt)?;
        let logits = sess.graph.scale(logits, 1.0 / (scale as f64).sqrt())?;
        let a = sess.graph.masked_softmax_rows(logits, mask)?;
        self.log(a);
        Ok(a)
    }

    /// `ReLU((1/K) Σ_k Σ_{j∈𝒯(i)} β_ij^k W^k h_j)`.
    pub fn tga_layer(
        &mut self,
        sess: &mut Session<'_>,
        ctx: &GraphContext,
        h: NodeFeatures,
        layer: usize,
    ) -> Result<NodeFeatures> {
        let cfg = self.cfg;
        let mut acc: Option<Value> = None;
        for k in 0..cfg.heads {
            let beta = self.attention_weights(
                sess,
                h.values,
                &format!("tga.{layer}.h{k}.wq"),
                &format!("tga.{layer}.h{k}.wk"),
                cfg.head_dim(),
                &ctx.temporal,
            )?;
            let w = sess.param(&format!("tga.{layer}.h{k}.w"))?;
            let v = sess.graph.matmul(h.values, w)?;
            let head = sess.graph.matmul(beta, v)?;
            acc = Some(match acc {
                None => head,
                Some(a) => sess.graph.add(a, head)?,
            });
        }
        let mean = sess.graph.scale(acc.expect("at least one head"), 1.0 / cfg.heads as f64)?;
        Ok(h.with(sess.graph.relu(mean)?))
    }

    /// Multi-head temporal attention, heads concatenated and projected by `W_O`.
    pub fn sta_temporal(&mut self, sess: &mut Session<'_>, ctx: &GraphContext, h: NodeFeatures) -> Result<NodeFeatures> {
        let cfg = self.cfg;
        let mut heads = Vec::with_capacity(cfg.heads);
        for k in 0..cfg.heads {
            let beta = self.attention_weights(
                sess,
                h.values,
                &format!("sta.t.h{k}.wq"),
                &format!("sta.t.h{k}.wk"),
                cfg.head_dim(),
                &ctx.temporal,
            )?;
            let wv = sess.param(&format!("sta.t.h{k}.wv"))?;
            let v = sess.graph.matmul(h.values, wv)?;
            heads.push(sess.graph.matmul(beta, v)?);
        }
        let cat = sess.graph.concat_cols(&heads)?;
        let wo = sess.param("sta.t.wo")?;
        Ok(h.with(sess.graph.matmul(cat, wo)?))
    }

    /// `LN(Σ_{j∈𝒩(i)} α_ij W_s h_j + h_i)`; nodes without neighbors get `LN(h_i)`.
    pub fn sta_spatial(&mut self, sess: &mut Session<'_>, ctx: &GraphContext, h: NodeFeatures) -> Result<NodeFeatures> {
        let cfg = self.cfg;
        let alpha = match cfg.spatial_score {
            SpatialScore::Dot => self.attention_weights(sess, h.values, "sta.s.wq", "sta.s.wk", cfg.d, &ctx.spatial)?,
            SpatialScore::Additive => {
                let wq = sess.param("sta.s.wq")?;
                let wk = sess.param("sta.s.wk")?;
                let v = sess.param("sta.s.v")?;
                let q = sess.graph.matmul(h.values, wq)?;
                let key = sess.graph.matmul(h.values, wk)?;
                let logits = sess.graph.additive_scores(q, key, v)?;
                let a = sess.graph.masked_softmax_rows(logits, &ctx.spatial)?;
                self.log(a);
                a
            }
        };
        let ws = sess.param("sta.s.ws")?;
        let msg = sess.graph.matmul(h.values, ws)?;
        let agg = sess.graph.matmul(alpha, msg)?;
        let pre = sess.graph.add(agg, h.values)?;
        let g = sess.param("sta.s.ln.g")?;
        let b = sess.param("sta.s.ln.b")?;
        let out = sess.graph.layer_norm(pre, g, b, LN_EPS)?;
        let mask = ctx.row_mask(sess, cfg.d);
        Ok(h.with(sess.graph.mul(out, mask)?))
    }

    /// `FFN(LN([h_t ‖ h_s])) + h_t + h_s` with `FFN(x) = W₂ ReLU(W₁x + b₁) + b₂`.
    pub fn sta_fuse(
        &mut self,
        sess: &mut Session<'_>,
        ctx: &GraphContext,
        ht: NodeFeatures,
        hs: NodeFeatures,
    ) -> Result<NodeFeatures> {
        let cat = sess.graph.concat_cols(&[ht.values, hs.values])?;
        let g = sess.param("sta.f.ln.g")?;
        let b = sess.param("sta.f.ln.b")?;
        let x = sess.graph.layer_norm(cat, g, b, LN_EPS)?;
        let w1 = sess.param("sta.f.w1")?;
        let b1 = sess.param("sta.f.b1")?;
        let w2 = sess.param("sta.f.w2")?;
        let b2 = sess.param("sta.f.b2")?;
        let z = sess.graph.matmul(x, w1)?;
        let z = sess.graph.add_row(z, b1)?;
        let z = sess.graph.relu(z)?;
        let z = sess.graph.matmul(z, w2)?;
        let z = sess.graph.add_row(z, b2)?;
        let res = sess.graph.add(ht.values, hs.values)?;
        let out = sess.graph.add(z, res)?;
        let mask = ctx.row_mask(sess, self.cfg.d);
        Ok(ht.with(sess.graph.mul(out, mask)?))
    }

    /// Full extractor honoring the ablation switches.
    pub fn extract(&mut self, sess: &mut Session<'_>, obs: &ObservationSet, ctx: &GraphContext) -> Result<NodeFeatures> {
        self.cfg.validate()?;
        let mut h = self.embed(sess, obs, ctx)?;
        if self.cfg.use_tga {
            for l in 0..self.cfg.tga_layers {
                h = self.tga_layer(sess, ctx, h, l)?;
            }
        }
        if self.cfg.use_sta {
            let ht = self.sta_temporal(sess, ctx, h)?;
            let hs = self.sta_spatial(sess, ctx, h)?;
            h = self.sta_fuse(sess, ctx, ht, hs)?;
        }
        Ok(h)
    }
}

/// Convenience wrapper: features of one observation set.
pub fn extract_features(
    sess: &mut Session<'_>,
    obs: &ObservationSet,
    ctx: &GraphContext,
    cfg: &NetConfig,
) -> Result<NodeFeatures> {
    Extractor::new(cfg).extract(sess, obs, ctx)
}
