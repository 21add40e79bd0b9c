//! Named learnable parameters, the Adam optimizer and forward-pass binding.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DiffError, Result};
use crate::graph::{Graph, Value};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Option<Tensor>,
    m: Tensor,
    v: Tensor,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            value,
            grad: None,
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient norm cap applied before the update.
    pub clip_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: 5.0,
        }
    }
}

/// Learnable parameters keyed by path. Iteration is sorted by path.
#[derive(Debug, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    rng_seed: u64,
    step: u64,
}

impl ParamStore {
    pub fn new(rng_seed: u64) -> Self {
        Self {
            params: BTreeMap::new(),
            rng_seed,
            step: 0,
        }
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn contains(&self, path: &str) -> bool {
        self.params.contains_key(path)
    }

    pub fn get(&self, path: &str) -> Option<&Param> {
        self.params.get(path)
    }

    pub fn get_mut(&mut self, path: &str) -> Option<&mut Param> {
        self.params.get_mut(path)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Param)> {
        self.params.iter()
    }

    pub fn insert(&mut self, path: impl Into<String>, value: Tensor) {
        self.params.insert(path.into(), Param::new(value));
    }

    /// Registers a `fan_in × fan_out` weight drawn from
    /// `U(−√(1/fan_in), +√(1/fan_in))`. Each path gets its own stream derived
    /// from the store seed, so registration order does not matter.
    pub fn init_weight(&mut self, path: &str, fan_in: usize, fan_out: usize) {
        let bound = (1.0 / fan_in as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ path_hash(path));
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        let t = Tensor::matrix(fan_in, fan_out, data).expect("consistent shape");
        self.insert(path, t);
    }

    pub fn init_zeros(&mut self, path: &str, shape: &[usize]) {
        self.insert(path, Tensor::zeros(shape));
    }

    pub fn init_ones(&mut self, path: &str, shape: &[usize]) {
        self.insert(path, Tensor::ones(shape));
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.grad = None;
        }
    }

    /// Adds gradients collected by [`Session::into_grads`].
    pub fn accumulate(&mut self, grads: Vec<(String, Tensor)>) -> Result<()> {
        for (path, g) in grads {
            let p = self
                .params
                .get_mut(&path)
                .ok_or_else(|| DiffError::UnknownParam(path.clone()))?;
            match &mut p.grad {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .values()
            .filter_map(|p| p.grad.as_ref())
            .map(Tensor::norm_sq)
            .sum::<f64>()
            .sqrt()
    }

    /// Clips the global gradient norm to `cfg.clip_norm`, then applies one
    /// bias-corrected Adam update. Missing gradients count as zero.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        let norm = self.grad_norm();
        let clip = if norm > cfg.clip_norm && norm > 0.0 {
            cfg.clip_norm / norm
        } else {
            1.0
        };
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for p in self.params.values_mut() {
            let Param { value, grad, m, v } = p;
            let g = grad.as_ref();
            for i in 0..value.len() {
                let gi = g.map_or(0.0, |g| g.data()[i] * clip);
                let mi = cfg.beta1 * m.data()[i] + (1.0 - cfg.beta1) * gi;
                let vi = cfg.beta2 * v.data()[i] + (1.0 - cfg.beta2) * gi * gi;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let mhat = mi / c1;
                let vhat = vi / c2;
                value.data_mut()[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
        }
    }

    /// Bitwise equality of every parameter value.
    pub fn same_values(&self, other: &Self) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, a), (kb, b))| ka == kb && a.value == b.value)
    }
}

fn path_hash(path: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Binds store parameters into a [`Graph`] for one forward/backward pass.
/// Each parameter becomes a single leaf no matter how often it is used.
pub struct Session<'s> {
    pub graph: Graph,
    store: &'s ParamStore,
    bound: BTreeMap<String, Value>,
}

impl<'s> Session<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self {
            graph: Graph::new(),
            store,
            bound: BTreeMap::new(),
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
    }

    pub fn param(&mut self, path: &str) -> Result<Value> {
        if let Some(&v) = self.bound.get(path) {
            return Ok(v);
        }
        let p = self
            .store
            .get(path)
            .ok_or_else(|| DiffError::UnknownParam(path.to_string()))?;
        let v = self.graph.leaf(p.value.clone(), true);
        self.bound.insert(path.to_string(), v);
        Ok(v)
    }

    pub fn constant(&mut self, t: Tensor) -> Value {
        self.graph.constant(t)
    }

    pub fn value(&self, v: Value) -> &Tensor {
        self.graph.value(v)
    }

    pub fn backward(&mut self, loss: Value) -> Result<()> {
        self.graph.backward(loss)
    }

    /// Gradients of every bound parameter, sorted by path.
    pub fn into_grads(self) -> Vec<(String, Tensor)> {
        let Session { graph, bound, .. } = self;
        bound
            .into_iter()
            .filter_map(|(path, v)| graph.grad(v).map(|g| (path, g.clone())))
            .collect()
    }
}
