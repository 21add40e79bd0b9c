//! Method routing and per-scenario evaluation shared by the subcommands.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use mva_core::baselines::{baseline_match, cost_matrix, BaselineMethod};
use mva_core::dataset::{prepare, Window, WindowConfig};
use mva_core::graph::GraphOptions;
use mva_core::matching::{MatchingMatrix, WindowMatching};
use mva_core::net::NetConfig;
use mva_core::sim::{simulate, ScenarioSpec};
use mva_core::train::{associate, mean_accuracy, window_accuracy};
use mva_diff::ParamStore;

use crate::config::ModelMeta;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Model,
    Baseline(BaselineMethod),
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Model,
        Method::Baseline(BaselineMethod::Ed),
        Method::Baseline(BaselineMethod::Cd),
        Method::Baseline(BaselineMethod::Dtw),
        Method::Baseline(BaselineMethod::Pdf),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Model => "gmva",
            Method::Baseline(b) => b.name(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown method {s:?} (gmva, ed, cd, dtw, pdf)"))
    }
}

/// A trained network with its sidecar metadata.
#[derive(Debug, Clone)]
pub struct Model {
    pub store: ParamStore,
    pub meta: ModelMeta,
}

impl Model {
    pub fn net(&self) -> &NetConfig {
        &self.meta.net
    }
}

/// Matching of one window and a reporting score per matched pair
/// (similarity for the model, negated cost for baselines).
pub fn match_window(method: Method, model: Option<&Model>, w: &Window, tau: f64) -> Result<(MatchingMatrix, WindowMatching)> {
    match method {
        Method::Model => {
            let model = model.ok_or_else(|| CliError::Usage("the gmva method needs --checkpoint".into()))?;
            let (sim, m) = associate(&model.store, model.net(), w, tau)?;
            let json = WindowMatching::new(&m, &w.a, &w.b, |i, j| sim.get(i, j));
            Ok((m, json))
        }
        Method::Baseline(b) => {
            let m = baseline_match(&w.a, &w.b, b);
            let cost = cost_matrix(&w.a, &w.b, b);
            let json = WindowMatching::new(&m, &w.a, &w.b, |i, j| -cost[i * w.b.n() + j]);
            Ok((m, json))
        }
    }
}

/// Mean window accuracy of a method over labeled windows.
pub fn evaluate(method: Method, model: Option<&Model>, windows: &[&Window], tau: f64) -> Result<Option<f64>> {
    let mut accs = Vec::with_capacity(windows.len());
    for w in windows {
        let (m, _) = match_window(method, model, w, tau)?;
        accs.push(window_accuracy(w, &m));
    }
    Ok(mean_accuracy(accs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario: String,
    pub method: String,
    pub density: String,
    pub missing: usize,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Simulates one scene and evaluates each method on its labeled windows.
/// Methods without any labeled window are left out.
pub fn run_cell(
    name: &str,
    density: &str,
    spec: &ScenarioSpec,
    methods: &[Method],
    model: Option<&Model>,
    window: &WindowConfig,
    graph: &GraphOptions,
    tau: f64,
) -> Result<Vec<CellResult>> {
    let sc = simulate(spec)?;
    let prepared = prepare(&sc, window, graph)?;
    let windows: Vec<&Window> = prepared.labeled().collect();
    let mut out = Vec::new();
    for &m in methods {
        let start = Instant::now();
        let acc = evaluate(m, model, &windows, tau)?;
        let seconds = start.elapsed().as_secs_f64();
        if let Some(accuracy) = acc {
            out.push(CellResult {
                scenario: name.to_string(),
                method: m.name().to_string(),
                density: density.to_string(),
                missing: spec.missing_targets,
                accuracy,
                seconds,
            });
        }
    }
    Ok(out)
}

/// Worker count from `MVA_THREADS`, defaulting to the available cores.
pub fn thread_count() -> usize {
    std::env::var("MVA_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` inside a pool capped by [`thread_count`].
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_parse() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("GMVA".parse::<Method>().is_ok());
        assert!("lstm".parse::<Method>().is_err());
    }
}
