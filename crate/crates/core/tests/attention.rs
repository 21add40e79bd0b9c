//! Attention weights: normalization and agreement with direct loops.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mva_core::graph::{build_graph, temporal_neighbors, GraphOptions};
use mva_core::net::{init_params, Extractor, GraphContext, NetConfig};
use mva_diff::{Session, Tensor};

use common::random_obs;

fn small_cfg(rng: &mut ChaCha8Rng) -> NetConfig {
    NetConfig {
        d: 8,
        heads: 2,
        tga_layers: 2,
        ffn_hidden: 16,
        spatial_k: rng.gen_range(1..5),
        same_target_only: rng.gen_bool(0.3),
        ..NetConfig::default()
    }
}

fn randomize(store: &mut mva_diff::ParamStore, rng: &mut ChaCha8Rng) {
    let paths: Vec<String> = store.iter().map(|(p, _)| p.clone()).collect();
    for p in paths {
        let v = &mut store.get_mut(&p).unwrap().value;
        for x in v.data_mut() {
            *x = rng.gen_range(-0.8..0.8);
        }
    }
}

#[test]
fn every_neighborhood_sums_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    for _ in 0..100 {
        let cfg = small_cfg(&mut rng);
        let n = rng.gen_range(1..8);
        let k = rng.gen_range(2..7);
        let obs = random_obs(&mut rng, "a", n, k, 0.7);
        let g = build_graph(&obs, &cfg.graph_options());
        let ctx = GraphContext::new(&g);
        let store = init_params(&cfg, rng.gen()).unwrap();
        let mut sess = Session::new(&store);
        let mut ex = Extractor::recording(&cfg);
        ex.extract(&mut sess, &obs, &ctx).unwrap();
        let n_temporal = cfg.heads * (cfg.tga_layers + 1);
        assert_eq!(ex.attention.len(), n_temporal + 1);
        for (idx, &a) in ex.attention.iter().enumerate() {
            let mask = if idx < n_temporal { &ctx.temporal } else { &ctx.spatial };
            let t = sess.value(a);
            let nodes = t.rows();
            for r in 0..nodes {
                let row = t.row(r);
                let allowed = &mask[r * nodes..(r + 1) * nodes];
                let sum: f64 = row.iter().sum();
                if allowed.iter().any(|&m| m) {
                    assert!((sum - 1.0).abs() <= 1e-9, "row {r} sums to {sum}");
                    checked += 1;
                } else {
                    assert_eq!(sum, 0.0);
                }
                for (v, &m) in row.iter().zip(allowed) {
                    if !m {
                        assert_eq!(*v, 0.0);
                    }
                }
            }
        }
    }
    assert!(checked > 1000);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row vector times an `in × out` matrix.
fn vecmat(x: &[f64], w: &Tensor) -> Vec<f64> {
    (0..w.cols()).map(|c| (0..w.rows()).map(|r| x[r] * w.get(r, c)).sum()).collect()
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[test]
fn tga_layer_matches_direct_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let cfg = small_cfg(&mut rng);
        let (n, k) = (rng.gen_range(2..6), rng.gen_range(2..6));
        let obs = random_obs(&mut rng, "a", n, k, 0.8);
        let g = build_graph(&obs, &cfg.graph_options());
        let ctx = GraphContext::new(&g);
        let mut store = init_params(&cfg, 0).unwrap();
        randomize(&mut store, &mut rng);
        let mut sess = Session::new(&store);
        let mut ex = Extractor::new(&cfg);
        let h = ex.embed(&mut sess, &obs, &ctx).unwrap();
        let out = ex.tga_layer(&mut sess, &ctx, h, 0).unwrap();
        let hv = sess.value(h.values).clone();
        let got = sess.value(out.values);

        let dk = cfg.head_dim();
        for i in 0..g.num_nodes() {
            let nb = temporal_neighbors(&g, i);
            let mut acc = vec![0.0; cfg.d];
            for head in 0..cfg.heads {
                let p = |name: &str| &store.get(&format!("tga.0.h{head}.{name}")).unwrap().value;
                let q = vecmat(hv.row(i), p("wq"));
                let logits: Vec<f64> = nb
                    .iter()
                    .map(|&j| dot(&q, &vecmat(hv.row(j), p("wk"))) / (dk as f64).sqrt())
                    .collect();
                if nb.is_empty() {
                    continue;
                }
                for (&j, b) in nb.iter().zip(softmax(&logits)) {
                    for (a, v) in acc.iter_mut().zip(vecmat(hv.row(j), p("w"))) {
                        *a += b * v;
                    }
                }
            }
            for (c, a) in acc.iter().enumerate() {
                let want = (a / cfg.heads as f64).max(0.0);
                assert!((got.get(i, c) - want).abs() <= 1e-12, "node {i} col {c}: {} vs {want}", got.get(i, c));
            }
        }
    }
}

fn layer_norm(x: &[f64], g: &[f64], b: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    x.iter().enumerate().map(|(c, v)| (v - mean) * inv * g[c] + b[c]).collect()
}

#[test]
fn spatial_attention_matches_direct_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let cfg = small_cfg(&mut rng);
        let (n, k) = (rng.gen_range(2..7), rng.gen_range(2..5));
        let obs = random_obs(&mut rng, "a", n, k, 0.8);
        let g = build_graph(&obs, &GraphOptions { spatial_k: cfg.spatial_k, same_target_only: false });
        let ctx = GraphContext::new(&g);
        let mut store = init_params(&cfg, 0).unwrap();
        randomize(&mut store, &mut rng);
        let mut sess = Session::new(&store);
        let mut ex = Extractor::new(&cfg);
        let h = ex.embed(&mut sess, &obs, &ctx).unwrap();
        let out = ex.sta_spatial(&mut sess, &ctx, h).unwrap();
        let hv = sess.value(h.values).clone();
        let got = sess.value(out.values);
        let p = |name: &str| &store.get(name).unwrap().value;
        for i in 0..g.num_nodes() {
            if !g.nodes[i].valid {
                assert!(got.row(i).iter().all(|&v| v == 0.0));
                continue;
            }
            let nb = &g.spatial_neighbors[i];
            let mut pre = hv.row(i).to_vec();
            if !nb.is_empty() {
                let q = vecmat(hv.row(i), p("sta.s.wq"));
                let logits: Vec<f64> = nb
                    .iter()
                    .map(|&j| dot(&q, &vecmat(hv.row(j), p("sta.s.wk"))) / (cfg.d as f64).sqrt())
                    .collect();
                for (&j, a) in nb.iter().zip(softmax(&logits)) {
                    for (o, v) in pre.iter_mut().zip(vecmat(hv.row(j), p("sta.s.ws"))) {
                        *o += a * v;
                    }
                }
            }
            let want = layer_norm(&pre, p("sta.s.ln.g").data(), p("sta.s.ln.b").data());
            for (c, w) in want.iter().enumerate() {
                assert!((got.get(i, c) - w).abs() <= 1e-12, "node {i} col {c}");
            }
        }
    }
}
