#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mva_core::dataset::Window;
use mva_core::graph::{build_graph, GraphOptions};
use mva_core::metrics::GroundTruth;
use mva_core::net::GraphContext;
use mva_core::trajectory::{ObservationSet, TimeWindow};

/// Random observation set; each slot is observed with probability `p_obs`.
pub fn random_obs(rng: &mut ChaCha8Rng, prefix: &str, n: usize, k: usize, p_obs: f64) -> ObservationSet {
    let mut obs = ObservationSet::empty(TimeWindow::new(0, 10, k));
    for i in 0..n {
        obs.ids.push(Some(format!("{prefix}{i}")));
        for _ in 0..k {
            obs.coords.push([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
            obs.mask.push(rng.gen_bool(p_obs));
        }
    }
    obs
}

/// Camera-side copy of `a` with small per-slot noise and ids `b{i}`.
pub fn noisy_copy(rng: &mut ChaCha8Rng, a: &ObservationSet, noise: f64) -> ObservationSet {
    let mut b = a.clone();
    for (i, id) in b.ids.iter_mut().enumerate() {
        *id = Some(format!("b{i}"));
    }
    for c in &mut b.coords {
        c[0] += rng.gen_range(-noise..=noise);
        c[1] += rng.gen_range(-noise..=noise);
    }
    b
}

pub fn window(a: ObservationSet, b: ObservationSet, truth: &[(usize, usize)], opts: &GraphOptions) -> Window {
    let truth = GroundTruth::new(
        truth
            .iter()
            .map(|&(i, j)| (a.id(i).unwrap().to_string(), b.id(j).unwrap().to_string())),
    )
    .unwrap();
    Window {
        index: 0,
        ctx_a: GraphContext::new(&build_graph(&a, opts)),
        ctx_b: GraphContext::new(&build_graph(&b, opts)),
        a,
        b,
        truth,
    }
}

/// Every slot observed, truth is the identity.
pub fn paired_window(rng: &mut ChaCha8Rng, n: usize, k: usize, noise: f64, opts: &GraphOptions) -> Window {
    let a = random_obs(rng, "a", n, k, 1.0);
    let b = noisy_copy(rng, &a, noise);
    let truth: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    window(a, b, &truth, opts)
}
