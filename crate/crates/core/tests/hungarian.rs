//! Assignment against exhaustive enumeration.

use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mva_core::assign::hungarian;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Best total over all permutations, summed in row order.
fn brute_force(m: &[f64], n: usize, perms: &[Vec<usize>]) -> f64 {
    perms
        .iter()
        .map(|p| (0..n).fold(0.0, |acc, i| acc + m[i * n + p[i]]))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn matches_exhaustive_maximum() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 2..=7 {
        let perms = permutations(n);
        for trial in 0..500 {
            let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = hungarian(&m, n, n, true);
            let best = brute_force(&m, n, &perms);
            assert_eq!(a.total, best, "n={n} trial={trial}");
            assert_eq!(a.pairs().len(), n);
        }
    }
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn minimization_is_negated_maximization() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 2..=6 {
        let perms = permutations(n);
        for _ in 0..100 {
            let m: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let neg: Vec<f64> = m.iter().map(|v| -v).collect();
            let a = hungarian(&m, n, n, false);
            assert_eq!(-a.total, brute_force(&neg, n, &perms));
        }
    }
}

proptest! {
    #[test]
    fn result_is_one_to_one(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = hungarian(&m, rows, cols, true);
        let pairs = a.pairs();
        prop_assert_eq!(pairs.len(), rows.min(cols));
        let mut seen = vec![false; cols];
        for (_, j) in pairs {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn forbidden_entries_never_assigned(n in 2usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m: Vec<f64> = (0..n * n)
            .map(|_| if rng.gen_bool(0.3) { f64::NEG_INFINITY } else { rng.gen_range(0.0..1.0) })
            .collect();
        let a = hungarian(&m, n, n, true);
        for (i, j) in a.pairs() {
            prop_assert!(m[i * n + j].is_finite());
        }
    }
}
