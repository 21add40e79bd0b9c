//! Linear assignment via the O(n³) shortest-augmenting-path Hungarian method.

/// Result of [`hungarian`]: the column assigned to each row, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the assigned entries, accumulated in row order.
    pub total: f64,
}

impl Assignment {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|j| (i, j)))
            .collect()
    }
}

/// Optimal one-to-one assignment on a row-major `rows × cols` matrix.
///
/// When maximizing, `-∞` entries are forbidden and never assigned; a row may
/// stay unmatched, contributing zero. When minimizing, non-finite entries are
/// forbidden. Rectangular inputs leave the surplus side unmatched.
pub fn hungarian(scores: &[f64], rows: usize, cols: usize, maximize: bool) -> Assignment {
    assert_eq!(scores.len(), rows * cols, "score matrix has wrong length");
    let allowed = |v: f64| if maximize { v > f64::NEG_INFINITY && !v.is_nan() } else { v.is_finite() };
    let mut row_to_col = vec![None; rows];
    if rows == 0 || cols == 0 {
        return Assignment { row_to_col, total: 0.0 };
    }

    let finite_max = scores
        .iter()
        .filter(|&&v| v.is_finite())
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    // Forbidden entries: zero gain when maximizing, a cost no real assignment
    // can reach when minimizing.
    let forbidden_cost = if maximize {
        0.0
    } else {
        1.0 + 2.0 * (rows.max(cols) as f64) * finite_max
    };
    let cost = |i: usize, j: usize| -> f64 {
        let v = scores[i * cols + j];
        match (allowed(v), maximize) {
            (true, true) => -v,
            (true, false) => v,
            (false, _) => forbidden_cost,
        }
    };

    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transposed { cost(j, i) } else { cost(i, j) };
    let assigned = solve_min(n, m, at);
    for (i, j) in assigned.into_iter().enumerate() {
        let (r, c) = if transposed { (j, i) } else { (i, j) };
        if allowed(scores[r * cols + c]) {
            row_to_col[r] = Some(c);
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| scores[i * cols + j]))
        .sum();
    Assignment { row_to_col, total }
}

/// Minimum-cost assignment of every row for `n ≤ m`; returns the column of
/// each row.
fn solve_min(n: usize, m: usize, a: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
