//! Gated minimum-cost bipartite matching.
//!
//! Entries above the gate are replaced by a finite sentinel large enough
//! that trading one feasible pair for a sentinel pair never pays off, the
//! Hungarian method runs on the rectangular matrix, and sentinel pairs are
//! dropped from the answer. The result is therefore a maximum-cardinality
//! feasible matching of minimum total cost.

use nalgebra::DMatrix;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentResult {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    fn all_unmatched(rows: usize, cols: usize) -> Self {
        Self {
            matches: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        }
    }

    /// Sum of matched costs, accumulated in row order.
    pub fn total_cost(&self, costs: &DMatrix<f64>) -> f64 {
        self.matches.iter().map(|&(r, c)| costs[(r, c)]).sum()
    }
}

#[inline]
fn feasible(c: f64, gate: f64) -> bool {
    c.is_finite() && c <= gate
}

/// Solves the gated assignment problem for `costs` (rows = tracks).
pub fn solve(costs: &DMatrix<f64>, gate: f64) -> AssignmentResult {
    let (rows, cols) = costs.shape();
    if rows == 0 || cols == 0 {
        return AssignmentResult::all_unmatched(rows, cols);
    }

    let mut max_feasible = f64::NEG_INFINITY;
    for &c in costs.iter() {
        if feasible(c, gate) {
            max_feasible = max_feasible.max(c);
        }
    }
    if max_feasible == f64::NEG_INFINITY {
        return AssignmentResult::all_unmatched(rows, cols);
    }

    let k = rows.min(cols) as f64;
    let sentinel = (k + 1.0) * (max_feasible.abs() + 1.0);

    // The solver wants rows <= cols.
    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let entry = |i: usize, j: usize| -> f64 {
        let c = if transposed { costs[(j, i)] } else { costs[(i, j)] };
        if feasible(c, gate) {
            c
        } else {
            sentinel
        }
    };

    let row_of_col = hungarian(n, m, entry);

    let mut matches = Vec::with_capacity(n);
    for (j, row) in row_of_col.iter().enumerate() {
        if let Some(i) = *row {
            let (r, c) = if transposed { (j, i) } else { (i, j) };
            if feasible(costs[(r, c)], gate) {
                matches.push((r, c));
            }
        }
    }
    matches.sort_unstable();

    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; cols];
    for &(r, c) in &matches {
        row_used[r] = true;
        col_used[c] = true;
    }
    AssignmentResult {
        matches,
        unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
    }
}

/// Shortest-augmenting-path Hungarian method with potentials for an
/// `n x m` matrix, `n <= m`. Returns, for each column, the assigned row.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    debug_assert!(n <= m);
    // 1-based indices; index 0 is the virtual source.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut p = vec![0_usize; m + 1];
    let mut way = vec![0_usize; m + 1];
    let mut minv = vec![0.0_f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
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

    (1..=m).map(|j| if p[j] == 0 { None } else { Some(p[j] - 1) }).collect()
}
