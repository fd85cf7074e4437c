mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use sctrack::assignment::solve;

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0.0..3.0f64, c), r))
}

fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

proptest! {
    #[test]
    fn agrees_with_brute_force(costs in matrix(), gate in 0.0..3.2f64) {
        let m = to_dmatrix(&costs);
        let got = solve(&m, gate);
        let (pairs, cost) = common::brute_force_assignment(&costs, gate);
        prop_assert_eq!(got.matches.len(), pairs.len());
        prop_assert_eq!(got.total_cost(&m), cost);
    }

    #[test]
    fn result_partitions_rows_and_cols(costs in matrix(), gate in 0.0..3.2f64) {
        let m = to_dmatrix(&costs);
        let r = solve(&m, gate);
        let mut rows: Vec<usize> = r.matches.iter().map(|p| p.0).chain(r.unmatched_rows.iter().copied()).collect();
        let mut cols: Vec<usize> = r.matches.iter().map(|p| p.1).chain(r.unmatched_cols.iter().copied()).collect();
        rows.sort_unstable();
        cols.sort_unstable();
        prop_assert_eq!(rows, (0..m.nrows()).collect::<Vec<_>>());
        prop_assert_eq!(cols, (0..m.ncols()).collect::<Vec<_>>());
        prop_assert!(r.matches.iter().all(|&(i, j)| m[(i, j)] <= gate));
        prop_assert!(r.matches.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn permutation_equivariant(costs in matrix(), gate in 0.0..3.2f64, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (nr, nc) = (costs.len(), costs[0].len());
        let mut rp: Vec<usize> = (0..nr).collect();
        let mut cp: Vec<usize> = (0..nc).collect();
        rp.shuffle(&mut rng);
        cp.shuffle(&mut rng);
        // Row i of the permuted matrix is row rp[i] of the original.
        let permuted = DMatrix::from_fn(nr, nc, |i, j| costs[rp[i]][cp[j]]);
        let original = solve(&to_dmatrix(&costs), gate);
        let moved = solve(&permuted, gate);
        let mut mapped: Vec<(usize, usize)> = moved.matches.iter().map(|&(i, j)| (rp[i], cp[j])).collect();
        mapped.sort_unstable();
        // Random real costs make the optimum unique, so the pairs coincide.
        prop_assert_eq!(mapped, original.matches);
    }

    #[test]
    fn deterministic(costs in matrix(), gate in 0.0..3.2f64) {
        let m = to_dmatrix(&costs);
        prop_assert_eq!(solve(&m, gate), solve(&m, gate));
    }
}

#[test]
fn empty_sides_leave_everything_unmatched() {
    let r = solve(&DMatrix::<f64>::zeros(0, 3), 1.0);
    assert!(r.matches.is_empty());
    assert_eq!(r.unmatched_cols, vec![0, 1, 2]);
    let r = solve(&DMatrix::<f64>::zeros(2, 0), 1.0);
    assert_eq!(r.unmatched_rows, vec![0, 1]);
}

#[test]
fn non_finite_entries_are_never_matched() {
    let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.4, f64::INFINITY, 0.3]);
    let r = solve(&m, 1.0);
    assert_eq!(r.matches.len(), 1);
    assert!(m[r.matches[0]].is_finite());
}
