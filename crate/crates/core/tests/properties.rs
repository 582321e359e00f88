mod common;

use nalgebra::DMatrix;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tablecensus::estimator::{estimate_log_count, g_of, CorrectionChoice, EstimateOptions};
use tablecensus::exact::{count_2x2, count_exact, count_exact_with_budget, DEFAULT_STATE_BUDGET};
use tablecensus::margins::{bd_margins, FamilyParams, MarginSpec};
use tablecensus::typical::{solve_block_typical, solve_typical, SolverOptions, TypicalTable};

/// Balanced integer margins: random row sums, columns from a random split of the total.
fn integer_margins(max_dim: usize, max_total: u64) -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    (1..=max_dim, 1..=max_dim, 1..=max_total).prop_flat_map(move |(m, n, total)| {
        let split = |k: usize| {
            proptest::collection::vec(0..=total, k - 1).prop_map(move |mut cuts| {
                cuts.push(0);
                cuts.push(total);
                cuts.sort_unstable();
                cuts.windows(2).map(|w| w[1] - w[0]).collect::<Vec<u64>>()
            })
        };
        (split(m), split(n))
    })
}

/// Positive real margins with a common total.
fn real_margins(max_dim: usize) -> impl Strategy<Value = MarginSpec> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec(0.2f64..5.0, m.max(2)),
            proptest::collection::vec(0.2f64..5.0, n.max(2)),
        )
            .prop_map(|(rows, cols)| {
                let (sr, sc): (f64, f64) = (rows.iter().sum(), cols.iter().sum());
                let cols = cols.iter().map(|c| c * sr / sc).collect();
                MarginSpec::new(rows, cols).unwrap()
            })
    })
}

fn solve(spec: &MarginSpec) -> TypicalTable {
    solve_typical(spec, SolverOptions::default()).unwrap().0
}

fn exact(rows: &[u64], cols: &[u64]) -> u64 {
    count_exact_with_budget(rows, cols, DEFAULT_STATE_BUDGET).unwrap().count.to_u64().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_matches_two_by_two_formula(r1 in 0u64..=30, c1 in 0u64..=30, total in 0u64..=30) {
        prop_assume!(r1 <= total && c1 <= total);
        let (r2, c2) = (total - r1, total - c1);
        prop_assert_eq!(exact(&[r1, r2], &[c1, c2]), count_2x2(r1, r2, c1, c2).unwrap());
    }

    #[test]
    fn dp_matches_free_cell_enumeration((rows, cols) in integer_margins(3, 12)) {
        prop_assert_eq!(exact(&rows, &cols), common::free_cell_count(&rows, &cols));
    }

    #[test]
    fn count_is_transpose_and_order_invariant((rows, cols) in integer_margins(4, 14), rot in 0usize..4) {
        let base = exact(&rows, &cols);
        prop_assert_eq!(exact(&cols, &rows), base);
        let mut r = rows.clone();
        let k = rot % r.len();
        r.rotate_left(k);
        prop_assert_eq!(exact(&r, &cols), base);
    }

    #[test]
    fn entropy_bounds_log_count((rows, cols) in integer_margins(4, 16)) {
        prop_assume!(rows.iter().all(|&r| r > 0) && cols.iter().all(|&c| c > 0));
        let spec = MarginSpec::from_integers(&rows, &cols).unwrap();
        let ln = count_exact(&spec).unwrap().ln();
        prop_assert!(ln <= g_of(&solve(&spec)).unwrap() + 1e-9);
    }

    #[test]
    fn solver_meets_margins(spec in real_margins(6)) {
        let (table, cert) = solve_typical(&spec, SolverOptions::default()).unwrap();
        prop_assert!(table.margin_residual(&spec) <= 1e-9 * spec.total().max(1.0));
        prop_assert!(cert.is_feasible());
        prop_assert_eq!(*cert.col_potentials.last().unwrap(), 0.0);
        let diff = (cert.reconstruct() - table.to_dense()).abs().max();
        prop_assert!(diff <= 1e-9 * table.entry_range().1);
    }

    #[test]
    fn potentials_are_gauge_invariant(spec in real_margins(5), shift in -0.3f64..0.3) {
        let (_, cert) = solve_typical(&spec, SolverOptions::default()).unwrap();
        let mut moved = cert.clone();
        moved.row_potentials.iter_mut().for_each(|l| *l += shift);
        moved.col_potentials.iter_mut().for_each(|t| *t -= shift);
        let diff = (moved.reconstruct() - cert.reconstruct()).abs().max();
        prop_assert!(diff <= 1e-9 * cert.reconstruct().max());
    }

    #[test]
    fn solver_is_permutation_equivariant(spec in real_margins(5), rot in 0usize..5) {
        let table = solve(&spec).to_dense();
        let k = rot % spec.m();
        let mut rows = spec.rows().to_vec();
        rows.rotate_left(k);
        let moved = solve(&MarginSpec::new(rows, spec.cols().to_vec()).unwrap()).to_dense();
        for i in 0..spec.m() {
            for j in 0..spec.n() {
                let want = table[((i + k) % spec.m(), j)];
                prop_assert!((moved[(i, j)] - want).abs() <= 1e-8 * want.max(1.0));
            }
        }
    }

    #[test]
    fn estimate_is_transpose_invariant(spec in real_margins(5)) {
        let opts = EstimateOptions { correction: CorrectionChoice::Wick, ..Default::default() };
        let a = estimate_log_count(&spec, &opts).unwrap().total_log;
        let b = estimate_log_count(&spec.transposed(), &opts).unwrap().total_log;
        prop_assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn light_rows_sum_to_their_margin(n in 4usize..400, b in 1.05f64..2.5, c in 0.5f64..3.0) {
        let params = FamilyParams::new(n, 0.5, b, c).unwrap();
        let spec = bd_margins(params).unwrap();
        let (table, _) = solve_block_typical(&spec, 1e-10).unwrap();
        let blk = table.as_block().unwrap();
        let k = params.n_heavy() as f64;
        let light = spec.rows()[spec.m() - 1];
        let sum = k * blk.z_lh().unwrap() + n as f64 * blk.z_ll().unwrap();
        prop_assert!((sum - light).abs() <= 1e-8 * light);
    }
}

#[test]
fn typical_table_maximizes_entropy() {
    let spec = MarginSpec::new(vec![5.0, 3.0, 2.0, 1.0], vec![4.0, 4.0, 2.0, 1.0]).unwrap();
    let table = solve(&spec);
    let z = table.to_dense();
    let best = g_of(&table).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let (i1, i2) = (rng.random_range(0..4), rng.random_range(0..4));
        let (j1, j2) = (rng.random_range(0..4), rng.random_range(0..4));
        if i1 == i2 || j1 == j2 {
            continue;
        }
        let limit = z[(i1, j2)].min(z[(i2, j1)]).min(z[(i1, j1)]).min(z[(i2, j2)]);
        let eps = rng.random_range(-1.0..1.0) * 0.9 * limit;
        let mut p: DMatrix<f64> = z.clone();
        p[(i1, j1)] += eps;
        p[(i2, j2)] += eps;
        p[(i1, j2)] -= eps;
        p[(i2, j1)] -= eps;
        let g = g_of(&TypicalTable::from_dense(p, &spec)).unwrap();
        assert!(g <= best + 1e-12, "perturbation raised entropy: {g} > {best}");
    }
}
