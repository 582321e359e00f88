use tablecensus::estimator::{estimate_log_count, CorrectionChoice, DetPath, EstimateOptions, SolverChoice};
use tablecensus::gaussian::{assemble_q, correction_mc, correction_wick, logdet_dense, structured_logdet, Sampler};
use tablecensus::margins::{bd_margins, check_smoothness, left_half_margins, FamilyParams, MarginSpec};
use tablecensus::typical::{solve_block_typical, solve_typical, SolverOptions};
use tablecensus::{Error, Stage};

#[test]
fn dense_and_block_solvers_agree_at_n1600() {
    let spec = bd_margins(FamilyParams::new(1600, 0.5, 2.0, 1.0).unwrap()).unwrap();
    let (block, _) = solve_block_typical(&spec, 1e-10).unwrap();
    let (dense, _) = solve_typical(&spec, SolverOptions::default()).unwrap();
    let b = block.as_block().unwrap();
    let d = dense.to_dense();
    let m = spec.m();
    for (i, j, want) in [(0, 0, b.z_hh()), (0, m - 1, b.z_hl().unwrap()), (m - 1, m - 1, b.z_ll().unwrap())] {
        assert!((d[(i, j)] - want).abs() <= 1e-8 * want, "({i},{j}) {} vs {want}", d[(i, j)]);
    }
}

#[test]
fn structured_determinant_matches_dense() {
    let mut specs: Vec<MarginSpec> =
        [4, 9, 16, 64].iter().map(|&n| bd_margins(FamilyParams::new(n, 0.5, 2.0, 1.0).unwrap()).unwrap()).collect();
    specs.push(bd_margins(FamilyParams::new(900, 0.5, 1.5, 2.0).unwrap()).unwrap());
    for n in [16, 64, 400] {
        specs.push(left_half_margins(FamilyParams::new(n, 0.5, 1.0, 1.0).unwrap()).unwrap());
    }
    for spec in &specs {
        let (t, _) = solve_block_typical(spec, 1e-10).unwrap();
        let s = structured_logdet(&t, spec).unwrap().logdet_total;
        let d = logdet_dense(&assemble_q(&t, spec).unwrap()).unwrap();
        assert!((s - d).abs() <= 1e-8 * d.abs(), "m={} structured {s} dense {d}", spec.m());
    }
}

#[test]
fn det_paths_give_same_estimate() {
    let spec = bd_margins(FamilyParams::new(36, 0.5, 2.0, 1.0).unwrap()).unwrap();
    let run = |det| {
        estimate_log_count(&spec, &EstimateOptions { det, ..Default::default() }).unwrap()
    };
    let dense = run(DetPath::Dense);
    let both = run(DetPath::Both);
    let structured = run(DetPath::Structured);
    assert!((dense.total_log - structured.total_log).abs() <= 1e-8 * dense.total_log.abs());
    assert!(both.dense_logdet.is_some() && both.structured.is_some());
    assert!((dense.total_log - dense.hyperplane_form_log).abs() <= 1e-9 * dense.total_log.abs());
}

#[test]
fn block_and_dense_pipelines_agree() {
    let spec = bd_margins(FamilyParams::new(16, 0.5, 2.0, 1.0).unwrap()).unwrap();
    let est = |solver_choice| {
        let opts = EstimateOptions { solver_choice, correction: CorrectionChoice::Wick, ..Default::default() };
        estimate_log_count(&spec, &opts).unwrap().total_log
    };
    let (a, b) = (est(SolverChoice::Block), est(SolverChoice::Dense));
    assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
}

#[test]
fn monte_carlo_tracks_wick_with_a_million_samples() {
    for (rows, cols) in [(vec![2.0; 2], vec![2.0; 2]), (vec![3.0; 3], vec![3.0; 3])] {
        let spec = MarginSpec::new(rows, cols).unwrap();
        let (t, _) = solve_typical(&spec, SolverOptions::default()).unwrap();
        let model = assemble_q(&t, &spec).unwrap();
        let wick = correction_wick(&t, &model).unwrap();
        for sampler in [Sampler::Reduced, Sampler::Subspace] {
            let mc = correction_mc(&t, &model, 1_000_000, 3, sampler).unwrap();
            assert!((mc.mu - wick.mu).abs() <= 3.0 * mc.std_err_mu.unwrap(), "{sampler:?} mu");
            assert!((mc.nu - wick.nu).abs() <= 3.0 * mc.std_err_nu.unwrap(), "{sampler:?} nu");
            assert!(mc.mean_f.unwrap().abs() <= 4.0 * mc.std_err_f.unwrap());
        }
    }
}

#[test]
fn known_correction_values() {
    // Uniform margins with z = 1 and z = 2 respectively.
    for (sum, k, want) in [(2.0, 2, -0.09375), (3.0, 3, -1.0 / 72.0)] {
        let spec = MarginSpec::new(vec![sum; k], vec![sum; k]).unwrap();
        let (t, _) = solve_typical(&spec, SolverOptions::default()).unwrap();
        let c = correction_wick(&t, &assemble_q(&t, &spec).unwrap()).unwrap();
        assert!((c.correction_log - want).abs() < 1e-12, "{} vs {want}", c.correction_log);
    }
}

#[test]
fn smoothness_of_family_tables() {
    let spec = bd_margins(FamilyParams::new(100, 0.5, 2.0, 1.0).unwrap()).unwrap();
    let (t, _) = solve_block_typical(&spec, 1e-10).unwrap();
    let r = check_smoothness(&spec, &t, 0.1).unwrap();
    assert!(r.dim_ratio_ok && r.entry_ratio_ok);
    assert!((r.best_delta_prime - 0.8435641976 / 4.3564197630).abs() < 1e-6);

    // Supercritical heavy entries are no longer of one order.
    let spec = bd_margins(FamilyParams::new(10000, 0.5, 6.0, 1.0).unwrap()).unwrap();
    let (t, _) = solve_block_typical(&spec, 1e-10).unwrap();
    assert!(!check_smoothness(&spec, &t, 0.1).unwrap().entry_ratio_ok);

    let spec = MarginSpec::new(vec![1.0; 2], vec![0.2; 10]).unwrap();
    let (t, _) = solve_typical(&spec, SolverOptions::default()).unwrap();
    assert!(!check_smoothness(&spec, &t, 0.5).unwrap().dim_ratio_ok);
}

#[test]
fn errors_carry_their_stage() {
    let spec = MarginSpec::new(vec![2.0; 30], vec![2.0; 30]).unwrap();
    let opts = EstimateOptions {
        solver_choice: SolverChoice::Dense,
        correction: CorrectionChoice::MonteCarlo { samples: 10, seed: 1, sampler: Sampler::Reduced },
        ..Default::default()
    };
    match estimate_log_count(&spec, &opts) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, Stage::Correction),
        other => panic!("expected a stage-tagged error, got {other:?}"),
    }
}
