mod common;

use supstop_core::backtest::{compare, run_backtest, stop_at_t_ladder, verify_identity_v1, StoppingRule};
use supstop_core::boundary::solve_boundary;
use supstop_core::series::{a1_constant, build_series_auto};
use supstop_core::{Error, ModelParams};

use common::{default_dist, params};

#[test]
fn horizon_scaling_is_exact_on_shared_paths() {
    let one = params(1.7, 1.0, 1.3);
    let two = ModelParams::new(1.7, 1.0, 1.3, 2.0).unwrap();
    let a = run_backtest(&one, &StoppingRule::StopAtT, 10_000, 1000, 3).unwrap();
    let b = run_backtest(&two, &StoppingRule::StopAtT, 10_000, 1000, 3).unwrap();
    let want = 2f64.powf(1.3 / 1.7);
    assert!((b.loss_mean / a.loss_mean - want).abs() < 1e-12, "{}", b.loss_mean / a.loss_mean);
    assert!((b.closed_form_reference.unwrap() / a.closed_form_reference.unwrap() - want).abs() < 1e-14);
    assert_eq!(b.mean_stop_time, 2.0);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let pr = params(1.8, 1.0, 1.1);
    let rules = [StoppingRule::FixedThreshold { z: 0.8 }, StoppingRule::StopAtT, StoppingRule::StopAtZero];
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| compare(&pr, &rules, 10_000, 1000, 11).unwrap())
    };
    let (a, b) = (run(1), run(3));
    for (x, y) in a.reports.iter().zip(&b.reports) {
        assert_eq!(x.loss_mean.to_bits(), y.loss_mean.to_bits());
        assert_eq!(x.loss_stderr.to_bits(), y.loss_stderr.to_bits());
        assert_eq!(x.mean_stop_time.to_bits(), y.mean_stop_time.to_bits());
    }
    for (x, y) in a.differences.iter().zip(&b.differences) {
        assert_eq!(x.mean.to_bits(), y.mean.to_bits());
    }
}

#[test]
fn extreme_thresholds_reduce_to_trivial_rules() {
    let pr = params(1.6, 1.0, 1.2);
    let rules = [
        StoppingRule::StopAtZero,
        StoppingRule::FixedThreshold { z: 0.0 },
        StoppingRule::StopAtT,
        StoppingRule::FixedThreshold { z: 1e300 },
    ];
    let c = compare(&pr, &rules, 10_000, 1000, 5).unwrap();
    assert_eq!(c.reports[0].loss_mean, c.reports[1].loss_mean);
    assert_eq!(c.reports[2].loss_mean, c.reports[3].loss_mean);
    assert_eq!(c.reports[0].mean_stop_time, 0.0);
    assert_eq!(c.reports[0].fraction_stopped_before_t, 1.0);
    assert_eq!(c.reports[2].fraction_stopped_before_t, 0.0);
    assert_eq!(c.differences.len(), 3);
    assert_eq!(c.differences[0].mean, 0.0);
}

#[test]
fn boundary_rule_dominates_at_small_scale() {
    let pr = params(1.8, 1.0, 1.1);
    let d = default_dist(&pr);
    let series = build_series_auto(&pr, 100.0).unwrap();
    let sol = solve_boundary(&pr, &d, &series, 1e-10).unwrap();
    let rules = [
        StoppingRule::OptimalBoundary { z_star: sol.z_star, beta_star: Some(sol.beta_star) },
        StoppingRule::StopAtZero,
        StoppingRule::StopAtT,
    ];
    let c = compare(&pr, &rules, 20_000, 2000, 17).unwrap();
    for diff in &c.differences {
        // other rule minus the boundary rule
        assert!(diff.mean > -2.0 * diff.stderr, "{} vs {}: {} +- {}", diff.rule, diff.against, diff.mean, diff.stderr);
    }
    let r = &c.reports[0];
    assert!(r.fraction_stopped_before_t > 0.0 && r.fraction_stopped_before_t < 1.0);
    assert!((r.closed_form_reference.unwrap() - sol.beta_star * a1_constant(&pr)).abs() < 1e-14);
}

#[test]
fn grid_bias_shrinks_under_refinement() {
    let pr = params(1.5, 1.0, 1.2);
    let ladder = stop_at_t_ladder(&pr, 20_000, 8000, 4, 23).unwrap();
    assert_eq!(ladder.rungs.iter().map(|r| r.0).collect::<Vec<_>>(), vec![8000, 4000, 2000, 1000]);
    for (m, se) in &ladder.gaps {
        // a finer grid can only see a larger supremum
        assert!(*m > 3.0 * se, "gap {m} +- {se}");
    }
    for w in ladder.gaps.windows(2) {
        assert!(w[0].0 < w[1].0, "gaps {:?}", ladder.gaps);
    }
    assert!(ladder.rungs[0].1 < ladder.reference + 3.0 * ladder.rungs[0].2);
    assert!(stop_at_t_ladder(&pr, 20_000, 1000, 5, 23).is_err());
}

#[test]
fn identity_for_v1() {
    let pr = params(1.8, 1.0, 1.1);
    let d = default_dist(&pr);
    let series = build_series_auto(&pr, 100.0).unwrap();
    let coarse = verify_identity_v1(&pr, &d, &series, 0.0, 4000, 250, 5).unwrap();
    let fine = verify_identity_v1(&pr, &d, &series, 0.0, 4000, 1000, 5).unwrap();
    let se = coarse.stderr.hypot(fine.stderr);
    assert!(fine.residual.abs() < coarse.residual.abs() - 3.0 * se, "{} then {}", coarse.residual, fine.residual);
    assert!(fine.residual.abs() < 5.0 * fine.stderr + 0.01 * fine.v1, "{fine:?}");

    let far = verify_identity_v1(&pr, &d, &series, 10.0, 4000, 1000, 5).unwrap();
    assert!(far.residual.abs() < 0.02 * 10f64.powf(1.1), "{far:?}");
    assert!(far.residual.abs() < 5.0 * far.stderr, "{far:?}");
}

#[test]
fn input_errors() {
    let pr = params(1.8, 1.0, 1.1);
    assert!(matches!(
        run_backtest(&pr, &StoppingRule::StopAtT, 100, 1000, 1),
        Err(Error::InsufficientSamples { .. })
    ));
    assert!(run_backtest(&pr, &StoppingRule::FixedThreshold { z: -1.0 }, 10_000, 1000, 1).is_err());
    assert!(run_backtest(&pr, &StoppingRule::OptimalBoundary { z_star: 0.0, beta_star: None }, 10_000, 1000, 1).is_err());
}
