use edgeho::harness::sweep::{run_sweep_trials, Method, SweepResult};
use edgeho::harness::{run_single, ExperimentConfig, ModelParams, SweepKind};

fn sweep(kind: SweepKind, trials: usize) -> SweepResult {
    let mut cfg = ExperimentConfig::new(kind);
    cfg.trials = trials;
    cfg.base_seed = 11;
    run_sweep_trials(&cfg).unwrap()
}

/// Per matched trial, `method` moves in direction `sign` along the axis.
fn assert_monotone(res: &SweepResult, method: Method, sign: f64) {
    for p in 1..res.points.len() {
        let prev = res.column(p - 1, method);
        let cur = res.column(p, method);
        for (n, (a, b)) in prev.iter().zip(&cur).enumerate() {
            assert!(
                sign * (b - a) >= -1e-12,
                "{} trial {n}: {a} -> {b} between {} and {}",
                method.name(),
                res.points[p - 1].value,
                res.points[p].value
            );
        }
    }
}

#[test]
fn cho_non_increasing_in_backhaul_rate() {
    let res = sweep(SweepKind::Rate, 60);
    assert_monotone(&res, Method::Cho, -1.0);
    assert_monotone(&res, Method::Ctho, -1.0);
}

#[test]
fn tho_non_increasing_in_prefill_speed() {
    let res = sweep(SweepKind::Compute, 60);
    assert_monotone(&res, Method::Tho, -1.0);
    assert_monotone(&res, Method::Ctho, -1.0);
}

#[test]
fn every_strategy_non_decreasing_in_context_length_and_users() {
    for kind in [SweepKind::Cache, SweepKind::Users] {
        let res = sweep(kind, 40);
        for m in [Method::Ctho, Method::Tho, Method::Cho] {
            assert_monotone(&res, m, 1.0);
        }
    }
}

#[test]
fn distance_sweep_crosses_no_handover_at_most_once() {
    let res = sweep(SweepKind::BsDistance, 40);
    let mean = |p: usize, m| res.column(p, m).iter().sum::<f64>() / 40.0;
    for m in [Method::Ctho, Method::Tho, Method::Cho] {
        let signs: Vec<bool> = (0..res.points.len()).map(|p| mean(p, m) < mean(p, Method::NoHo)).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(changes <= 1, "{} crosses no-HO {changes} times", m.name());
    }
    assert_monotone(&res, Method::NoHo, 1.0);
}

#[test]
fn single_report_worst_delay_is_max_over_users() {
    for seed in 0..20 {
        let report = run_single(&ModelParams::default(), seed).unwrap();
        for d in &report.strategies {
            let worst = d.ho_delays.iter().copied().fold(0.0, f64::max);
            assert!((worst - d.plan.breakdown.v).abs() <= 1e-9);
            let c_max = report.sample.instance.c_max() as f64;
            if d.plan.l_star > 0.0 && d.plan.l_star < c_max {
                assert!((d.plan.breakdown.d_prefill - d.plan.breakdown.d_transfer).abs() <= 1e-9);
            }
        }
    }
}
