use ritz_core::analysis::{
    concentration_audit, h1_error, mc_gap_slope, random_piecewise_class, rate_sweep, sandwich_check, SweepConfig,
};
use ritz_core::domain::AxisRule;
use ritz_core::losses::{LossKind, PopulationGrids};
use ritz_core::problems::Problem;
use ritz_core::shallow_nets::{Activation, ShallowNet};
use ritz_core::trainer::{TrainConfig, TrainReport};
use ritz_core::Evaluable;

/// Composite Simpson on `[a, b]` with `2k` subintervals. The endpoints are
/// evaluated just inside the interval so one-sided limits are used at kinks.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    let nudge = 1e-12 * (b - a);
    (f(a + nudge) + f(b - nudge) + inner) * h / 3.0
}

#[test]
fn h1_error_matches_kink_split_simpson_in_one_dimension() {
    let p = Problem::parse("poisson:d=1,k=2").unwrap();
    for seed in 0..5 {
        let u = ShallowNet::random(7, 1, 3.0, Activation::Relu, seed).unwrap();
        let grid = PopulationGrids::aligned(&u, p.cube(), AxisRule::default()).unwrap().interior;
        let mut cuts: Vec<f64> = (0..u.width())
            .map(|i| -u.biases()[i] / u.direction(i)[0])
            .filter(|z| *z > 0.0 && *z < 1.0)
            .collect();
        cuts.extend([0.0, 1.0]);
        cuts.sort_by(f64::total_cmp);
        let integrand = |x: f64| {
            let e = u.value(&[x]) - p.exact().value(&[x]);
            let g = u.gradient(&[x])[0] - p.exact().gradient(&[x])[0];
            e * e + g * g
        };
        let oracle: f64 = cuts.windows(2).map(|w| simpson(&integrand, w[0], w[1], 2000)).sum::<f64>().sqrt();
        let got = h1_error(&u, &p, &grid);
        assert!((got - oracle).abs() < 1e-8, "seed {seed}: {got} vs {oracle}");
    }
}

#[test]
fn schrodinger_sandwich_with_varying_potential() {
    let p = Problem::parse("schrodinger:d=2,k=1,1,v=sine").unwrap();
    for seed in 0..10 {
        let u = ShallowNet::random(6, 2, 2.0, Activation::ReluSquared, 100 + seed).unwrap();
        let r = sandwich_check(&u, &p, AxisRule::default()).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.identity_gap.is_none());
        assert!(r.lower_slack > 0.0 && r.upper_slack.unwrap() > 0.0);
    }
}

#[test]
fn rate_sweep_is_reproducible() {
    let p = Problem::parse("poisson:d=1,k=1").unwrap();
    let config = SweepConfig {
        kind: LossKind::DrmPoisson,
        n_grid: vec![32, 64],
        repeats: 3,
        template: TrainConfig::for_problem(&p, 32, 30, 1e-2, 0),
        quadrature: AxisRule::default(),
        seed: 5,
    };
    let a = rate_sweep(&p, &config).unwrap();
    let b = rate_sweep(&p, &config).unwrap();
    assert_eq!(a.cells_csv(), b.cells_csv());
    assert_eq!(a.fit, b.fit);
    assert_eq!(a.per_n, b.per_n);
    assert_eq!(a.per_n.iter().map(|s| s.width).collect::<Vec<_>>(), vec![4, 5]);
    let bad = SweepConfig { repeats: 2, ..config };
    assert!(rate_sweep(&p, &bad).is_err());
}

#[test]
fn monte_carlo_gap_vanishes_for_large_batches() {
    let p = Problem::parse("schrodinger:d=1,k=1,v0=1").unwrap();
    let u = ShallowNet::random(6, 1, 3.0, Activation::ReluSquared, 8).unwrap();
    let r = mc_gap_slope(&u, &p, &[1 << 10, 1 << 16], 10, AxisRule::default(), 3).unwrap();
    let scale = r.population.abs().max(1.0);
    assert!(r.mean_gap[1] < 1e-2 * scale, "{:?}", r.mean_gap);
    assert!(r.mean_gap[1] < r.mean_gap[0]);
}

#[test]
fn audit_violation_rate_is_monotone_in_x() {
    let class = random_piecewise_class(6, 3, 5, 2.0, 17);
    let audits = concentration_audit(&class, 2.0, 50, &[0.25, 0.5, 1.0, 2.0], 400, 300, 18).unwrap();
    for w in audits.windows(2) {
        assert!(w[1].violation_rate <= w[0].violation_rate);
        assert!(w[1].bound > w[0].bound);
    }
    for a in &audits {
        assert!((0.0..=1.0).contains(&a.violation_rate));
        assert!(a.violation_rate <= a.allowed_rate);
    }
}

#[test]
fn train_report_json_round_trip() {
    let p = Problem::parse("poisson:d=1,k=1").unwrap();
    let batch = ritz_core::losses::LossBatch::sample(LossKind::DrmPoisson, p.cube(), 64, 1).unwrap();
    let cfg = TrainConfig::for_problem(&p, 64, 10, 1e-2, 2);
    let report = ritz_core::trainer::train_erm(LossKind::DrmPoisson, &p, &batch, &cfg).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: TrainReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
}
