//! One pass/fail line per acceptance criterion. Exits non-zero if any fails.

use std::time::Instant;

use ndarray::Array2;
use ritz_core::analysis::{
    concentration_audit, covering_scaling, empirical_rademacher, enumerate_rademacher, mc_gap_slope,
    poisson_bias_check, random_piecewise_class, rate_sweep, relative_h1_error, sandwich_check, ClassValues,
    SweepConfig,
};
use ritz_core::constructor::{build_interpolant_relu, certify_h1_error, h1_certificate, Curve1D};
use ritz_core::domain::{sample_boundary, sample_interior, AxisRule, Hypercube, SampleBatch};
use ritz_core::eval::Evaluable;
use ritz_core::losses::{empirical_loss, loss_gradient, pinn_empirical, LossBatch, LossKind, PinnBatch, PopulationGrids};
use ritz_core::problems::Problem;
use ritz_core::shallow_nets::{Activation, ShallowNet};
use ritz_core::trainer::{train_erm, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    println!(
        "[{}] criterion {id:>2} {name}: {} ({:.1}s)",
        if outcome.pass { "PASS" } else { "FAIL" },
        outcome.detail,
        start.elapsed().as_secs_f64()
    );
    outcome.pass
}

fn net(seed: u64, dim: usize, activation: Activation) -> ShallowNet {
    ShallowNet::random(6, dim, 2.0, activation, seed).unwrap()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let widths = [4usize, 8, 16, 32, 64];
    let mut violations = 0;
    let mut ratios = Vec::new();
    for curve in Curve1D::corpus() {
        let errors: Vec<f64> = widths
            .iter()
            .map(|&m| {
                let g = build_interpolant_relu(&curve, m).unwrap();
                let err = certify_h1_error(&g, &curve, 4096).unwrap();
                if err > h1_certificate(curve.sup_bound(), m) {
                    violations += 1;
                }
                err
            })
            .collect();
        ratios.extend(errors.windows(2).map(|w| w[0] / w[1]));
    }
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: violations == 0 && lo >= 1.6 && hi <= 2.4 && secs < 10.0,
        detail: format!("violations={violations}, doubling ratios in [{lo:.3}, {hi:.3}]"),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (d, id) in [(1, "schrodinger:d=1,k=1,v0=1"), (2, "schrodinger:d=2,k=1,1,v0=1")] {
        let p = Problem::parse(id).unwrap();
        for s in 0..50 {
            let activation = if s % 2 == 0 { Activation::Relu } else { Activation::ReluSquared };
            let u = net(1000 + s, d, activation);
            let r = sandwich_check(&u, &p, AxisRule::default()).unwrap();
            worst = worst.max(r.identity_gap.unwrap() / (1.0 + r.h1_sq));
            count += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: worst <= 1e-8 && secs < 30.0,
        detail: format!("{count} nets, max |excess − ‖e‖²|/(1+‖e‖²) = {worst:.2e}"),
    }
}

fn criterion_3() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for (d, id) in [(1, "poisson:d=1,k=1"), (2, "poisson:d=2,k=1,1")] {
        let p = Problem::parse(id).unwrap();
        for s in 0..50 {
            let activation = if s % 2 == 0 { Activation::Relu } else { Activation::ReluSquared };
            let u = net(2000 + s, d, activation);
            let r = sandwich_check(&u, &p, AxisRule::default()).unwrap();
            worst = worst.max(r.excess - r.h1_sq);
            count += 1;
        }
    }
    Outcome { pass: worst <= 1e-8, detail: format!("{count} nets, max excess − ‖e‖² = {worst:.3e}") }
}

/// Euclidean distance from `x` to the nearest kink hyperplane of `u`.
fn kink_distance(u: &ShallowNet, x: &[f64]) -> f64 {
    (0..u.width())
        .map(|i| {
            let w = u.direction(i);
            let pre: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + u.biases()[i];
            pre.abs() / w.iter().map(|a| a * a).sum::<f64>().sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

fn off_kink(u: &ShallowNet, batch: SampleBatch) -> SampleBatch {
    let d = batch.dim();
    let keep: Vec<f64> = batch.iter().filter(|x| kink_distance(u, x) >= 1e-3).flatten().copied().collect();
    let n = keep.len() / d;
    SampleBatch::from_points(Array2::from_shape_vec((n, d), keep).unwrap(), batch.seed, batch.region)
}

fn criterion_4() -> Outcome {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    let cases = [
        ("poisson:d=2,k=1,0", LossKind::DrmPoisson, Activation::Relu),
        ("schrodinger:d=2,k=1,1,v=sine", LossKind::DrmSchrodinger, Activation::Relu),
        ("elliptic:d=2,kind=variable,k=1,1", LossKind::Pinn, Activation::ReluSquared),
    ];
    for (id, kind, activation) in cases {
        let p = Problem::parse(id).unwrap();
        for s in 0..50u64 {
            let u = net(3000 + s, 2, activation);
            let cube = p.cube();
            let batch = match kind {
                LossKind::Pinn => LossBatch::Pinn(
                    PinnBatch::new(
                        off_kink(&u, sample_interior(cube, 24, 4000 + s).unwrap()),
                        off_kink(&u, sample_boundary(cube, 24, 5000 + s).unwrap()),
                    )
                    .unwrap(),
                ),
                _ => LossBatch::Interior(off_kink(&u, sample_interior(cube, 24, 4000 + s).unwrap())),
            };
            let grad = loss_gradient(kind, &u, &batch, &p).unwrap().to_flat();
            let theta = u.params_flat();
            for k in 0..theta.len() {
                let shifted = |delta: f64| {
                    let mut v = theta.clone();
                    v[k] += delta;
                    let mut w = u.clone();
                    w.set_params_flat(&v);
                    empirical_loss(&w, &p, &batch).unwrap()
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let scale = fd.abs().max(grad[k].abs()).max(1e-6);
                worst = worst.max((fd - grad[k]).abs() / scale);
            }
            pairs += 1;
        }
    }
    Outcome { pass: worst <= 1e-4, detail: format!("{pairs} (net, batch) pairs, max relative error {worst:.2e}") }
}

fn criterion_5() -> Outcome {
    let ids = [
        "elliptic:d=1,kind=laplace,k=1",
        "elliptic:d=1,kind=variable,k=2",
        "elliptic:d=2,kind=laplace,k=1,1",
        "elliptic:d=2,kind=variable,k=1,2",
        "elliptic:d=3,kind=variable,k=1,0,1",
        "elliptic:d=2,kind=variable,bump=0.5,0.5",
        "elliptic:d=1,kind=laplace,bump=0.3,width=0.2",
        "elliptic:d=2,kind=variable,k=1,1,b=0,c=2",
    ];
    let mut worst: f64 = 0.0;
    for id in ids {
        let p = Problem::parse(id).unwrap();
        let Problem::Elliptic(e) = &p else { unreachable!() };
        for s in 0..5 {
            let batch = PinnBatch::new(
                sample_interior(p.cube(), 256, 6000 + s).unwrap(),
                sample_boundary(p.cube(), 256, 7000 + s).unwrap(),
            )
            .unwrap();
            worst = worst.max(pinn_empirical(p.exact(), &batch, e).unwrap().abs());
        }
    }
    Outcome { pass: worst <= 1e-12, detail: format!("{} problems × 5 batches, max |loss| = {worst:.2e}", ids.len()) }
}

fn criterion_6() -> Outcome {
    let p = Problem::parse("poisson:d=1,k=1").unwrap();
    let Problem::Poisson(pp) = &p else { unreachable!() };
    let u = ShallowNet::random(6, 1, 3.0, Activation::Relu, 11).unwrap();
    let grid = PopulationGrids::aligned(&u, p.cube(), AxisRule::default()).unwrap().interior;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [64, 256] {
        let b = poisson_bias_check(&u, pp, n, 500, &grid, 12).unwrap();
        pass &= b.z_score() <= 3.0 && b.z_score_cv() <= 3.0;
        parts.push(format!(
            "n={n}: Var/n {:.3e}, raw {:.3e} (z={:.2}), control variate {:.3e} ± {:.1e} (z={:.2})",
            b.predicted,
            b.measured,
            b.z_score(),
            b.measured_cv,
            b.sigma_cv,
            b.z_score_cv()
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let p = Problem::parse("schrodinger:d=1,k=1,v=sine").unwrap();
    let u = ShallowNet::random(6, 1, 3.0, Activation::ReluSquared, 21).unwrap();
    let grid: Vec<usize> = (8..=14).map(|e| 1usize << e).collect();
    let r = mc_gap_slope(&u, &p, &grid, 100, AxisRule::default(), 22).unwrap();
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: (r.fit.slope + 0.5).abs() <= 0.15 && secs < 120.0,
        detail: format!("slope {:.3} ± {:.3}", r.fit.slope, r.fit.slope_se),
    }
}

fn criterion_8() -> Outcome {
    let class = random_piecewise_class(8, 2, 9, 1.0, 31);
    let audits = concentration_audit(&class, 1.0, 200, &[1.0, 2.0, 3.0], 2000, 2000, 32).unwrap();
    let pass = audits.iter().all(|a| a.violation_rate <= a.allowed_rate)
        && audits.windows(2).all(|w| w[1].violation_rate <= w[0].violation_rate);
    let rates: Vec<String> =
        audits.iter().map(|a| format!("x={}: {:.4} ≤ {:.4}", a.x, a.violation_rate, a.allowed_rate)).collect();
    Outcome { pass, detail: rates.join(", ") }
}

fn criterion_9() -> Outcome {
    let points = sample_interior(Hypercube::new(2).unwrap(), 10, 41).unwrap();
    let nets: Vec<ShallowNet> = (0..6).map(|s| net(4100 + s, 2, Activation::Relu)).collect();
    let rows: Vec<Vec<f64>> = nets
        .iter()
        .flat_map(|u| {
            let v: Vec<f64> = points.iter().map(|x| u.value(x)).collect();
            [v.clone(), v.iter().map(|a| -a).collect()]
        })
        .collect();
    let values = Array2::from_shape_fn((rows.len(), 10), |(k, i)| rows[k][i]);
    // independent enumeration over all 2^10 sign patterns
    let mut total = 0.0;
    for mask in 0u32..1 << 10 {
        let best = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(i, v)| if mask >> i & 1 == 1 { *v } else { -v }).sum::<f64>() / 10.0)
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    let exact = total / 1024.0;
    let class = ClassValues::new(vec![values]).unwrap();
    let lib_exact = enumerate_rademacher(&class).unwrap();
    let est = empirical_rademacher(&class, 4000, 42).unwrap();
    Outcome {
        pass: (est.estimate - exact).abs() <= 3.0 * est.stderr && (lib_exact - exact).abs() <= 1e-12,
        detail: format!("MC {:.5} ± {:.5} vs enumeration {exact:.5}", est.estimate, est.stderr),
    }
}

fn criterion_10() -> Outcome {
    let r = covering_scaling(&[2, 4, 8], 2, 1.0, 512, 256, 0.0025, 6, 51).unwrap();
    Outcome {
        pass: r.fit.slope > 0.0 && r.fit.p_positive < 0.05,
        detail: format!("slope {:.4} ± {:.4}, p = {:.2e}", r.fit.slope, r.fit.slope_se, r.fit.p_positive),
    }
}

fn criterion_11() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, target) in [("poisson:d=1,k=1", 0.15), ("poisson:d=2,k=1,1", 0.25)] {
        let start = Instant::now();
        let p = Problem::parse(id).unwrap();
        let kind = LossKind::for_problem(&p);
        let batch = LossBatch::sample(kind, p.cube(), 4096, 61).unwrap();
        let cfg = TrainConfig::for_problem(&p, 4096, 5000, 1e-2, 62);
        let report = train_erm(kind, &p, &batch, &cfg).unwrap();
        let grids = PopulationGrids::aligned(&report.final_net, p.cube(), AxisRule::default()).unwrap();
        let rel = relative_h1_error(&report.final_net, &p, &grids.interior);
        let secs = start.elapsed().as_secs_f64();
        pass &= rel <= target && secs < 300.0;
        parts.push(format!("{id} m={}: rel H¹ {rel:.4} (≤ {target}) in {secs:.0}s", cfg.width));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_12() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for id in ["poisson:d=1,k=1", "schrodinger:d=1,k=1,v0=1"] {
        let p = Problem::parse(id).unwrap();
        let config = SweepConfig {
            kind: LossKind::for_problem(&p),
            n_grid: vec![256, 1024, 4096],
            repeats: 5,
            template: TrainConfig::for_problem(&p, 256, 2000, 1e-2, 0),
            quadrature: AxisRule::default(),
            seed: 71,
        };
        let r = rate_sweep(&p, &config).unwrap();
        let means: Vec<String> = r.per_n.iter().map(|s| format!("{:.2e}", s.mean_excess)).collect();
        pass &= r.strictly_decreasing() && r.fit.slope < 0.0 && r.fit.p_negative < 0.05;
        parts.push(format!(
            "{id}: means [{}], slope {:.3} (p={:.1e}, reference {:.3})",
            means.join(", "),
            r.fit.slope,
            r.fit.p_negative,
            r.reference_exponent
        ));
    }
    Outcome { pass, detail: parts.join("; ") }
}

fn main() {
    let results = [
        run(1, "interpolant H¹ certificate", criterion_1),
        run(2, "Schrödinger V≡1 energy identity", criterion_2),
        run(3, "Poisson left sandwich", criterion_3),
        run(4, "loss gradients vs finite differences", criterion_4),
        run(5, "PINN loss vanishes at exact solutions", criterion_5),
        run(6, "Poisson empirical-loss bias", criterion_6),
        run(7, "Monte Carlo gap slope", criterion_7),
        run(8, "multi-task concentration audit", criterion_8),
        run(9, "Rademacher Monte Carlo vs enumeration", criterion_9),
        run(10, "covering count grows with width", criterion_10),
        run(11, "end-to-end ERM accuracy", criterion_11),
        run(12, "rate sweep monotonicity", criterion_12),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
