//! Invariant suites bundled for the command line. Each suite scores a batch
//! of random cases against an independent reference.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    concentration_audit, empirical_rademacher, enumerate_rademacher, random_piecewise_class, sandwich_check,
    ClassValues,
};
use crate::domain::{sample_boundary, sample_interior, AxisRule, Hypercube, SampleBatch};
use crate::error::{Error, Result};
use crate::eval::Evaluable;
use crate::losses::{empirical_loss, loss_gradient, LossBatch, LossKind, PinnBatch};
use crate::problems::Problem;
use crate::rng::child_seed;
use crate::shallow_nets::{Activation, ShallowNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Random nets per sandwich problem.
    pub sandwich_nets: usize,
    /// Random (net, batch) pairs per loss kind.
    pub gradient_pairs: usize,
    pub fd_step: f64,
    /// Points of the enumerated Rademacher problem (at most 24).
    pub rademacher_points: usize,
    pub rademacher_draws: usize,
    pub audit_class_size: usize,
    pub audit_tasks: usize,
    pub audit_n: usize,
    pub audit_trials: usize,
    pub audit_draws: usize,
    pub audit_xs: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sandwich_nets: 50,
            gradient_pairs: 50,
            fd_step: 1e-5,
            rademacher_points: 10,
            rademacher_draws: 4000,
            audit_class_size: 8,
            audit_tasks: 2,
            audit_n: 200,
            audit_trials: 2000,
            audit_draws: 2000,
            audit_xs: vec![1.0, 2.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub pass: bool,
    pub cases: usize,
    /// Worst observed value of the suite's statistic.
    pub worst: f64,
    /// Pass threshold for `worst`.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub suites: Vec<SuiteResult>,
    pub pass: bool,
}

/// Smallest distance kept between sample points and kink hyperplanes in the
/// gradient suite.
pub const KINK_MARGIN: f64 = 1e-3;

/// Euclidean distance from `x` to the nearest kink of `net`.
pub fn kink_distance(net: &ShallowNet, x: &[f64]) -> f64 {
    net.kinks()
        .iter()
        .map(|k| {
            let pre: f64 = k.normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + k.offset;
            pre.abs() / k.normal.iter().map(|a| a * a).sum::<f64>().sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Keeps the points of `batch` at distance at least `margin` from every kink.
pub fn drop_near_kinks(net: &ShallowNet, batch: &SampleBatch, margin: f64) -> SampleBatch {
    let d = batch.dim();
    let kept: Vec<f64> = batch.iter().filter(|x| kink_distance(net, x) >= margin).flatten().copied().collect();
    let n = kept.len() / d;
    SampleBatch::from_points(Array2::from_shape_vec((n, d), kept).expect("row-major shape"), batch.seed, batch.region)
}

/// Largest per-parameter relative error between [`loss_gradient`] and
/// central differences with step `h`, relative to
/// `max(|fd|, |grad|, 1e−6)`.
pub fn gradient_check(kind: LossKind, problem: &Problem, net: &ShallowNet, batch: &LossBatch, h: f64) -> Result<f64> {
    let grad = loss_gradient(kind, net, batch, problem)?.to_flat();
    let theta = net.params_flat();
    let mut worst: f64 = 0.0;
    for k in 0..theta.len() {
        let at = |delta: f64| -> Result<f64> {
            let mut p = theta.clone();
            p[k] += delta;
            let mut shifted = net.clone();
            shifted.set_params_flat(&p);
            empirical_loss(&shifted, problem, batch)
        };
        let fd = (at(h)? - at(-h)?) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6));
    }
    Ok(worst)
}

fn sandwich_suite(config: &VerifyConfig) -> Result<SuiteResult> {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    let ids = ["poisson:d=1,k=1", "poisson:d=2,k=1,1", "schrodinger:d=1,k=1,v0=1", "schrodinger:d=2,k=1,0,v=sine"];
    for (j, id) in ids.iter().enumerate() {
        let problem = Problem::parse(id)?;
        for s in 0..config.sandwich_nets {
            let activation = if s % 2 == 0 { Activation::Relu } else { Activation::ReluSquared };
            let seed = child_seed(config.seed, 0x5a, (j * config.sandwich_nets + s) as u64);
            let net = ShallowNet::random(6, problem.dim(), 2.0, activation, seed)?;
            let r = sandwich_check(&net, &problem, AxisRule::default())?;
            let violation = [
                Some(-r.lower_slack),
                r.upper_slack.map(|v| -v),
                r.identity_gap,
            ]
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(violation / (1.0 + r.h1_sq));
            cases += 1;
        }
    }
    Ok(SuiteResult { name: "sandwich".into(), pass: worst <= 1e-8, cases, worst, threshold: 1e-8 })
}

fn gradient_suite(config: &VerifyConfig) -> Result<SuiteResult> {
    let setups = [
        ("poisson:d=2,k=1,0", LossKind::DrmPoisson, Activation::Relu),
        ("schrodinger:d=2,k=1,1,v=sine", LossKind::DrmSchrodinger, Activation::Relu),
        ("elliptic:d=2,kind=variable,k=1,1", LossKind::Pinn, Activation::ReluSquared),
    ];
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (j, (id, kind, activation)) in setups.iter().enumerate() {
        let problem = Problem::parse(id)?;
        let cube = problem.cube();
        for s in 0..config.gradient_pairs {
            let seed = child_seed(config.seed, 0x67 + j as u64, s as u64);
            let net = ShallowNet::random(5, cube.dim(), 2.0, *activation, seed)?;
            let interior = drop_near_kinks(&net, &sample_interior(cube, 24, child_seed(seed, 1, 0))?, KINK_MARGIN);
            let batch = match kind {
                LossKind::Pinn => {
                    let boundary = sample_boundary(cube, 24, child_seed(seed, 2, 0))?;
                    LossBatch::Pinn(PinnBatch::new(interior, drop_near_kinks(&net, &boundary, KINK_MARGIN))?)
                }
                _ => LossBatch::Interior(interior),
            };
            worst = worst.max(gradient_check(*kind, &problem, &net, &batch, config.fd_step)?);
            cases += 1;
        }
    }
    Ok(SuiteResult { name: "gradients".into(), pass: worst <= 1e-4, cases, worst, threshold: 1e-4 })
}

fn rademacher_suite(config: &VerifyConfig) -> Result<SuiteResult> {
    let n = config.rademacher_points;
    let points = sample_interior(Hypercube::new(2)?, n, child_seed(config.seed, 0x72, 0))?;
    let mut rows = Vec::new();
    for s in 0..6 {
        let net = ShallowNet::random(6, 2, 2.0, Activation::Relu, child_seed(config.seed, 0x72, 1 + s))?;
        let v: Vec<f64> = points.iter().map(|x| net.value(x)).collect();
        rows.push(v.iter().map(|a| -a).collect::<Vec<_>>());
        rows.push(v);
    }
    let values = Array2::from_shape_fn((rows.len(), n), |(k, i)| rows[k][i]);
    let class = ClassValues::new(vec![values])?;
    let exact = enumerate_rademacher(&class)?;
    let est = empirical_rademacher(&class, config.rademacher_draws, child_seed(config.seed, 0x72, 99))?;
    let z = (est.estimate - exact).abs() / est.stderr;
    Ok(SuiteResult { name: "rademacher_enumeration".into(), pass: z <= 3.0, cases: 1, worst: z, threshold: 3.0 })
}

fn audit_suite(config: &VerifyConfig) -> Result<SuiteResult> {
    let class = random_piecewise_class(config.audit_class_size, config.audit_tasks, 9, 1.0, child_seed(config.seed, 0x61, 0));
    let audits = concentration_audit(
        &class,
        1.0,
        config.audit_n,
        &config.audit_xs,
        config.audit_trials,
        config.audit_draws,
        child_seed(config.seed, 0x61, 1),
    )?;
    let worst = audits.iter().map(|a| a.violation_rate - a.allowed_rate).fold(f64::NEG_INFINITY, f64::max);
    Ok(SuiteResult { name: "concentration_audit".into(), pass: worst <= 0.0, cases: audits.len(), worst, threshold: 0.0 })
}

/// Runs every suite. Configuration errors surface as `Err`; suite failures
/// are reported through `pass` flags.
pub fn run_verify(config: &VerifyConfig) -> Result<VerifyReport> {
    if config.sandwich_nets == 0 || config.gradient_pairs == 0 || config.audit_xs.is_empty() {
        return Err(Error::InvalidArgument("every suite needs at least one case".into()));
    }
    if !(config.fd_step > 0.0) {
        return Err(Error::InvalidArgument("fd_step must be positive".into()));
    }
    let suites = vec![
        sandwich_suite(config)?,
        gradient_suite(config)?,
        rademacher_suite(config)?,
        audit_suite(config)?,
    ];
    let pass = suites.iter().all(|s| s.pass);
    Ok(VerifyReport { config: config.clone(), suites, pass })
}
