//! The four subcommands. Each resolves its config, computes, writes outputs
//! under the output directory and reports whether its checks passed.

use std::path::{Path, PathBuf};

use ritz_core::analysis::{h1_error, rate_sweep, relative_h1_error, RateReport, SweepConfig};
use ritz_core::constructor::{build_interpolant_relu, certify_h1_error, h1_certificate, Curve1D};
use ritz_core::domain::AxisRule;
use ritz_core::losses::{energy_excess, LossBatch, LossKind, PopulationGrids};
use ritz_core::problems::Problem;
use ritz_core::shallow_nets::Activation;
use ritz_core::trainer::{train_erm, width_rule, Optimizer, Schedule, TrainConfig, TrainReport};
use ritz_core::verify::{run_verify, VerifyConfig};
use ritz_core::Error;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Outcome of a command that ran to completion.
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot serialize output: {e}")))
}

/// Core errors raised while checking a config are usage errors; the rest are
/// runtime failures.
fn config_err(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn default_curves() -> Vec<String> {
    Curve1D::corpus().iter().map(|c| c.name().to_string()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxConfig {
    pub curves: Vec<String>,
    pub widths: Vec<usize>,
    /// Gauss–Legendre nodes used by the error certificate.
    pub nodes: usize,
    pub seed: u64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self { curves: default_curves(), widths: vec![4, 8, 16, 32, 64], nodes: 4096, seed: 0 }
    }
}

pub fn approx_check(config: &ApproxConfig, out: &Path) -> Result<Outcome, CliError> {
    if config.curves.is_empty() || config.widths.is_empty() {
        return Err(CliError::Config("approx-check needs at least one curve and one width".into()));
    }
    let curves = config
        .curves
        .iter()
        .map(|name| Curve1D::by_name(name).ok_or_else(|| CliError::Config(format!("unknown curve {name:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    if config.widths.contains(&0) {
        return Err(CliError::Config("widths must be >= 1".into()));
    }
    let mut csv = String::from("curve,m,bound,measured,pass\n");
    let mut failures = 0;
    for curve in &curves {
        for &m in &config.widths {
            let net = build_interpolant_relu(curve, m).map_err(runtime_err)?;
            let measured = certify_h1_error(&net, curve, config.nodes).map_err(config_err)?;
            let bound = h1_certificate(curve.sup_bound(), m);
            let pass = measured <= bound;
            failures += usize::from(!pass);
            csv.push_str(&format!("{},{m},{bound:.16e},{measured:.16e},{pass}\n", curve.name()));
        }
    }
    let rows = curves.len() * config.widths.len();
    Ok(Outcome {
        pass: failures == 0,
        summary: format!("approx-check: {} of {rows} rows within the certificate", rows - failures),
        files: vec![write(out, "approx_check.csv", &csv)?],
    })
}

fn default_problem() -> String {
    "poisson:d=1,k=1".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCommandConfig {
    pub problem: String,
    pub n: usize,
    pub steps: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub project_every: usize,
    /// Defaults to the width rule for `n`.
    pub width: Option<usize>,
    /// Defaults to the problem's declared Barron norm.
    pub budget: Option<f64>,
    /// Activation order, 1 or 2 (default 2).
    pub activation: Option<Activation>,
    pub seed: u64,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        Self {
            problem: default_problem(),
            n: 4096,
            steps: 5000,
            step_size: 1e-2,
            optimizer: Optimizer::default(),
            schedule: Schedule::default(),
            project_every: 1,
            width: None,
            budget: None,
            activation: None,
            seed: 0,
        }
    }
}

impl TrainCommandConfig {
    fn train_config(&self, problem: &Problem, n: usize) -> TrainConfig {
        let mut cfg = TrainConfig::for_problem(problem, n, self.steps, self.step_size, self.seed);
        cfg.optimizer = self.optimizer;
        cfg.schedule = self.schedule;
        cfg.project_every = self.project_every;
        cfg.width = self.width.unwrap_or(width_rule(n, problem.dim()));
        if let Some(budget) = self.budget {
            cfg.budget = budget;
        }
        if let Some(activation) = self.activation {
            cfg.activation = activation;
        }
        cfg
    }
}

#[derive(Debug, Clone, Serialize)]
struct TrainOutput<'a> {
    problem: &'a str,
    n: usize,
    h1_error: f64,
    relative_h1_error: f64,
    energy_excess: Option<f64>,
    report: &'a TrainReport,
}

fn check_kind(kind: LossKind, activation: Activation) -> Result<(), CliError> {
    if kind.requires_order2() && activation != Activation::ReluSquared {
        return Err(CliError::Config(format!("the {} loss needs activation order 2", kind.name())));
    }
    Ok(())
}

pub fn train(config: &TrainCommandConfig, out: &Path) -> Result<Outcome, CliError> {
    let problem = Problem::parse(&config.problem).map_err(config_err)?;
    let kind = LossKind::for_problem(&problem);
    let cfg = config.train_config(&problem, config.n);
    cfg.validate().map_err(config_err)?;
    check_kind(kind, cfg.activation)?;
    if config.n == 0 {
        return Err(CliError::Config("n must be >= 1".into()));
    }
    let batch = LossBatch::sample(kind, problem.cube(), config.n, config.seed).map_err(config_err)?;
    let report = train_erm(kind, &problem, &batch, &cfg).map_err(runtime_err)?;
    let grids = PopulationGrids::aligned(&report.final_net, problem.cube(), AxisRule::default()).map_err(runtime_err)?;
    let ritz = !matches!(problem, Problem::Elliptic(_));
    let output = TrainOutput {
        problem: &config.problem,
        n: config.n,
        h1_error: h1_error(&report.final_net, &problem, &grids.interior),
        relative_h1_error: relative_h1_error(&report.final_net, &problem, &grids.interior),
        energy_excess: ritz.then(|| energy_excess(&report.final_net, &problem, &grids)),
        report: &report,
    };
    let files = vec![write(out, "train_report.json", &to_json(&output)?)?, write(out, "train_trace.csv", &report.trace_csv())?];
    Ok(Outcome {
        pass: true,
        summary: format!(
            "train: best loss {:.6e} at step {}, relative H1 error {:.4e}",
            report.best_loss(),
            report.best_step,
            output.relative_h1_error
        ),
        files,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepCommandConfig {
    pub problem: String,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub steps: usize,
    pub step_size: f64,
    pub optimizer: Optimizer,
    pub schedule: Schedule,
    pub project_every: usize,
    pub budget: Option<f64>,
    pub activation: Option<Activation>,
    pub quadrature: AxisRule,
    pub seed: u64,
}

impl Default for SweepCommandConfig {
    fn default() -> Self {
        Self {
            problem: default_problem(),
            n_grid: vec![256, 1024, 4096],
            repeats: 5,
            steps: 2000,
            step_size: 1e-2,
            optimizer: Optimizer::default(),
            schedule: Schedule::default(),
            project_every: 1,
            budget: None,
            activation: None,
            quadrature: AxisRule::default(),
            seed: 0,
        }
    }
}

pub fn sweep(config: &SweepCommandConfig, out: &Path) -> Result<Outcome, CliError> {
    let problem = Problem::parse(&config.problem).map_err(config_err)?;
    let kind = LossKind::for_problem(&problem);
    let first = *config.n_grid.first().ok_or_else(|| CliError::Config("n_grid must not be empty".into()))?;
    let train = TrainCommandConfig {
        problem: config.problem.clone(),
        n: first,
        steps: config.steps,
        step_size: config.step_size,
        optimizer: config.optimizer,
        schedule: config.schedule,
        project_every: config.project_every,
        width: None,
        budget: config.budget,
        activation: config.activation,
        seed: 0,
    };
    let template = train.train_config(&problem, first);
    template.validate().map_err(config_err)?;
    check_kind(kind, template.activation)?;
    let sweep_config = SweepConfig {
        kind,
        n_grid: config.n_grid.clone(),
        repeats: config.repeats,
        template,
        quadrature: config.quadrature,
        seed: config.seed,
    };
    let report: RateReport = match rate_sweep(&problem, &sweep_config) {
        Err(e @ Error::InvalidArgument(_)) => return Err(config_err(e)),
        other => other.map_err(runtime_err)?,
    };
    let files = vec![write(out, "rate_report.json", &to_json(&report)?)?, write(out, "rate_cells.csv", &report.cells_csv())?];
    Ok(Outcome {
        pass: true,
        summary: format!(
            "rate-sweep: slope {:.4} ± {:.4} (one-sided p {:.3e}), reference exponent {:.4}",
            report.fit.slope, report.fit.slope_se, report.fit.p_negative, report.reference_exponent
        ),
        files,
    })
}

pub fn verify(config: &VerifyConfig, out: &Path) -> Result<Outcome, CliError> {
    let report = match run_verify(config) {
        Err(e @ Error::InvalidArgument(_)) => return Err(config_err(e)),
        other => other.map_err(runtime_err)?,
    };
    let failed: Vec<&str> = report.suites.iter().filter(|s| !s.pass).map(|s| s.name.as_str()).collect();
    Ok(Outcome {
        pass: report.pass,
        summary: if failed.is_empty() {
            format!("verify: all {} suites passed", report.suites.len())
        } else {
            format!("verify: failed suites: {}", failed.join(", "))
        },
        files: vec![write(out, "verify_report.json", &to_json(&report)?)?],
    })
}
