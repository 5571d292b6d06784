//! Projected first-order ERM over a fixed sample batch.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{loss_and_gradient, LossBatch, LossKind};
use crate::problems::Problem;
use crate::shallow_nets::{Activation, ShallowNet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Optimizer {
    PlainGd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Schedule {
    #[default]
    Constant,
    /// `η_t = η·(f + (1 − f)·½(1 + cos(π t / steps)))` with `f = min_fraction`.
    Cosine { min_fraction: f64 },
}

impl Schedule {
    pub fn rate(&self, base: f64, step: usize, steps: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::Cosine { min_fraction } => {
                let phase = step as f64 / steps.max(1) as f64;
                base * (min_fraction + (1.0 - min_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * phase).cos()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub steps: usize,
    #[serde(default)]
    pub optimizer: Optimizer,
    pub step_size: f64,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default = "one")]
    pub project_every: usize,
    pub seed: u64,
    /// Network width `m`.
    pub width: usize,
    pub budget: f64,
    pub activation: Activation,
}

fn one() -> usize {
    1
}

impl TrainConfig {
    /// Adam with a constant step on ReLU² units. The width follows
    /// [`width_rule`]; the budget is the problem's declared Barron norm, or 5
    /// when none is declared.
    pub fn for_problem(problem: &Problem, n: usize, steps: usize, step_size: f64, seed: u64) -> Self {
        TrainConfig {
            steps,
            optimizer: Optimizer::default(),
            step_size,
            schedule: Schedule::Constant,
            project_every: 1,
            seed,
            width: width_rule(n, problem.dim()),
            budget: problem.declared_barron_norm().unwrap_or(5.0),
            activation: Activation::ReluSquared,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be >= 1".into()));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidArgument(format!("step_size must be finite and >= 0, got {}", self.step_size)));
        }
        if self.project_every == 0 {
            return Err(Error::InvalidArgument("project_every must be >= 1".into()));
        }
        if self.width == 0 {
            return Err(Error::InvalidArgument("width must be >= 1".into()));
        }
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return Err(Error::InvalidArgument(format!("budget must be finite and >= 0, got {}", self.budget)));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
                return Err(Error::InvalidArgument("adam needs beta1, beta2 in [0,1) and eps > 0".into()));
            }
        }
        if let Schedule::Cosine { min_fraction } = self.schedule {
            if !(0.0..=1.0).contains(&min_fraction) {
                return Err(Error::InvalidArgument("cosine min_fraction must lie in [0,1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Best feasible iterate found.
    pub final_net: ShallowNet,
    /// Empirical loss of every iterate, initial one included (`steps + 1` values).
    pub loss_trace: Vec<f64>,
    /// Running minimum over feasible iterates.
    pub best_trace: Vec<f64>,
    pub best_step: usize,
    pub wall_time_secs: f64,
    pub config: TrainConfig,
    pub sample_seed: u64,
    /// Direction rows reset to `e_1` by projection, summed over the run.
    pub reset_rows: usize,
}

impl TrainReport {
    /// `step,loss` rows with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.loss_trace.iter().enumerate() {
            out.push_str(&format!("{i},{l:.16e}\n"));
        }
        out
    }

    pub fn best_loss(&self) -> f64 {
        *self.best_trace.last().expect("trace is never empty")
    }
}

/// `m = round((n/d)^{3d/(2(3d+1))})`, at least 1.
pub fn width_rule(n: usize, d: usize) -> usize {
    let d = d.max(1) as f64;
    let exponent = 3.0 * d / (2.0 * (3.0 * d + 1.0));
    let base = (n as f64 / d).max(1.0);
    (base.powf(exponent).round() as usize).max(1)
}

/// Feasible random network; see [`ShallowNet::random`].
pub fn init_network(width: usize, dim: usize, budget: f64, activation: Activation, seed: u64) -> Result<ShallowNet> {
    ShallowNet::random(width, dim, budget, activation, seed)
}

/// Gap above the initial loss at which a run counts as diverged.
fn divergence_threshold(initial: f64) -> f64 {
    10.0 * initial.abs().max(1.0)
}

/// Minimizes the empirical loss over the constrained class on one fixed batch.
pub fn train_erm(kind: LossKind, problem: &Problem, batch: &LossBatch, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    let start = Instant::now();
    let init = init_network(config.width, problem.dim(), config.budget, config.activation, config.seed)?;
    let mut net = init.project().net;
    let (mut loss, mut grad) = loss_and_gradient(kind, &net, batch, problem)?;
    let initial = loss;
    if !initial.is_finite() {
        return Err(Error::Diverged { step: 0, loss: initial, initial });
    }
    let mut loss_trace = Vec::with_capacity(config.steps + 1);
    let mut best_trace = Vec::with_capacity(config.steps + 1);
    loss_trace.push(loss);
    best_trace.push(loss);
    let mut best = (loss, net.clone(), 0usize);
    let mut reset_rows = 0;

    let p = net.param_count();
    let mut m1 = vec![0.0; p];
    let mut m2 = vec![0.0; p];
    for step in 1..=config.steps {
        let lr = config.schedule.rate(config.step_size, step - 1, config.steps);
        let g = grad.to_flat();
        let delta: Vec<f64> = match config.optimizer {
            Optimizer::PlainGd => g,
            Optimizer::Adam { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(step as i32);
                let c2 = 1.0 - beta2.powi(step as i32);
                (0..p)
                    .map(|k| {
                        m1[k] = beta1 * m1[k] + (1.0 - beta1) * g[k];
                        m2[k] = beta2 * m2[k] + (1.0 - beta2) * g[k] * g[k];
                        (m1[k] / c1) / ((m2[k] / c2).sqrt() + eps)
                    })
                    .collect()
            }
        };
        net.apply_flat_update(&delta, -lr);
        let feasible = if step % config.project_every == 0 {
            let projection = net.project();
            reset_rows += projection.reset_rows.len();
            net = projection.net;
            true
        } else {
            net.is_feasible()
        };
        (loss, grad) = loss_and_gradient(kind, &net, batch, problem)?;
        if !loss.is_finite() || loss - initial > divergence_threshold(initial) {
            return Err(Error::Diverged { step, loss, initial });
        }
        loss_trace.push(loss);
        if feasible && loss < best.0 {
            best = (loss, net.clone(), step);
        }
        best_trace.push(best.0);
    }
    Ok(TrainReport {
        final_net: best.1,
        loss_trace,
        best_trace,
        best_step: best.2,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: config.clone(),
        sample_seed: batch.interior().seed,
        reset_rows,
    })
}
