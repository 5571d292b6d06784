//! Error metrics and statistical estimators.
//!
//! - Sobolev distances by quadrature ([`h1_error`], [`h2_error`]).
//! - Energy sandwiches relating the energy excess to the squared H¹ distance
//!   ([`sandwich_check`]).
//! - Multi-task Rademacher complexity of a finite class, by Monte Carlo over
//!   signs or by exhaustive enumeration.
//! - An audit of the multi-task Talagrand-type inequality at `α = 1`:
//!   `sup_f (Pf − P_N f) ≤ 4R + 2√(xr/(nT)) + 5bx/(nT)` with probability at
//!   least `1 − e^{−x}`.
//! - Greedy empirical covering numbers in `L²(P_n)`.
//! - Rate sweeps and Monte Carlo gap slopes, including the bias of the
//!   empirical Poisson loss.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{sample_interior, AxisRule, Hypercube, QuadratureGrid, SampleBatch};
use crate::error::{Error, Result};
use crate::eval::Evaluable;
use crate::losses::{
    drm_poisson_empirical, drm_poisson_population, empirical_loss, energy_excess, population_loss, LossBatch,
    LossKind, PopulationGrids,
};
use crate::problems::{PoissonProblem, Problem};
use crate::rng::{child_seed, stream};
use crate::shallow_nets::{Activation, ShallowNet};
use crate::stats::{self, linear_fit, LinearFit};
use crate::sum::pairwise_sum;
use crate::trainer::{train_erm, width_rule, TrainConfig};

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `(∫(u − v)² + |∇u − ∇v|²)^{1/2}` on the grid.
pub fn h1_distance<U, V>(u: &U, v: &V, grid: &QuadratureGrid) -> f64
where
    U: Evaluable + ?Sized,
    V: Evaluable + ?Sized,
{
    grid.integrate(|x| (u.value(x) - v.value(x)).powi(2) + diff_sq(&u.gradient(x), &v.gradient(x)))
        .max(0.0)
        .sqrt()
}

/// H¹ distance with the Frobenius-squared Hessian difference added.
pub fn h2_distance<U, V>(u: &U, v: &V, grid: &QuadratureGrid) -> f64
where
    U: Evaluable + ?Sized,
    V: Evaluable + ?Sized,
{
    grid.integrate(|x| {
        let hess: f64 = (u.hessian(x) - v.hessian(x)).iter().map(|h| h * h).sum();
        (u.value(x) - v.value(x)).powi(2) + diff_sq(&u.gradient(x), &v.gradient(x)) + hess
    })
    .max(0.0)
    .sqrt()
}

pub fn h1_error<U: Evaluable + ?Sized>(u: &U, problem: &Problem, grid: &QuadratureGrid) -> f64 {
    h1_distance(u, problem.exact(), grid)
}

pub fn h2_error<U: Evaluable + ?Sized>(u: &U, problem: &Problem, grid: &QuadratureGrid) -> f64 {
    h2_distance(u, problem.exact(), grid)
}

/// `‖u − u*‖_{H¹} / ‖u*‖_{H¹}`.
pub fn relative_h1_error<U: Evaluable + ?Sized>(u: &U, problem: &Problem, grid: &QuadratureGrid) -> f64 {
    let exact = problem.exact();
    let norm = grid.integrate(|x| exact.value(x).powi(2) + exact.gradient(x).iter().map(|g| g * g).sum::<f64>());
    h1_error(u, problem, grid) / norm.sqrt()
}

/// Energy sandwich evaluated for one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// `E(u) − E(u*)`.
    pub excess: f64,
    /// `‖u − u*‖²_{H¹}`.
    pub h1_sq: f64,
    /// Poisson: `‖e‖² − excess`. Schrödinger: `‖e‖² − excess/max(1, V_max)`.
    pub lower_slack: f64,
    /// Schrödinger only: `excess/min(1, V_min) − ‖e‖²`.
    pub upper_slack: Option<f64>,
    /// Schrödinger with `min(1,V_min) = max(1,V_max)`: `|excess − ‖e‖²|`.
    pub identity_gap: Option<f64>,
    /// Tolerance used: `1e−8·(1 + ‖e‖²)`.
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks the constant-free energy sandwiches on aligned quadrature grids.
///
/// Poisson: `E_P(u) − E_P(u*) ≤ ‖u − u*‖²_{H¹}`. Schrödinger:
/// `excess / max(1, V_max) ≤ ‖u − u*‖²_{H¹} ≤ excess / min(1, V_min)`.
pub fn sandwich_check<U: Evaluable + ?Sized>(u: &U, problem: &Problem, rule: AxisRule) -> Result<SandwichReport> {
    let grids = PopulationGrids::aligned(u, problem.cube(), rule)?;
    let excess = energy_excess(u, problem, &grids);
    let h1_sq = h1_error(u, problem, &grids.interior).powi(2);
    let tolerance = 1e-8 * (1.0 + h1_sq);
    match problem {
        Problem::Poisson(_) => {
            let lower_slack = h1_sq - excess;
            Ok(SandwichReport {
                excess,
                h1_sq,
                lower_slack,
                upper_slack: None,
                identity_gap: None,
                tolerance,
                holds: lower_slack >= -tolerance && excess >= -tolerance,
            })
        }
        Problem::Schrodinger(p) => {
            let lo = p.v_min().min(1.0);
            let hi = p.v_max().max(1.0);
            let lower_slack = h1_sq - excess / hi;
            let upper_slack = excess / lo - h1_sq;
            let identity_gap = (lo == hi).then(|| (excess - h1_sq).abs());
            let holds = lower_slack >= -tolerance
                && upper_slack >= -tolerance
                && identity_gap.is_none_or(|g| g <= tolerance);
            Ok(SandwichReport { excess, h1_sq, lower_slack, upper_slack: Some(upper_slack), identity_gap, tolerance, holds })
        }
        Problem::Elliptic(_) => Err(Error::InvalidArgument("energy sandwiches apply to the Ritz problems only".into())),
    }
}

/// Values of a finite vector-valued class: `tasks[t][[k, i]] = f_{k,t}(X_t^i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassValues {
    pub tasks: Vec<Array2<f64>>,
}

impl ClassValues {
    pub fn new(tasks: Vec<Array2<f64>>) -> Result<Self> {
        let first = tasks.first().ok_or_else(|| Error::InvalidArgument("at least one task is required".into()))?;
        let k = first.nrows();
        if k == 0 {
            return Err(Error::InvalidArgument("class must be non-empty".into()));
        }
        for t in &tasks {
            if t.nrows() != k {
                return Err(Error::DimensionMismatch { expected: k, got: t.nrows() });
            }
            if t.ncols() == 0 {
                return Err(Error::EmptyBatch);
            }
        }
        Ok(Self { tasks })
    }

    /// Single-task values of scalar fields on a batch.
    pub fn from_fields(members: &[&dyn Evaluable], batch: &SampleBatch) -> Result<Self> {
        let values = Array2::from_shape_fn((members.len(), batch.len()), |(k, i)| members[k].value(batch.point(i)));
        Self::new(vec![values])
    }

    pub fn class_size(&self) -> usize {
        self.tasks[0].nrows()
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn total_points(&self) -> usize {
        self.tasks.iter().map(|t| t.ncols()).sum()
    }

    /// `sup_k (1/T) Σ_t (1/N_t) Σ_i σ_t^i f_{k,t}(X_t^i)` for flattened signs.
    fn sup_correlation(&self, signs: &[f64]) -> f64 {
        let t_count = self.task_count() as f64;
        let mut best = f64::NEG_INFINITY;
        for k in 0..self.class_size() {
            let mut offset = 0;
            let mut total = 0.0;
            for task in &self.tasks {
                let n = task.ncols();
                let row = task.row(k);
                let s: f64 = row.iter().zip(&signs[offset..offset + n]).map(|(v, s)| v * s).sum();
                total += s / n as f64;
                offset += n;
            }
            best = best.max(total / t_count);
        }
        best
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self { tasks: self.tasks.iter().map(|t| t * lambda).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub draws: usize,
}

/// Monte Carlo estimate of the (conditional) multi-task Rademacher
/// complexity of a finite class over fixed points. A lower-bound estimator of
/// the complexity of any larger class containing the sample.
pub fn empirical_rademacher(class: &ClassValues, sign_draws: usize, seed: u64) -> Result<RademacherEstimate> {
    if sign_draws < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 sign draws, got {sign_draws}")));
    }
    let total = class.total_points();
    let sups: Vec<f64> = (0..sign_draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(child_seed(seed, 0x7261, j as u64), 0);
            let signs: Vec<f64> = (0..total).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            class.sup_correlation(&signs)
        })
        .collect();
    Ok(RademacherEstimate { estimate: stats::mean(&sups), stderr: stats::std_error(&sups), draws: sign_draws })
}

/// Largest point count accepted by [`enumerate_rademacher`].
pub const MAX_ENUMERATION_POINTS: usize = 24;

/// Exact conditional Rademacher complexity by enumerating all `2^N` sign
/// patterns.
pub fn enumerate_rademacher(class: &ClassValues) -> Result<f64> {
    let total = class.total_points();
    if total > MAX_ENUMERATION_POINTS {
        return Err(Error::InvalidArgument(format!("enumeration limited to {MAX_ENUMERATION_POINTS} points, got {total}")));
    }
    let sups: Vec<f64> = (0..1u64 << total)
        .into_par_iter()
        .map(|mask| {
            let signs: Vec<f64> = (0..total).map(|i| if (mask >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
            class.sup_correlation(&signs)
        })
        .collect();
    Ok(pairwise_sum(&sups) / (1u64 << total) as f64)
}

/// Piecewise-linear function on `[0,1]` with uniform knots `j/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidArgument("piecewise-linear functions need at least two knots".into()));
        }
        Ok(Self { values })
    }

    fn segments(&self) -> usize {
        self.values.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let q = self.segments();
        let s = (x.clamp(0.0, 1.0) * q as f64).min(q as f64);
        let j = (s.floor() as usize).min(q - 1);
        let frac = s - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    /// `∫_0^1 f` (trapezoid rule, exact).
    pub fn integral(&self) -> f64 {
        let h = 1.0 / self.segments() as f64;
        self.values.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
    }

    /// `∫_0^1 f²` (exact per segment).
    pub fn integral_sq(&self) -> f64 {
        let h = 1.0 / self.segments() as f64;
        self.values.windows(2).map(|w| h * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]) / 3.0).sum()
    }

    pub fn variance(&self) -> f64 {
        (self.integral_sq() - self.integral().powi(2)).max(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `count` random vector-valued members, each with `tasks` piecewise-linear
/// components with `knots` knots and values uniform in `[0, b]`.
pub fn random_piecewise_class(count: usize, tasks: usize, knots: usize, b: f64, seed: u64) -> Vec<Vec<PiecewiseLinear>> {
    let mut rng = stream(seed, 0x706c);
    (0..count)
        .map(|_| {
            (0..tasks)
                .map(|_| PiecewiseLinear { values: (0..knots).map(|_| rng.random_range(0.0..=b)).collect() })
                .collect()
        })
        .collect()
}

/// Result of auditing the concentration inequality at one confidence level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationAudit {
    pub class_size: usize,
    pub tasks: usize,
    pub n: usize,
    pub x: f64,
    pub trials: usize,
    pub violations: usize,
    pub violation_rate: f64,
    /// `e^{−x}`.
    pub allowed_rate: f64,
    /// Estimated Rademacher complexity plus three standard errors.
    pub rademacher_term: f64,
    pub rademacher_stderr: f64,
    /// `(1/T) sup_f Σ_t Var f_t`.
    pub variance_proxy: f64,
    pub range: f64,
    pub bound: f64,
    /// Mean of `sup_f (Pf − P_N f)` over trials.
    pub mean_deviation: f64,
}

/// `4R + 2√(xr/(nT)) + 5bx/(nT)`.
pub fn concentration_bound(rademacher: f64, r: f64, b: f64, x: f64, n: usize, tasks: usize) -> f64 {
    let nt = (n * tasks) as f64;
    4.0 * rademacher + 2.0 * (x * r / nt).sqrt() + 5.0 * b * x / nt
}

/// Audits the inequality for a finite class of piecewise-linear task
/// functions with uniform task distributions on `[0,1]`.
///
/// `R` is estimated once from `rademacher_draws` independent (sample, sign)
/// draws and replaced by `mean + 3·stderr`. The same `trials` deviation draws
/// are scored against every `x`, so the violation rate is monotone in `x`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_audit(
    class: &[Vec<PiecewiseLinear>],
    b: f64,
    n: usize,
    xs: &[f64],
    trials: usize,
    rademacher_draws: usize,
    seed: u64,
) -> Result<Vec<ConcentrationAudit>> {
    let tasks = class.first().map(|f| f.len()).unwrap_or(0);
    if class.is_empty() || tasks == 0 || class.iter().any(|f| f.len() != tasks) {
        return Err(Error::InvalidArgument("class must be a non-empty list of equal-length task vectors".into()));
    }
    if n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("n and trials must be >= 1".into()));
    }
    if rademacher_draws < 100 {
        return Err(Error::InvalidArgument("need at least 100 Rademacher draws".into()));
    }
    for f in class.iter().flatten() {
        if !(f.min_value() >= 0.0 && f.max_abs() <= b) || !f.values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!("class member leaves the range [0, {b}]")));
        }
    }
    let t_count = tasks as f64;
    let means: Vec<f64> = class.iter().map(|f| f.iter().map(|ft| ft.integral()).sum::<f64>() / t_count).collect();
    let r = class.iter().map(|f| f.iter().map(|ft| ft.variance()).sum::<f64>()).fold(0.0, f64::max) / t_count;

    let draw_points = |rng: &mut crate::rng::Rng| -> Vec<Vec<f64>> {
        (0..tasks).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect()
    };

    let rad: Vec<f64> = (0..rademacher_draws)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(child_seed(seed, 1, j as u64), 0);
            let pts = draw_points(&mut rng);
            let signs: Vec<Vec<f64>> =
                (0..tasks).map(|_| (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()).collect();
            class
                .iter()
                .map(|f| {
                    (0..tasks)
                        .map(|t| pts[t].iter().zip(&signs[t]).map(|(x, s)| s * f[t].eval(*x)).sum::<f64>() / n as f64)
                        .sum::<f64>()
                        / t_count
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let rad_mean = stats::mean(&rad);
    let rad_se = stats::std_error(&rad);
    let rademacher_term = rad_mean + 3.0 * rad_se;

    let deviations: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(child_seed(seed, 2, j as u64), 0);
            let pts = draw_points(&mut rng);
            class
                .iter()
                .zip(&means)
                .map(|(f, pf)| {
                    let pn = (0..tasks).map(|t| pts[t].iter().map(|x| f[t].eval(*x)).sum::<f64>() / n as f64).sum::<f64>()
                        / t_count;
                    pf - pn
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let mean_deviation = stats::mean(&deviations);

    Ok(xs
        .iter()
        .map(|&x| {
            let bound = concentration_bound(rademacher_term, r, b, x, n, tasks);
            let violations = deviations.iter().filter(|&&d| d > bound).count();
            ConcentrationAudit {
                class_size: class.len(),
                tasks,
                n,
                x,
                trials,
                violations,
                violation_rate: violations as f64 / trials as f64,
                allowed_rate: (-x).exp(),
                rademacher_term,
                rademacher_stderr: rad_se,
                variance_proxy: r,
                range: b,
                bound,
                mean_deviation,
            }
        })
        .collect())
}

/// Size of a greedy farthest-point `ε`-net of the rows of `vectors` in the
/// empirical metric `(1/n Σ_i (a_i − b_i)²)^{1/2}`. Every row ends within `ε`
/// of a chosen center.
pub fn empirical_covering(vectors: &Array2<f64>, epsilon: f64) -> usize {
    let (s, n) = vectors.dim();
    if s == 0 {
        return 0;
    }
    let dist = |a: usize, b: usize| -> f64 {
        let ra = vectors.row(a);
        let rb = vectors.row(b);
        (ra.iter().zip(rb.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let mut nearest: Vec<f64> = (0..s).map(|i| dist(0, i)).collect();
    let mut centers = 1;
    loop {
        let (far, d) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &d)| if d > acc.1 { (i, d) } else { acc });
        if d <= epsilon {
            return centers;
        }
        centers += 1;
        let updated: Vec<f64> = (0..s).into_par_iter().map(|i| nearest[i].min(dist(far, i))).collect();
        nearest = updated;
    }
}

/// Networks of `F_{m,1}(B)` with `γ = B·U·(±w_1, …, ±w_m)`, `U` uniform on
/// `[0,1]`, `w ~ Dirichlet(1/m, …, 1/m)` and independent fair signs. Merging
/// the units of a width-`2m` draw in pairs gives the width-`m` law, so the
/// samples are nested in `m` and `E Σ γ_i²` does not shrink as `m` grows.
/// Directions and biases are drawn as in [`ShallowNet::random`].
pub fn sample_class_nets(width: usize, dim: usize, budget: f64, count: usize, seed: u64) -> Result<Vec<ShallowNet>> {
    if width == 0 {
        return Err(Error::InvalidArgument("width must be >= 1".into()));
    }
    let shape = Gamma::new(1.0 / width as f64, 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    (0..count)
        .map(|j| {
            let s = child_seed(seed, width as u64, j as u64);
            let base = ShallowNet::random(width, dim, budget, Activation::Relu, s)?;
            let mut rng = stream(s, 0x6c31);
            let draws: Vec<f64> = (0..width).map(|_| shape.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            let radius = budget * rng.random::<f64>();
            let gamma: Vec<f64> = draws
                .iter()
                .map(|w| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    if total > 0.0 { sign * radius * w / total } else { 0.0 }
                })
                .collect();
            ShallowNet::new(Activation::Relu, gamma, base.directions().clone(), base.biases().to_vec(), budget)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub width: usize,
    pub replicate: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub epsilon: f64,
    pub sample_size: usize,
    pub rows: Vec<CoveringRow>,
    /// Fit of `log N` against `m` over all rows.
    pub fit: LinearFit,
}

/// Greedy covering counts of `sample_size` sampled nets for each width, on a
/// fixed batch of `points` interior points, repeated with independent
/// samples.
#[allow(clippy::too_many_arguments)]
pub fn covering_scaling(
    widths: &[usize],
    dim: usize,
    budget: f64,
    sample_size: usize,
    points: usize,
    epsilon: f64,
    replicates: usize,
    seed: u64,
) -> Result<CoveringReport> {
    let batch = sample_interior(Hypercube::new(dim)?, points, child_seed(seed, 0, 0))?;
    let jobs: Vec<(usize, usize)> = widths.iter().flat_map(|&m| (0..replicates).map(move |r| (m, r))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, r)| {
            let nets = sample_class_nets(m, dim, budget, sample_size, child_seed(seed, 1 + r as u64, m as u64))?;
            let values = Array2::from_shape_fn((nets.len(), batch.len()), |(k, i)| nets[k].value(batch.point(i)));
            Ok(CoveringRow { width: m, replicate: r, count: empirical_covering(&values, epsilon) })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.width as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| (r.count as f64).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(CoveringReport { epsilon, sample_size, rows, fit })
}

/// `−(3d + 2) / (2(3d + 1))`.
pub fn reference_exponent(d: usize) -> f64 {
    let d = d as f64;
    -(3.0 * d + 2.0) / (2.0 * (3.0 * d + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub kind: LossKind,
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    /// Training template; `width` and `seed` are set per cell.
    pub template: TrainConfig,
    #[serde(default)]
    pub quadrature: AxisRule,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n: usize,
    pub repeat: usize,
    pub width: usize,
    pub seed: u64,
    pub excess: f64,
    pub h1_error: f64,
    pub best_loss: f64,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub n: usize,
    pub width: usize,
    pub mean_excess: f64,
    pub std_excess: f64,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n_grid: Vec<usize>,
    pub per_n: Vec<RateSummary>,
    /// OLS of `log(excess)` on `log(n)` over all cells.
    pub fit: LinearFit,
    /// OLS of `log(mean excess)` on `log(n)`.
    pub mean_fit: LinearFit,
    pub reference_exponent: f64,
    pub cells: Vec<SweepCell>,
}

impl RateReport {
    pub fn fitted_slope(&self) -> f64 {
        self.fit.slope
    }

    /// Whether the mean excess strictly decreases along the grid.
    pub fn strictly_decreasing(&self) -> bool {
        self.per_n.windows(2).all(|w| w[1].mean_excess < w[0].mean_excess)
    }

    /// One row per cell with a header.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("n,repeat,width,seed,excess,h1_error,best_loss\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.16e},{:.16e},{:.16e}\n",
                c.n, c.repeat, c.width, c.seed, c.excess, c.h1_error, c.best_loss
            ));
        }
        out
    }
}

/// Smallest excess used inside logarithms.
const LOG_FLOOR: f64 = 1e-300;

/// For each `n` and repeat: fresh batch, width from [`width_rule`], ERM, and
/// the population energy excess of the returned net.
pub fn rate_sweep(problem: &Problem, config: &SweepConfig) -> Result<RateReport> {
    if config.repeats < 3 {
        return Err(Error::InvalidArgument("rate sweeps need at least 3 repeats".into()));
    }
    if config.n_grid.len() < 2 || config.n_grid.windows(2).any(|w| w[1] <= w[0]) || config.n_grid[0] == 0 {
        return Err(Error::InvalidArgument("n_grid must hold at least two strictly increasing positive sizes".into()));
    }
    let d = problem.dim();
    let jobs: Vec<(usize, usize, usize)> = config
        .n_grid
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| (0..config.repeats).map(move |r| (i, n, r)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(i, n, r)| {
            let seed = child_seed(config.seed, i as u64, r as u64);
            let batch = LossBatch::sample(config.kind, problem.cube(), n, seed)?;
            let mut cfg = config.template.clone();
            cfg.width = width_rule(n, d);
            cfg.seed = child_seed(seed, 0x696e, 0);
            let report = train_erm(config.kind, problem, &batch, &cfg)?;
            let grids = PopulationGrids::aligned(&report.final_net, problem.cube(), config.quadrature)?;
            Ok(SweepCell {
                n,
                repeat: r,
                width: cfg.width,
                seed,
                excess: energy_excess(&report.final_net, problem, &grids),
                h1_error: h1_error(&report.final_net, problem, &grids.interior),
                best_loss: report.best_loss(),
                wall_time_secs: report.wall_time_secs,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_n: Vec<RateSummary> = config
        .n_grid
        .iter()
        .map(|&n| {
            let ex: Vec<f64> = cells.iter().filter(|c| c.n == n).map(|c| c.excess).collect();
            RateSummary {
                n,
                width: width_rule(n, d),
                mean_excess: stats::mean(&ex),
                std_excess: stats::sample_std(&ex),
                repeats: ex.len(),
            }
        })
        .collect();
    let x: Vec<f64> = cells.iter().map(|c| (c.n as f64).ln()).collect();
    let y: Vec<f64> = cells.iter().map(|c| c.excess.max(LOG_FLOOR).ln()).collect();
    let fit = linear_fit(&x, &y)?;
    let mx: Vec<f64> = per_n.iter().map(|s| (s.n as f64).ln()).collect();
    let my: Vec<f64> = per_n.iter().map(|s| s.mean_excess.max(LOG_FLOOR).ln()).collect();
    let mean_fit = linear_fit(&mx, &my)?;
    Ok(RateReport {
        n_grid: config.n_grid.clone(),
        per_n,
        fit,
        mean_fit,
        reference_exponent: reference_exponent(d),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub n_grid: Vec<usize>,
    pub repeats: usize,
    pub population: f64,
    /// Mean `|empirical − population|` per `n`.
    pub mean_gap: Vec<f64>,
    /// Fit of `log mean gap` on `log n`.
    pub fit: LinearFit,
}

/// Monte Carlo gap `E|E_n(u) − E(u)|` of a fixed field across sample sizes.
pub fn mc_gap_slope<U: Evaluable + ?Sized>(
    u: &U,
    problem: &Problem,
    n_grid: &[usize],
    repeats: usize,
    rule: AxisRule,
    seed: u64,
) -> Result<GapReport> {
    if repeats == 0 || n_grid.len() < 2 {
        return Err(Error::InvalidArgument("need repeats >= 1 and at least two sample sizes".into()));
    }
    let kind = LossKind::for_problem(problem);
    let grids = PopulationGrids::aligned(u, problem.cube(), rule)?;
    let population = population_loss(u, problem, &grids);
    let mut mean_gap = Vec::with_capacity(n_grid.len());
    for (i, &n) in n_grid.iter().enumerate() {
        let gaps = (0..repeats)
            .into_par_iter()
            .map(|r| {
                let batch = LossBatch::sample(kind, problem.cube(), n, child_seed(seed, i as u64, r as u64))?;
                Ok((empirical_loss(u, problem, &batch)? - population).abs())
            })
            .collect::<Result<Vec<f64>>>()?;
        mean_gap.push(stats::mean(&gaps));
    }
    let x: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = mean_gap.iter().map(|g| g.max(LOG_FLOOR).ln()).collect();
    let fit = if mean_gap.iter().all(|&g| g == 0.0) {
        LinearFit { slope: 0.0, intercept: f64::NEG_INFINITY, slope_se: 0.0, df: n_grid.len() - 2, p_negative: 1.0, p_positive: 1.0 }
    } else {
        linear_fit(&x, &y)?
    };
    Ok(GapReport { n_grid: n_grid.to_vec(), repeats, population, mean_gap, fit })
}

/// Measured versus predicted bias of the empirical Poisson loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasCheck {
    pub n: usize,
    pub repeats: usize,
    /// Mean of `E_{n,P}(u) − E_P(u)` over batches.
    pub measured: f64,
    /// Standard error of `measured`.
    pub sigma: f64,
    /// Mean of the same gap minus the zero-mean terms
    /// `P_n(|∇u|² − 2fu) − P(|∇u|² − 2fu)` and `2Pu·(P_n u − Pu)` of the same
    /// batch, which leaves `(P_n u − Pu)²`.
    pub measured_cv: f64,
    pub sigma_cv: f64,
    /// `Var(u(X))/n` by quadrature.
    pub predicted: f64,
}

impl BiasCheck {
    /// `|measured − predicted| / σ`.
    pub fn z_score(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.sigma
    }

    /// `|measured_cv − predicted| / σ_cv`.
    pub fn z_score_cv(&self) -> f64 {
        (self.measured_cv - self.predicted).abs() / self.sigma_cv
    }
}

pub fn poisson_bias_check<U: Evaluable + ?Sized>(
    u: &U,
    problem: &PoissonProblem,
    n: usize,
    repeats: usize,
    grid: &QuadratureGrid,
    seed: u64,
) -> Result<BiasCheck> {
    if repeats < 2 {
        return Err(Error::InvalidArgument("bias check needs at least two repeats".into()));
    }
    let linear = |x: &[f64]| u.gradient(x).iter().map(|g| g * g).sum::<f64>() - 2.0 * problem.source(x) * u.value(x);
    let population = drm_poisson_population(u, problem, grid);
    let linear_mean = grid.integrate(linear);
    let mean_u = grid.integrate(|x| u.value(x));
    let variance = grid.integrate(|x| (u.value(x) - mean_u).powi(2));
    let pairs = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let batch = sample_interior(problem.cube, n, child_seed(seed, n as u64, r as u64))?;
            let gap = drm_poisson_empirical(u, &batch, |x| problem.source(x))? - population;
            let lin: Vec<f64> = batch.iter().map(linear).collect();
            let vals: Vec<f64> = batch.iter().map(|x| u.value(x)).collect();
            let drift = pairwise_sum(&vals) / n as f64 - mean_u;
            Ok((gap, gap - (pairwise_sum(&lin) / n as f64 - linear_mean) - 2.0 * mean_u * drift))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (gaps, adjusted): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(BiasCheck {
        n,
        repeats,
        measured: stats::mean(&gaps),
        sigma: stats::std_error(&gaps),
        measured_cv: stats::mean(&adjusted),
        sigma_cv: stats::std_error(&adjusted),
        predicted: variance / n as f64,
    })
}
