//! Empirical and population losses.
//!
//! Deep Ritz, Poisson (Neumann):
//! `E_{n,P}(u) = (1/n)Σ(|∇u(X_i)|² − 2f u(X_i)) + ((1/n)Σ u(X_i))²`,
//! `E_P(u) = ∫|∇u|² + (∫u)² − 2∫fu`.
//!
//! Deep Ritz, Schrödinger (Neumann):
//! `E_{n,S}(u) = (1/n)Σ(|∇u|² + V u² − 2fu)(X_i)`,
//! `E_S(u) = ∫|∇u|² + Vu² − 2fu`.
//!
//! PINN (Dirichlet):
//! `L_N(u) = (|Ω|/N₁)Σ r(X_i)² + (|∂Ω|/N₂)Σ(u − g)²(Y_j)` with
//! `r = −Σa_ij ∂_ij u + Σb_i ∂_i u + cu − f`.
//!
//! Per-sample terms are evaluated in parallel and reduced in a fixed order,
//! so results do not depend on the number of worker threads.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    aligned_quadrature, composite_quadrature, AxisRule, Hypercube, QuadratureGrid, Region, SampleBatch,
    DEFAULT_NODE_CAP,
};
use crate::error::{Error, Result};
use crate::eval::Evaluable;
use crate::problems::{EllipticProblem, PoissonProblem, Problem, SchrodingerProblem};
use crate::shallow_nets::{Activation, ParamCotangent, ShallowNet};
use crate::sum::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    DrmPoisson,
    DrmSchrodinger,
    Pinn,
}

impl LossKind {
    /// The loss naturally attached to a problem family.
    pub fn for_problem(problem: &Problem) -> LossKind {
        match problem {
            Problem::Poisson(_) => LossKind::DrmPoisson,
            Problem::Schrodinger(_) => LossKind::DrmSchrodinger,
            Problem::Elliptic(_) => LossKind::Pinn,
        }
    }

    pub fn requires_order2(self) -> bool {
        self == LossKind::Pinn
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::DrmPoisson => "drm_poisson",
            LossKind::DrmSchrodinger => "drm_schrodinger",
            LossKind::Pinn => "pinn",
        }
    }

    fn check_problem(self, problem: &Problem) -> Result<()> {
        if self != LossKind::for_problem(problem) {
            return Err(Error::InvalidArgument(format!("loss {} does not apply to this problem family", self.name())));
        }
        Ok(())
    }
}

/// Interior and boundary samples for the PINN loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnBatch {
    pub interior: SampleBatch,
    pub boundary: SampleBatch,
}

impl PinnBatch {
    pub fn new(interior: SampleBatch, boundary: SampleBatch) -> Result<Self> {
        if interior.is_empty() || boundary.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if interior.dim() != boundary.dim() {
            return Err(Error::DimensionMismatch { expected: interior.dim(), got: boundary.dim() });
        }
        Ok(Self { interior, boundary })
    }

    /// `n = min(N₁, N₂)`.
    pub fn n(&self) -> usize {
        self.interior.len().min(self.boundary.len())
    }
}

/// Samples for any loss kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossBatch {
    Interior(SampleBatch),
    Pinn(PinnBatch),
}

impl LossBatch {
    /// Draws a fresh batch of `n` interior points (and `n` boundary points for
    /// PINN) from independent streams of `seed`.
    pub fn sample(kind: LossKind, cube: Hypercube, n: usize, seed: u64) -> Result<Self> {
        let interior = crate::domain::sample_interior(cube, n, seed)?;
        match kind {
            LossKind::Pinn => {
                let boundary = crate::domain::sample_boundary(cube, n, seed)?;
                Ok(LossBatch::Pinn(PinnBatch::new(interior, boundary)?))
            }
            _ => Ok(LossBatch::Interior(interior)),
        }
    }

    pub fn interior(&self) -> &SampleBatch {
        match self {
            LossBatch::Interior(b) => b,
            LossBatch::Pinn(p) => &p.interior,
        }
    }
}

fn nonempty(batch: &SampleBatch) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(())
}

fn check_dim<E: Evaluable + ?Sized>(u: &E, d: usize) -> Result<()> {
    if u.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: u.dim() });
    }
    Ok(())
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `Σ_i term(X_i)` in fixed order.
fn batch_sum<F>(batch: &SampleBatch, term: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let vals: Vec<f64> = (0..batch.len()).into_par_iter().map(|i| term(batch.point(i))).collect();
    pairwise_sum(&vals)
}

pub fn drm_poisson_empirical<E, F>(u: &E, batch: &SampleBatch, f: F) -> Result<f64>
where
    E: Evaluable + ?Sized,
    F: Fn(&[f64]) -> f64 + Sync,
{
    nonempty(batch)?;
    check_dim(u, batch.dim())?;
    let n = batch.len() as f64;
    let pairs: Vec<(f64, f64)> = (0..batch.len())
        .into_par_iter()
        .map(|i| {
            let x = batch.point(i);
            let v = u.value(x);
            (sq_norm(&u.gradient(x)) - 2.0 * f(x) * v, v)
        })
        .collect();
    let (energy, values): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let mean_u = pairwise_sum(&values) / n;
    Ok(pairwise_sum(&energy) / n + mean_u * mean_u)
}

pub fn drm_poisson_population<E: Evaluable + ?Sized>(u: &E, problem: &PoissonProblem, grid: &QuadratureGrid) -> f64 {
    let dirichlet = grid.integrate(|x| sq_norm(&u.gradient(x)) - 2.0 * problem.source(x) * u.value(x));
    let mean = grid.integrate(|x| u.value(x));
    dirichlet + mean * mean
}

pub fn drm_schrodinger_empirical<E, F, V>(u: &E, batch: &SampleBatch, f: F, v: V) -> Result<f64>
where
    E: Evaluable + ?Sized,
    F: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
{
    nonempty(batch)?;
    check_dim(u, batch.dim())?;
    let total = batch_sum(batch, |x| {
        let val = u.value(x);
        sq_norm(&u.gradient(x)) + v(x) * val * val - 2.0 * f(x) * val
    });
    Ok(total / batch.len() as f64)
}

pub fn drm_schrodinger_population<E: Evaluable + ?Sized>(
    u: &E,
    problem: &SchrodingerProblem,
    grid: &QuadratureGrid,
) -> f64 {
    grid.integrate(|x| {
        let val = u.value(x);
        sq_norm(&u.gradient(x)) + problem.potential(x) * val * val - 2.0 * problem.source(x) * val
    })
}

/// Interior residual `Lu − f` at `x`.
pub fn pinn_residual<E: Evaluable + ?Sized>(u: &E, problem: &EllipticProblem, x: &[f64]) -> f64 {
    problem.apply_operator(x, u.value(x), &u.gradient(x), &u.hessian(x)) - problem.source(x)
}

pub fn pinn_empirical<E: Evaluable + ?Sized>(u: &E, batch: &PinnBatch, problem: &EllipticProblem) -> Result<f64> {
    nonempty(&batch.interior)?;
    nonempty(&batch.boundary)?;
    check_dim(u, problem.cube.dim())?;
    check_dim(u, batch.interior.dim())?;
    let interior = batch_sum(&batch.interior, |x| pinn_residual(u, problem, x).powi(2));
    let boundary = batch_sum(&batch.boundary, |y| (u.value(y) - problem.boundary_data(y)).powi(2));
    Ok(problem.cube.measure() * interior / batch.interior.len() as f64
        + problem.cube.boundary_measure() * boundary / batch.boundary.len() as f64)
}

/// `∫_Ω r² + ∫_{∂Ω} (u − g)²`; the boundary grid carries the total weight `|∂Ω|`.
pub fn pinn_population<E: Evaluable + ?Sized>(
    u: &E,
    problem: &EllipticProblem,
    interior: &QuadratureGrid,
    boundary: &QuadratureGrid,
) -> f64 {
    interior.integrate(|x| pinn_residual(u, problem, x).powi(2))
        + boundary.integrate(|y| (u.value(y) - problem.boundary_data(y)).powi(2))
}

/// Interior and boundary grids used for population integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationGrids {
    pub interior: QuadratureGrid,
    pub boundary: QuadratureGrid,
}

impl PopulationGrids {
    /// Composite Gauss–Legendre grids (smooth integrands).
    pub fn composite(cube: Hypercube, rule: AxisRule) -> Result<Self> {
        Ok(Self {
            interior: composite_quadrature(cube, rule, Region::Interior, DEFAULT_NODE_CAP)?,
            boundary: composite_quadrature(cube, rule, Region::Boundary, DEFAULT_NODE_CAP)?,
        })
    }

    /// Interior grid aligned with the kinks of `u` (exact up to round-off for
    /// piecewise-smooth integrands in `d ≤ 2`).
    pub fn aligned<E: Evaluable + ?Sized>(u: &E, cube: Hypercube, rule: AxisRule) -> Result<Self> {
        Ok(Self {
            interior: aligned_quadrature(cube, &u.kinks(), rule)?,
            boundary: composite_quadrature(cube, rule, Region::Boundary, DEFAULT_NODE_CAP)?,
        })
    }
}

/// Empirical loss of the family attached to `problem`.
pub fn empirical_loss<E: Evaluable + ?Sized>(u: &E, problem: &Problem, batch: &LossBatch) -> Result<f64> {
    match (problem, batch) {
        (Problem::Poisson(p), LossBatch::Interior(b)) => drm_poisson_empirical(u, b, |x| p.source(x)),
        (Problem::Schrodinger(p), LossBatch::Interior(b)) => {
            drm_schrodinger_empirical(u, b, |x| p.source(x), |x| p.potential(x))
        }
        (Problem::Elliptic(p), LossBatch::Pinn(b)) => pinn_empirical(u, b, p),
        _ => Err(Error::InvalidArgument("batch layout does not match the problem family".into())),
    }
}

/// Population loss of the family attached to `problem`.
pub fn population_loss<E: Evaluable + ?Sized>(u: &E, problem: &Problem, grids: &PopulationGrids) -> f64 {
    match problem {
        Problem::Poisson(p) => drm_poisson_population(u, p, &grids.interior),
        Problem::Schrodinger(p) => drm_schrodinger_population(u, p, &grids.interior),
        Problem::Elliptic(p) => pinn_population(u, p, &grids.interior, &grids.boundary),
    }
}

/// `E(u) − E(u*)` with both terms integrated on the same grids.
pub fn energy_excess<E: Evaluable + ?Sized>(u: &E, problem: &Problem, grids: &PopulationGrids) -> f64 {
    population_loss(u, problem, grids) - population_loss(problem.exact(), problem, grids)
}

/// Gradient of the empirical loss with respect to the network parameters.
pub fn loss_gradient(kind: LossKind, net: &ShallowNet, batch: &LossBatch, problem: &Problem) -> Result<ParamCotangent> {
    Ok(loss_and_gradient(kind, net, batch, problem)?.1)
}

/// Samples per sequential accumulation chunk; chunk results are summed in
/// index order.
const CHUNK: usize = 64;

/// Accumulates `Σ_i backprop(x_i, cotangents(i))` over `points` in chunks.
fn accumulate<C>(net: &ShallowNet, batch: &SampleBatch, cot: C) -> Result<ParamCotangent>
where
    C: Fn(usize, &[f64]) -> (f64, Vec<f64>, Option<Array2<f64>>) + Sync,
{
    let (m, d) = (net.width(), net.input_dim());
    let chunks: Vec<Result<ParamCotangent>> = (0..batch.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = ParamCotangent::zeros(m, d);
            for i in c * CHUNK..((c + 1) * CHUNK).min(batch.len()) {
                let x = batch.point(i);
                let (cv, cg, ch) = cot(i, x);
                net.backprop_into(x, cv, &cg, ch.as_ref(), &mut acc)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = ParamCotangent::zeros(m, d);
    for c in chunks {
        total.add_scaled(&c?, 1.0);
    }
    Ok(total)
}

/// Empirical loss and its parameter gradient.
pub fn loss_and_gradient(
    kind: LossKind,
    net: &ShallowNet,
    batch: &LossBatch,
    problem: &Problem,
) -> Result<(f64, ParamCotangent)> {
    kind.check_problem(problem)?;
    if kind.requires_order2() && net.activation() != Activation::ReluSquared {
        return Err(Error::OrderRequired { loss: kind.name() });
    }
    check_dim(net, problem.dim())?;
    match (problem, batch) {
        (Problem::Poisson(p), LossBatch::Interior(b)) => {
            nonempty(b)?;
            check_dim(net, b.dim())?;
            let n = b.len() as f64;
            let fields: Vec<(f64, Vec<f64>, f64)> = (0..b.len())
                .into_par_iter()
                .map(|i| {
                    let x = b.point(i);
                    (net.value(x), net.gradient(x), p.source(x))
                })
                .collect();
            let values: Vec<f64> = fields.iter().map(|f| f.0).collect();
            let energy: Vec<f64> = fields.iter().map(|(v, g, f)| sq_norm(g) - 2.0 * f * v).collect();
            let mean_u = pairwise_sum(&values) / n;
            let loss = pairwise_sum(&energy) / n + mean_u * mean_u;
            let grad = accumulate(net, b, |i, _| {
                let (_, g, f) = &fields[i];
                let cv = (-2.0 * f + 2.0 * mean_u) / n;
                (cv, g.iter().map(|gj| 2.0 * gj / n).collect(), None)
            })?;
            Ok((loss, grad))
        }
        (Problem::Schrodinger(p), LossBatch::Interior(b)) => {
            nonempty(b)?;
            check_dim(net, b.dim())?;
            let n = b.len() as f64;
            let fields: Vec<(f64, Vec<f64>, f64, f64)> = (0..b.len())
                .into_par_iter()
                .map(|i| {
                    let x = b.point(i);
                    (net.value(x), net.gradient(x), p.source(x), p.potential(x))
                })
                .collect();
            let terms: Vec<f64> = fields.iter().map(|(u, g, f, v)| sq_norm(g) + v * u * u - 2.0 * f * u).collect();
            let loss = pairwise_sum(&terms) / n;
            let grad = accumulate(net, b, |i, _| {
                let (u, g, f, v) = &fields[i];
                ((2.0 * v * u - 2.0 * f) / n, g.iter().map(|gj| 2.0 * gj / n).collect(), None)
            })?;
            Ok((loss, grad))
        }
        (Problem::Elliptic(p), LossBatch::Pinn(b)) => {
            nonempty(&b.interior)?;
            nonempty(&b.boundary)?;
            check_dim(net, b.interior.dim())?;
            let wi = p.cube.measure() / b.interior.len() as f64;
            let wb = p.cube.boundary_measure() / b.boundary.len() as f64;
            let residuals: Vec<f64> =
                (0..b.interior.len()).into_par_iter().map(|i| pinn_residual(net, p, b.interior.point(i))).collect();
            let mismatch: Vec<f64> = (0..b.boundary.len())
                .into_par_iter()
                .map(|j| {
                    let y = b.boundary.point(j);
                    net.value(y) - p.boundary_data(y)
                })
                .collect();
            let sq = |v: &[f64]| pairwise_sum(&v.iter().map(|r| r * r).collect::<Vec<_>>());
            let loss = wi * sq(&residuals) + wb * sq(&mismatch);
            let mut grad = accumulate(net, &b.interior, |i, x| {
                let s = 2.0 * residuals[i] * wi;
                let cg = p.b(x).iter().map(|bj| s * bj).collect();
                (s * p.c(x), cg, Some(p.a(x) * (-s)))
            })?;
            let d = net.input_dim();
            let boundary = accumulate(net, &b.boundary, |j, _| (2.0 * mismatch[j] * wb, vec![0.0; d], None))?;
            grad.add_scaled(&boundary, 1.0);
            Ok((loss, grad))
        }
        _ => Err(Error::InvalidArgument("batch layout does not match the problem family".into())),
    }
}
