//! Explicit network constructions.
//!
//! - [`build_interpolant_relu`]: the nodal piecewise-linear interpolant of a
//!   `C²([−1,1])` curve written as a ReLU network, with the `4√2·B/m` H¹
//!   certificate.
//! - [`lift_ridge`]: substitution `z = ω̂·x` turning a 1-D net into a ridge net.
//! - [`build_barron_relu_approximant`]: finite cosine sums approximated term by
//!   term.
//! - [`relu2_algebra`] and [`build_taylor_relu2_remainder`]: ReLU² building
//!   blocks for `1`, `z`, `z²` and the integral Taylor remainder.
//!
//! Constructed nets use the unit `σ(±z + 1)`, i.e. bias `t = 1`, so they are
//! feasible for the closed bias interval `[−1, 1]` rather than the half-open
//! one used during training.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::domain::gauss_legendre;
use crate::error::{Error, Result};
use crate::eval::Evaluable;
use crate::shallow_nets::{Activation, BiasInterval, ShallowNet};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A `C²` curve on `[−1, 1]` with a common bound `B ≥ ‖g^{(s)}‖_∞`, `s = 0,1,2`.
#[derive(Clone)]
pub struct Curve1D {
    name: String,
    value: ScalarFn,
    deriv1: ScalarFn,
    deriv2: ScalarFn,
    sup_bound: f64,
}

impl fmt::Debug for Curve1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Curve1D").field("name", &self.name).field("sup_bound", &self.sup_bound).finish()
    }
}

/// Points at which a declared sup bound is checked.
pub const SUP_CHECK_POINTS: usize = 1001;

impl Curve1D {
    /// Fails if `sup_bound` is below `max |g|, |g′|, |g″|` on a 1001-point grid.
    pub fn new(
        name: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv2: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_bound: f64,
    ) -> Result<Self> {
        let curve = Curve1D {
            name: name.into(),
            value: Arc::new(value),
            deriv1: Arc::new(deriv1),
            deriv2: Arc::new(deriv2),
            sup_bound,
        };
        let observed = curve.sampled_sup();
        if !(sup_bound.is_finite() && sup_bound >= observed) {
            return Err(Error::InvalidArgument(format!(
                "curve {}: declared bound {sup_bound} below sampled sup {observed}",
                curve.name
            )));
        }
        Ok(curve)
    }

    /// `max_s max_grid |g^{(s)}|` over the check grid.
    pub fn sampled_sup(&self) -> f64 {
        (0..SUP_CHECK_POINTS)
            .map(|i| -1.0 + 2.0 * i as f64 / (SUP_CHECK_POINTS - 1) as f64)
            .map(|z| self.value(z).abs().max(self.deriv1(z).abs()).max(self.deriv2(z).abs()))
            .fold(0.0, f64::max)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }

    pub fn deriv1(&self, z: f64) -> f64 {
        (self.deriv1)(z)
    }

    pub fn deriv2(&self, z: f64) -> f64 {
        (self.deriv2)(z)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0, |_| 0.0, |_| 0.0, 0.0).expect("zero curve")
    }

    /// `cos z`, `B = 1`.
    pub fn cos() -> Self {
        Self::new("cos", f64::cos, |z| -z.sin(), |z| -z.cos(), 1.0).expect("cos curve")
    }

    /// `sin(2z)/4`, `B = 1`.
    pub fn sin2_quarter() -> Self {
        Self::new("sin2z/4", |z| (2.0 * z).sin() / 4.0, |z| (2.0 * z).cos() / 2.0, |z| -(2.0 * z).sin(), 1.0)
            .expect("sin curve")
    }

    /// `z³/6`, `B = 1`.
    pub fn cubic_sixth() -> Self {
        Self::new("z^3/6", |z| z.powi(3) / 6.0, |z| z * z / 2.0, |z| z, 1.0).expect("cubic curve")
    }

    /// `A·cos(a z + θ)` with `B = |A|·max(1, |a|)²`.
    pub fn cosine(amplitude: f64, rate: f64, phase: f64) -> Self {
        let b = amplitude.abs() * rate.abs().max(1.0).powi(2);
        Self::new(
            format!("{amplitude}*cos({rate}z+{phase})"),
            move |z| amplitude * (rate * z + phase).cos(),
            move |z| -amplitude * rate * (rate * z + phase).sin(),
            move |z| -amplitude * rate * rate * (rate * z + phase).cos(),
            b * (1.0 + 1e-15),
        )
        .expect("cosine curve")
    }

    /// Curves used by the approximation certificate checks.
    pub fn corpus() -> Vec<Curve1D> {
        vec![Self::cos(), Self::sin2_quarter(), Self::cubic_sixth()]
    }

    /// Looks up a corpus curve by name (`cos`, `sin2z/4`, `z^3/6`).
    pub fn by_name(name: &str) -> Option<Curve1D> {
        Self::corpus().into_iter().find(|c| c.name == name)
    }
}

/// `x ↦ A·cos(ω·x + θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarronCosine {
    pub frequency: Vec<f64>,
    pub phase: f64,
    pub amplitude: f64,
}

impl BarronCosine {
    pub fn l1_frequency(&self) -> f64 {
        self.frequency.iter().map(|w| w.abs()).sum()
    }

    /// `|A|·(1 + |ω|_1)^s`.
    pub fn barron_norm(&self, s: i32) -> f64 {
        self.amplitude.abs() * (1.0 + self.l1_frequency()).powi(s)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let arg: f64 = self.frequency.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase;
        self.amplitude * arg.cos()
    }

    /// The 1-D profile `g(z) = A·cos(|ω|_1 z + θ)` along `ω/|ω|_1`.
    pub fn profile(&self) -> Curve1D {
        Curve1D::cosine(self.amplitude, self.l1_frequency(), self.phase)
    }
}

impl Evaluable for BarronCosine {
    fn dim(&self) -> usize {
        self.frequency.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        BarronCosine::value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let arg: f64 = self.frequency.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase;
        self.frequency.iter().map(|w| -self.amplitude * w * arg.sin()).collect()
    }

    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        let arg: f64 = self.frequency.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase;
        let d = self.frequency.len();
        Array2::from_shape_fn((d, d), |(a, b)| -self.amplitude * self.frequency[a] * self.frequency[b] * arg.cos())
    }
}

/// Unit layout of the ReLU interpolant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpolantLayout {
    /// Four constant units, one slope unit and `m − 1` hinge units.
    #[default]
    Compact,
    /// The constant spread over `4m` units of `g(z_0)/(2m)` and the slope
    /// over `m` units of `s_0/m`, for `6m − 1` units in total.
    Expanded,
}

/// Interpolant network plus the number of expanded-layout copies each unit
/// stands for.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    pub net: ShallowNet,
    pub multiplicity: Vec<usize>,
}

impl Interpolant {
    /// `max_i |a_i| / multiplicity_i`.
    pub fn max_unit_coefficient(&self) -> f64 {
        self.net
            .gamma()
            .iter()
            .zip(&self.multiplicity)
            .map(|(g, &k)| g.abs() / k as f64)
            .fold(0.0, f64::max)
    }
}

/// Mesh `z_i = −1 + 2i/m`, `i = 0..=m`.
pub fn mesh(m: usize) -> Vec<f64> {
    (0..=m).map(|i| -1.0 + 2.0 * i as f64 / m as f64).collect()
}

/// Compact ReLU form of the nodal interpolant; see [`build_interpolant_relu_with`].
pub fn build_interpolant_relu(g: &Curve1D, m: usize) -> Result<ShallowNet> {
    Ok(build_interpolant_relu_with(g, m, InterpolantLayout::Compact)?.net)
}

/// Writes the nodal interpolant of `g` on the uniform mesh with `m` cells as
///
/// `I g(z) = g(z_0) + s_0 σ(z+1) + Σ_{i=1}^{m−1} c_i σ(z − z_i)`,
///
/// with `s_0 = (g(z_1) − g(z_0))/h`, `c_i = (g(z_{i−1}) − 2g(z_i) + g(z_{i+1}))/h`
/// and the constant `1 = [σ(z+1) + σ(−z−1) + σ(−z+1) + σ(z−1)]/2` on `[−1,1]`.
/// The budget is `5B`.
pub fn build_interpolant_relu_with(g: &Curve1D, m: usize, layout: InterpolantLayout) -> Result<Interpolant> {
    if m == 0 {
        return Err(Error::InvalidArgument("mesh size m must be >= 1".into()));
    }
    let z = mesh(m);
    let h = 2.0 / m as f64;
    let gz: Vec<f64> = z.iter().map(|&zi| g.value(zi)).collect();
    let slope = (gz[1] - gz[0]) / h;
    let constant_units = [(1.0, 1.0), (-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0)];

    let mut gamma = Vec::new();
    let mut omega = Vec::new();
    let mut t = Vec::new();
    let mut multiplicity = Vec::new();
    let (copies, split) = match layout {
        InterpolantLayout::Compact => (1, m),
        InterpolantLayout::Expanded => (m, 1),
    };
    for &(w, b) in &constant_units {
        for _ in 0..copies {
            gamma.push(gz[0] / (2.0 * copies as f64));
            omega.push(w);
            t.push(b);
            multiplicity.push(split);
        }
    }
    for _ in 0..copies {
        gamma.push(slope / copies as f64);
        omega.push(1.0);
        t.push(1.0);
        multiplicity.push(split);
    }
    for i in 1..m {
        gamma.push((gz[i - 1] - 2.0 * gz[i] + gz[i + 1]) / h);
        omega.push(1.0);
        t.push(-z[i]);
        multiplicity.push(1);
    }
    let width = gamma.len();
    let directions = Array2::from_shape_vec((width, 1), omega).expect("shape");
    let net = ShallowNet::new(Activation::Relu, gamma, directions, t, 5.0 * g.sup_bound())?;
    net.check(BiasInterval::Closed)?;
    Ok(Interpolant { net, multiplicity })
}

/// The `4√2·B/m` H¹ certificate.
pub fn h1_certificate(sup_bound: f64, m: usize) -> f64 {
    4.0 * SQRT_2 * sup_bound / m as f64
}

/// `(∫_{−1}^{1} (g − g_m)² + (g′ − g_m′)² dz)^{1/2}` with `nodes` total
/// Gauss–Legendre nodes spread over uniform panels, refined at the kinks of
/// the net so every panel integrates a smooth function.
pub fn certify_h1_error(net: &ShallowNet, g: &Curve1D, nodes: usize) -> Result<f64> {
    const PER_PANEL: usize = 8;
    if nodes < 256 {
        return Err(Error::InvalidArgument(format!("certify_h1_error needs >= 256 nodes, got {nodes}")));
    }
    if net.input_dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: net.input_dim() });
    }
    let panels = nodes / PER_PANEL;
    let mut edges: Vec<f64> = (0..=panels).map(|j| -1.0 + 2.0 * j as f64 / panels as f64).collect();
    for i in 0..net.width() {
        let w = net.direction(i)[0];
        if w != 0.0 {
            let r = -net.biases()[i] / w;
            if r > -1.0 && r < 1.0 {
                edges.push(r);
            }
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let (gx, gw) = gauss_legendre(PER_PANEL);
    let mut terms = Vec::with_capacity(edges.len() * PER_PANEL);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            let z = mid + half * x;
            let e0 = g.value(z) - net.value(&[z]);
            let e1 = g.deriv1(z) - net.gradient(&[z])[0];
            terms.push(half * w * (e0 * e0 + e1 * e1));
        }
    }
    Ok(crate::sum::pairwise_sum(&terms).max(0.0).sqrt())
}

/// Ridge lifting `x ↦ net1d(ω̂·x)` with `ω̂ = ω/|ω|_1`.
pub fn lift_ridge(net1d: &ShallowNet, direction: &[f64]) -> Result<ShallowNet> {
    if net1d.input_dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: net1d.input_dim() });
    }
    let l1: f64 = direction.iter().map(|w| w.abs()).sum();
    if !(l1 > 0.0) || !l1.is_finite() {
        return Err(Error::InvalidArgument("ridge direction must be nonzero and finite".into()));
    }
    let d = direction.len();
    let unit: Vec<f64> = direction.iter().map(|w| w / l1).collect();
    let m = net1d.width();
    let directions = Array2::from_shape_fn((m, d), |(i, j)| net1d.direction(i)[0] * unit[j]);
    ShallowNet::new(net1d.activation(), net1d.gamma().to_vec(), directions, net1d.biases().to_vec(), net1d.budget())
}

/// Approximates `Σ_j A_j cos(ω_j·x + θ_j)` on `[0,1]^d` by interpolating each
/// profile with `m_per_term` cells and lifting it along `ω_j`. Terms with
/// `ω = 0` are constants and lift along `e_1`. The budget is
/// `5·Σ_j |A_j|·max(1, |ω_j|_1)²`.
pub fn build_barron_relu_approximant(terms: &[BarronCosine], m_per_term: usize, dim: usize) -> Result<ShallowNet> {
    let mut net = ShallowNet::empty(Activation::Relu, dim, 0.0)?;
    for term in terms {
        if term.frequency.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: term.frequency.len() });
        }
        let one_d = build_interpolant_relu(&term.profile(), m_per_term)?;
        let direction = if term.l1_frequency() > 0.0 {
            term.frequency.clone()
        } else {
            let mut e1 = vec![0.0; dim];
            e1[0] = 1.0;
            e1
        };
        net = net.concat(&lift_ridge(&one_d, &direction)?)?;
    }
    Ok(net)
}

/// Exact ReLU² representations on `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relu2Kind {
    One,
    Linear,
    Square,
}

/// - `z² = σ₂(z) + σ₂(−z)`
/// - `z = (σ₂(z+1) − σ₂(1−z))/4`
/// - `1 = (σ₂(z+1) + σ₂(1−z))/2 − σ₂(z) − σ₂(−z)`
pub fn relu2_algebra(kind: Relu2Kind) -> ShallowNet {
    let units: &[(f64, f64, f64)] = match kind {
        Relu2Kind::Square => &[(1.0, 1.0, 0.0), (1.0, -1.0, 0.0)],
        Relu2Kind::Linear => &[(0.25, 1.0, 1.0), (-0.25, -1.0, 1.0)],
        Relu2Kind::One => &[(0.5, 1.0, 1.0), (0.5, -1.0, 1.0), (-1.0, 1.0, 0.0), (-1.0, -1.0, 0.0)],
    };
    net_from_units(Activation::ReluSquared, units)
}

fn net_from_units(activation: Activation, units: &[(f64, f64, f64)]) -> ShallowNet {
    let gamma: Vec<f64> = units.iter().map(|u| u.0).collect();
    let omega: Vec<f64> = units.iter().map(|u| u.1).collect();
    let t: Vec<f64> = units.iter().map(|u| u.2).collect();
    let budget = gamma.iter().map(|g| g.abs()).sum();
    let directions = Array2::from_shape_vec((units.len(), 1), omega).expect("shape");
    ShallowNet::new(activation, gamma, directions, t, budget).expect("valid units")
}

/// Midpoint discretization with `S` nodes `s_j = (j + ½)/S` of
///
/// `h(z) = ∫_0^1 φ(s)(z − s)₊² ds − ∫_0^1 φ(−s)(−z − s)₊² ds = ∫_0^z φ(s)(z − s)² ds`
///
/// as a `2S`-unit ReLU² net.
pub fn build_taylor_relu2_remainder(phi: impl Fn(f64) -> f64, grid: usize) -> Result<ShallowNet> {
    if grid < 2 {
        return Err(Error::InvalidArgument(format!("grid S must be >= 2, got {grid}")));
    }
    let w = 1.0 / grid as f64;
    let mut units = Vec::with_capacity(2 * grid);
    for j in 0..grid {
        let s = (j as f64 + 0.5) * w;
        units.push((phi(s) * w, 1.0, -s));
        units.push((-phi(-s) * w, -1.0, -s));
    }
    Ok(net_from_units(Activation::ReluSquared, &units))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn curve_bound_is_validated() {
        assert!(Curve1D::new("bad", |z| 3.0 * z, |_| 3.0, |_| 0.0, 1.0).is_err());
        for c in Curve1D::corpus() {
            assert!(c.sampled_sup() <= c.sup_bound());
        }
    }

    #[test]
    fn interpolant_reproduces_linear_functions() {
        let g = Curve1D::new("lin", |z| 0.3 * z - 0.2, |_| 0.3, |_| 0.0, 0.5).unwrap();
        for m in [1, 3, 8] {
            let net = build_interpolant_relu(&g, m).unwrap();
            for i in 0..=50 {
                let z = -1.0 + i as f64 / 25.0;
                assert!((net.value(&[z]) - g.value(z)).abs() < 1e-14);
            }
            assert!(certify_h1_error(&net, &g, 256).unwrap() < 1e-13);
        }
    }

    #[test]
    fn interpolant_hits_nodes() {
        let g = Curve1D::new("sq", |z| z * z, |z| 2.0 * z, |_| 2.0, 2.0).unwrap();
        let net = build_interpolant_relu(&g, 4).unwrap();
        for z in mesh(4) {
            assert!((net.value(&[z]) - z * z).abs() < 1e-12);
        }
        // between nodes the interpolant of a convex function lies above it
        assert!(net.value(&[-0.75]) > 0.5625);
    }

    #[test]
    fn layouts_agree_and_respect_coefficient_bounds() {
        for g in Curve1D::corpus() {
            for m in [1, 2, 4, 7, 16] {
                let compact = build_interpolant_relu_with(&g, m, InterpolantLayout::Compact).unwrap();
                let expanded = build_interpolant_relu_with(&g, m, InterpolantLayout::Expanded).unwrap();
                assert_eq!(expanded.net.width(), 6 * m - 1);
                assert!(compact.net.width() <= 2 * m + 3);
                let b = g.sup_bound();
                for it in [&compact, &expanded] {
                    assert!(it.max_unit_coefficient() <= 2.0 * b / m as f64 + 1e-12);
                    assert!(it.net.gamma_l1() <= 5.0 * b + 1e-12);
                    it.net.check(BiasInterval::Closed).unwrap();
                }
                for i in 0..=40 {
                    let z = -1.0 + i as f64 / 20.0;
                    assert!((compact.net.value(&[z]) - expanded.net.value(&[z])).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn certificate_value_for_cos() {
        assert!((h1_certificate(1.0, 10) - 0.565_685_424_949_238).abs() < 1e-12);
    }

    /// Midpoint-rule H¹ error on a fine uniform grid; independent of the
    /// Gauss–Legendre panels used by `certify_h1_error`.
    fn fine_h1(net: &ShallowNet, g: &Curve1D, n: usize) -> f64 {
        let h = 2.0 / n as f64;
        (0..n)
            .map(|i| {
                let z = -1.0 + (i as f64 + 0.5) * h;
                let e0 = g.value(z) - net.value(&[z]);
                let e1 = g.deriv1(z) - net.gradient(&[z])[0];
                h * (e0 * e0 + e1 * e1)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn certified_error_matches_independent_oracle() {
        for g in Curve1D::corpus() {
            for m in [4, 16] {
                let net = build_interpolant_relu(&g, m).unwrap();
                let a = certify_h1_error(&net, &g, 2048).unwrap();
                let b = fine_h1(&net, &g, 1 << 18);
                assert!((a - b).abs() < 1e-5 * (1.0 + b), "{a} vs {b}");
            }
        }
        let zero = ShallowNet::empty(Activation::Relu, 1, 0.0).unwrap();
        assert_eq!(certify_h1_error(&zero, &Curve1D::zero(), 256).unwrap(), 0.0);
        assert!(certify_h1_error(&zero, &Curve1D::zero(), 100).is_err());
    }

    #[test]
    fn large_mesh_is_within_certificate() {
        let g = Curve1D::cos();
        let net = build_interpolant_relu(&g, 512).unwrap();
        assert!(certify_h1_error(&net, &g, 4096).unwrap() <= h1_certificate(1.0, 512));
    }

    #[test]
    fn lift_ridge_is_exact() {
        let mut r = rng::stream(11, 0);
        let net1d = ShallowNet::random(9, 1, 2.0, Activation::Relu, 5).unwrap();
        let omega = [0.3, -1.2, 0.5];
        let lifted = lift_ridge(&net1d, &omega).unwrap();
        assert_eq!(lifted.gamma_l1(), net1d.gamma_l1());
        lifted.check(BiasInterval::Closed).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let z = (0.3 * x[0] - 1.2 * x[1] + 0.5 * x[2]) / 2.0;
            assert!((lifted.value(&x) - net1d.value(&[z])).abs() < 1e-14);
        }
        let e2 = lift_ridge(&net1d, &[0.0, 4.0]).unwrap();
        for i in 0..e2.width() {
            assert_eq!(e2.direction(i)[0], 0.0);
            assert_eq!(e2.direction(i)[1].abs(), 1.0);
        }
        assert!(lift_ridge(&net1d, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn barron_approximant_basics() {
        let empty = build_barron_relu_approximant(&[], 8, 2).unwrap();
        assert_eq!(empty.width(), 0);
        assert_eq!(empty.value(&[0.3, 0.4]), 0.0);
        let constant = BarronCosine { frequency: vec![0.0, 0.0], phase: 0.0, amplitude: 0.7 };
        let net = build_barron_relu_approximant(&[constant], 4, 2).unwrap();
        assert!((net.value(&[0.2, 0.9]) - 0.7).abs() < 1e-14);
        let t = BarronCosine { frequency: vec![std::f64::consts::PI, 0.0], phase: 0.0, amplitude: 1.0 };
        let net = build_barron_relu_approximant(&[t.clone(), t.clone()], 16, 2).unwrap();
        assert!(net.gamma_l1() <= net.budget());
        assert!(net.budget() <= 2.0 * 5.0 * t.barron_norm(2));
    }

    #[test]
    fn relu2_identities() {
        let sq = relu2_algebra(Relu2Kind::Square);
        assert!((sq.value(&[0.3]) - 0.09).abs() < 1e-15);
        let lin = relu2_algebra(Relu2Kind::Linear);
        assert!((lin.value(&[-0.7]) + 0.7).abs() < 1e-15);
        let one = relu2_algebra(Relu2Kind::One);
        let mut r = rng::stream(3, 0);
        for _ in 0..100 {
            let z: f64 = r.random_range(-1.0..=1.0);
            assert!((one.value(&[z]) - 1.0).abs() < 1e-14);
            assert!((lin.value(&[z]) - z).abs() < 1e-14);
            assert!((sq.value(&[z]) - z * z).abs() < 1e-14);
        }
        for k in [Relu2Kind::One, Relu2Kind::Linear, Relu2Kind::Square] {
            relu2_algebra(k).check(BiasInterval::Closed).unwrap();
        }
    }

    #[test]
    fn taylor_remainder_examples() {
        let zero = build_taylor_relu2_remainder(|_| 0.0, 8).unwrap();
        assert_eq!(zero.width(), 16);
        assert_eq!(zero.value(&[0.4]), 0.0);
        let cubic = build_taylor_relu2_remainder(|_| 1.0, 64).unwrap();
        assert!((cubic.value(&[0.6]) - 0.072).abs() < 2e-3);
        assert!(build_taylor_relu2_remainder(|_| 1.0, 1).is_err());
    }

    #[test]
    fn taylor_remainder_matches_direct_quadrature() {
        let phi = |s: f64| (3.0 * s).cos() + s;
        let net = build_taylor_relu2_remainder(phi, 128).unwrap();
        let (gx, gw) = gauss_legendre(40);
        for i in 0..20 {
            let z = -0.95 + i as f64 * 0.1;
            // ∫_0^z φ(s)(z−s)² ds with s = z(1+u)/2
            let direct: f64 = gx
                .iter()
                .zip(&gw)
                .map(|(u, w)| {
                    let s = 0.5 * z * (1.0 + u);
                    0.5 * z * w * phi(s) * (z - s).powi(2)
                })
                .sum();
            assert!((net.value(&[z]) - direct).abs() < 1e-3, "z={z}");
        }
    }

    #[test]
    fn taylor_remainder_error_decays() {
        let phi = |s: f64| (2.0 * s).sin();
        let exact = |z: f64| {
            // ∫_0^z sin(2s)(z−s)² ds = z²/2 − (1 − cos 2z)/4
            z * z / 2.0 - (1.0 - (2.0 * z).cos()) / 4.0
        };
        let sup_err = |s: usize| {
            let net = build_taylor_relu2_remainder(phi, s).unwrap();
            (0..=10 * s)
                .map(|i| -1.0 + 2.0 * i as f64 / (10 * s) as f64)
                .map(|z| (net.value(&[z]) - exact(z)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (sup_err(16), sup_err(32));
        assert!(e2 <= e1 / 1.6, "{e1} {e2}");
        assert!(e1 * 16.0 < 1.0);
    }
}
