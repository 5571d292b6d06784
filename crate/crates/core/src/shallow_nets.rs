//! Constrained two-layer networks
//!
//! ```text
//! u(x) = Σ_i γ_i σ_k(ω_i·x + t_i),   |ω_i|_1 = 1,  t_i ∈ [−1, 1),  Σ_i |γ_i| ≤ B
//! ```
//!
//! with `σ_1 = ReLU` and `σ_2 = ReLU²`. Derivatives follow the a.e.
//! convention `σ_1'(z) = 1{z ≥ 0}` and `σ_2''(z) = 2·1{z ≥ 0}`; indicators are
//! treated as locally constant, so tests keep evaluation points off the kink
//! surfaces `ω_i·x + t_i = 0`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::domain::Hyperplane;
use crate::error::{Error, Result};
use crate::eval::Evaluable;
use crate::rng;

/// Tolerance for `|ω_i|_1 = 1` and the `ℓ1` budget.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// Gap kept below the open end of the bias interval after projection.
pub const BIAS_EPS: f64 = 1e-9;

/// Activation `σ_k`, `k ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Activation {
    Relu,
    ReluSquared,
}

impl Activation {
    pub fn order(self) -> u8 {
        match self {
            Activation::Relu => 1,
            Activation::ReluSquared => 2,
        }
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        let p = z.max(0.0);
        match self {
            Activation::Relu => p,
            Activation::ReluSquared => p * p,
        }
    }

    /// First derivative under the a.e. convention.
    #[inline]
    pub fn d1(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::ReluSquared => 2.0 * z.max(0.0),
        }
    }

    /// Second derivative under the a.e. convention.
    #[inline]
    pub fn d2(self, z: f64) -> f64 {
        match self {
            Activation::Relu => 0.0,
            Activation::ReluSquared => {
                if z >= 0.0 {
                    2.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl TryFrom<u8> for Activation {
    type Error = String;
    fn try_from(k: u8) -> std::result::Result<Self, String> {
        match k {
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::ReluSquared),
            other => Err(format!("activation order must be 1 or 2, got {other}")),
        }
    }
}

impl From<Activation> for u8 {
    fn from(a: Activation) -> u8 {
        a.order()
    }
}

/// Which bias interval a feasibility check uses. Trained nets live in the
/// half-open class; constructed approximants may sit on its closure `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BiasInterval {
    HalfOpen,
    Closed,
}

/// A width-`m` two-layer network on `R^d` with an outer-coefficient budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NetDocument", try_from = "NetDocument")]
pub struct ShallowNet {
    activation: Activation,
    gamma: Vec<f64>,
    directions: Array2<f64>,
    biases: Vec<f64>,
    budget: f64,
}

/// Hessian together with a flag raised when the activation makes it vanish
/// identically (ReLU).
#[derive(Debug, Clone, PartialEq)]
pub struct HessianEval {
    pub matrix: Array2<f64>,
    pub identically_zero: bool,
}

/// Cotangent with respect to the parameters `(γ, Ω, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCotangent {
    pub d_gamma: Vec<f64>,
    pub d_directions: Array2<f64>,
    pub d_biases: Vec<f64>,
}

impl ParamCotangent {
    pub fn zeros(width: usize, dim: usize) -> Self {
        Self {
            d_gamma: vec![0.0; width],
            d_directions: Array2::zeros((width, dim)),
            d_biases: vec![0.0; width],
        }
    }

    pub fn width(&self) -> usize {
        self.d_gamma.len()
    }

    pub fn dim(&self) -> usize {
        self.d_directions.ncols()
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ParamCotangent, scale: f64) {
        for (a, b) in self.d_gamma.iter_mut().zip(&other.d_gamma) {
            *a += scale * b;
        }
        self.d_directions.scaled_add(scale, &other.d_directions);
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            *a += scale * b;
        }
    }

    /// Parameters flattened as `[γ..., Ω row-major..., t...]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.d_gamma.clone();
        v.extend(self.d_directions.iter().copied());
        v.extend_from_slice(&self.d_biases);
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.to_flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Result of [`ShallowNet::project`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub net: ShallowNet,
    /// Rows whose direction was zero (or non-finite) and got reset to `e_1`.
    pub reset_rows: Vec<usize>,
}

impl ShallowNet {
    /// Builds a network after checking shapes. Feasibility is not enforced;
    /// see [`ShallowNet::check`] and [`ShallowNet::project`].
    pub fn new(
        activation: Activation,
        gamma: Vec<f64>,
        directions: Array2<f64>,
        biases: Vec<f64>,
        budget: f64,
    ) -> Result<Self> {
        let m = gamma.len();
        if directions.nrows() != m {
            return Err(Error::DimensionMismatch { expected: m, got: directions.nrows() });
        }
        if biases.len() != m {
            return Err(Error::DimensionMismatch { expected: m, got: biases.len() });
        }
        if directions.ncols() == 0 {
            return Err(Error::InvalidArgument("networks need input dimension >= 1".into()));
        }
        if !(budget >= 0.0) || !budget.is_finite() {
            return Err(Error::InvalidArgument(format!("budget must be finite and >= 0, got {budget}")));
        }
        Ok(Self {
            activation,
            gamma,
            directions: directions.as_standard_layout().into_owned(),
            biases,
            budget,
        })
    }

    /// Width-zero network (the zero function).
    pub fn empty(activation: Activation, dim: usize, budget: f64) -> Result<Self> {
        Self::new(activation, vec![], Array2::zeros((0, dim)), vec![], budget)
    }

    /// Random feasible network: `ω_i` uniform on the `ℓ1` sphere (symmetrized
    /// Dirichlet(1,…,1)), `t_i ~ U[−1, 1)`, `γ_i ~ U[−B/m, B/m]`.
    pub fn random(width: usize, dim: usize, budget: f64, activation: Activation, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        let mut rng = rng::stream(seed, 0x6e6574);
        let mut directions = Array2::zeros((width, dim));
        for mut row in directions.rows_mut() {
            let draws: Vec<f64> = (0..dim).map(|_| Exp1.sample(&mut rng)).collect();
            let total: f64 = draws.iter().sum();
            for (w, e) in row.iter_mut().zip(draws) {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *w = sign * e / total;
            }
        }
        let biases = (0..width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scale = if width == 0 { 0.0 } else { budget / width as f64 };
        let gamma = (0..width)
            .map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 })
            .collect();
        Self::new(activation, gamma, directions, biases, budget)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn input_dim(&self) -> usize {
        self.directions.ncols()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn directions(&self) -> &Array2<f64> {
        &self.directions
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.directions.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn gamma_l1(&self) -> f64 {
        self.gamma.iter().map(|g| g.abs()).sum()
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    /// Multiplies every outer coefficient (and the budget) by `s`.
    pub fn scale_outer(mut self, s: f64) -> Self {
        for g in &mut self.gamma {
            *g *= s;
        }
        self.budget *= s.abs();
        self
    }

    /// Concatenates the units of two networks with the same activation and
    /// input dimension; budgets add.
    pub fn concat(&self, other: &ShallowNet) -> Result<ShallowNet> {
        if self.activation != other.activation {
            return Err(Error::InvalidArgument("cannot concatenate networks with different activations".into()));
        }
        if self.input_dim() != other.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: other.input_dim() });
        }
        let d = self.input_dim();
        let mut gamma = self.gamma.clone();
        gamma.extend_from_slice(&other.gamma);
        let mut biases = self.biases.clone();
        biases.extend_from_slice(&other.biases);
        let mut flat: Vec<f64> = self.directions.iter().copied().collect();
        flat.extend(other.directions.iter().copied());
        let directions = Array2::from_shape_vec((gamma.len(), d), flat).expect("shape");
        ShallowNet::new(self.activation, gamma, directions, biases, self.budget + other.budget)
    }

    /// Checks the class constraints.
    pub fn check(&self, interval: BiasInterval) -> Result<()> {
        for i in 0..self.width() {
            let l1: f64 = self.direction(i).iter().map(|w| w.abs()).sum();
            if !((l1 - 1.0).abs() <= CONSTRAINT_TOL) {
                return Err(Error::Constraint(format!("row {i}: |ω|_1 = {l1}")));
            }
            let t = self.biases[i];
            let ok = match interval {
                BiasInterval::HalfOpen => (-1.0..1.0).contains(&t),
                BiasInterval::Closed => (-1.0..=1.0).contains(&t),
            };
            if !ok {
                return Err(Error::Constraint(format!("row {i}: bias {t} outside interval")));
            }
        }
        let l1 = self.gamma_l1();
        if !(l1 <= self.budget + CONSTRAINT_TOL) {
            return Err(Error::Constraint(format!("Σ|γ| = {l1} exceeds budget {}", self.budget)));
        }
        Ok(())
    }

    pub fn is_feasible(&self) -> bool {
        self.check(BiasInterval::HalfOpen).is_ok()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    #[inline]
    fn preactivation(&self, i: usize, x: &[f64]) -> f64 {
        let mut z = self.biases[i];
        for (w, xj) in self.direction(i).iter().zip(x) {
            z += w * xj;
        }
        z
    }

    /// `Σ_i γ_i σ_k(ω_i·x + t_i)`.
    pub fn eval_value(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.value_unchecked(x))
    }

    fn value_unchecked(&self, x: &[f64]) -> f64 {
        let act = self.activation;
        (0..self.width())
            .map(|i| self.gamma[i] * act.value(self.preactivation(i, x)))
            .sum()
    }

    /// `Σ_i γ_i σ_k'(ω_i·x + t_i) ω_i`.
    pub fn eval_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.gradient_unchecked(x))
    }

    fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.input_dim()];
        for i in 0..self.width() {
            let c = self.gamma[i] * self.activation.d1(self.preactivation(i, x));
            if c != 0.0 {
                for (gj, wj) in g.iter_mut().zip(self.direction(i)) {
                    *gj += c * wj;
                }
            }
        }
        g
    }

    /// `Σ_i γ_i σ_k''(ω_i·x + t_i) ω_i ω_iᵀ`; identically zero (and flagged)
    /// for ReLU.
    pub fn eval_hessian(&self, x: &[f64]) -> Result<HessianEval> {
        self.check_point(x)?;
        let d = self.input_dim();
        if self.activation == Activation::Relu {
            return Ok(HessianEval { matrix: Array2::zeros((d, d)), identically_zero: true });
        }
        Ok(HessianEval { matrix: self.hessian_unchecked(x), identically_zero: false })
    }

    fn hessian_unchecked(&self, x: &[f64]) -> Array2<f64> {
        let d = self.input_dim();
        let mut h = Array2::zeros((d, d));
        if self.activation == Activation::Relu {
            return h;
        }
        for i in 0..self.width() {
            let c = self.gamma[i] * self.activation.d2(self.preactivation(i, x));
            if c != 0.0 {
                let w = self.direction(i);
                for a in 0..d {
                    for b in 0..d {
                        h[[a, b]] += c * w[a] * w[b];
                    }
                }
            }
        }
        h
    }

    /// Parameter cotangent of `cv·u(x) + ⟨cg, ∇u(x)⟩ + ⟨CH, ∇²u(x)⟩`.
    pub fn backprop(
        &self,
        x: &[f64],
        cot_value: f64,
        cot_gradient: &[f64],
        cot_hessian: Option<&Array2<f64>>,
    ) -> Result<ParamCotangent> {
        let mut out = ParamCotangent::zeros(self.width(), self.input_dim());
        self.backprop_into(x, cot_value, cot_gradient, cot_hessian, &mut out)?;
        Ok(out)
    }

    /// Like [`ShallowNet::backprop`] but accumulates into `out`.
    pub fn backprop_into(
        &self,
        x: &[f64],
        cot_value: f64,
        cot_gradient: &[f64],
        cot_hessian: Option<&Array2<f64>>,
        out: &mut ParamCotangent,
    ) -> Result<()> {
        let d = self.input_dim();
        self.check_point(x)?;
        if cot_gradient.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cot_gradient.len() });
        }
        if let Some(ch) = cot_hessian {
            if self.activation != Activation::ReluSquared {
                return Err(Error::OrderRequired { loss: "hessian cotangent" });
            }
            if ch.dim() != (d, d) {
                return Err(Error::DimensionMismatch { expected: d, got: ch.nrows() });
            }
        }
        if out.width() != self.width() || out.dim() != d {
            return Err(Error::DimensionMismatch { expected: self.width(), got: out.width() });
        }
        let act = self.activation;
        let mut sym_w = vec![0.0; d];
        for i in 0..self.width() {
            let w = self.direction(i);
            let z = self.preactivation(i, x);
            let (s, s1, s2) = (act.value(z), act.d1(z), act.d2(z));
            let a: f64 = cot_gradient.iter().zip(w).map(|(c, wj)| c * wj).sum();
            let mut q = 0.0;
            if let Some(ch) = cot_hessian {
                // sym_w = (CH + CHᵀ) ω_i
                for r in 0..d {
                    let mut acc = 0.0;
                    for c in 0..d {
                        acc += (ch[[r, c]] + ch[[c, r]]) * w[c];
                    }
                    sym_w[r] = acc;
                }
                q = 0.5 * sym_w.iter().zip(w).map(|(v, wj)| v * wj).sum::<f64>();
            }
            out.d_gamma[i] += cot_value * s + s1 * a + s2 * q;
            let g = self.gamma[i];
            let through_z = g * (cot_value * s1 + s2 * a);
            out.d_biases[i] += through_z;
            let mut row = out.d_directions.row_mut(i);
            for j in 0..d {
                let mut v = through_z * x[j] + g * s1 * cot_gradient[j];
                if cot_hessian.is_some() {
                    v += g * s2 * sym_w[j];
                }
                row[j] += v;
            }
        }
        Ok(())
    }

    /// Projects onto the class: rows renormalized to `|ω_i|_1 = 1` (signs
    /// kept; zero rows reset to `e_1`), biases clamped into
    /// `[−1, 1 − BIAS_EPS]`, and `γ` Euclidean-projected onto the `ℓ1` ball of
    /// radius `B`.
    pub fn project(&self) -> Projection {
        let d = self.input_dim();
        let mut directions = self.directions.clone();
        let mut reset_rows = Vec::new();
        for (i, mut row) in directions.rows_mut().into_iter().enumerate() {
            let l1: f64 = row.iter().map(|w| w.abs()).sum();
            if (l1 - 1.0).abs() <= CONSTRAINT_TOL {
                continue;
            } else if l1 > 0.0 && l1.is_finite() {
                row.mapv_inplace(|w| w / l1);
            } else {
                row.fill(0.0);
                row[0] = 1.0;
                reset_rows.push(i);
            }
        }
        debug_assert_eq!(directions.ncols(), d);
        let biases = self
            .biases
            .iter()
            .map(|&t| if t.is_finite() { t.clamp(-1.0, 1.0 - BIAS_EPS) } else { 0.0 })
            .collect();
        let raw: Vec<f64> = self
            .gamma
            .iter()
            .map(|&g| if g.is_finite() { g } else { 0.0 })
            .collect();
        let gamma = project_l1_ball(&raw, self.budget);
        Projection {
            net: ShallowNet {
                activation: self.activation,
                gamma,
                directions,
                biases,
                budget: self.budget,
            },
            reset_rows,
        }
    }

    /// `self − step · cot` applied to every parameter (no projection).
    pub fn step(&self, cot: &ParamCotangent, step: f64) -> ShallowNet {
        let mut next = self.clone();
        next.apply_flat_update(&cot.to_flat(), -step);
        next
    }

    /// Number of trainable scalars, `m(d + 2)`.
    pub fn param_count(&self) -> usize {
        self.width() * (self.input_dim() + 2)
    }

    /// Parameters flattened as `[γ..., Ω row-major..., t...]`.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut v = self.gamma.clone();
        v.extend(self.directions.iter().copied());
        v.extend_from_slice(&self.biases);
        v
    }

    /// Replaces the parameters from the flat layout of [`ShallowNet::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let (m, d) = (self.width(), self.input_dim());
        assert_eq!(flat.len(), m * (d + 2), "flat parameter length");
        self.gamma.copy_from_slice(&flat[..m]);
        self.directions
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&flat[m..m + m * d]);
        self.biases.copy_from_slice(&flat[m + m * d..]);
    }

    /// `params += scale · delta` in the flat layout.
    pub fn apply_flat_update(&mut self, delta: &[f64], scale: f64) {
        let mut p = self.params_flat();
        for (pi, di) in p.iter_mut().zip(delta) {
            *pi += scale * di;
        }
        self.set_params_flat(&p);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&NetDocument::from(self)).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        serde_json::to_string_pretty(&NetDocument::from(self)).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: NetDocument = serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))?;
        doc.try_into()
    }
}

impl Evaluable for ShallowNet {
    fn dim(&self) -> usize {
        self.input_dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.input_dim());
        self.value_unchecked(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_unchecked(x)
    }

    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        self.hessian_unchecked(x)
    }

    fn kinks(&self) -> Vec<Hyperplane> {
        (0..self.width())
            .filter(|&i| self.gamma[i] != 0.0)
            .map(|i| Hyperplane { normal: self.direction(i).to_vec(), offset: self.biases[i] })
            .collect()
    }
}

/// Euclidean projection of `v` onto `{w : Σ|w_i| ≤ radius}` by the sort-based
/// soft threshold.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius <= 0.0 {
        return vec![0.0; v.len()];
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let candidate = (cumsum - radius) / (j + 1) as f64;
        if uj - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    v.iter()
        .map(|x| x.signum() * (x.abs() - theta).max(0.0))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetDocument {
    order: u8,
    width: usize,
    budget: f64,
    gamma: Vec<f64>,
    omega: Vec<Vec<f64>>,
    t: Vec<f64>,
}

impl From<&ShallowNet> for NetDocument {
    fn from(net: &ShallowNet) -> Self {
        NetDocument {
            order: net.activation.order(),
            width: net.width(),
            budget: net.budget,
            gamma: net.gamma.clone(),
            omega: net.directions.rows().into_iter().map(|r| r.to_vec()).collect(),
            t: net.biases.clone(),
        }
    }
}

impl From<ShallowNet> for NetDocument {
    fn from(net: ShallowNet) -> Self {
        NetDocument::from(&net)
    }
}

impl TryFrom<NetDocument> for ShallowNet {
    type Error = Error;

    fn try_from(doc: NetDocument) -> Result<Self> {
        let activation = Activation::try_from(doc.order).map_err(Error::Serialization)?;
        if doc.gamma.len() != doc.width || doc.omega.len() != doc.width || doc.t.len() != doc.width {
            return Err(Error::Serialization(format!("arrays do not match width {}", doc.width)));
        }
        let d = doc.omega.first().map(|r| r.len()).unwrap_or(1);
        if doc.omega.iter().any(|r| r.len() != d) {
            return Err(Error::Serialization("ragged omega".into()));
        }
        let flat: Vec<f64> = doc.omega.into_iter().flatten().collect();
        let directions = Array2::from_shape_vec((doc.width, d), flat).map_err(|e| Error::Serialization(e.to_string()))?;
        ShallowNet::new(activation, doc.gamma, directions, doc.t, doc.budget)
    }
}
