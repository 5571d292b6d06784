//! Manufactured problems on `(0,1)^d` with closed-form exact solutions.
//!
//! - Poisson with homogeneous Neumann data: `−Δu = f`.
//! - Static Schrödinger with Neumann data: `−Δu + Vu = f`.
//! - Linear second-order elliptic with Dirichlet data:
//!   `−Σ a_ij ∂_ij u + Σ b_i ∂_i u + c u = f`, `u = g` on the boundary.
//!
//! Neumann problems use cosine products `u*(x) = A Π cos(π k_i x_i)`, which
//! have zero normal derivative on every face for integer `k`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::constructor::BarronCosine;
use crate::domain::Hypercube;
use crate::error::{Error, Result};
use crate::eval::Evaluable;

/// `u*(x) = amplitude · Π_i cos(π k_i x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineSolution {
    pub wave: Vec<u32>,
    pub amplitude: f64,
}

impl CosineSolution {
    pub fn new(wave: Vec<u32>, amplitude: f64) -> Result<Self> {
        if wave.is_empty() {
            return Err(Error::InvalidArgument("wave vector must be non-empty".into()));
        }
        Ok(Self { wave, amplitude })
    }

    /// `|k|²`.
    pub fn wave_norm_sq(&self) -> f64 {
        self.wave.iter().map(|&k| (k as f64).powi(2)).sum()
    }

    pub fn wave_l1(&self) -> f64 {
        self.wave.iter().map(|&k| k as f64).sum()
    }

    pub fn is_constant(&self) -> bool {
        self.wave.iter().all(|&k| k == 0)
    }

    fn nonzero_modes(&self) -> usize {
        self.wave.iter().filter(|&&k| k != 0).count()
    }

    fn factors(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.wave
            .iter()
            .zip(x)
            .map(|(&k, &xi)| {
                let a = PI * k as f64 * xi;
                (a.cos(), a.sin())
            })
            .unzip()
    }

    /// Expands the product into `2^{r−1}` pure ridge cosines (`r` = number of
    /// nonzero modes), each `A/2^{r−1} · cos(ω·x)` with `|ω|_1 = π|k|_1`.
    pub fn cosine_expansion(&self) -> Vec<BarronCosine> {
        let idx: Vec<usize> = (0..self.wave.len()).filter(|&i| self.wave[i] != 0).collect();
        let d = self.wave.len();
        if idx.is_empty() {
            return vec![BarronCosine { frequency: vec![0.0; d], phase: 0.0, amplitude: self.amplitude }];
        }
        let r = idx.len();
        let amp = self.amplitude / 2f64.powi(r as i32 - 1);
        (0..1usize << (r - 1))
            .map(|mask| {
                let mut freq = vec![0.0; d];
                for (bit, &i) in idx.iter().enumerate() {
                    // first nonzero mode keeps sign +1
                    let sign = if bit > 0 && (mask >> (bit - 1)) & 1 == 1 { -1.0 } else { 1.0 };
                    freq[i] = sign * PI * self.wave[i] as f64;
                }
                BarronCosine { frequency: freq, phase: 0.0, amplitude: amp }
            })
            .collect()
    }

    /// Budget bound `(1 + π|k|_1)² · |A| · 2^{r−1}` used for network sizing.
    /// It dominates the Barron-2 norm of the cosine expansion.
    pub fn declared_barron_norm(&self) -> f64 {
        let r = self.nonzero_modes().max(1);
        (1.0 + PI * self.wave_l1()).powi(2) * self.amplitude.abs() * 2f64.powi(r as i32 - 1)
    }

    /// `Σ_j |A_j| (1 + |ω_j|_1)^s` over the cosine expansion.
    pub fn expansion_barron_norm(&self, s: i32) -> f64 {
        self.cosine_expansion().iter().map(|t| t.barron_norm(s)).sum()
    }
}

impl Evaluable for CosineSolution {
    fn dim(&self) -> usize {
        self.wave.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (c, _) = self.factors(x);
        self.amplitude * c.iter().product::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let (c, s) = self.factors(x);
        (0..self.wave.len())
            .map(|j| {
                let others: f64 = (0..c.len()).filter(|&i| i != j).map(|i| c[i]).product();
                -self.amplitude * PI * self.wave[j] as f64 * s[j] * others
            })
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        let (c, s) = self.factors(x);
        let d = self.wave.len();
        let k: Vec<f64> = self.wave.iter().map(|&k| k as f64).collect();
        let mut h = Array2::zeros((d, d));
        for a in 0..d {
            for b in 0..d {
                let rest: f64 = (0..d).filter(|&i| i != a && i != b).map(|i| c[i]).product();
                h[[a, b]] = if a == b {
                    -self.amplitude * PI * PI * k[a] * k[a] * c[a] * rest
                } else {
                    self.amplitude * PI * PI * k[a] * k[b] * s[a] * s[b] * rest
                };
            }
        }
        h
    }
}

/// `u*(x) = A exp(−|x − c|² / (2 s²))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub center: Vec<f64>,
    pub width: f64,
    pub amplitude: f64,
}

impl Evaluable for GaussianBump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c).powi(2)).sum();
        self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u = self.value(x);
        let s2 = self.width * self.width;
        x.iter().zip(&self.center).map(|(a, c)| -u * (a - c) / s2).collect()
    }

    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        let u = self.value(x);
        let s2 = self.width * self.width;
        let d = self.center.len();
        let dx: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        Array2::from_shape_fn((d, d), |(a, b)| {
            u * (dx[a] * dx[b] / (s2 * s2) - if a == b { 1.0 / s2 } else { 0.0 })
        })
    }
}

/// Exact solution of an elliptic Dirichlet problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solution {
    Cosine(CosineSolution),
    Gaussian(GaussianBump),
}

impl Evaluable for Solution {
    fn dim(&self) -> usize {
        match self {
            Solution::Cosine(s) => s.dim(),
            Solution::Gaussian(s) => s.dim(),
        }
    }
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            Solution::Cosine(s) => s.value(x),
            Solution::Gaussian(s) => s.value(x),
        }
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Solution::Cosine(s) => s.gradient(x),
            Solution::Gaussian(s) => s.gradient(x),
        }
    }
    fn hessian(&self, x: &[f64]) -> Array2<f64> {
        match self {
            Solution::Cosine(s) => s.hessian(x),
            Solution::Gaussian(s) => s.hessian(x),
        }
    }
}

/// `−Δu = f` with `∂u/∂ν = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonProblem {
    pub cube: Hypercube,
    pub solution: CosineSolution,
}

impl PoissonProblem {
    /// `f(x) = π²|k|² u*(x)`.
    pub fn source(&self, x: &[f64]) -> f64 {
        PI * PI * self.solution.wave_norm_sq() * self.solution.value(x)
    }

    /// `E_P(u*) = −∫|∇u*|² = −A² π²|k|² / 2^r`.
    pub fn exact_energy(&self) -> f64 {
        let r = self.solution.nonzero_modes() as i32;
        -(self.solution.amplitude.powi(2)) * PI * PI * self.solution.wave_norm_sq() / 2f64.powi(r)
    }
}

/// Potential `V` of the Schrödinger problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Potential {
    Constant(f64),
    /// `V(x) = 2 + sin(π x_1)`, so `2 ≤ V ≤ 3` on the cube.
    Sine,
}

impl Potential {
    pub fn at(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Constant(v) => *v,
            Potential::Sine => 2.0 + (PI * x[0]).sin(),
        }
    }

    pub fn v_min(&self) -> f64 {
        match self {
            Potential::Constant(v) => *v,
            Potential::Sine => 2.0,
        }
    }

    pub fn v_max(&self) -> f64 {
        match self {
            Potential::Constant(v) => *v,
            Potential::Sine => 3.0,
        }
    }
}

/// `−Δu + Vu = f` with `∂u/∂ν = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchrodingerProblem {
    pub cube: Hypercube,
    pub solution: CosineSolution,
    pub potential: Potential,
}

impl SchrodingerProblem {
    pub fn potential(&self, x: &[f64]) -> f64 {
        self.potential.at(x)
    }

    /// `f = (π²|k|² + V) u*`.
    pub fn source(&self, x: &[f64]) -> f64 {
        (PI * PI * self.solution.wave_norm_sq() + self.potential(x)) * self.solution.value(x)
    }

    pub fn v_min(&self) -> f64 {
        self.potential.v_min()
    }

    pub fn v_max(&self) -> f64 {
        self.potential.v_max()
    }
}

/// Coefficient family of the elliptic Dirichlet problem. Off-diagonal `a_ij`
/// are zero in both families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientFamily {
    /// `a = I`, `b = 0`, `c = 0`.
    LaplaceLike,
    /// `a_11 = 1 + ½ sin(π x_1)`, `a_ii = 1` otherwise, constant `b_i = b`, `c`.
    VariableCoeff { b: f64, c: f64 },
}

/// `−Σ a_ij ∂_ij u + Σ b_i ∂_i u + c u = f` in the cube, `u = g` on its boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticProblem {
    pub cube: Hypercube,
    pub solution: Solution,
    pub family: CoefficientFamily,
}

impl EllipticProblem {
    pub fn a(&self, x: &[f64]) -> Array2<f64> {
        let d = self.cube.dim();
        let mut a = Array2::eye(d);
        if let CoefficientFamily::VariableCoeff { .. } = self.family {
            a[[0, 0]] = 1.0 + 0.5 * (PI * x[0]).sin();
        }
        a
    }

    pub fn b(&self, _x: &[f64]) -> Vec<f64> {
        let d = self.cube.dim();
        match self.family {
            CoefficientFamily::LaplaceLike => vec![0.0; d],
            CoefficientFamily::VariableCoeff { b, .. } => vec![b; d],
        }
    }

    pub fn c(&self, _x: &[f64]) -> f64 {
        match self.family {
            CoefficientFamily::LaplaceLike => 0.0,
            CoefficientFamily::VariableCoeff { c, .. } => c,
        }
    }

    /// Applies the operator `L` to the given local jet of a field.
    pub fn apply_operator(&self, x: &[f64], value: f64, gradient: &[f64], hessian: &Array2<f64>) -> f64 {
        let a = self.a(x);
        let b = self.b(x);
        let second: f64 = a.iter().zip(hessian.iter()).map(|(aij, hij)| aij * hij).sum();
        let first: f64 = b.iter().zip(gradient).map(|(bi, gi)| bi * gi).sum();
        -second + first + self.c(x) * value
    }

    /// `f = L u*`.
    pub fn source(&self, x: &[f64]) -> f64 {
        let s = &self.solution;
        self.apply_operator(x, s.value(x), &s.gradient(x), &s.hessian(x))
    }

    /// Dirichlet data `g = u*` on the boundary.
    pub fn boundary_data(&self, y: &[f64]) -> f64 {
        self.solution.value(y)
    }

    /// Sup bound `M` of the coefficients.
    pub fn coefficient_bound(&self) -> f64 {
        match self.family {
            CoefficientFamily::LaplaceLike => 1.0,
            CoefficientFamily::VariableCoeff { b, c } => 1.5f64.max(b.abs()).max(c.abs()),
        }
    }
}

/// Any catalog problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Poisson(PoissonProblem),
    Schrodinger(SchrodingerProblem),
    Elliptic(EllipticProblem),
}

/// `k ≠ 0` is required: with `k = 0` the source vanishes and the solution is
/// not unique in the zero-mean space.
pub fn make_poisson(wave: Vec<u32>) -> Result<PoissonProblem> {
    let solution = CosineSolution::new(wave, 1.0)?;
    if solution.is_constant() {
        return Err(Error::InvalidArgument("Poisson wave vector must be nonzero".into()));
    }
    Ok(PoissonProblem { cube: Hypercube::new(solution.wave.len())?, solution })
}

pub fn make_schrodinger(wave: Vec<u32>, v0: f64) -> Result<SchrodingerProblem> {
    if !(v0 > 0.0) {
        return Err(Error::InvalidArgument(format!("potential must be > 0, got {v0}")));
    }
    make_schrodinger_with(wave, Potential::Constant(v0))
}

pub fn make_schrodinger_with(wave: Vec<u32>, potential: Potential) -> Result<SchrodingerProblem> {
    let solution = CosineSolution::new(wave, 1.0)?;
    Ok(SchrodingerProblem { cube: Hypercube::new(solution.wave.len())?, solution, potential })
}

pub fn make_elliptic(family: CoefficientFamily, solution: Solution) -> Result<EllipticProblem> {
    let d = solution.dim();
    if let Solution::Gaussian(g) = &solution {
        if !(g.width > 0.0) {
            return Err(Error::InvalidArgument("bump width must be > 0".into()));
        }
    }
    Ok(EllipticProblem { cube: Hypercube::new(d)?, solution, family })
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.cube().dim()
    }

    pub fn cube(&self) -> Hypercube {
        match self {
            Problem::Poisson(p) => p.cube,
            Problem::Schrodinger(p) => p.cube,
            Problem::Elliptic(p) => p.cube,
        }
    }

    pub fn exact(&self) -> &dyn Evaluable {
        match self {
            Problem::Poisson(p) => &p.solution,
            Problem::Schrodinger(p) => &p.solution,
            Problem::Elliptic(p) => &p.solution,
        }
    }

    pub fn source(&self, x: &[f64]) -> f64 {
        match self {
            Problem::Poisson(p) => p.source(x),
            Problem::Schrodinger(p) => p.source(x),
            Problem::Elliptic(p) => p.source(x),
        }
    }

    /// Declared Barron-2 budget of the exact solution, when it is a cosine
    /// product.
    pub fn declared_barron_norm(&self) -> Option<f64> {
        match self {
            Problem::Poisson(p) => Some(p.solution.declared_barron_norm()),
            Problem::Schrodinger(p) => Some(p.solution.declared_barron_norm()),
            Problem::Elliptic(EllipticProblem { solution: Solution::Cosine(s), .. }) => {
                Some(s.declared_barron_norm())
            }
            Problem::Elliptic(_) => None,
        }
    }

    /// Parses a catalog id such as `poisson:d=2,k=1,0`,
    /// `schrodinger:d=1,k=1,v0=1`, `schrodinger:d=1,k=1,v=sine`,
    /// `elliptic:d=2,kind=variable,k=1,1,b=0.5,c=1` or
    /// `elliptic:d=2,kind=laplace,bump=0.5,0.5,width=0.3`.
    pub fn parse(id: &str) -> Result<Problem> {
        let bad = || Error::UnknownProblem(id.to_string());
        let (family, rest) = id.split_once(':').unwrap_or((id, ""));
        let params = parse_params(rest).ok_or_else(bad)?;
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice());
        for (k, _) in &params {
            let allowed: &[&str] = match family.trim() {
                "poisson" => &["d", "k"],
                "schrodinger" => &["d", "k", "v0", "v"],
                "elliptic" => &["d", "k", "kind", "b", "c", "bump", "width"],
                _ => &[],
            };
            if !allowed.contains(&k.as_str()) {
                return Err(bad());
            }
        }
        let single = |key: &str| -> Result<Option<&str>> {
            match get(key) {
                None => Ok(None),
                Some([v]) => Ok(Some(v.as_str())),
                Some(_) => Err(bad()),
            }
        };
        let num = |key: &str| -> Result<Option<f64>> {
            single(key)?.map(|v| v.parse::<f64>().map_err(|_| bad())).transpose()
        };
        let d = match single("d")? {
            Some(v) => v.parse::<usize>().map_err(|_| bad())?,
            None => get("k").map(|k| k.len()).unwrap_or(1),
        };
        if d == 0 {
            return Err(bad());
        }
        let wave = match get("k") {
            Some(ks) => {
                let w: Vec<u32> = ks.iter().map(|k| k.parse::<u32>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
                if w.len() != d {
                    return Err(bad());
                }
                w
            }
            None => {
                let mut w = vec![0; d];
                w[0] = 1;
                w
            }
        };
        match family.trim() {
            "poisson" => Ok(Problem::Poisson(make_poisson(wave)?)),
            "schrodinger" => {
                let potential = match (single("v")?, num("v0")?) {
                    (Some("sine"), None) => Potential::Sine,
                    (None, Some(v0)) => Potential::Constant(v0),
                    (None, None) => Potential::Constant(1.0),
                    _ => return Err(bad()),
                };
                if let Potential::Constant(v0) = potential {
                    return Ok(Problem::Schrodinger(make_schrodinger(wave, v0)?));
                }
                Ok(Problem::Schrodinger(make_schrodinger_with(wave, potential)?))
            }
            "elliptic" => {
                let family = match single("kind")?.unwrap_or("laplace") {
                    "laplace" => CoefficientFamily::LaplaceLike,
                    "variable" => CoefficientFamily::VariableCoeff {
                        b: num("b")?.unwrap_or(0.5),
                        c: num("c")?.unwrap_or(1.0),
                    },
                    _ => return Err(bad()),
                };
                let solution = match get("bump") {
                    Some(center) => {
                        let center: Vec<f64> = center
                            .iter()
                            .map(|v| v.parse::<f64>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|_| bad())?;
                        if center.len() != d || get("k").is_some() {
                            return Err(bad());
                        }
                        Solution::Gaussian(GaussianBump { center, width: num("width")?.unwrap_or(0.3), amplitude: 1.0 })
                    }
                    None => Solution::Cosine(CosineSolution::new(wave, 1.0)?),
                };
                Ok(Problem::Elliptic(make_elliptic(family, solution)?))
            }
            _ => Err(bad()),
        }
    }
}

/// `key=v1,v2,key2=v3` → `[(key, [v1, v2]), (key2, [v3])]`.
fn parse_params(s: &str) -> Option<Vec<(String, Vec<String>)>> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if let Some((k, v)) = tok.split_once('=') {
            if out.iter().any(|(key, _)| key == k.trim()) {
                return None;
            }
            out.push((k.trim().to_string(), vec![v.trim().to_string()]));
        } else {
            out.last_mut()?.1.push(tok.to_string());
        }
    }
    Some(out)
}

/// Exact-solution derivatives up to order two at the given points (rows).
pub fn exact_fields(problem: &Problem, points: &Array2<f64>) -> (Array1<f64>, Array2<f64>, Array3<f64>) {
    let (n, d) = points.dim();
    let u = problem.exact();
    let mut values = Array1::zeros(n);
    let mut grads = Array2::zeros((n, d));
    let mut hess = Array3::zeros((n, d, d));
    for (i, row) in points.rows().into_iter().enumerate() {
        let x = row.to_vec();
        values[i] = u.value(&x);
        for (j, g) in u.gradient(&x).into_iter().enumerate() {
            grads[[i, j]] = g;
        }
        let h = u.hessian(&x);
        for a in 0..d {
            for b in 0..d {
                hess[[i, a, b]] = h[[a, b]];
            }
        }
    }
    (values, grads, hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{composite_quadrature, sample_interior, AxisRule, Region, DEFAULT_NODE_CAP};

    fn probe_grid(d: usize) -> Vec<Vec<f64>> {
        let axis = [0.0, 0.25, 0.5, 0.75, 1.0];
        let mut pts = vec![vec![]];
        for _ in 0..d {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    fn laplacian_fd(u: &dyn Evaluable, x: &[f64], h: f64) -> f64 {
        let mut lap = 0.0;
        for j in 0..x.len() {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[j] += h;
            m[j] -= h;
            lap += (u.value(&p) - 2.0 * u.value(x) + u.value(&m)) / (h * h);
        }
        lap
    }

    #[test]
    fn poisson_rejects_zero_wave() {
        assert!(make_poisson(vec![0, 0]).is_err());
        assert!(make_poisson(vec![]).is_err());
    }

    #[test]
    fn poisson_residual_and_compatibility() {
        for wave in [vec![1], vec![1, 0], vec![2, 1], vec![1, 1, 1]] {
            let p = make_poisson(wave.clone()).unwrap();
            let d = wave.len();
            for x in probe_grid(d) {
                let lap: f64 = p.solution.hessian(&x).diag().sum();
                assert!((-lap - p.source(&x)).abs() < 1e-10);
                assert!((lap + PI * PI * p.solution.wave_norm_sq() * p.solution.value(&x)).abs() < 1e-10);
            }
            let g = composite_quadrature(p.cube, AxisRule::default(), Region::Interior, DEFAULT_NODE_CAP).unwrap();
            assert!(g.integrate(|x| p.source(x)).abs() < 1e-10);
            assert!(g.integrate(|x| p.solution.value(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn poisson_exact_energy_d1() {
        let p = make_poisson(vec![1]).unwrap();
        assert!((p.exact_energy() + PI * PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn symbolic_derivatives_match_finite_differences() {
        let sols: Vec<Box<dyn Evaluable>> = vec![
            Box::new(CosineSolution::new(vec![2, 1, 3], 0.7).unwrap()),
            Box::new(GaussianBump { center: vec![0.4, 0.6], width: 0.3, amplitude: 1.2 }),
        ];
        let h = 1e-5;
        for s in &sols {
            let d = s.dim();
            let b = sample_interior(Hypercube::new(d).unwrap(), 20, 3).unwrap();
            for x in b.iter() {
                let g = s.gradient(x);
                let hs = s.hessian(x);
                for j in 0..d {
                    let mut p = x.to_vec();
                    let mut m = x.to_vec();
                    p[j] += h;
                    m[j] -= h;
                    let fd = (s.value(&p) - s.value(&m)) / (2.0 * h);
                    assert!((fd - g[j]).abs() < 1e-7);
                    let gp = s.gradient(&p);
                    let gm = s.gradient(&m);
                    for a in 0..d {
                        assert!(((gp[a] - gm[a]) / (2.0 * h) - hs[[a, j]]).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn neumann_condition_holds_on_faces() {
        let s = CosineSolution::new(vec![1, 2], 1.0).unwrap();
        for &(axis, side) in &[(0usize, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)] {
            let mut x = vec![0.37, 0.61];
            x[axis] = side;
            assert!(s.gradient(&x)[axis].abs() < 1e-12);
        }
        assert_eq!(s.value(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn schrodinger_source_and_bounds() {
        let p = make_schrodinger(vec![1], 1.0).unwrap();
        for x in probe_grid(1) {
            let expected = (PI * PI + 1.0) * (PI * x[0]).cos();
            assert!((p.source(&x) - expected).abs() < 1e-12);
            let lap = p.solution.hessian(&x)[[0, 0]];
            assert!((-lap + p.potential(&x) * p.solution.value(&x) - p.source(&x)).abs() < 1e-10);
        }
        assert_eq!(p.v_min().min(1.0), 1.0);
        assert_eq!(p.v_max().max(1.0), 1.0);
        assert!(make_schrodinger(vec![1], 0.0).is_err());
        let s = make_schrodinger_with(vec![1, 1], Potential::Sine).unwrap();
        for x in probe_grid(2) {
            let v = s.potential(&x);
            assert!(0.0 < s.v_min() && s.v_min() <= v && v <= s.v_max());
        }
    }

    #[test]
    fn elliptic_laplace_like_reduces_to_poisson() {
        let e = make_elliptic(CoefficientFamily::LaplaceLike, Solution::Cosine(CosineSolution::new(vec![1, 0], 1.0).unwrap())).unwrap();
        let p = make_poisson(vec![1, 0]).unwrap();
        for x in probe_grid(2) {
            assert!((e.source(&x) - p.source(&x)).abs() < 1e-12);
            assert_eq!(e.boundary_data(&x), (PI * x[0]).cos());
        }
    }

    #[test]
    fn elliptic_variable_residual_against_finite_differences() {
        let fam = CoefficientFamily::VariableCoeff { b: 0.5, c: 1.0 };
        for sol in [
            Solution::Cosine(CosineSolution::new(vec![1, 1], 1.0).unwrap()),
            Solution::Gaussian(GaussianBump { center: vec![0.5, 0.4], width: 0.3, amplitude: 1.0 }),
        ] {
            let e = make_elliptic(fam, sol).unwrap();
            let h = 1e-4;
            for x in probe_grid(2) {
                let x: Vec<f64> = x.iter().map(|v| v.clamp(0.05, 0.95)).collect();
                // central differences of u*, independent of the symbolic Hessian
                let u = &e.solution;
                let mut fd_l = 0.0;
                let a = e.a(&x);
                let b = e.b(&x);
                for j in 0..2 {
                    let mut p = x.clone();
                    let mut m = x.clone();
                    p[j] += h;
                    m[j] -= h;
                    let d2 = (u.value(&p) - 2.0 * u.value(&x) + u.value(&m)) / (h * h);
                    let d1 = (u.value(&p) - u.value(&m)) / (2.0 * h);
                    fd_l += -a[[j, j]] * d2 + b[j] * d1;
                }
                fd_l += e.c(&x) * u.value(&x);
                assert!((fd_l - e.source(&x)).abs() < 1e-5);
                // symbolic residual is exact
                let r = e.apply_operator(&x, u.value(&x), &u.gradient(&x), &u.hessian(&x)) - e.source(&x);
                assert!(r.abs() < 1e-9);
            }
        }
        let _ = laplacian_fd;
    }

    #[test]
    fn exact_fields_shapes_and_trace() {
        let p = Problem::parse("poisson:d=2,k=1,2").unwrap();
        let b = sample_interior(p.cube(), 10, 1).unwrap();
        let (v, _g, h) = exact_fields(&p, &b.points);
        for i in 0..10 {
            let tr = h[[i, 0, 0]] + h[[i, 1, 1]];
            assert!((tr + PI * PI * 5.0 * v[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn catalog_ids() {
        assert!(matches!(Problem::parse("poisson:d=2,k=1,0"), Ok(Problem::Poisson(_))));
        assert!(matches!(Problem::parse("schrodinger:d=1,k=1,v0=2"), Ok(Problem::Schrodinger(_))));
        match Problem::parse("schrodinger:d=2,k=1,0,v=sine").unwrap() {
            Problem::Schrodinger(s) => assert_eq!(s.potential, Potential::Sine),
            _ => unreachable!(),
        }
        assert!(matches!(Problem::parse("elliptic:d=2,kind=variable,k=1,1,b=0.25"), Ok(Problem::Elliptic(_))));
        assert!(matches!(Problem::parse("elliptic:d=2,bump=0.5,0.5,width=0.2"), Ok(Problem::Elliptic(_))));
        for bad in ["heat:d=1", "poisson:d=2,k=1", "poisson:d=1,k=0", "poisson:d=1,q=3", "poisson:d=x"] {
            assert!(Problem::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn barron_bookkeeping_is_consistent() {
        for wave in [vec![1], vec![1, 1], vec![2, 0, 1], vec![1, 1, 1]] {
            let s = CosineSolution::new(wave.clone(), 0.8).unwrap();
            let terms = s.cosine_expansion();
            let r = wave.iter().filter(|&&k| k != 0).count();
            assert_eq!(terms.len(), 1 << (r - 1));
            let b = sample_interior(Hypercube::new(wave.len()).unwrap(), 25, 8).unwrap();
            for x in b.iter() {
                let sum: f64 = terms.iter().map(|t| t.value(x)).sum();
                assert!((sum - s.value(x)).abs() < 1e-12);
            }
            let tight = s.expansion_barron_norm(2);
            assert!((tight - 0.8 * (1.0 + PI * s.wave_l1()).powi(2)).abs() < 1e-10);
            assert!(s.declared_barron_norm() >= tight - 1e-12);
        }
    }
}
