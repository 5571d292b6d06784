//! The unit hypercube `(0,1)^d`: uniform samplers for the interior and the
//! boundary, and tensor-product Gauss–Legendre quadrature used as the
//! deterministic population-integral oracle.

use ndarray::Array2;
use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default ceiling on the number of nodes a single grid may hold.
pub const DEFAULT_NODE_CAP: usize = 1 << 24;

const INTERIOR_STREAM: u64 = 0x1;
const BOUNDARY_STREAM: u64 = 0x2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypercube {
    dim: usize,
}

impl Hypercube {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("hypercube dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|Ω| = 1`.
    pub fn measure(&self) -> f64 {
        1.0
    }

    /// `|∂Ω| = 2d`.
    pub fn boundary_measure(&self) -> f64 {
        2.0 * self.dim as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
}

/// `n` i.i.d. points in the interior or on the boundary, with the seed that
/// produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub points: Array2<f64>,
    pub seed: u64,
    pub region: Region,
}

impl SampleBatch {
    /// Wraps externally supplied points (rows are points).
    pub fn from_points(points: Array2<f64>, seed: u64, region: Region) -> Self {
        let points = points.as_standard_layout().into_owned();
        Self { points, seed, region }
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.flat()[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.flat().chunks_exact(self.dim().max(1))
    }

    fn flat(&self) -> &[f64] {
        self.points
            .as_slice()
            .expect("sample batches are stored in standard layout")
    }
}

/// Uniform i.i.d. points in `(0,1)^d`.
pub fn sample_interior(cube: Hypercube, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, INTERIOR_STREAM);
    let d = cube.dim();
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample::<f64, _>(Open01)).collect();
    Ok(SampleBatch {
        points: Array2::from_shape_vec((n, d), data).expect("shape"),
        seed,
        region: Region::Interior,
    })
}

/// Uniform i.i.d. points on `∂(0,1)^d`: a face is chosen with probability
/// `1/(2d)`, the remaining coordinates are uniform on the face.
pub fn sample_boundary(cube: Hypercube, n: usize, seed: u64) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = rng::stream(seed, BOUNDARY_STREAM);
    let d = cube.dim();
    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n {
        let face = rng.random_range(0..2 * d);
        let (axis, side) = (face / 2, (face % 2) as f64);
        for j in 0..d {
            if j == axis {
                data.push(side);
            } else {
                data.push(rng.sample::<f64, _>(Open01));
            }
        }
    }
    Ok(SampleBatch {
        points: Array2::from_shape_vec((n, d), data).expect("shape"),
        seed,
        region: Region::Boundary,
    })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be >= 1");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Per-axis composite rule: `panels` equal panels of `points` Gauss nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRule {
    pub panels: usize,
    pub points: usize,
}

impl Default for AxisRule {
    fn default() -> Self {
        Self { panels: 8, points: 8 }
    }
}

impl AxisRule {
    pub fn single(points: usize) -> Self {
        Self { panels: 1, points }
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.panels * self.points
    }

    /// Nodes and weights on `[0, 1]`.
    pub fn unit_nodes(&self) -> (Vec<f64>, Vec<f64>) {
        let edges: Vec<f64> = (0..=self.panels)
            .map(|j| j as f64 / self.panels as f64)
            .collect();
        panel_rule(&edges, self.points)
    }
}

/// Gauss rule of `points` nodes on every `[edges[j], edges[j+1]]`.
fn panel_rule(edges: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(points);
    let mut nodes = Vec::with_capacity((edges.len() - 1) * points);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        if half <= 0.0 {
            continue;
        }
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// Nodes (rows) and positive weights approximating an integral over the
/// interior or boundary of the hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub nodes: Array2<f64>,
    pub weights: Vec<f64>,
    pub region: Region,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes.ncols()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.nodes.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    /// `Σ w_i φ(x_i)`, evaluated in parallel and reduced in fixed order.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        use rayon::prelude::*;
        let vals: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| self.weights[i] * f(self.node(i)))
            .collect();
        crate::sum::pairwise_sum(&vals)
    }

    fn from_flat(d: usize, flat: Vec<f64>, weights: Vec<f64>, region: Region) -> Self {
        let q = weights.len();
        Self {
            nodes: Array2::from_shape_vec((q, d), flat).expect("shape"),
            weights,
            region,
        }
    }
}

/// Single-panel Gauss–Legendre tensor grid with `nodes_per_axis` nodes per
/// axis; exact for per-axis polynomial degree `<= 2·nodes_per_axis − 1`.
pub fn tensor_quadrature(cube: Hypercube, nodes_per_axis: usize, region: Region) -> Result<QuadratureGrid> {
    composite_quadrature(cube, AxisRule::single(nodes_per_axis), region, DEFAULT_NODE_CAP)
}

/// Composite Gauss–Legendre tensor grid.
pub fn composite_quadrature(cube: Hypercube, rule: AxisRule, region: Region, cap: usize) -> Result<QuadratureGrid> {
    if rule.panels == 0 || rule.points == 0 {
        return Err(Error::InvalidArgument("quadrature needs >= 1 panel and >= 1 point".into()));
    }
    let d = cube.dim();
    let per_axis = rule.nodes_per_axis();
    let total = match region {
        Region::Interior => per_axis.checked_pow(d as u32),
        Region::Boundary => per_axis
            .checked_pow(d as u32 - 1)
            .and_then(|v| v.checked_mul(2 * d)),
    }
    .unwrap_or(usize::MAX);
    if total > cap {
        return Err(Error::QuadratureBudget { nodes: total, cap });
    }
    let (x1, w1) = rule.unit_nodes();
    match region {
        Region::Interior => {
            let (flat, weights) = tensor_product(&x1, &w1, d);
            Ok(QuadratureGrid::from_flat(d, flat, weights, Region::Interior))
        }
        Region::Boundary => {
            let (face_flat, face_w) = tensor_product(&x1, &w1, d - 1);
            let mut flat = Vec::with_capacity(total * d);
            let mut weights = Vec::with_capacity(total);
            for axis in 0..d {
                for side in [0.0, 1.0] {
                    for (k, w) in face_w.iter().enumerate() {
                        let face_pt = &face_flat[k * (d - 1)..(k + 1) * (d - 1)];
                        let mut it = face_pt.iter();
                        for j in 0..d {
                            flat.push(if j == axis { side } else { *it.next().unwrap() });
                        }
                        weights.push(*w);
                    }
                }
            }
            Ok(QuadratureGrid::from_flat(d, flat, weights, Region::Boundary))
        }
    }
}

fn tensor_product(x1: &[f64], w1: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut flat: Vec<f64> = Vec::new();
    let mut weights = vec![1.0];
    for axis in 0..d {
        let mut next_flat = Vec::with_capacity(weights.len() * x1.len() * (axis + 1));
        let mut next_w = Vec::with_capacity(weights.len() * x1.len());
        for (k, w) in weights.iter().enumerate() {
            let prefix = &flat[k * axis..(k + 1) * axis];
            for (x, wx) in x1.iter().zip(w1) {
                next_flat.extend_from_slice(prefix);
                next_flat.push(*x);
                next_w.push(w * wx);
            }
        }
        flat = next_flat;
        weights = next_w;
    }
    (flat, weights)
}

/// The set `{x : normal·x + offset = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Interior grid whose panel edges follow the given kink hyperplanes, so
/// integrands that are smooth between kinks (ReLU / ReLU² networks against
/// smooth fields) keep Gauss–Legendre accuracy.
///
/// In `d = 1` the kinks split `[0,1]` directly. In `d = 2` the outer axis is
/// split at every point where the kink arrangement changes (line crossings,
/// line/edge hits, vertical lines) and each outer node integrates the inner
/// axis split at the kinks on that slice. For `d >= 3` this falls back to the
/// plain composite grid.
pub fn aligned_quadrature(cube: Hypercube, kinks: &[Hyperplane], rule: AxisRule) -> Result<QuadratureGrid> {
    let d = cube.dim();
    for h in kinks {
        if h.normal.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: h.normal.len() });
        }
    }
    match d {
        1 => {
            let mut edges = uniform_edges(rule.panels);
            edges.extend(kinks.iter().filter_map(|h| root_1d(h.normal[0], h.offset)));
            let edges = clean_edges(edges);
            let (x, w) = panel_rule(&edges, rule.points);
            Ok(QuadratureGrid::from_flat(1, x, w, Region::Interior))
        }
        2 => Ok(aligned_2d(kinks, rule)),
        _ => composite_quadrature(cube, rule, Region::Interior, DEFAULT_NODE_CAP),
    }
}

fn uniform_edges(panels: usize) -> Vec<f64> {
    (0..=panels).map(|j| j as f64 / panels as f64).collect()
}

fn root_1d(a: f64, b: f64) -> Option<f64> {
    if a == 0.0 {
        return None;
    }
    let r = -b / a;
    (r > 0.0 && r < 1.0).then_some(r)
}

/// Sorts, clips to `[0,1]` and drops near-duplicate edges.
fn clean_edges(mut edges: Vec<f64>) -> Vec<f64> {
    edges.retain(|e| e.is_finite() && (0.0..=1.0).contains(e));
    edges.push(0.0);
    edges.push(1.0);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(edges.len());
    for e in edges {
        if out.last().is_none_or(|last| e - last > 1e-13) {
            out.push(e);
        }
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn aligned_2d(kinks: &[Hyperplane], rule: AxisRule) -> QuadratureGrid {
    // kink lines a1·x1 + a2·x2 + b = 0
    let lines: Vec<(f64, f64, f64)> = kinks
        .iter()
        .map(|h| (h.normal[0], h.normal[1], h.offset))
        .filter(|(a1, a2, _)| *a1 != 0.0 || *a2 != 0.0)
        .collect();

    let mut outer = uniform_edges(rule.panels);
    for &(a1, a2, b) in &lines {
        // vertical line, or where the line meets x2 = 0 / x2 = 1
        outer.extend(root_1d(a1, b));
        if a2 != 0.0 {
            outer.extend(root_1d(a1, b + a2));
        }
    }
    for (i, &(a1, a2, b)) in lines.iter().enumerate() {
        for &(c1, c2, e) in &lines[i + 1..] {
            let det = a1 * c2 - a2 * c1;
            if det.abs() < 1e-14 {
                continue;
            }
            let x1 = (-b * c2 + a2 * e) / det;
            let x2 = (-a1 * e + c1 * b) / det;
            if (0.0..=1.0).contains(&x1) && (0.0..=1.0).contains(&x2) {
                outer.push(x1);
            }
        }
    }
    let outer = clean_edges(outer);
    let (ox, ow) = panel_rule(&outer, rule.points);

    let inner_uniform = uniform_edges(rule.panels);
    let mut flat = Vec::new();
    let mut weights = Vec::new();
    for (x1, w1) in ox.iter().zip(&ow) {
        let mut edges = inner_uniform.clone();
        for &(a1, a2, b) in &lines {
            edges.extend(root_1d(a2, b + a1 * x1));
        }
        let edges = clean_edges(edges);
        let (ix, iw) = panel_rule(&edges, rule.points);
        for (x2, w2) in ix.iter().zip(&iw) {
            flat.push(*x1);
            flat.push(*x2);
            weights.push(w1 * w2);
        }
    }
    QuadratureGrid::from_flat(2, flat, weights, Region::Interior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cube(d: usize) -> Hypercube {
        Hypercube::new(d).unwrap()
    }

    #[test]
    fn rejects_zero_dim_and_zero_samples() {
        assert!(Hypercube::new(0).is_err());
        assert!(sample_interior(cube(2), 0, 1).is_err());
        assert!(sample_boundary(cube(2), 0, 1).is_err());
    }

    #[test]
    fn interior_points_in_open_cube_and_deterministic() {
        let a = sample_interior(cube(2), 4, 1).unwrap();
        assert_eq!(a.len(), 4);
        assert!(a.points.iter().all(|&v| v > 0.0 && v < 1.0));
        let b = sample_interior(cube(2), 4, 1).unwrap();
        assert_eq!(a, b);
        let c = sample_interior(cube(2), 4, 2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn interior_mean_law_of_large_numbers() {
        let n = 100_000;
        let b = sample_interior(cube(1), n, 7).unwrap();
        let mean = b.points.iter().sum::<f64>() / n as f64;
        // 3σ = 3 / sqrt(12 n)
        assert!((mean - 0.5).abs() <= 3.0 / (12.0 * n as f64).sqrt() + 1e-12, "mean {mean}");
        assert!((mean - 0.5).abs() <= 0.01);
    }

    #[test]
    fn boundary_1d_is_two_points() {
        let b = sample_boundary(cube(1), 100, 3).unwrap();
        assert!(b.points.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(b.region, Region::Boundary);
    }

    #[test]
    fn boundary_face_fraction_2d() {
        let n = 10_000;
        let b = sample_boundary(cube(2), n, 5).unwrap();
        let on_face = b.iter().filter(|p| p[0] == 0.0).count() as f64 / n as f64;
        assert!((on_face - 0.25).abs() <= 0.02, "fraction {on_face}");
    }

    #[test]
    fn boundary_points_touch_a_face_3d() {
        let b = sample_boundary(cube(3), 500, 11).unwrap();
        for p in b.iter() {
            assert!(p.iter().any(|&v| v == 0.0 || v == 1.0));
            assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn quadrature_constant_and_linear() {
        let g = tensor_quadrature(cube(3), 4, Region::Interior).unwrap();
        assert!((g.integrate(|_| 1.0) - 1.0).abs() < 1e-15);
        let g1 = tensor_quadrature(cube(1), 10, Region::Interior).unwrap();
        assert!((g1.integrate(|x| x[0]) - 0.5).abs() < 1e-15);
        let g2 = tensor_quadrature(cube(2), 20, Region::Interior).unwrap();
        assert!(g2.integrate(|x| (PI * x[0]).cos()).abs() < 1e-12);
    }

    #[test]
    fn polynomial_exactness_per_axis_degree() {
        let n = 5;
        let g = tensor_quadrature(cube(2), n, Region::Interior).unwrap();
        let deg = 2 * n as i32 - 1;
        let q = g.integrate(|x| x[0].powi(deg) * x[1].powi(deg));
        let exact = 1.0 / ((deg + 1) as f64).powi(2);
        assert!((q - exact).abs() < 1e-14);
    }

    #[test]
    fn cosine_orthogonality_table() {
        // ∫ Π cos(π k_i x_i)^2 = 2^{-#nonzero}
        for d in 1..=3 {
            let g = composite_quadrature(cube(d), AxisRule::default(), Region::Interior, DEFAULT_NODE_CAP).unwrap();
            let total = 4usize.pow(d as u32);
            for code in 0..total {
                let k: Vec<usize> = (0..d).map(|i| (code / 4usize.pow(i as u32)) % 4).collect();
                let q = g.integrate(|x| {
                    k.iter()
                        .zip(x)
                        .map(|(&ki, &xi)| (PI * ki as f64 * xi).cos().powi(2))
                        .product()
                });
                let nz = k.iter().filter(|&&v| v != 0).count();
                assert!((q - 0.5f64.powi(nz as i32)).abs() < 1e-10, "k={k:?}");
            }
        }
    }

    #[test]
    fn boundary_weights_sum_to_2d() {
        for d in 1..=3 {
            let g = composite_quadrature(cube(d), AxisRule { panels: 2, points: 3 }, Region::Boundary, DEFAULT_NODE_CAP)
                .unwrap();
            let s: f64 = g.weights.iter().sum();
            assert!((s - 2.0 * d as f64).abs() < 1e-13);
            assert!(g.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let err = composite_quadrature(cube(6), AxisRule { panels: 8, points: 8 }, Region::Interior, 1_000_000);
        assert!(matches!(err, Err(Error::QuadratureBudget { .. })));
    }

    #[test]
    fn aligned_grid_integrates_abs_exactly() {
        // |x1 + x2 - 0.7|: kink along one line
        let kinks = vec![Hyperplane { normal: vec![1.0, 1.0], offset: -0.7 }];
        let g = aligned_quadrature(cube(2), &kinks, AxisRule { panels: 2, points: 4 }).unwrap();
        let q = g.integrate(|x| (x[0] + x[1] - 0.7).abs());
        // exact: ∫∫ |s - 0.7| over unit square, s = x1 + x2
        // computed by splitting the triangle regions analytically
        let exact = {
            // E|S - c| for S = U1 + U2, density s on [0,1], 2 - s on [1,2]
            let c: f64 = 0.7;
            // ∫_0^c (c-s) s ds + ∫_c^1 (s-c) s ds + ∫_1^2 (s-c)(2-s) ds
            let a = c.powi(3) / 6.0;
            let b = (1.0 / 3.0 - c / 2.0) - (c.powi(3) / 3.0 - c.powi(3) / 2.0);
            let tail = {
                // ∫_1^2 (s-c)(2-s) ds = ∫_0^1 (1+u-c)(1-u) du
                let k = 1.0 - c;
                k * 0.5 + (0.5 - 1.0 / 3.0)
            };
            a + b + tail
        };
        assert!((q - exact).abs() < 1e-13, "{q} vs {exact}");
        let s: f64 = g.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
    }
}
