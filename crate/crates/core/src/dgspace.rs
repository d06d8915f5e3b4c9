//! Discontinuous piecewise polynomials over a [`Mesh`].
//!
//! A [`DgFunction`] stores, for every element, the coefficients of the mapped
//! Legendre polynomials `P_0 .. P_k`. Anything that can report a value and a
//! slope inside an element implements [`PiecewiseField`]; traces, norms and
//! the bilinear form are written against that trait so that DG functions,
//! closed-form functions and their differences are treated alike.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::mesh::{Coord, Mesh};
use crate::orthopoly::{gauss_legendre, legendre_all};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DgError {
    #[error("element index {index} out of range (mesh has {elements} elements)")]
    ElementOutOfRange { index: usize, elements: usize },
    #[error("coefficient table has {got} entries, expected {expected}")]
    BadCoefficientCount { expected: usize, got: usize },
    #[error("polynomial degree must be at least 1 (got {0})")]
    BadDegree(usize),
    #[error("mesh has no layer transition point")]
    NoTransition,
    #[error("functions live on different meshes or degrees")]
    Incompatible,
    #[error("csv output failed: {0}")]
    Io(String),
}

/// A scalar function of position.
pub type ScalarFn = Arc<dyn Fn(Coord) -> f64 + Send + Sync>;

/// Value and `x`-derivative at a point of an element.
pub trait PiecewiseField {
    /// `e` is the 0-based element, `t` the reference coordinate, `at` the
    /// mapped physical point.
    fn value_and_slope(&self, e: usize, t: f64, at: Coord) -> (f64, f64);
}

/// A smooth function given in closed form together with its derivative.
#[derive(Clone)]
pub struct Analytic {
    pub value: ScalarFn,
    pub slope: ScalarFn,
}

impl Analytic {
    pub fn new(
        value: impl Fn(Coord) -> f64 + Send + Sync + 'static,
        slope: impl Fn(Coord) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { value: Arc::new(value), slope: Arc::new(slope) }
    }
}

impl fmt::Debug for Analytic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Analytic(..)")
    }
}

impl PiecewiseField for Analytic {
    fn value_and_slope(&self, _e: usize, _t: f64, at: Coord) -> (f64, f64) {
        ((self.value)(at), (self.slope)(at))
    }
}

/// `a - b`.
pub struct Difference<'a>(pub &'a dyn PiecewiseField, pub &'a dyn PiecewiseField);

impl PiecewiseField for Difference<'_> {
    fn value_and_slope(&self, e: usize, t: f64, at: Coord) -> (f64, f64) {
        let (va, da) = self.0.value_and_slope(e, t, at);
        let (vb, db) = self.1.value_and_slope(e, t, at);
        (va - vb, da - db)
    }
}

/// Element-wise Legendre-modal function of degree `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DgFunction {
    mesh: Arc<Mesh>,
    degree: usize,
    coeffs: Vec<f64>,
}

impl DgFunction {
    pub fn new(mesh: Arc<Mesh>, degree: usize, coeffs: Vec<f64>) -> Result<Self, DgError> {
        if degree == 0 {
            return Err(DgError::BadDegree(degree));
        }
        let expected = mesh.elements() * (degree + 1);
        if coeffs.len() != expected {
            return Err(DgError::BadCoefficientCount { expected, got: coeffs.len() });
        }
        Ok(Self { mesh, degree, coeffs })
    }

    pub fn zeros(mesh: Arc<Mesh>, degree: usize) -> Result<Self, DgError> {
        let n = mesh.elements() * (degree + 1);
        Self::new(mesh, degree, vec![0.0; n])
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Flat table, element-major: entry `e * (k + 1) + m`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let s = self.degree + 1;
        &self.coeffs[e * s..(e + 1) * s]
    }

    fn check(&self, e: usize) -> Result<(), DgError> {
        if e >= self.mesh.elements() {
            Err(DgError::ElementOutOfRange { index: e, elements: self.mesh.elements() })
        } else {
            Ok(())
        }
    }

    /// `sum_m c(e, m) P_m(t)`.
    pub fn evaluate(&self, e: usize, t: f64) -> Result<f64, DgError> {
        self.check(e)?;
        Ok(self.value_and_slope_ref(e, t).0)
    }

    /// Physical derivative; the reference derivative times `2 / h_e`.
    pub fn derivative_evaluate(&self, e: usize, t: f64) -> Result<f64, DgError> {
        self.check(e)?;
        Ok(self.value_and_slope_ref(e, t).1)
    }

    fn value_and_slope_ref(&self, e: usize, t: f64) -> (f64, f64) {
        let (p, dp) = legendre_all(self.degree, t);
        let c = self.element_coeffs(e);
        let v = c.iter().zip(&p).map(|(a, b)| a * b).sum();
        let d: f64 = c.iter().zip(&dp).map(|(a, b)| a * b).sum();
        (v, d * 2.0 / self.mesh.width(e))
    }

    pub fn traces(&self) -> TraceValues {
        traces_of(self, &self.mesh)
    }

    fn compatible(&self, other: &Self) -> Result<(), DgError> {
        if self.degree != other.degree || !(Arc::ptr_eq(&self.mesh, &other.mesh) || self.mesh == other.mesh) {
            return Err(DgError::Incompatible);
        }
        Ok(())
    }

    /// `self - other`, coefficient-wise.
    pub fn sub(&self, other: &Self) -> Result<Self, DgError> {
        self.compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Self { mesh: Arc::clone(&self.mesh), degree: self.degree, coeffs })
    }

    /// `self + other`, coefficient-wise.
    pub fn add(&self, other: &Self) -> Result<Self, DgError> {
        self.compatible(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { mesh: Arc::clone(&self.mesh), degree: self.degree, coeffs })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mesh: Arc::clone(&self.mesh), degree: self.degree, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    /// Writes `x, value` at `per_element` uniformly spaced points per element.
    pub fn write_samples_csv<W: Write>(&self, out: W, per_element: usize) -> Result<(), DgError> {
        let io = |e: csv::Error| DgError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "value"]).map_err(io)?;
        for e in 0..self.mesh.elements() {
            for i in 0..per_element {
                let t = if per_element == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (per_element - 1) as f64 };
                let x = self.mesh.coord(e, t).x;
                let v = self.value_and_slope_ref(e, t).0;
                w.write_record([format!("{x:e}"), format!("{v:e}")]).map_err(io)?;
            }
        }
        w.flush().map_err(|e| DgError::Io(e.to_string()))
    }
}

impl PiecewiseField for DgFunction {
    fn value_and_slope(&self, e: usize, t: f64, _at: Coord) -> (f64, f64) {
        self.value_and_slope_ref(e, t)
    }
}

/// One-sided limits, jump and average at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeTrace {
    /// `v(x_j^-)`; absent at `x_0`.
    pub left: Option<f64>,
    /// `v(x_j^+)`; absent at `x_N`.
    pub right: Option<f64>,
    pub jump: f64,
    pub average: f64,
}

impl NodeTrace {
    fn from_limits(left: Option<f64>, right: Option<f64>) -> Self {
        let (jump, average) = match (left, right) {
            (Some(l), Some(r)) => (l - r, 0.5 * (l + r)),
            (None, Some(r)) => (-r, r),
            (Some(l), None) => (l, l),
            (None, None) => (0.0, 0.0),
        };
        Self { left, right, jump, average }
    }
}

/// Traces of a function and of its derivative at every node `x_0 ..= x_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceValues {
    pub value: Vec<NodeTrace>,
    pub slope: Vec<NodeTrace>,
}

/// Node traces of any piecewise field, with the one-sided conventions
/// `[v(x_0)] = -v(x_0^+)`, `{v(x_0)} = v(x_0^+)`, `[v(x_N)] = {v(x_N)} = v(x_N^-)`.
pub fn traces_of(field: &dyn PiecewiseField, mesh: &Mesh) -> TraceValues {
    let n = mesh.elements();
    let mut value = Vec::with_capacity(n + 1);
    let mut slope = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let left = (j > 0).then(|| field.value_and_slope(j - 1, 1.0, mesh.coord(j - 1, 1.0)));
        let right = (j < n).then(|| field.value_and_slope(j, -1.0, mesh.coord(j, -1.0)));
        value.push(NodeTrace::from_limits(left.map(|p| p.0), right.map(|p| p.0)));
        slope.push(NodeTrace::from_limits(left.map(|p| p.1), right.map(|p| p.1)));
    }
    TraceValues { value, slope }
}

/// A quadrature point mapped into an element; `weight` includes the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub t: f64,
    pub at: Coord,
    pub weight: f64,
}

// Each layer cell spans at most this many e-foldings of exp(-rate * (1 - x)).
const LAYER_CELL_SPAN: f64 = 8.0;
// Beyond this many e-foldings from x = 1 the layer term is below 1e-26.
const LAYER_CUTOFF: f64 = 60.0;

/// Gauss-Legendre integration over mesh elements.
///
/// With a layer rate `r`, an element is split into cells so that the factor
/// `exp(-r (1 - x))` changes by at most `e^8` across any cell where it is
/// non-negligible. Elements far from the layer keep a single cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementQuadrature {
    points: usize,
    layer_rate: Option<f64>,
}

impl ElementQuadrature {
    pub fn gauss(points: usize) -> Self {
        assert!(points >= 1, "at least one quadrature point");
        Self { points, layer_rate: None }
    }

    pub fn layer_aware(points: usize, rate: f64) -> Self {
        assert!(points >= 1, "at least one quadrature point");
        Self { points, layer_rate: (rate.is_finite() && rate > 0.0).then_some(rate) }
    }

    pub fn points_per_cell(&self) -> usize {
        self.points
    }

    pub fn layer_rate(&self) -> Option<f64> {
        self.layer_rate
    }

    pub fn with_points(&self, points: usize) -> Self {
        Self { points, ..*self }
    }

    /// Reference sub-intervals of element `e`, ordered left to right.
    pub fn cells(&self, mesh: &Mesh, e: usize) -> Vec<(f64, f64)> {
        let Some(rate) = self.layer_rate else {
            return vec![(-1.0, 1.0)];
        };
        let h = mesh.width(e);
        let s_right = rate * mesh.node_to_right(e + 1);
        let span = rate * h;
        if s_right >= LAYER_CUTOFF || span <= LAYER_CELL_SPAN {
            return vec![(-1.0, 1.0)];
        }
        // layer coordinate s = s_right + span (1 - t) / 2
        let to_t = |s: f64| 1.0 - 2.0 * (s - s_right) / span;
        let s_left = s_right + span;
        let mut bounds = vec![1.0];
        let mut s = s_right;
        while s + LAYER_CELL_SPAN < s_left.min(LAYER_CUTOFF) {
            s += LAYER_CELL_SPAN;
            bounds.push(to_t(s));
        }
        bounds.push(-1.0);
        bounds.reverse();
        bounds.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Quadrature points of element `e`.
    pub fn element_points(&self, mesh: &Mesh, e: usize) -> Vec<QuadPoint> {
        let rule = gauss_legendre(self.points);
        let half_h = 0.5 * mesh.width(e);
        let mut out = Vec::new();
        for (a, b) in self.cells(mesh, e) {
            let mid = 0.5 * (a + b);
            let rad = 0.5 * (b - a);
            for (s, w) in rule.iter() {
                let t = mid + rad * s;
                out.push(QuadPoint { t, at: mesh.coord(e, t), weight: w * rad * half_h });
            }
        }
        out
    }
}

/// Element-wise L2 projection of `g` onto degree-`k` polynomials.
pub fn project_function(
    g: &dyn Fn(Coord) -> f64,
    mesh: Arc<Mesh>,
    k: usize,
    quad: &ElementQuadrature,
) -> Result<DgFunction, DgError> {
    if k == 0 {
        return Err(DgError::BadDegree(k));
    }
    let s = k + 1;
    let mut coeffs = vec![0.0; mesh.elements() * s];
    for e in 0..mesh.elements() {
        let h = mesh.width(e);
        let c = &mut coeffs[e * s..(e + 1) * s];
        for qp in quad.element_points(&mesh, e) {
            let gv = g(qp.at);
            let (p, _) = legendre_all(k, qp.t);
            for m in 0..s {
                c[m] += qp.weight * gv * p[m];
            }
        }
        for (m, cm) in c.iter_mut().enumerate() {
            // physical weights carry h/2; (2m+1)/2 * (2/h)
            *cm *= (2.0 * m as f64 + 1.0) / h;
        }
    }
    DgFunction::new(mesh, k, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Arc<Mesh> {
        Arc::new(Mesh::from_points(vec![0.0, 1.0]).unwrap())
    }

    fn random_fn(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh>, k: usize) -> DgFunction {
        let n = mesh.elements() * (k + 1);
        DgFunction::new(Arc::clone(mesh), k, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn evaluate_basics() {
        let m = unit();
        let z = DgFunction::zeros(Arc::clone(&m), 2).unwrap();
        assert_eq!(z.evaluate(0, 0.4).unwrap(), 0.0);
        let c = DgFunction::new(Arc::clone(&m), 2, vec![3.5, 0.0, 0.0]).unwrap();
        assert_eq!(c.evaluate(0, -0.2).unwrap(), 3.5);
        assert_eq!(c.derivative_evaluate(0, 0.1).unwrap(), 0.0);
        let p1 = DgFunction::new(Arc::clone(&m), 2, vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p1.evaluate(0, 0.3).unwrap(), 0.3);
        let p2 = DgFunction::new(m, 2, vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(p2.derivative_evaluate(0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn derivative_scales_with_width() {
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.25]).unwrap());
        let f = DgFunction::new(m, 1, vec![0.0, 1.0]).unwrap();
        assert!((f.derivative_evaluate(0, 0.7).unwrap() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_and_bad_sizes() {
        let m = unit();
        let f = DgFunction::zeros(Arc::clone(&m), 1).unwrap();
        assert_eq!(f.evaluate(1, 0.0), Err(DgError::ElementOutOfRange { index: 1, elements: 1 }));
        assert!(matches!(DgFunction::new(m, 1, vec![1.0]), Err(DgError::BadCoefficientCount { .. })));
    }

    #[test]
    fn jump_and_average_from_limits() {
        // element 0: constant 2, element 1: constant 5
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.5, 1.0]).unwrap());
        let f = DgFunction::new(m, 1, vec![2.0, 0.0, 5.0, 0.0]).unwrap();
        let tr = f.traces();
        assert_eq!(tr.value[1].jump, -3.0);
        assert_eq!(tr.value[1].average, 3.5);
        assert_eq!(tr.value[0].jump, -2.0);
        assert_eq!(tr.value[0].average, 2.0);
        assert_eq!(tr.value[2].jump, 5.0);
        assert_eq!(tr.value[2].average, 5.0);
    }

    #[test]
    fn unit_function_boundary_convention() {
        let m = Arc::new(Mesh::uniform(4));
        let one = project_function(&|_| 1.0, m, 1, &ElementQuadrature::gauss(3)).unwrap();
        let tr = one.traces();
        assert!((tr.value[0].jump + 1.0).abs() < 1e-14);
        assert!((tr.value[4].jump - 1.0).abs() < 1e-14);
        for j in 1..4 {
            assert!(tr.value[j].jump.abs() < 1e-13);
        }
    }

    #[test]
    fn projection_examples() {
        let m = unit();
        let one = project_function(&|_| 1.0, Arc::clone(&m), 3, &ElementQuadrature::gauss(5)).unwrap();
        assert!((one.coeffs()[0] - 1.0).abs() < 1e-14);
        assert!(one.coeffs()[1..].iter().all(|c| c.abs() < 1e-14));
        let x = project_function(&|c| c.x, m, 1, &ElementQuadrature::gauss(3)).unwrap();
        assert!((x.coeffs()[0] - 0.5).abs() < 1e-14);
        assert!((x.coeffs()[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.1, 0.45, 0.7, 1.0]).unwrap());
        let g = |c: Coord| 1.0 - 2.0 * c.x + 3.0 * c.x.powi(2) - c.x.powi(3);
        let f = project_function(&g, Arc::clone(&m), 3, &ElementQuadrature::gauss(6)).unwrap();
        for e in 0..4 {
            for i in 0..7 {
                let t = -1.0 + i as f64 / 3.0;
                let x = m.coord(e, t);
                assert!((f.evaluate(e, t).unwrap() - g(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_evaluate_consistency_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.2, 0.3, 0.75, 1.0]).unwrap());
        for _ in 0..20 {
            let f = random_fn(&mut rng, &m, 3);
            let g = random_fn(&mut rng, &m, 3);
            let a: f64 = rng.gen_range(-2.0..2.0);
            let tr = f.traces();
            for j in 1..4 {
                assert!((tr.value[j].left.unwrap() - f.evaluate(j - 1, 1.0).unwrap()).abs() < 1e-14);
                assert!((tr.value[j].right.unwrap() - f.evaluate(j, -1.0).unwrap()).abs() < 1e-14);
            }
            let combo = f.scale(a).add(&g).unwrap();
            let (tf, tg, tc) = (f.traces(), g.traces(), combo.traces());
            for j in 0..=4 {
                let want = a * tf.value[j].jump + tg.value[j].jump;
                assert!((tc.value[j].jump - want).abs() < 1e-12);
                let want = a * tf.slope[j].average + tg.slope[j].average;
                assert!((tc.slope[j].average - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.3, 0.35, 1.0]).unwrap());
        let f = random_fn(&mut rng, &m, 4);
        let locate = |c: Coord| -> (usize, f64) {
            let e = (0..3).find(|&e| c.x <= m.points()[e + 1]).unwrap();
            (e, 2.0 * (c.x - m.points()[e]) / m.width(e) - 1.0)
        };
        let g = |c: Coord| {
            let (e, t) = locate(c);
            f.evaluate(e, t).unwrap()
        };
        let p = project_function(&g, Arc::clone(&m), 4, &ElementQuadrature::gauss(5)).unwrap();
        for (a, b) in p.coeffs().iter().zip(f.coeffs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_cells_cover_element() {
        let cfg = crate::mesh::MeshConfig::new(16, 2.0, 2.0, 1e-6);
        let m = crate::mesh::bakhvalov_mesh(&cfg).unwrap();
        let q = ElementQuadrature::layer_aware(10, 2.0 / 1e-6);
        for e in 0..16 {
            let cells = q.cells(&m, e);
            assert_eq!(cells[0].0, -1.0);
            assert_eq!(cells.last().unwrap().1, 1.0);
            assert!(cells.windows(2).all(|w| w[0].1 == w[1].0));
            let total: f64 = q.element_points(&m, e).iter().map(|p| p.weight).sum();
            assert!((total - m.width(e)).abs() <= 1e-14 * m.width(e).max(1e-300) + 1e-300);
        }
        // the transition element straddles the layer edge and gets split
        assert!(q.cells(&m, 8).len() > 1);
        assert_eq!(q.cells(&m, 3).len(), 1);
    }

    #[test]
    fn layer_quadrature_integrates_exponential() {
        let eps = 1e-8;
        let cfg = crate::mesh::MeshConfig::new(32, 2.0, 2.0, eps);
        let m = crate::mesh::bakhvalov_mesh(&cfg).unwrap();
        let q = ElementQuadrature::layer_aware(10, 2.0 / eps);
        let total: f64 =
            (0..32).flat_map(|e| q.element_points(&m, e)).map(|p| p.weight * (-2.0 * p.at.to_right / eps).exp()).sum();
        // integral of exp(-2 (1 - x)/eps) over [0, 1]
        let want = eps / 2.0 * (1.0 - (-2.0 / eps).exp());
        assert!(((total - want) / want).abs() < 1e-12, "{total} vs {want}");
    }

    #[test]
    fn samples_csv() {
        let m = Arc::new(Mesh::uniform(2));
        let f = DgFunction::new(m, 1, vec![1.0, 0.0, 2.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        f.write_samples_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
    }
}
