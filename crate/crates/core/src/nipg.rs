//! The NIPG discretization: problem data, penalty schedule, assembly of
//! `B = B1 + B2 + B3` and `L`, and the discrete solve.
//!
//! With trial `u`, test `v`, and nodes `x_0 .. x_N`:
//!
//! ```text
//! B1(u,v) = sum_j int eps u'v' - eps sum_{j=0}^{N} {u'}[v] + eps sum_{j=0}^{N} [u]{v'} + sum_{j=0}^{N} mu_j [u][v]
//! B2(u,v) = sum_j int b u'v - sum_{j=0}^{N-1} b(x_j) [u] v(x_j^+)
//! B3(u,v) = sum_j int c u v
//! L(v)    = sum_j int f v
//! ```
//!
//! Dirichlet data enter only through the boundary jump conventions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgspace::{traces_of, Analytic, DgError, DgFunction, ElementQuadrature, PiecewiseField, ScalarFn};
use crate::linalg::{BlockLu, BlockTridiagonal, LinalgError, CONDITION_WARNING};
use crate::mesh::{Coord, Mesh};
use crate::orthopoly::legendre_all;

/// Points of the uniform grid used to sample coefficient bounds.
pub const BOUND_SAMPLES: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NipgError {
    #[error("invalid problem: {0}")]
    Problem(String),
    #[error("penalty has {got} values, mesh needs {expected}")]
    PenaltyLength { expected: usize, got: usize },
    #[error("quadrature with {got} points is below the required {required}")]
    Quadrature { required: usize, got: usize },
    #[error("linear solve failed at element {element}: singular pivot block")]
    SingularElement { element: usize },
    #[error(transparent)]
    Linalg(LinalgError),
    #[error(transparent)]
    Dg(#[from] DgError),
}

impl From<LinalgError> for NipgError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SingularBlock { block } => Self::SingularElement { element: block },
            other => Self::Linalg(other),
        }
    }
}

/// Coefficients of `-eps u'' + b u' + c u = f`, `u(0) = u(1) = 0`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub epsilon: f64,
    pub b: ScalarFn,
    pub b_prime: ScalarFn,
    pub c: ScalarFn,
    pub f: ScalarFn,
    /// Lower bound of `b`.
    pub alpha: f64,
    /// Lower bound of `c - b'/2`; weights the L2 part of the NIPG norm.
    pub gamma: f64,
    pub exact: Option<Analytic>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("epsilon", &self.epsilon)
            .field("alpha", &self.alpha)
            .field("gamma", &self.gamma)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

fn grid() -> impl Iterator<Item = Coord> {
    (0..BOUND_SAMPLES).map(|i| {
        let x = i as f64 / (BOUND_SAMPLES - 1) as f64;
        Coord { x, to_right: 1.0 - x }
    })
}

impl ProblemSpec {
    /// A problem whose `alpha` and `gamma` are the minima of `b` and
    /// `c - b'/2` over the sampling grid.
    pub fn new(
        name: impl Into<String>,
        epsilon: f64,
        b: ScalarFn,
        b_prime: ScalarFn,
        c: ScalarFn,
        f: ScalarFn,
    ) -> Self {
        let alpha = grid().map(|p| b(p)).fold(f64::INFINITY, f64::min);
        let gamma = grid().map(|p| c(p) - 0.5 * b_prime(p)).fold(f64::INFINITY, f64::min);
        Self { name: name.into(), epsilon, b, b_prime, c, f, alpha, gamma, exact: None }
    }

    pub fn with_bounds(mut self, alpha: f64, gamma: f64) -> Self {
        self.alpha = alpha;
        self.gamma = gamma;
        self
    }

    pub fn with_exact(mut self, exact: Analytic) -> Self {
        self.exact = Some(exact);
        self
    }

    /// Checks `0 < eps <= 1`, `b >= alpha > 0` and `c - b'/2 >= gamma > 0` on the sampling grid.
    pub fn validate(&self) -> Result<(), NipgError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(NipgError::Problem(format!("eps = {} not in (0, 1]", self.epsilon)));
        }
        if self.alpha.is_nan() || self.gamma.is_nan() || self.alpha <= 0.0 || self.gamma <= 0.0 {
            return Err(NipgError::Problem(format!(
                "need alpha > 0 and gamma > 0 (alpha = {}, gamma = {})",
                self.alpha, self.gamma
            )));
        }
        for p in grid() {
            let (b, c, bp) = ((self.b)(p), (self.c)(p), (self.b_prime)(p));
            if !(b.is_finite() && c.is_finite() && bp.is_finite()) {
                return Err(NipgError::Problem(format!("non-finite coefficient at x = {}", p.x)));
            }
            if b < self.alpha {
                return Err(NipgError::Problem(format!("b({}) = {b} < alpha = {}", p.x, self.alpha)));
            }
            if c - 0.5 * bp < self.gamma {
                return Err(NipgError::Problem(format!(
                    "c - b'/2 = {} < gamma = {} at x = {}",
                    c - 0.5 * bp,
                    self.gamma,
                    p.x
                )));
            }
        }
        Ok(())
    }

    /// Decay rate `b(1)/eps` of the outflow layer at `x = 1`.
    pub fn layer_rate(&self) -> f64 {
        (self.b)(Coord { x: 1.0, to_right: 0.0 }) / self.epsilon
    }

    /// `points` Gauss points per cell, cells refined inside the layer.
    pub fn quadrature(&self, points: usize) -> ElementQuadrature {
        ElementQuadrature::layer_aware(points, self.layer_rate())
    }
}

/// `-eps u'' + (3 - x) u' + u = f` with exact solution `u = x - x exp(-2(1-x)/eps)`.
pub fn paper_test_problem(epsilon: f64) -> ProblemSpec {
    let eps = epsilon;
    let layer = move |p: Coord| (-2.0 * p.to_right / eps).exp();
    let u = move |p: Coord| p.x - p.x * layer(p);
    let du = move |p: Coord| {
        let e = layer(p);
        1.0 - e - 2.0 * p.x / eps * e
    };
    // f = -eps u'' + (3 - x) u' + u = 3 + E - 2 x (1 - x) E / eps
    let f = move |p: Coord| {
        let e = layer(p);
        3.0 + e - 2.0 * p.x * p.to_right * e / eps
    };
    ProblemSpec {
        name: "paper".into(),
        epsilon,
        b: Arc::new(|p: Coord| 3.0 - p.x),
        b_prime: Arc::new(|_| -1.0),
        c: Arc::new(|_| 1.0),
        f: Arc::new(f),
        alpha: 2.0,
        gamma: 1.5,
        exact: Some(Analytic::new(u, du)),
    }
}

/// How the penalty `mu(x_j)` is chosen; written `paper` or `const:<v>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PenaltyMode {
    /// `1` for `j <= N/2`, `N^2` for `j > N/2`.
    Paper,
    Constant(f64),
}

impl PenaltyMode {
    pub fn build(&self, n: usize) -> Penalty {
        match *self {
            PenaltyMode::Paper => Penalty::paper(n),
            PenaltyMode::Constant(v) => Penalty::constant(n, v),
        }
    }
}

impl FromStr for PenaltyMode {
    type Err = NipgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || NipgError::Problem(format!("penalty must be 'paper' or 'const:<v>' with v >= 0, got '{s}'"));
        match s.trim() {
            "paper" => Ok(PenaltyMode::Paper),
            other => {
                let v: f64 = other.strip_prefix("const:").ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                if v.is_finite() && v >= 0.0 {
                    Ok(PenaltyMode::Constant(v))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl TryFrom<String> for PenaltyMode {
    type Error = NipgError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PenaltyMode> for String {
    fn from(m: PenaltyMode) -> Self {
        m.to_string()
    }
}

impl fmt::Display for PenaltyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PenaltyMode::Paper => f.write_str("paper"),
            PenaltyMode::Constant(v) => write!(f, "const:{v}"),
        }
    }
}

/// Penalty values `mu(x_0) .. mu(x_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty(Vec<f64>);

impl Penalty {
    pub fn paper(n: usize) -> Self {
        let big = (n * n) as f64;
        Self((0..=n).map(|j| if j <= n / 2 { 1.0 } else { big }).collect())
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Self(vec![value; n + 1])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self, NipgError> {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(NipgError::Problem("penalties must be finite and nonnegative".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn at(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub(crate) fn check(&self, mesh: &Mesh) -> Result<(), NipgError> {
        if self.0.len() != mesh.elements() + 1 {
            return Err(NipgError::PenaltyLength { expected: mesh.elements() + 1, got: self.0.len() });
        }
        Ok(())
    }
}

/// Default assembly rule: `k + 3` points per cell.
pub fn assembly_quadrature(problem: &ProblemSpec, k: usize) -> ElementQuadrature {
    problem.quadrature(k + 3)
}

/// The assembled operator `A[v][u] = B(phi_u, phi_v)` and load `F[v] = L(phi_v)`.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub matrix: BlockTridiagonal,
    pub load: Vec<f64>,
    pub degree: usize,
}

// Trace data of the local basis at one end of an element.
struct EndBasis {
    element: usize,
    value: Vec<f64>,
    slope: Vec<f64>,
    jump_sign: f64,
    right_side: bool,
}

fn end_basis(mesh: &Mesh, k: usize, element: usize, right_end: bool) -> EndBasis {
    let t = if right_end { 1.0 } else { -1.0 };
    let (p, dp) = legendre_all(k, t);
    let scale = 2.0 / mesh.width(element);
    EndBasis {
        element,
        value: p,
        slope: dp.iter().map(|d| d * scale).collect(),
        // the element's right end is the node's left side
        jump_sign: if right_end { 1.0 } else { -1.0 },
        right_side: !right_end,
    }
}

/// Assembles the block-tridiagonal NIPG system.
pub fn assemble(
    problem: &ProblemSpec,
    mesh: &Mesh,
    k: usize,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<AssembledSystem, NipgError> {
    if k == 0 {
        return Err(DgError::BadDegree(k).into());
    }
    penalty.check(mesh)?;
    if quad.points_per_cell() < k + 1 {
        return Err(NipgError::Quadrature { required: k + 1, got: quad.points_per_cell() });
    }
    let n = mesh.elements();
    let s = k + 1;
    let eps = problem.epsilon;
    let mut matrix = BlockTridiagonal::zeros(n, s);
    let mut load = vec![0.0; n * s];

    for e in 0..n {
        let scale = 2.0 / mesh.width(e);
        let block = matrix.diag_mut(e);
        let f_local = &mut load[e * s..(e + 1) * s];
        for qp in quad.element_points(mesh, e) {
            let (p, dp) = legendre_all(k, qp.t);
            let b = (problem.b)(qp.at);
            let c = (problem.c)(qp.at);
            let f = (problem.f)(qp.at);
            for i in 0..s {
                let (vi, di) = (p[i], dp[i] * scale);
                f_local[i] += qp.weight * f * vi;
                for j in 0..s {
                    let (uj, dj) = (p[j], dp[j] * scale);
                    block[(i, j)] += qp.weight * (eps * dj * di + b * dj * vi + c * uj * vi);
                }
            }
        }
    }

    for j in 0..=n {
        let mut sides = Vec::with_capacity(2);
        if j > 0 {
            sides.push(end_basis(mesh, k, j - 1, true));
        }
        if j < n {
            sides.push(end_basis(mesh, k, j, false));
        }
        let avg = if sides.len() == 2 { 0.5 } else { 1.0 };
        let mu = penalty.at(j);
        let b_node = if j < n { (problem.b)(mesh.node(j)) } else { 0.0 };
        for trial in &sides {
            for test in &sides {
                let target = if trial.element == test.element {
                    matrix.diag_mut(test.element)
                } else if trial.element + 1 == test.element {
                    matrix.lower_mut(test.element)
                } else {
                    matrix.upper_mut(test.element)
                };
                for row in 0..s {
                    let v_jump = test.jump_sign * test.value[row];
                    let v_avg_slope = avg * test.slope[row];
                    let v_plus = if test.right_side { test.value[row] } else { 0.0 };
                    for col in 0..s {
                        let u_jump = trial.jump_sign * trial.value[col];
                        let u_avg_slope = avg * trial.slope[col];
                        target[(row, col)] +=
                            -eps * u_avg_slope * v_jump + eps * u_jump * v_avg_slope + mu * u_jump * v_jump
                                - b_node * u_jump * v_plus;
                    }
                }
            }
        }
    }

    Ok(AssembledSystem { matrix, load, degree: k })
}

/// `B(u, v)` evaluated term by term from traces and quadrature.
pub fn bilinear_form(
    problem: &ProblemSpec,
    mesh: &Mesh,
    penalty: &Penalty,
    u: &dyn PiecewiseField,
    v: &dyn PiecewiseField,
    quad: &ElementQuadrature,
) -> Result<f64, NipgError> {
    penalty.check(mesh)?;
    let eps = problem.epsilon;
    let n = mesh.elements();
    let mut volume = 0.0;
    for e in 0..n {
        for qp in quad.element_points(mesh, e) {
            let (uv, ud) = u.value_and_slope(e, qp.t, qp.at);
            let (vv, vd) = v.value_and_slope(e, qp.t, qp.at);
            volume += qp.weight * (eps * ud * vd + (problem.b)(qp.at) * ud * vv + (problem.c)(qp.at) * uv * vv);
        }
    }
    let tu = traces_of(u, mesh);
    let tv = traces_of(v, mesh);
    let mut nodes = 0.0;
    for j in 0..=n {
        let (uj, vj) = (tu.value[j].jump, tv.value[j].jump);
        nodes += -eps * tu.slope[j].average * vj + eps * uj * tv.slope[j].average + penalty.at(j) * uj * vj;
        if j < n {
            nodes -= (problem.b)(mesh.node(j)) * uj * tv.value[j].right.unwrap_or(0.0);
        }
    }
    Ok(volume + nodes)
}

/// `L(v) = int f v`.
pub fn load_functional(problem: &ProblemSpec, mesh: &Mesh, v: &dyn PiecewiseField, quad: &ElementQuadrature) -> f64 {
    (0..mesh.elements())
        .flat_map(|e| quad.element_points(mesh, e).into_iter().map(move |qp| (e, qp)))
        .map(|(e, qp)| qp.weight * (problem.f)(qp.at) * v.value_and_slope(e, qp.t, qp.at).0)
        .sum()
}

/// The discrete solution and solve diagnostics.
#[derive(Debug, Clone)]
pub struct NipgSolution {
    pub u: DgFunction,
    /// `||A u - F|| / ||F||` (absolute when `F = 0`).
    pub residual: f64,
    pub condition: f64,
    pub warning: Option<String>,
}

/// Assembles and solves the NIPG system with the given assembly rule.
pub fn solve_nipg(
    problem: &ProblemSpec,
    mesh: Arc<Mesh>,
    k: usize,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<NipgSolution, NipgError> {
    if problem.epsilon > 1.0 / mesh.elements() as f64 {
        log::debug!(
            "eps = {:e} > 1/N = {:e}: outside the regime eps <= C/N",
            problem.epsilon,
            1.0 / mesh.elements() as f64
        );
    }
    let system = assemble(problem, &mesh, k, penalty, quad)?;
    let lu = BlockLu::factor(&system.matrix)?;
    let x = lu.solve(&system.load)?;
    let condition = lu.condition_estimate();
    let ax = system.matrix.matvec(&x);
    let r: f64 = ax.iter().zip(&system.load).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let fnorm: f64 = system.load.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if fnorm > 0.0 { r / fnorm } else { r };
    let warning = (condition > CONDITION_WARNING)
        .then(|| format!("condition estimate {condition:.3e} exceeds {CONDITION_WARNING:e}"));
    Ok(NipgSolution { u: DgFunction::new(mesh, k, x)?, residual, condition, warning })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgspace::project_function;
    use crate::mesh::{bakhvalov_mesh, MeshConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_problem(eps: f64) -> ProblemSpec {
        ProblemSpec::new("unit", eps, Arc::new(|_| 1.0), Arc::new(|_| 0.0), Arc::new(|_| 1.0), Arc::new(|_| 0.0))
    }

    fn random_fn(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh>, k: usize) -> DgFunction {
        let n = mesh.elements() * (k + 1);
        DgFunction::new(Arc::clone(mesh), k, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn paper_problem_bounds_and_boundary_values() {
        let p = paper_test_problem(1e-4);
        let u = p.exact.clone().unwrap();
        assert_eq!((u.value)(Coord { x: 0.0, to_right: 1.0 }), 0.0);
        assert_eq!((u.value)(Coord { x: 1.0, to_right: 0.0 }), 0.0);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            let c = Coord { x, to_right: 1.0 - x };
            assert_eq!((p.c)(c) - 0.5 * (p.b_prime)(c), 1.5);
        }
        p.validate().unwrap();
        assert_eq!(p.alpha, 2.0);
        assert_eq!(p.layer_rate(), 2.0 / 1e-4);
    }

    #[test]
    fn forcing_satisfies_the_equation() {
        // u'' from differentiating u' = 1 - E - (2x/eps) E by hand:
        // u'' = -(4/eps) E - (4x/eps^2) E
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &eps in &[1e-1, 1e-2, 1e-3] {
            let p = paper_test_problem(eps);
            let u = p.exact.clone().unwrap();
            for _ in 0..100 {
                let x: f64 = rng.gen_range(0.0..1.0);
                let c = Coord { x, to_right: 1.0 - x };
                let e = (-2.0 * (1.0 - x) / eps).exp();
                let upp = -(4.0 / eps) * e - 4.0 * x / (eps * eps) * e;
                let r = -eps * upp + (3.0 - x) * (u.slope)(c) + (u.value)(c) - (p.f)(c);
                assert!(r.abs() < 1e-9, "eps = {eps}, x = {x}: residual {r:e}");
                let fd = ((u.value)(Coord { x: x + 1e-7, to_right: 1.0 - x - 1e-7 })
                    - (u.value)(Coord { x: x - 1e-7, to_right: 1.0 - x + 1e-7 }))
                    / 2e-7;
                assert!((fd - (u.slope)(c)).abs() < 1e-4 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn validate_rejects_bad_bounds() {
        let p = constant_problem(0.5).with_bounds(2.0, 1.0);
        assert!(p.validate().is_err());
        let p = constant_problem(0.5).with_bounds(1.0, 1.0);
        p.validate().unwrap();
    }

    #[test]
    fn single_element_form_of_constant() {
        let m = Arc::new(Mesh::from_points(vec![0.0, 1.0]).unwrap());
        let p =
            ProblemSpec::new("one", 1.0, Arc::new(|_| 1.0), Arc::new(|_| 0.0), Arc::new(|_| 1.0), Arc::new(|_| 0.0));
        let pen = Penalty::constant(1, 1.0);
        let one = DgFunction::new(Arc::clone(&m), 1, vec![1.0, 0.0]).unwrap();
        let q = ElementQuadrature::gauss(4);
        assert!((bilinear_form(&p, &m, &pen, &one, &one, &q).unwrap() - 4.0).abs() < 1e-14);
        let sys = assemble(&p, &m, 1, &pen, &q).unwrap();
        assert!((sys.matrix.diag(0)[(0, 0)] - 4.0).abs() < 1e-14);
        assert!(sys.load.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matrix_agrees_with_term_by_term_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(n, k, eps) in &[(8usize, 1usize, 1e-3), (8, 2, 1e-5), (16, 3, 1e-2)] {
            let cfg = MeshConfig::new(n, k as f64 + 1.0, 2.0, eps);
            let m = Arc::new(bakhvalov_mesh(&cfg).unwrap());
            let p = paper_test_problem(eps);
            let pen = Penalty::paper(n);
            let q = assembly_quadrature(&p, k);
            let sys = assemble(&p, &m, k, &pen, &q).unwrap();
            for _ in 0..10 {
                let u = random_fn(&mut rng, &m, k);
                let v = random_fn(&mut rng, &m, k);
                let au = sys.matrix.matvec(u.coeffs());
                let via_matrix: f64 = au.iter().zip(v.coeffs()).map(|(a, b)| a * b).sum();
                let direct = bilinear_form(&p, &m, &pen, &u, &v, &q).unwrap();
                let scale = via_matrix.abs().max(direct.abs()).max(1.0);
                assert!((via_matrix - direct).abs() <= 1e-11 * scale, "{via_matrix} vs {direct}");
            }
        }
    }

    #[test]
    fn locality_of_couplings() {
        let cfg = MeshConfig::new(8, 2.0, 2.0, 1e-4);
        let m = bakhvalov_mesh(&cfg).unwrap();
        let p = paper_test_problem(1e-4);
        let sys = assemble(&p, &m, 2, &Penalty::paper(8), &assembly_quadrature(&p, 2)).unwrap();
        let dense = sys.matrix.to_dense();
        for r in 0..24usize {
            for c in 0..24 {
                if (r / 3).abs_diff(c / 3) > 1 {
                    assert_eq!(dense[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn interface_terms_are_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = Arc::new(Mesh::from_points(vec![0.0, 0.3, 0.5, 1.0]).unwrap());
        let eps = 0.7;
        let interface = |u: &DgFunction, v: &DgFunction| {
            let (tu, tv) = (u.traces(), v.traces());
            (0..=3)
                .map(|j| eps * tu.value[j].jump * tv.slope[j].average - eps * tu.slope[j].average * tv.value[j].jump)
                .sum::<f64>()
        };
        for _ in 0..20 {
            let u = random_fn(&mut rng, &m, 2);
            let v = random_fn(&mut rng, &m, 2);
            assert!((interface(&u, &v) + interface(&v, &u)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_forcing_gives_zero_load() {
        let m = Mesh::uniform(6);
        let p = constant_problem(0.1);
        let sys = assemble(&p, &m, 2, &Penalty::constant(6, 1.0), &ElementQuadrature::gauss(5)).unwrap();
        assert!(sys.load.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let m = Mesh::uniform(6);
        let p = constant_problem(0.1);
        let q = ElementQuadrature::gauss(5);
        assert!(matches!(
            assemble(&p, &m, 2, &Penalty::constant(5, 1.0), &q),
            Err(NipgError::PenaltyLength { expected: 7, got: 6 })
        ));
        assert!(matches!(
            assemble(&p, &m, 2, &Penalty::constant(6, 1.0), &ElementQuadrature::gauss(2)),
            Err(NipgError::Quadrature { .. })
        ));
    }

    #[test]
    fn paper_penalty_schedule() {
        let p = Penalty::paper(8);
        assert_eq!(p.values(), &[1.0, 1.0, 1.0, 1.0, 1.0, 64.0, 64.0, 64.0, 64.0]);
    }

    #[test]
    fn recovers_polynomial_solution() {
        // u = x (1 - x), eps = 1, b = 1 + x, c = 2: f = 2 + (1 + x)(1 - 2x) + 2 x (1 - x)
        let p = ProblemSpec::new(
            "poly",
            1.0,
            Arc::new(|c: Coord| 1.0 + c.x),
            Arc::new(|_| 1.0),
            Arc::new(|_| 2.0),
            Arc::new(|c: Coord| 2.0 + (1.0 + c.x) * (1.0 - 2.0 * c.x) + 2.0 * c.x * (1.0 - c.x)),
        );
        let m = Arc::new(Mesh::uniform(8));
        for k in 2..=3 {
            let sol = solve_nipg(&p, Arc::clone(&m), k, &Penalty::constant(8, 1.0), &ElementQuadrature::gauss(k + 3))
                .unwrap();
            let want =
                project_function(&|c| c.x * (1.0 - c.x), Arc::clone(&m), k, &ElementQuadrature::gauss(6)).unwrap();
            for (a, b) in sol.u.coeffs().iter().zip(want.coeffs()) {
                assert!((a - b).abs() < 1e-9);
            }
            assert!(sol.residual < 1e-12);
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let cfg = MeshConfig::new(32, 3.0, 2.0, 1e-6);
        let m = Arc::new(bakhvalov_mesh(&cfg).unwrap());
        let p = paper_test_problem(1e-6);
        let q = assembly_quadrature(&p, 2);
        let a = solve_nipg(&p, Arc::clone(&m), 2, &Penalty::paper(32), &q).unwrap();
        let b = solve_nipg(&p, m, 2, &Penalty::paper(32), &q).unwrap();
        assert_eq!(a.u.coeffs(), b.u.coeffs());
        assert!(a.residual <= 1e-10);
    }
}
