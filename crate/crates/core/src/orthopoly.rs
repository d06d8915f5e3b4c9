//! Legendre polynomials, Gauss-Legendre quadrature and Gauss-Lobatto nodes on
//! the reference interval [-1, 1].
//!
//! Rules and node sets are computed once per order and cached for the life of
//! the process; the cached values are immutable and shared behind `Arc`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Evaluates `P_n(t)` and `P_n'(t)` with the three-term recurrence.
pub fn legendre_eval(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, t);
    let (mut d_prev, mut d) = (0.0, 1.0);
    for m in 1..n {
        let mf = m as f64;
        let p_next = ((2.0 * mf + 1.0) * t * p - mf * p_prev) / (mf + 1.0);
        // P'_{m+1} = P'_{m-1} + (2m+1) P_m
        let d_next = d_prev + (2.0 * mf + 1.0) * p;
        p_prev = p;
        p = p_next;
        d_prev = d;
        d = d_next;
    }
    (p, d)
}

/// All of `P_0(t) ..= P_n(t)` and their derivatives in one pass.
pub fn legendre_all(n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut values = Vec::with_capacity(n + 1);
    let mut slopes = Vec::with_capacity(n + 1);
    values.push(1.0);
    slopes.push(0.0);
    if n >= 1 {
        values.push(t);
        slopes.push(1.0);
    }
    for m in 1..n {
        let mf = m as f64;
        let next = ((2.0 * mf + 1.0) * t * values[m] - mf * values[m - 1]) / (mf + 1.0);
        let dnext = slopes[m - 1] + (2.0 * mf + 1.0) * values[m];
        values.push(next);
        slopes.push(dnext);
    }
    (values, slopes)
}

/// A Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of points `q`; the rule is exact up to degree `2q - 1`.
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    /// Integral of `g` over [-1, 1].
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.iter().map(|(t, w)| w * g(t)).sum()
    }
}

/// Gauss-Lobatto nodes of degree `k`: the endpoints plus the roots of `P_k'`.
#[derive(Debug, Clone, PartialEq)]
pub struct LobattoNodes {
    degree: usize,
    nodes: Vec<f64>,
}

impl LobattoNodes {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

fn compute_gauss_legendre(q: usize) -> QuadratureRule {
    assert!(q >= 1, "a Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let half = q.div_ceil(2);
    for i in 0..half {
        // Chebyshev-type initial guess, descending from the right end.
        let mut x = (PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_eval(q, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let (p, dp) = legendre_eval(q, x);
        if (p / dp).abs() > NEWTON_TOL {
            panic!("Gauss-Legendre Newton iteration did not converge (q = {q}, root {i}, step {:e})", p / dp);
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[q - 1 - i] = x;
        nodes[i] = -x;
        weights[q - 1 - i] = w;
        weights[i] = w;
    }
    if q % 2 == 1 {
        let mid = q / 2;
        nodes[mid] = 0.0;
        let (_, dp) = legendre_eval(q, 0.0);
        weights[mid] = 2.0 / (dp * dp);
    }
    QuadratureRule { nodes, weights }
}

fn compute_lobatto(k: usize) -> LobattoNodes {
    assert!(k >= 1, "Gauss-Lobatto nodes need degree >= 1");
    let mut nodes = vec![0.0; k + 1];
    nodes[0] = -1.0;
    nodes[k] = 1.0;
    let kf = k as f64;
    #[allow(clippy::needless_range_loop)]
    for m in 1..k {
        // Chebyshev-Gauss-Lobatto guess
        let mut x = -(PI * m as f64 / kf).cos();
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_eval(k, x);
            // (1 - t^2) P'' = 2 t P' - k (k + 1) P
            let ddp = (2.0 * x * dp - kf * (kf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() <= 4.0 * f64::EPSILON {
                break;
            }
        }
        let (p, dp) = legendre_eval(k, x);
        let ddp = (2.0 * x * dp - kf * (kf + 1.0) * p) / (1.0 - x * x);
        if (dp / ddp).abs() > NEWTON_TOL {
            panic!("Gauss-Lobatto Newton iteration did not converge (k = {k}, node {m}, step {:e})", dp / ddp);
        }
        nodes[m] = x;
    }
    // exact symmetry
    for m in 0..=k / 2 {
        let s = 0.5 * (nodes[k - m] - nodes[m]);
        nodes[m] = -s;
        nodes[k - m] = s;
    }
    if k.is_multiple_of(2) {
        nodes[k / 2] = 0.0;
    }
    LobattoNodes { degree: k, nodes }
}

fn cached<T>(
    cell: &'static OnceLock<Mutex<HashMap<usize, Arc<T>>>>,
    key: usize,
    build: impl FnOnce(usize) -> T,
) -> Arc<T> {
    let map = cell.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(found) = map.lock().unwrap().get(&key) {
        return Arc::clone(found);
    }
    let built = Arc::new(build(key));
    let mut guard = map.lock().unwrap();
    Arc::clone(guard.entry(key).or_insert(built))
}

/// The `q`-point Gauss-Legendre rule on [-1, 1].
///
/// Panics if `q == 0` or Newton's method fails to converge.
pub fn gauss_legendre(q: usize) -> Arc<QuadratureRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    cached(&CACHE, q, compute_gauss_legendre)
}

/// The `k + 1` Gauss-Lobatto nodes of degree `k` on [-1, 1].
pub fn gauss_lobatto_nodes(k: usize) -> Arc<LobattoNodes> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LobattoNodes>>>> = OnceLock::new();
    cached(&CACHE, k, compute_lobatto)
}

/// Inverse of the Legendre Vandermonde matrix `V[i][m] = P_m(s_i)` at the
/// Lobatto nodes of degree `k`, stored row-major: modal = inv * nodal.
pub(crate) fn lobatto_to_modal(k: usize) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<f64>>>>> = OnceLock::new();
    cached(&CACHE, k, |k| {
        let nodes = gauss_lobatto_nodes(k);
        let n = k + 1;
        let mut vander = vec![0.0; n * n];
        for (i, &s) in nodes.nodes().iter().enumerate() {
            let (vals, _) = legendre_all(k, s);
            vander[i * n..(i + 1) * n].copy_from_slice(&vals);
        }
        crate::linalg::DenseLu::factor(crate::linalg::DenseMatrix::from_row_major(n, vander))
            .expect("Lobatto Vandermonde matrix is nonsingular")
            .inverse()
            .into_row_major()
    })
}
