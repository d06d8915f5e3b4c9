//! The NIPG energy norm and the error measures reported by the harness.
//!
//! ```text
//! ||v||^2 = eps sum_j ||v'||^2 + gamma sum_j ||v||^2 + sum_{j=0}^{N} (mu_j + b(x_j)/2) [v(x_j)]^2
//! ```

use std::sync::Arc;

use serde::Serialize;

use crate::dgspace::{traces_of, Analytic, DgFunction, Difference, ElementQuadrature, PiecewiseField};
use crate::interpolation::{composite_interpolate, lobatto_interpolate, radau_quadrature};
use crate::mesh::Mesh;
use crate::nipg::{NipgError, Penalty, ProblemSpec};

/// The three squared parts of the NIPG norm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ErrorBreakdown {
    /// `eps sum ||v'||^2`
    pub derivative: f64,
    /// `gamma sum ||v||^2`
    pub volume: f64,
    /// `sum (mu + b/2) [v]^2`
    pub jump: f64,
    pub gamma: f64,
}

impl ErrorBreakdown {
    pub fn squared(&self) -> f64 {
        self.derivative + self.volume + self.jump
    }

    pub fn total(&self) -> f64 {
        self.squared().sqrt()
    }
}

/// Default error rule: `max(10, 2k + 4)` Gauss points per cell, cells
/// refined inside the layer.
pub fn error_quadrature(problem: &ProblemSpec, k: usize) -> ElementQuadrature {
    problem.quadrature((2 * k + 4).max(10))
}

/// NIPG norm of any piecewise field.
pub fn field_norm(
    field: &dyn PiecewiseField,
    mesh: &Mesh,
    problem: &ProblemSpec,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<ErrorBreakdown, NipgError> {
    penalty.check(mesh)?;
    let mut derivative = 0.0;
    let mut l2 = 0.0;
    for e in 0..mesh.elements() {
        for qp in quad.element_points(mesh, e) {
            let (v, d) = field.value_and_slope(e, qp.t, qp.at);
            derivative += qp.weight * d * d;
            l2 += qp.weight * v * v;
        }
    }
    let traces = traces_of(field, mesh);
    let jump = traces
        .value
        .iter()
        .enumerate()
        .map(|(j, tr)| (penalty.at(j) + 0.5 * (problem.b)(mesh.node(j))) * tr.jump * tr.jump)
        .sum();
    Ok(ErrorBreakdown {
        derivative: problem.epsilon * derivative,
        volume: problem.gamma * l2,
        jump,
        gamma: problem.gamma,
    })
}

/// NIPG norm of a discrete function on its own mesh.
pub fn nipg_norm(
    v: &DgFunction,
    problem: &ProblemSpec,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<ErrorBreakdown, NipgError> {
    field_norm(v, v.mesh(), problem, penalty, quad)
}

fn exact_of(problem: &ProblemSpec) -> Result<&Analytic, NipgError> {
    problem
        .exact
        .as_ref()
        .ok_or_else(|| NipgError::Problem(format!("problem '{}' has no exact solution", problem.name)))
}

/// `||L_k u - u_N||` with the Lobatto interpolant taken on every element.
pub fn supercloseness_error(
    problem: &ProblemSpec,
    u_n: &DgFunction,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<ErrorBreakdown, NipgError> {
    let exact = exact_of(problem)?;
    let mesh = Arc::clone(u_n.mesh());
    let lk = lobatto_interpolate(&*exact.value, Arc::clone(&mesh), u_n.degree(), 0..mesh.elements())?;
    nipg_norm(&lk.sub(u_n)?, problem, penalty, quad)
}

/// `||u - u_N||` with the analytic `u` and `u'` inside the quadrature.
pub fn energy_error(
    problem: &ProblemSpec,
    u_n: &DgFunction,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<ErrorBreakdown, NipgError> {
    let exact = exact_of(problem)?;
    field_norm(&Difference(exact, u_n), u_n.mesh(), problem, penalty, quad)
}

/// `||u - Pi u||` for the composite Radau/Lobatto interpolant of degree `k`.
pub fn interpolation_error(
    problem: &ProblemSpec,
    mesh: Arc<Mesh>,
    k: usize,
    penalty: &Penalty,
    quad: &ElementQuadrature,
) -> Result<ErrorBreakdown, NipgError> {
    let exact = exact_of(problem)?;
    let radau = radau_quadrature(k, Some(problem.layer_rate()));
    let (pi, _) = composite_interpolate(&*exact.value, Arc::clone(&mesh), k, &radau)?;
    field_norm(&Difference(exact, &pi), &mesh, problem, penalty, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{bakhvalov_mesh, MeshConfig};
    use crate::nipg::{assembly_quadrature, bilinear_form, paper_test_problem, solve_nipg};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_problem() -> ProblemSpec {
        ProblemSpec::new("unit", 1.0, Arc::new(|_| 1.0), Arc::new(|_| 0.0), Arc::new(|_| 1.0), Arc::new(|_| 0.0))
            .with_bounds(1.0, 1.0)
    }

    fn random_fn(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh>, k: usize) -> DgFunction {
        let n = mesh.elements() * (k + 1);
        DgFunction::new(Arc::clone(mesh), k, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn paper_mesh(n: usize, k: usize, eps: f64) -> Arc<Mesh> {
        Arc::new(bakhvalov_mesh(&MeshConfig::new(n, (k + 1) as f64, 2.0, eps)).unwrap())
    }

    #[test]
    fn zero_function() {
        let m = Arc::new(Mesh::uniform(4));
        let v = DgFunction::zeros(Arc::clone(&m), 2).unwrap();
        let r = nipg_norm(&v, &unit_problem(), &Penalty::constant(4, 1.0), &ElementQuadrature::gauss(10)).unwrap();
        assert_eq!((r.derivative, r.volume, r.jump), (0.0, 0.0, 0.0));
    }

    #[test]
    fn constant_on_single_element() {
        let m = Arc::new(Mesh::uniform(1));
        let v = DgFunction::new(m, 1, vec![1.0, 0.0]).unwrap();
        let r = nipg_norm(&v, &unit_problem(), &Penalty::constant(1, 1.0), &ElementQuadrature::gauss(10)).unwrap();
        assert!((r.squared() - 4.0).abs() < 1e-14);
        assert!((r.volume - 1.0).abs() < 1e-14 && (r.jump - 3.0).abs() < 1e-14);
    }

    #[test]
    fn homogeneity_and_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = paper_test_problem(1e-4);
        let m = paper_mesh(16, 2, 1e-4);
        let pen = Penalty::paper(16);
        let q = error_quadrature(&p, 2);
        for _ in 0..50 {
            let v = random_fn(&mut rng, &m, 2);
            let w = random_fn(&mut rng, &m, 2);
            let nv = nipg_norm(&v, &p, &pen, &q).unwrap();
            let n2v = nipg_norm(&v.scale(2.0), &p, &pen, &q).unwrap();
            assert!((n2v.squared() - 4.0 * nv.squared()).abs() <= 1e-12 * nv.squared());
            let nw = nipg_norm(&w, &p, &pen, &q).unwrap().total();
            let nvw = nipg_norm(&v.add(&w).unwrap(), &p, &pen, &q).unwrap().total();
            assert!(nvw <= nv.total() + nw + 1e-12);
        }
    }

    #[test]
    fn bilinear_form_dominates_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[8, 16, 32] {
            for k in 1..=2 {
                for &eps in &[1e-4, 1e-6] {
                    let p = paper_test_problem(eps);
                    let m = paper_mesh(n, k, eps);
                    let pen = Penalty::paper(n);
                    let q = error_quadrature(&p, k);
                    for _ in 0..20 {
                        let v = random_fn(&mut rng, &m, k);
                        let b = bilinear_form(&p, &m, &pen, &v, &v, &q).unwrap();
                        let nn = nipg_norm(&v, &p, &pen, &q).unwrap().squared();
                        assert!(b >= nn - 1e-10 * nn, "B = {b}, norm^2 = {nn}");
                    }
                }
            }
        }
    }

    #[test]
    fn interpolant_of_solution_has_zero_supercloseness() {
        let p = paper_test_problem(1e-5);
        let m = paper_mesh(16, 1, 1e-5);
        let exact = p.exact.clone().unwrap();
        let lk = lobatto_interpolate(&*exact.value, Arc::clone(&m), 1, 0..16).unwrap();
        let e = supercloseness_error(&p, &lk, &Penalty::paper(16), &error_quadrature(&p, 1)).unwrap();
        assert_eq!(e.total(), 0.0);
    }

    #[test]
    fn error_measure_converged_in_quadrature() {
        for k in 1..=2 {
            let p = paper_test_problem(1e-5);
            let n = 32;
            let m = paper_mesh(n, k, 1e-5);
            let pen = Penalty::paper(n);
            let sol = solve_nipg(&p, Arc::clone(&m), k, &pen, &assembly_quadrature(&p, k)).unwrap();
            let q = error_quadrature(&p, k);
            let q6 = q.with_points(q.points_per_cell() + 6);
            for measure in [supercloseness_error, energy_error] {
                let a = measure(&p, &sol.u, &pen, &q).unwrap().total();
                let b = measure(&p, &sol.u, &pen, &q6).unwrap().total();
                assert!((a - b).abs() < 1e-3 * b, "k = {k}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn smooth_projection_energy_error_decreases() {
        let p =
            ProblemSpec::new("smooth", 1.0, Arc::new(|_| 1.0), Arc::new(|_| 0.0), Arc::new(|_| 1.0), Arc::new(|_| 0.0))
                .with_exact(Analytic::new(
                    |c| (std::f64::consts::PI * c.x).sin(),
                    |c| std::f64::consts::PI * (std::f64::consts::PI * c.x).cos(),
                ));
        let exact = p.exact.clone().unwrap();
        let mut last = f64::INFINITY;
        for n in [4, 8, 16] {
            let m = Arc::new(Mesh::uniform(n));
            let q = ElementQuadrature::gauss(12);
            let proj = crate::dgspace::project_function(&*exact.value, Arc::clone(&m), 4, &q).unwrap();
            let e = energy_error(&p, &proj, &Penalty::constant(n, 1.0), &q).unwrap().total();
            assert!(e < last && e < 1e-2);
            last = e;
        }
    }

    #[test]
    fn missing_exact_solution_is_an_error() {
        let m = Arc::new(Mesh::uniform(2));
        let v = DgFunction::zeros(m, 1).unwrap();
        assert!(energy_error(&unit_problem(), &v, &Penalty::constant(2, 1.0), &ElementQuadrature::gauss(4)).is_err());
    }
}
