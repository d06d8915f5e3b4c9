//! Property suites behind the `check` command.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{geometric_ns, HarnessError};
use crate::dgspace::{DgFunction, Difference, ElementQuadrature};
use crate::interpolation::{composite_interpolate, lobatto_interpolate, radau_interpolate, radau_quadrature};
use crate::linalg::{dense_solve, BlockLu, BlockTridiagonal};
use crate::mesh::{bakhvalov_mesh, check_mesh_lemma, Coord, Mesh, MeshConfig};
use crate::nipg::{assembly_quadrature, bilinear_form, paper_test_problem, solve_nipg, Penalty};
use crate::norms::{error_quadrature, nipg_norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckSuite {
    Mesh,
    Coercivity,
    Orthogonality,
    Solver,
    Interpolation,
}

impl CheckSuite {
    pub const ALL: [CheckSuite; 5] = [
        CheckSuite::Mesh,
        CheckSuite::Coercivity,
        CheckSuite::Orthogonality,
        CheckSuite::Solver,
        CheckSuite::Interpolation,
    ];
}

impl FromStr for CheckSuite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| HarnessError::InvalidConfig(format!("unknown check suite '{s}'")))
    }
}

impl fmt::Display for CheckSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckSuite::Mesh => "mesh",
            CheckSuite::Coercivity => "coercivity",
            CheckSuite::Orthogonality => "orthogonality",
            CheckSuite::Solver => "solver",
            CheckSuite::Interpolation => "interpolation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub suite: CheckSuite,
    pub passed: bool,
    pub detail: String,
}

const SMALL_EPS: [f64; 5] = [1e-5, 1e-6, 1e-7, 1e-8, 1e-9];

fn layer_mesh(n: usize, k: usize, eps: f64) -> Arc<Mesh> {
    Arc::new(bakhvalov_mesh(&MeshConfig::new(n, (k + 1) as f64, 2.0, eps)).expect("valid mesh parameters"))
}

fn random_dg(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh>, k: usize) -> DgFunction {
    let len = mesh.elements() * (k + 1);
    DgFunction::new(Arc::clone(mesh), k, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("sized")
}

fn mesh_suite() -> CheckOutcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for &eps in &SMALL_EPS {
        for n in geometric_ns(8, 1024) {
            let cfg = MeshConfig::new(n, 2.0, 2.0, eps);
            let report = check_mesh_lemma(&bakhvalov_mesh(&cfg).expect("valid mesh parameters"), &cfg);
            count += 1;
            failures.extend(report.failures().map(|f| format!("eps = {eps:e}, N = {n}: {} ({})", f.name, f.detail)));
        }
    }
    CheckOutcome {
        suite: CheckSuite::Mesh,
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{count} meshes satisfy every width bound")
        } else {
            failures.join("; ")
        },
    }
}

fn coercivity_suite() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut trials) = (f64::INFINITY, 0);
    for n in [8, 16, 32] {
        for k in 1..=2 {
            for eps in [1e-4, 1e-6] {
                let problem = paper_test_problem(eps);
                let mesh = layer_mesh(n, k, eps);
                let penalty = Penalty::paper(n);
                let quad = error_quadrature(&problem, k);
                for _ in 0..200 {
                    let v = random_dg(&mut rng, &mesh, k);
                    let b = bilinear_form(&problem, &mesh, &penalty, &v, &v, &quad).expect("matching penalty");
                    let norm2 = nipg_norm(&v, &problem, &penalty, &quad).expect("matching penalty").squared();
                    worst = worst.min(b / norm2);
                    trials += 1;
                }
            }
        }
    }
    CheckOutcome {
        suite: CheckSuite::Coercivity,
        passed: worst >= 1.0 - 1e-10,
        detail: format!("min B(v,v)/||v||^2 = {worst:.15} over {trials} random functions"),
    }
}

fn orthogonality_suite() -> CheckOutcome {
    let eps = 1e-6;
    let problem = paper_test_problem(eps);
    let exact = problem.exact.clone().expect("paper problem has an exact solution");
    let mut worst: f64 = 0.0;
    for k in 1..=2 {
        let quad = problem.quadrature(k + 12);
        for n in [16, 64] {
            let mesh = layer_mesh(n, k, eps);
            let penalty = Penalty::paper(n);
            let sol = solve_nipg(&problem, Arc::clone(&mesh), k, &penalty, &assembly_quadrature(&problem, k))
                .expect("solvable");
            let err = Difference(&exact, &sol.u);
            for i in 0..n * (k + 1) {
                let mut coeffs = vec![0.0; n * (k + 1)];
                coeffs[i] = 1.0;
                let v = DgFunction::new(Arc::clone(&mesh), k, coeffs).expect("sized");
                let b = bilinear_form(&problem, &mesh, &penalty, &err, &v, &quad).expect("matching penalty");
                let norm = nipg_norm(&v, &problem, &penalty, &quad).expect("matching penalty").total();
                worst = worst.max(b.abs() / norm);
            }
        }
    }
    CheckOutcome {
        suite: CheckSuite::Orthogonality,
        passed: worst <= 1e-6,
        detail: format!("max |B(u - u_N, v)| / ||v|| = {worst:.3e}"),
    }
}

fn solver_suite() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let blocks = rng.gen_range(1..=16);
        let s = rng.gen_range(1..=4);
        let mut a = BlockTridiagonal::zeros(blocks, s);
        for i in 0..blocks {
            for r in 0..s {
                for c in 0..s {
                    a.diag_mut(i)[(r, c)] = rng.gen_range(-1.0..1.0);
                    if i > 0 {
                        a.lower_mut(i)[(r, c)] = rng.gen_range(-1.0..1.0);
                    }
                    if i + 1 < blocks {
                        a.upper_mut(i)[(r, c)] = rng.gen_range(-1.0..1.0);
                    }
                }
                a.diag_mut(i)[(r, r)] += 3.0 * s as f64 + 1.0;
            }
        }
        let rhs: Vec<f64> = (0..blocks * s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = BlockLu::factor(&a).and_then(|lu| lu.solve(&rhs)).expect("dominant system");
        let y = dense_solve(&a.to_dense(), &rhs).expect("dominant system");
        let scale = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let diff = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    CheckOutcome {
        suite: CheckSuite::Solver,
        passed: worst <= 1e-10,
        detail: format!("max relative block-vs-dense difference {worst:.3e} over 50 systems"),
    }
}

fn interpolation_suite() -> CheckOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mesh = layer_mesh(16, 2, 1e-4);
    for _ in 0..100 {
        let k = rng.gen_range(1..=4);
        let coeffs: Vec<f64> = (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let poly = move |c: Coord| coeffs.iter().rev().fold(0.0, |acc, a| acc * c.x + a);
        let lob = lobatto_interpolate(&poly, Arc::clone(&mesh), k, 0..16).expect("in range");
        let rad =
            radau_interpolate(&poly, Arc::clone(&mesh), k, 0..16, &ElementQuadrature::gauss(k + 6)).expect("in range");
        for e in 0..16 {
            for t in [-1.0, -0.3, 0.4, 1.0] {
                let exact = poly(mesh.coord(e, t));
                worst = worst.max((lob.evaluate(e, t).expect("element") - exact).abs());
                worst = worst.max((rad.evaluate(e, t).expect("element") - exact).abs());
            }
        }
    }
    let mut jump: f64 = 0.0;
    for &eps in &SMALL_EPS {
        for n in geometric_ns(8, 1024) {
            let problem = paper_test_problem(eps);
            let exact = problem.exact.clone().expect("exact");
            let mesh = layer_mesh(n, 1, eps);
            let (pi, _) = composite_interpolate(
                &*exact.value,
                Arc::clone(&mesh),
                1,
                &radau_quadrature(1, Some(problem.layer_rate())),
            )
            .expect("layer mesh");
            let j = n / 2 + 1;
            jump = jump.max((pi.evaluate(j - 1, 1.0).expect("element") - pi.evaluate(j, -1.0).expect("element")).abs());
        }
    }
    CheckOutcome {
        suite: CheckSuite::Interpolation,
        passed: worst <= 1e-12 && jump <= 1e-12,
        detail: format!("polynomial reproduction error {worst:.3e}; max jump at x_(N/2+1) {jump:.3e}"),
    }
}

/// Runs the requested suites in order.
pub fn run_checks(suites: &[CheckSuite]) -> Vec<CheckOutcome> {
    suites
        .iter()
        .map(|s| match s {
            CheckSuite::Mesh => mesh_suite(),
            CheckSuite::Coercivity => coercivity_suite(),
            CheckSuite::Orthogonality => orthogonality_suite(),
            CheckSuite::Solver => solver_suite(),
            CheckSuite::Interpolation => interpolation_suite(),
        })
        .collect()
}
