//! Fixtures shared by the solver benchmarks.

use std::sync::Arc;

use nipg_core::{bakhvalov_mesh, paper_test_problem, Mesh, MeshConfig, Penalty, ProblemSpec};

/// The reference problem on its layer-adapted mesh with `sigma = k + 1`, `alpha = 2`.
pub struct Case {
    pub problem: ProblemSpec,
    pub mesh: Arc<Mesh>,
    pub penalty: Penalty,
    pub k: usize,
}

pub fn paper_case(n: usize, k: usize, eps: f64) -> Case {
    let mesh = bakhvalov_mesh(&MeshConfig::new(n, (k + 1) as f64, 2.0, eps)).expect("valid mesh parameters");
    Case { problem: paper_test_problem(eps), mesh: Arc::new(mesh), penalty: Penalty::paper(n), k }
}
