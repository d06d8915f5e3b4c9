//! NIPG discontinuous Galerkin solver on Bakhvalov-type layer-adapted meshes
//! for `-eps u'' + b u' + c u = f` on `(0, 1)` with `u(0) = u(1) = 0`.

pub mod dgspace;
pub mod expr;
pub mod harness;
pub mod interpolation;
pub mod linalg;
pub mod mesh;
pub mod nipg;
pub mod norms;
pub mod orthopoly;

pub use dgspace::{Analytic, DgError, DgFunction, ElementQuadrature, PiecewiseField, ScalarFn};
pub use expr::{eval_expr, parse_expr, ExprAst, ExprError};
pub use harness::{
    compute_rate, emit_study, emit_table, preset, run_study, ConvergenceTable, HarnessError, NormKind, OutputFormat,
    ProblemChoice, Study, SweepConfig,
};
pub use interpolation::{composite_interpolate, lobatto_interpolate, radau_interpolate, InterpolantKind};
pub use linalg::{BlockLu, BlockTridiagonal, LinalgError};
pub use mesh::{bakhvalov_mesh, check_mesh_lemma, Coord, Mesh, MeshConfig, MeshError};
pub use nipg::{paper_test_problem, solve_nipg, NipgError, NipgSolution, Penalty, PenaltyMode, ProblemSpec};
pub use norms::{energy_error, interpolation_error, nipg_norm, supercloseness_error, ErrorBreakdown};

/// Any error raised by the library.
#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Dg(#[from] DgError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Nipg(#[from] NipgError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}
