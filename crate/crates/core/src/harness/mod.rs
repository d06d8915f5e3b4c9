//! Parameter sweeps and convergence tables.

mod checks;
mod table;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dgspace::Analytic;
use crate::expr::{parse_expr, ExprAst};
use crate::interpolation::radau_quadrature;
use crate::mesh::{bakhvalov_mesh, Coord, MeshConfig};
use crate::nipg::{paper_test_problem, solve_nipg, PenaltyMode, ProblemSpec};
use crate::norms::{energy_error, field_norm, supercloseness_error, ErrorBreakdown};

pub use checks::{run_checks, CheckOutcome, CheckSuite};
pub use table::{emit_study, emit_table, format_error, OutputFormat};

/// Cells whose condition estimate exceeds this are flagged as unreliable.
pub const CONDITION_FLAG: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("convergence rate needs positive errors (got {0:e} and {1:e})")]
    NonPositiveError(f64, f64),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::InvalidConfig(msg.into())
}

/// `ln(e_N / e_2N) / ln 2`.
pub fn compute_rate(e_n: f64, e_2n: f64) -> Result<f64, HarnessError> {
    compute_rate_between(e_n, e_2n, 1.0, 2.0)
}

/// Observed order between meshes with `n` and `n_next` elements.
pub fn compute_rate_between(e_n: f64, e_next: f64, n: f64, n_next: f64) -> Result<f64, HarnessError> {
    if !(e_n > 0.0 && e_next > 0.0) {
        return Err(HarnessError::NonPositiveError(e_n, e_next));
    }
    Ok((e_n / e_next).ln() / (n_next / n).ln())
}

/// The quantity measured in each cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// `||L_k u - u_N||`
    #[serde(rename = "supercloseness")]
    Supercloseness,
    /// `||u - u_N||`
    #[serde(rename = "energy")]
    Energy,
    /// `||u - Pi u||` for the composite interpolant; no solve.
    #[serde(rename = "interp")]
    Interpolation,
}

impl FromStr for NormKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "supercloseness" => Ok(NormKind::Supercloseness),
            "energy" => Ok(NormKind::Energy),
            "interp" | "interpolation" => Ok(NormKind::Interpolation),
            _ => Err(invalid(format!("unknown norm '{s}' (supercloseness | energy | interp)"))),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Supercloseness => "supercloseness",
            NormKind::Energy => "energy",
            NormKind::Interpolation => "interp",
        })
    }
}

/// Coefficients given as expressions in `x` and `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprProblem {
    pub b: String,
    pub c: String,
    pub f: String,
    #[serde(default)]
    pub u: Option<String>,
    /// Derived symbolically from `u` when absent.
    #[serde(default)]
    pub uprime: Option<String>,
}

struct ParsedExprProblem {
    b: ExprAst,
    c: ExprAst,
    f: ExprAst,
    u: Option<(ExprAst, ExprAst)>,
}

fn parse_field(name: &str, text: &str) -> Result<ExprAst, HarnessError> {
    parse_expr(text).map_err(|e| invalid(format!("--{name} '{text}': {e}")))
}

impl ExprProblem {
    fn parse(&self) -> Result<ParsedExprProblem, HarnessError> {
        let u = match (&self.u, &self.uprime) {
            (Some(u), Some(du)) => Some((parse_field("u", u)?, parse_field("uprime", du)?)),
            (Some(u), None) => {
                let u = parse_field("u", u)?;
                let du = u.derivative();
                Some((u, du))
            }
            (None, Some(_)) => return Err(invalid("--uprime given without --u")),
            (None, None) => None,
        };
        Ok(ParsedExprProblem {
            b: parse_field("b", &self.b)?,
            c: parse_field("c", &self.c)?,
            f: parse_field("f", &self.f)?,
            u,
        })
    }
}

impl ParsedExprProblem {
    fn build(&self, eps: f64) -> ProblemSpec {
        let p = ProblemSpec::new(
            "expr",
            eps,
            self.b.to_scalar_fn(eps),
            self.b.derivative().to_scalar_fn(eps),
            self.c.to_scalar_fn(eps),
            self.f.to_scalar_fn(eps),
        );
        match &self.u {
            Some((u, du)) => {
                let (u, du) = (u.to_scalar_fn(eps), du.to_scalar_fn(eps));
                p.with_exact(Analytic::new(move |c: Coord| u(c), move |c: Coord| du(c)))
            }
            None => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemChoice {
    /// `-eps u'' + (3 - x) u' + u = f`, `u = x - x exp(-2(1-x)/eps)`.
    Paper,
    Expr(ExprProblem),
}

/// A sweep over degrees, perturbation parameters and mesh sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    pub eps: Vec<f64>,
    pub ns: Vec<usize>,
    /// Mesh grading; `k + 1` when absent.
    pub sigma: Option<f64>,
    /// Mesh convection bound; the problem's `alpha` when absent.
    pub alpha: Option<f64>,
    pub penalty: PenaltyMode,
    pub problem: ProblemChoice,
    pub norm: NormKind,
    /// Gauss points per cell for assembly; `k + 3` when absent.
    pub quad_assembly: Option<usize>,
    /// Gauss points per cell for error norms; `max(10, 2k + 4)` when absent.
    pub quad_error: Option<usize>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ks: vec![1],
            eps: vec![1e-5],
            ns: geometric_ns(8, 1024),
            sigma: None,
            alpha: None,
            penalty: PenaltyMode::Paper,
            problem: ProblemChoice::Paper,
            norm: NormKind::Supercloseness,
            quad_assembly: None,
            quad_error: None,
            out: None,
            jobs: 1,
        }
    }
}

/// `lo, 2 lo, 4 lo, ...` up to `hi`.
pub fn geometric_ns(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |n| Some(n * 2)).take_while(|n| *n <= hi).collect()
}

/// Configurations of the six reference tables.
pub fn preset(table: usize) -> Option<SweepConfig> {
    let small = vec![1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
    let large = vec![1e-1, 1e-2, 1e-3, 1e-4];
    let (k, eps) = match table {
        1 => (1, small),
        2 => (2, small),
        3 => (3, small),
        4 => (1, large),
        5 => (2, large),
        6 => (3, large),
        _ => return None,
    };
    Some(SweepConfig { ks: vec![k], eps, alpha: Some(2.0), ..SweepConfig::default() })
}

enum BuiltProblem {
    Paper,
    Expr(ParsedExprProblem),
}

impl BuiltProblem {
    fn at(&self, eps: f64) -> ProblemSpec {
        match self {
            BuiltProblem::Paper => paper_test_problem(eps),
            BuiltProblem::Expr(p) => p.build(eps),
        }
    }
}

impl SweepConfig {
    pub fn sigma_for(&self, k: usize) -> f64 {
        self.sigma.unwrap_or((k + 1) as f64)
    }

    pub fn assembly_points(&self, k: usize) -> usize {
        self.quad_assembly.unwrap_or(k + 3)
    }

    pub fn error_points(&self, k: usize) -> usize {
        self.quad_error.unwrap_or((2 * k + 4).max(10))
    }

    fn build_problem(&self) -> Result<BuiltProblem, HarnessError> {
        Ok(match &self.problem {
            ProblemChoice::Paper => BuiltProblem::Paper,
            ProblemChoice::Expr(e) => BuiltProblem::Expr(e.parse()?),
        })
    }

    /// Checks every invariant, including mesh feasibility of each `(k, eps, N)`.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.validated_problem().map(|_| ())
    }

    fn validated_problem(&self) -> Result<BuiltProblem, HarnessError> {
        if self.ks.is_empty() || self.eps.is_empty() || self.ns.is_empty() {
            return Err(invalid("k, eps and N lists must be nonempty"));
        }
        if let Some(k) = self.ks.iter().find(|k| **k == 0) {
            return Err(invalid(format!("degree k = {k} must be at least 1")));
        }
        if let Some(n) = self.ns.iter().find(|n| **n < 8 || **n % 2 != 0) {
            return Err(invalid(format!("N = {n} must be even and at least 8")));
        }
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(invalid(format!("eps = {e} must lie in (0, 1)")));
        }
        for (name, v) in [("sigma", self.sigma), ("alpha", self.alpha)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(format!("{name} = {v} must be positive")));
                }
            }
        }
        if self.jobs == 0 {
            return Err(invalid("jobs must be at least 1"));
        }
        for &k in &self.ks {
            if self.assembly_points(k) < k + 1 || self.error_points(k) < k + 1 {
                return Err(invalid(format!("quadrature needs at least k + 1 = {} points", k + 1)));
            }
        }
        let problem = self.build_problem()?;
        for &eps in &self.eps {
            let spec = problem.at(eps);
            spec.validate().map_err(|e| invalid(e.to_string()))?;
            if spec.exact.is_none() {
                return Err(invalid(format!("norm '{}' needs an exact solution (--u)", self.norm)));
            }
            for &k in &self.ks {
                for &n in &self.ns {
                    let alpha = self.alpha.unwrap_or(spec.alpha);
                    MeshConfig::new(n, self.sigma_for(k), alpha, eps)
                        .validate()
                        .map_err(|e| invalid(format!("k = {k}, eps = {eps:e}, N = {n}: {e}")))?;
                }
            }
        }
        Ok(problem)
    }

    fn sorted_ns(&self) -> Vec<usize> {
        let mut ns = self.ns.clone();
        ns.sort_unstable();
        ns.dedup();
        ns
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CellStatus {
    Ok,
    Failed(String),
}

/// One `(eps, N)` entry of a table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub n: usize,
    pub eps: f64,
    pub error: Option<f64>,
    pub breakdown: Option<ErrorBreakdown>,
    /// Observed order towards the next larger `N` of the same column.
    pub rate: Option<f64>,
    pub condition: Option<f64>,
    /// Condition estimate above [`CONDITION_FLAG`].
    pub flagged: bool,
    pub status: CellStatus,
}

/// Errors and rates for one degree: rows are `N`, columns are `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub k: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub norm: NormKind,
    pub penalty: PenaltyMode,
    pub eps: Vec<f64>,
    pub ns: Vec<usize>,
    cells: Vec<Cell>,
}

impl ConvergenceTable {
    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row * self.eps.len() + col]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// The cell for given `eps` and `N`, if swept.
    pub fn find(&self, eps: f64, n: usize) -> Option<&Cell> {
        let col = self.eps.iter().position(|e| *e == eps)?;
        let row = self.ns.iter().position(|m| *m == n)?;
        Some(self.cell(row, col))
    }

    fn fill_rates(&mut self) {
        let cols = self.eps.len();
        for row in 0..self.ns.len().saturating_sub(1) {
            for col in 0..cols {
                let (here, next) = (self.cell(row, col).error, self.cell(row + 1, col).error);
                let rate = match (here, next) {
                    (Some(a), Some(b)) => compute_rate_between(a, b, self.ns[row] as f64, self.ns[row + 1] as f64).ok(),
                    _ => None,
                };
                self.cells[row * cols + col].rate = rate;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Study {
    pub config: SweepConfig,
    pub tables: Vec<ConvergenceTable>,
    pub warnings: Vec<String>,
}

impl Study {
    pub fn failures(&self) -> usize {
        self.tables.iter().flat_map(|t| t.cells()).filter(|c| c.status != CellStatus::Ok).count()
    }
}

fn compute_cell(config: &SweepConfig, problem: &ProblemSpec, k: usize, n: usize, alpha: f64) -> Cell {
    let mut cell = Cell {
        n,
        eps: problem.epsilon,
        error: None,
        breakdown: None,
        rate: None,
        condition: None,
        flagged: false,
        status: CellStatus::Ok,
    };
    let outcome = (|| -> Result<(ErrorBreakdown, Option<f64>), String> {
        let mesh = Arc::new(
            bakhvalov_mesh(&MeshConfig::new(n, config.sigma_for(k), alpha, problem.epsilon))
                .map_err(|e| e.to_string())?,
        );
        let penalty = config.penalty.build(n);
        let err_quad = problem.quadrature(config.error_points(k));
        if config.norm == NormKind::Interpolation {
            let exact = problem.exact.as_ref().ok_or("no exact solution")?;
            let radau = radau_quadrature(k, Some(problem.layer_rate()));
            let (pi, _) = crate::interpolation::composite_interpolate(&*exact.value, Arc::clone(&mesh), k, &radau)
                .map_err(|e| e.to_string())?;
            let diff = crate::dgspace::Difference(exact, &pi);
            let b = field_norm(&diff, &mesh, problem, &penalty, &err_quad).map_err(|e| e.to_string())?;
            return Ok((b, None));
        }
        let asm_quad = problem.quadrature(config.assembly_points(k));
        let sol = solve_nipg(problem, mesh, k, &penalty, &asm_quad).map_err(|e| e.to_string())?;
        if let Some(w) = &sol.warning {
            log::warn!("k = {k}, eps = {:e}, N = {n}: {w}", problem.epsilon);
        }
        let b = match config.norm {
            NormKind::Supercloseness => supercloseness_error(problem, &sol.u, &penalty, &err_quad),
            _ => energy_error(problem, &sol.u, &penalty, &err_quad),
        }
        .map_err(|e| e.to_string())?;
        Ok((b, Some(sol.condition)))
    })();
    match outcome {
        Ok((b, cond)) if b.total().is_finite() => {
            cell.error = Some(b.total());
            cell.breakdown = Some(b);
            cell.condition = cond;
            cell.flagged = cond.is_some_and(|c| c.is_nan() || c > CONDITION_FLAG);
        }
        Ok(_) => cell.status = CellStatus::Failed("non-finite error norm".into()),
        Err(msg) => cell.status = CellStatus::Failed(msg),
    }
    cell
}

/// Runs every cell of the sweep on a pool of `config.jobs` threads. Results
/// do not depend on the thread count.
pub fn run_study(config: &SweepConfig) -> Result<Study, HarnessError> {
    let problem = config.validated_problem()?;
    let ns = config.sorted_ns();
    let specs: Vec<ProblemSpec> = config.eps.iter().map(|&e| problem.at(e)).collect();

    let mut warnings = Vec::new();
    for spec in &specs {
        let coarse: Vec<String> =
            ns.iter().filter(|&&n| spec.epsilon > 1.0 / n as f64).map(|n| n.to_string()).collect();
        if !coarse.is_empty() {
            let w = format!(
                "eps = {:e} exceeds 1/N for N = {}: outside the regime eps <= C/N",
                spec.epsilon,
                coarse.join(", ")
            );
            log::warn!("{w}");
            warnings.push(w);
        }
    }

    let (rows, cols) = (ns.len(), specs.len());
    let jobs: Vec<(usize, usize, usize)> = (0..config.ks.len())
        .flat_map(|ki| (0..rows).flat_map(move |ni| (0..cols).map(move |ei| (ki, ni, ei))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let mut cells: Vec<Cell> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ki, ni, ei)| {
                let spec = &specs[ei];
                let alpha = config.alpha.unwrap_or(spec.alpha);
                compute_cell(config, spec, config.ks[ki], ns[ni], alpha)
            })
            .collect()
    });

    let per_table = ns.len() * specs.len();
    let mut tables = Vec::with_capacity(config.ks.len());
    for (ki, &k) in config.ks.iter().enumerate().rev() {
        let block = cells.split_off(ki * per_table);
        let first = &specs[0];
        let mut table = ConvergenceTable {
            k,
            sigma: config.sigma_for(k),
            alpha: config.alpha.unwrap_or(first.alpha),
            gamma: first.gamma,
            norm: config.norm,
            penalty: config.penalty,
            eps: config.eps.clone(),
            ns: ns.clone(),
            cells: block,
        };
        table.fill_rates();
        tables.push(table);
    }
    tables.reverse();
    Ok(Study { config: config.clone(), tables, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_examples() {
        assert!((compute_rate(0.695e-1, 0.179e-1).unwrap() - 1.96).abs() < 0.005);
        assert_eq!(compute_rate(0.3, 0.3).unwrap(), 0.0);
        assert!((compute_rate(8.0 * 1.7e-3, 1.7e-3).unwrap() - 3.0).abs() < 1e-14);
        assert!(compute_rate(0.0, 1.0).is_err());
        assert!(compute_rate(1.0, -1.0).is_err());
        assert!((compute_rate_between(9.0, 1.0, 10.0, 30.0).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn presets_cover_six_tables() {
        for t in 1..=6 {
            let c = preset(t).unwrap();
            assert_eq!(c.ns, vec![8, 16, 32, 64, 128, 256, 512, 1024]);
            c.validate().unwrap();
        }
        assert!(preset(7).is_none());
        assert_eq!(preset(5).unwrap().ks, vec![2]);
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let base = SweepConfig::default();
        let cases = [
            SweepConfig { ns: vec![6], ..base.clone() },
            SweepConfig { ns: vec![9], ..base.clone() },
            SweepConfig { eps: vec![0.0], ..base.clone() },
            SweepConfig { eps: vec![], ..base.clone() },
            SweepConfig { ks: vec![0], ..base.clone() },
            SweepConfig { sigma: Some(-1.0), ..base.clone() },
            SweepConfig { jobs: 0, ..base.clone() },
            // tau = 1 + 2 eps ln(eps) < 1/2 for k = 3
            SweepConfig { ks: vec![3], eps: vec![0.3], ..base.clone() },
            SweepConfig { quad_assembly: Some(1), ..base.clone() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(HarnessError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn single_n_has_no_rates() {
        let c = SweepConfig { ns: vec![16], eps: vec![1e-4, 1e-6], ..SweepConfig::default() };
        let s = run_study(&c).unwrap();
        assert!(s.tables[0].cells().iter().all(|c| c.rate.is_none() && c.error.is_some()));
    }

    #[test]
    fn rates_recomputable_and_parallel_deterministic() {
        let c = SweepConfig { ks: vec![1, 2], eps: vec![1e-4, 1e-7], ns: vec![8, 16, 32], ..SweepConfig::default() };
        let one = run_study(&SweepConfig { jobs: 1, ..c.clone() }).unwrap();
        let eight = run_study(&SweepConfig { jobs: 8, ..c }).unwrap();
        assert_eq!(one.tables, eight.tables);
        for t in &one.tables {
            for row in 0..t.ns.len() - 1 {
                for col in 0..t.eps.len() {
                    let r = compute_rate(t.cell(row, col).error.unwrap(), t.cell(row + 1, col).error.unwrap()).unwrap();
                    assert!((r - t.cell(row, col).rate.unwrap()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn large_eps_warns_once_per_eps() {
        let c = SweepConfig { eps: vec![1e-1, 1e-5], ns: vec![8, 16, 32], ..SweepConfig::default() };
        let s = run_study(&c).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("N = 16, 32"));
    }

    #[test]
    fn expression_problem_matches_paper_problem() {
        let expr = ProblemChoice::Expr(ExprProblem {
            b: "3 - x".into(),
            c: "1".into(),
            f: "3 + exp(-2*(1-x)/eps) - 2*x*(1-x)*exp(-2*(1-x)/eps)/eps".into(),
            u: Some("x - x*exp(-2*(1-x)/eps)".into()),
            uprime: None,
        });
        let base = SweepConfig { eps: vec![1e-3], ns: vec![16, 32], ..SweepConfig::default() };
        let a = run_study(&base).unwrap();
        let b = run_study(&SweepConfig { problem: expr, ..base }).unwrap();
        for (x, y) in a.tables[0].cells().iter().zip(b.tables[0].cells()) {
            let (x, y) = (x.error.unwrap(), y.error.unwrap());
            assert!((x - y).abs() < 1e-8 * x, "{x} vs {y}");
        }
    }

    #[test]
    fn expression_problem_errors_are_config_errors() {
        let bad = ProblemChoice::Expr(ExprProblem {
            b: "3 - ".into(),
            c: "1".into(),
            f: "1".into(),
            u: Some("x".into()),
            uprime: None,
        });
        let c = SweepConfig { problem: bad, ..SweepConfig::default() };
        assert!(matches!(c.validate(), Err(HarnessError::InvalidConfig(_))));
        let no_exact =
            ProblemChoice::Expr(ExprProblem { b: "2".into(), c: "1".into(), f: "1".into(), u: None, uprime: None });
        let c = SweepConfig { problem: no_exact, ..SweepConfig::default() };
        assert!(matches!(c.validate(), Err(HarnessError::InvalidConfig(_))));
    }

    #[test]
    fn interpolation_norm_needs_no_solve() {
        let c = SweepConfig { norm: NormKind::Interpolation, ns: vec![16, 32], ..SweepConfig::default() };
        let s = run_study(&c).unwrap();
        assert!(s.tables[0].cells().iter().all(|c| c.condition.is_none() && c.error.unwrap() > 0.0));
    }

    #[test]
    fn config_json_round_trip() {
        let c = SweepConfig {
            penalty: PenaltyMode::Constant(2.5),
            norm: NormKind::Energy,
            sigma: Some(2.0),
            ..SweepConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"const:2.5\"") && text.contains("\"energy\""));
        assert_eq!(serde_json::from_str::<SweepConfig>(&text).unwrap(), c);
        let partial: SweepConfig = serde_json::from_str(r#"{"ks": [2], "penalty": "paper"}"#).unwrap();
        assert_eq!(partial.ks, vec![2]);
        assert!(serde_json::from_str::<SweepConfig>(r#"{"kss": [2]}"#).is_err());
    }
}
