use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nipg_core::harness::{run_checks, CheckSuite, ExprProblem};
use nipg_core::{
    bakhvalov_mesh, check_mesh_lemma, emit_study, preset, run_study, HarnessError, MeshConfig, NormKind, OutputFormat,
    PenaltyMode, ProblemChoice, SweepConfig,
};

#[derive(Parser, Debug)]
#[command(name = "nipg", version, about = "NIPG convergence studies on Bakhvalov-type meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep from flags and/or a JSON config file
    Run(SweepArgs),
    /// k = 1, eps = 1e-5 .. 1e-9
    Table1(SweepArgs),
    /// k = 2, eps = 1e-5 .. 1e-9
    Table2(SweepArgs),
    /// k = 3, eps = 1e-5 .. 1e-9
    Table3(SweepArgs),
    /// k = 1, eps = 1e-1 .. 1e-4
    Table4(SweepArgs),
    /// k = 2, eps = 1e-1 .. 1e-4
    Table5(SweepArgs),
    /// k = 3, eps = 1e-1 .. 1e-4
    Table6(SweepArgs),
    /// Write mesh nodes and widths as CSV
    MeshDump(MeshArgs),
    /// Run property suites
    Check(CheckArgs),
}

#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// JSON file mirroring the sweep configuration; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Polynomial degrees, comma separated
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Perturbation parameters, comma separated
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Mesh sizes: comma list or `lo..hi x factor`, e.g. `8..1024x2`
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// `paper` or `const:<v>`
    #[arg(long)]
    penalty: Option<String>,
    /// supercloseness | energy | interp
    #[arg(long)]
    norm: Option<String>,
    /// Gauss points per cell for assembly
    #[arg(long)]
    quad_assembly: Option<usize>,
    /// Gauss points per cell for error norms
    #[arg(long)]
    quad_error: Option<usize>,
    /// md | csv
    #[arg(long, default_value = "md")]
    format: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    /// paper | expr
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    f: Option<String>,
    #[arg(long)]
    u: Option<String>,
    #[arg(long)]
    uprime: Option<String>,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    n: usize,
    /// Degree used for the default sigma = k + 1
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Suites to run, comma separated (default: all)
    #[arg(long, value_delimiter = ',')]
    suite: Option<Vec<String>>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Cells(usize),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn config_error(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn parse_ns(text: &str) -> Result<Vec<usize>> {
    if let Some((lo, rest)) = text.split_once("..") {
        let (hi, factor) = rest.split_once('x').unwrap_or((rest, "2"));
        let lo: usize = lo.trim().parse().with_context(|| format!("bad N range start in '{text}'"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad N range end in '{text}'"))?;
        let factor: usize = factor.trim().parse().with_context(|| format!("bad N range factor in '{text}'"))?;
        if lo == 0 || factor < 2 || hi < lo {
            bail!("N range '{text}' needs 0 < lo <= hi and factor >= 2");
        }
        Ok(std::iter::successors(Some(lo), |n| n.checked_mul(factor)).take_while(|n| *n <= hi).collect())
    } else {
        text.split(',').map(|s| s.trim().parse::<usize>().with_context(|| format!("bad N value '{s}'"))).collect()
    }
}

fn apply_overrides(mut config: SweepConfig, args: &SweepArgs) -> Result<SweepConfig> {
    if let Some(k) = &args.k {
        config.ks = k.clone();
    }
    if let Some(eps) = &args.eps {
        config.eps = eps.clone();
    }
    if let Some(n) = &args.n {
        config.ns = parse_ns(n)?;
    }
    config.sigma = args.sigma.or(config.sigma);
    config.alpha = args.alpha.or(config.alpha);
    if let Some(p) = &args.penalty {
        config.penalty = p.parse::<PenaltyMode>()?;
    }
    if let Some(n) = &args.norm {
        config.norm = n.parse::<NormKind>()?;
    }
    config.quad_assembly = args.quad_assembly.or(config.quad_assembly);
    config.quad_error = args.quad_error.or(config.quad_error);
    config.out = args.out.clone().or(config.out);
    config.jobs = args.jobs.unwrap_or(config.jobs);

    let any_expr_flag = [&args.b, &args.c, &args.f, &args.u, &args.uprime].iter().any(|a| a.is_some());
    let wants_expr = match args.problem.as_deref() {
        Some("paper") => {
            if any_expr_flag {
                bail!("--b/--c/--f/--u/--uprime need --problem expr");
            }
            config.problem = ProblemChoice::Paper;
            false
        }
        Some("expr") => true,
        Some(other) => bail!("unknown problem '{other}' (paper | expr)"),
        None => any_expr_flag || matches!(config.problem, ProblemChoice::Expr(_)),
    };
    if wants_expr {
        let base = match &config.problem {
            ProblemChoice::Expr(e) => Some(e.clone()),
            ProblemChoice::Paper => None,
        };
        let pick = |flag: &Option<String>, from: Option<&String>, name: &str| -> Result<String> {
            flag.clone().or_else(|| from.cloned()).ok_or_else(|| anyhow!("--problem expr needs --{name}"))
        };
        let e = ExprProblem {
            b: pick(&args.b, base.as_ref().map(|e| &e.b), "b")?,
            c: pick(&args.c, base.as_ref().map(|e| &e.c), "c")?,
            f: pick(&args.f, base.as_ref().map(|e| &e.f), "f")?,
            u: args.u.clone().or_else(|| base.as_ref().and_then(|e| e.u.clone())),
            uprime: args.uprime.clone().or_else(|| base.as_ref().and_then(|e| e.uprime.clone())),
        };
        config.problem = ProblemChoice::Expr(e);
    }
    Ok(config)
}

fn load_config(base: SweepConfig, args: &SweepArgs) -> Result<SweepConfig> {
    let from_file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => base,
    };
    apply_overrides(from_file, args)
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn sweep(base: SweepConfig, args: &SweepArgs) -> Result<(), Failure> {
    let format: OutputFormat = args.format.parse().map_err(config_error)?;
    let config = load_config(base, args).map_err(config_error)?;
    let study = run_study(&config).map_err(|e| match e {
        HarnessError::InvalidConfig(_) => config_error(e),
        other => Failure::Other(other.into()),
    })?;
    write_output(config.out.as_ref(), &emit_study(&study, format))?;
    match study.failures() {
        0 => Ok(()),
        n => Err(Failure::Cells(n)),
    }
}

fn mesh_dump(args: &MeshArgs) -> Result<(), Failure> {
    let sigma = args.sigma.unwrap_or((args.k + 1) as f64);
    let cfg = MeshConfig::new(args.n, sigma, args.alpha, args.eps);
    let mesh = bakhvalov_mesh(&cfg).map_err(config_error)?;
    for f in check_mesh_lemma(&mesh, &cfg).failures() {
        log::warn!("mesh width bound '{}' fails: {}", f.name, f.detail);
    }
    let mut buf = Vec::new();
    mesh.write_csv(&mut buf).map_err(|e| Failure::Other(e.into()))?;
    write_output(args.out.as_ref(), &String::from_utf8(buf).map_err(|e| Failure::Other(e.into()))?)?;
    Ok(())
}

fn check(args: &CheckArgs) -> Result<(), Failure> {
    let suites: Vec<CheckSuite> = match &args.suite {
        Some(names) => names.iter().map(|s| s.parse()).collect::<Result<_, _>>().map_err(config_error)?,
        None => CheckSuite::ALL.to_vec(),
    };
    let outcomes = run_checks(&suites);
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.suite, o.detail);
    }
    match outcomes.iter().filter(|o| !o.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Cells(n)),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let table = |t: usize| preset(t).expect("presets 1 to 6 exist");
    let result = match &cli.command {
        Command::Run(a) => sweep(SweepConfig::default(), a),
        Command::Table1(a) => sweep(table(1), a),
        Command::Table2(a) => sweep(table(2), a),
        Command::Table3(a) => sweep(table(3), a),
        Command::Table4(a) => sweep(table(4), a),
        Command::Table5(a) => sweep(table(5), a),
        Command::Table6(a) => sweep(table(6), a),
        Command::MeshDump(a) => mesh_dump(a),
        Command::Check(a) => check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Cells(n)) => {
            eprintln!("{n} failed cell(s) or check(s)");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_lists() {
        assert_eq!(parse_ns("8..1024x2").unwrap(), vec![8, 16, 32, 64, 128, 256, 512, 1024]);
        assert_eq!(parse_ns("8..100x3").unwrap(), vec![8, 24, 72]);
        assert_eq!(parse_ns("16..64").unwrap(), vec![16, 32, 64]);
        assert_eq!(parse_ns("8, 12,20").unwrap(), vec![8, 12, 20]);
        assert!(parse_ns("8..4x2").is_err());
        assert!(parse_ns("8..64x1").is_err());
        assert!(parse_ns("a,b").is_err());
    }

    #[test]
    fn flags_override_base() {
        let args = SweepArgs {
            k: Some(vec![2]),
            penalty: Some("const:3".into()),
            norm: Some("energy".into()),
            ..SweepArgs::default()
        };
        let c = apply_overrides(preset(1).unwrap(), &args).unwrap();
        assert_eq!(c.ks, vec![2]);
        assert_eq!(c.penalty, PenaltyMode::Constant(3.0));
        assert_eq!(c.norm, NormKind::Energy);
        assert_eq!(c.eps, preset(1).unwrap().eps);
    }

    #[test]
    fn expression_flags_imply_expr_problem() {
        let args = SweepArgs { b: Some("2".into()), c: Some("1".into()), f: Some("1".into()), ..SweepArgs::default() };
        let c = apply_overrides(SweepConfig::default(), &args).unwrap();
        assert!(matches!(c.problem, ProblemChoice::Expr(_)));
        let partial = SweepArgs { problem: Some("expr".into()), b: Some("2".into()), ..SweepArgs::default() };
        assert!(apply_overrides(SweepConfig::default(), &partial).is_err());
        let mixed = SweepArgs { problem: Some("paper".into()), b: Some("2".into()), ..SweepArgs::default() };
        assert!(apply_overrides(SweepConfig::default(), &mixed).is_err());
    }
}
