use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CellStatus, ConvergenceTable, HarnessError, Study, CONDITION_FLAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Md,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "md" | "markdown" => Ok(OutputFormat::Md),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(HarnessError::InvalidConfig(format!("unknown format '{s}' (md | csv)"))),
        }
    }
}

/// Three significant digits with the mantissa in `[0.1, 1)`: `0.0695` is `0.695E-1`.
pub fn format_error(e: f64) -> String {
    if e == 0.0 {
        return "0.000E0".into();
    }
    if !e.is_finite() {
        return e.to_string();
    }
    let sci = format!("{:.2e}", e.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits = mantissa.replace('.', "");
    let sign = if e < 0.0 { "-" } else { "" };
    format!("{sign}0.{digits}E{}", exp + 1)
}

fn format_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "--".into(), |r| format!("{r:.2}"))
}

fn markdown(table: &ConvergenceTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "k = {}, sigma = {}, alpha = {}, gamma = {}, penalty = {}, norm = {}\n",
        table.k, table.sigma, table.alpha, table.gamma, table.penalty, table.norm
    );
    out.push_str("| N |");
    for e in &table.eps {
        let _ = write!(out, " e_N (eps={e:e}) | r_N |");
    }
    out.push_str("\n|---:|");
    for _ in &table.eps {
        out.push_str("---:|---:|");
    }
    out.push('\n');
    let mut any_flag = false;
    for (row, n) in table.ns.iter().enumerate() {
        let _ = write!(out, "| {n} |");
        for col in 0..table.eps.len() {
            let c = table.cell(row, col);
            let err = match (&c.status, c.error) {
                (CellStatus::Ok, Some(e)) => format_error(e),
                _ => "failed".into(),
            };
            let mark = if c.flagged { "*" } else { "" };
            any_flag |= c.flagged;
            let _ = write!(out, " {err}{mark} | {} |", format_rate(c.rate));
        }
        out.push('\n');
    }
    if any_flag {
        let _ = writeln!(out, "\n`*` condition estimate above {CONDITION_FLAG:e}; value may be unreliable.");
    }
    out
}

const CSV_HEADER: [&str; 15] = [
    "k",
    "eps",
    "N",
    "error",
    "rate",
    "cond_flag",
    "error_full",
    "rate_full",
    "cond_estimate",
    "sigma",
    "alpha",
    "gamma",
    "penalty",
    "norm",
    "status",
];

fn csv_rows(table: &ConvergenceTable, w: &mut csv::Writer<Vec<u8>>) -> csv::Result<()> {
    for c in table.cells() {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:e}"));
        let status = match &c.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(m) => format!("failed: {m}"),
        };
        w.write_record([
            table.k.to_string(),
            format!("{:e}", c.eps),
            c.n.to_string(),
            c.error.map_or_else(String::new, format_error),
            c.rate.map_or_else(String::new, |r| format!("{r:.2}")),
            u8::from(c.flagged).to_string(),
            opt(c.error),
            opt(c.rate),
            opt(c.condition),
            table.sigma.to_string(),
            table.alpha.to_string(),
            table.gamma.to_string(),
            table.penalty.to_string(),
            table.norm.to_string(),
            status,
        ])?;
    }
    Ok(())
}

fn csv_of<'a>(tables: impl IntoIterator<Item = &'a ConvergenceTable>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let result = w.write_record(CSV_HEADER).and_then(|_| tables.into_iter().try_for_each(|t| csv_rows(t, &mut w)));
    result.expect("writing csv to memory");
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

/// Renders one table; markdown pairs `e_N` and `r_N` columns per `eps`.
pub fn emit_table(table: &ConvergenceTable, format: OutputFormat) -> String {
    match format {
        OutputFormat::Md => markdown(table),
        OutputFormat::Csv => csv_of([table]),
    }
}

/// All tables of a study; CSV output has a single header.
pub fn emit_study(study: &Study, format: OutputFormat) -> String {
    match format {
        OutputFormat::Md => study.tables.iter().map(markdown).collect::<Vec<_>>().join("\n"),
        OutputFormat::Csv => csv_of(&study.tables),
    }
}
