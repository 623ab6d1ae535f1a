//! CSV tables, run manifests and error reporting.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Result;
use serde_json::json;

use peano_core::exact::{format_exact_real, format_rational, to_decimal_string, ExactReal, Rational};
use peano_core::Error;

use crate::config::Params;
use crate::selftest::Failed;

pub const OUT_DIR_ENV: &str = "PEANO_OUT_DIR";

pub fn exact(r: &Rational) -> String {
    format_rational(r)
}

#[derive(Clone, Debug)]
pub enum Cell {
    Exact(Rational),
    Real(ExactReal),
    Int(i128),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Exact(r) => format_rational(r),
            Cell::Real(x) => format_exact_real(x),
            Cell::Int(n) => n.to_string(),
            Cell::Float(f) => f.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn decimal(&self, digits: u32) -> Option<String> {
        match self {
            Cell::Exact(r) => Some(to_decimal_string(r, digits)),
            Cell::Real(x) => Some(format!("{:.*}", digits as usize, x.to_f64())),
            _ => None,
        }
    }
}

/// Rows in emission order; every row has one cell per header column.
#[derive(Clone, Debug)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<'a>(header: impl IntoIterator<Item = &'a str>) -> Self {
        Table { header: header.into_iter().map(String::from).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn with_row(mut self, row: Vec<Cell>) -> Self {
        self.push(row);
        self
    }

    /// Exact columns gain a `_dec` companion when `decimals` is set; which
    /// columns qualify is decided by the first row.
    pub fn to_csv(&self, decimals: Option<u32>) -> Result<Vec<u8>> {
        let dec_cols: Vec<bool> = match (decimals, self.rows.first()) {
            (Some(d), Some(row)) => row.iter().map(|c| c.decimal(d).is_some()).collect(),
            _ => vec![false; self.header.len()],
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = Vec::new();
        for (h, &dec) in self.header.iter().zip(&dec_cols) {
            header.push(h.clone());
            if dec {
                header.push(format!("{h}_dec"));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = Vec::new();
            for (cell, &dec) in row.iter().zip(&dec_cols) {
                rec.push(cell.render());
                if dec {
                    rec.push(cell.decimal(decimals.unwrap()).unwrap_or_default());
                }
            }
            w.write_record(&rec)?;
        }
        Ok(w.into_inner()?)
    }
}

/// `--out` (relative to the output directory when one is set), else
/// `<dir>/<command>.csv` when the output directory is set, else stdout.
pub fn destination(out: Option<&str>, command: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    match (out, dir) {
        (Some(o), Some(d)) if Path::new(o).is_relative() => Some(d.join(o)),
        (Some(o), _) => Some(PathBuf::from(o)),
        (None, Some(d)) => Some(d.join(format!("{command}.csv"))),
        (None, None) => None,
    }
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn write_artifact(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn manifest(command: &str, params: &Params, table: &Table, artifact: &Path, wall: Duration) -> String {
    let parameters: serde_json::Map<String, serde_json::Value> =
        params.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let value = json!({
        "command": command,
        "parameters": parameters,
        "artifact": artifact.display().to_string(),
        "columns": table.header,
        "rows": table.rows.len(),
        "versions": {
            "peano-cli": env!("CARGO_PKG_VERSION"),
            "rustc_target": std::env::consts::ARCH,
        },
        "wall_time_s": wall.as_secs_f64(),
    });
    serde_json::to_string_pretty(&value).expect("manifest is valid JSON") + "\n"
}

fn kind(e: &Error) -> &'static str {
    match e {
        Error::NotCoprime { .. } => "not_coprime",
        Error::BadModulus(_) => "bad_modulus",
        Error::Parse(..) => "parse",
        Error::NonTriadic(_) => "non_triadic",
        Error::NonTriadicBounds(..) => "non_triadic_bounds",
        Error::TimeOutOfRange(_) => "time_out_of_range",
        Error::IndexOutOfRange { .. } => "index_out_of_range",
        Error::DepthTooLarge { .. } => "depth_too_large",
        Error::NotPositive(_) => "not_positive",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::DivisibleByThree(_) => "divisible_by_three",
        Error::OutOfM { .. } => "out_of_admissible_set",
        Error::NoConvergence { .. } => "no_convergence",
        Error::Overflow(_) => "overflow",
    }
}

/// Exit code and one-line JSON for a failed run.
pub fn error_json(err: &anyhow::Error) -> (u8, String) {
    let core = err.chain().find_map(|e| e.downcast_ref::<Error>());
    let (code, kind) = match core {
        Some(e @ (Error::DepthTooLarge { .. } | Error::NoConvergence { .. })) => (2, kind(e)),
        Some(e) => (1, kind(e)),
        None if err.downcast_ref::<Failed>().is_some() => (1, "selftest_failed"),
        None => (1, "invalid_input"),
    };
    let mut value = json!({ "error": kind, "message": format!("{err:#}") });
    if let Some(Error::NoConvergence { lo, hi }) = core {
        value["bracket"] = json!([format_rational(lo), format_rational(hi)]);
    }
    (code, value.to_string())
}
