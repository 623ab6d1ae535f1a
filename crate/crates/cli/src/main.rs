//! `peano`: experiment front end for the exact Peano-curve engine.
//!
//! Every numeric parameter is exact (`P/Q`, `K/9^N`, `P/Q+S/T*sqrt2`); CSV
//! cells are exact too, with optional `_dec` companion columns. Exit codes:
//! 0 success, 1 invalid input (error JSON on stderr), 2 depth cap or
//! non-convergence.

mod config;
mod output;
mod selftest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use peano_core::curve::{polygon, x_eval, y_eval, PolygonKind};
use peano_core::exact::{parse_exact_real, parse_rational, ExactReal, Rational};
use peano_core::lebesgue::{crossings, qv, qv_direct, truncated_variation, Grid};
use peano_core::limits::{convergence_sweep, GridFamily, SweepCache};
use peano_core::local_time::{
    local_time_profile, occupation_identity_check, weak_limit_check, TestFunction, PROFILE_DEPTH_CAP,
};
use peano_core::{Exec, TernaryTime};

use config::Params;
use output::{Cell, Table};

const POLYGON_CAP: u32 = 7;
const SWEEP_CAP: i64 = 10;

#[derive(Parser, Debug)]
#[command(name = "peano", version, about = "Exact quadratic variation, crossings and local time of the Peano curve's x component")]
struct Cli {
    /// `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination; relative paths resolve against `PEANO_OUT_DIR`.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Add `<column>_dec` columns rounded to this many decimals.
    #[arg(long, global = true)]
    decimals: Option<String>,
    /// Lift the default depth caps.
    #[arg(long, global = true)]
    unsafe_depth: bool,
    /// Run without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print x(t) and y(t).
    Eval {
        #[arg(long)]
        t: Option<String>,
    },
    /// Vertices of the depth-m approximating polygon.
    Polygon {
        #[arg(long)]
        m: Option<String>,
        /// `x` for the graph (t, x(t)), `xy` for the planar curve.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Quadratic variation along the grid cℤ + r on [0, t].
    Qv {
        #[arg(long)]
        c: Option<String>,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// Use the plain block descent instead of the memoised scan.
        #[arg(long)]
        direct: bool,
    },
    /// Quadratic variation along c_n = p/3^n, r_n = r/3^n against C_p·t.
    Sweep {
        #[arg(long)]
        p: Option<String>,
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        n_min: Option<String>,
        #[arg(long)]
        n_max: Option<String>,
    },
    /// Down- and upcrossings of [z − c/2, z + c/2] on [0, t].
    Crossings {
        #[arg(long)]
        z: Option<String>,
        #[arg(long)]
        c: Option<String>,
        #[arg(long)]
        t: Option<String>,
    },
    /// Truncated variation TTV^c on [0, t].
    Ttv {
        #[arg(long)]
        c: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        rel_tol: Option<String>,
        #[arg(long)]
        max_depth: Option<String>,
    },
    /// Local-time profile at t = K/9^N.
    Localtime {
        #[arg(long)]
        t: Option<String>,
    },
    /// Occupation measure of [a, b] against the profile integral.
    Occupation {
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
    },
    /// Normalised crossing integrals against the local-time integral.
    Weaklimit {
        /// `poly:c0,c1,…`
        #[arg(long)]
        g: Option<String>,
        #[arg(long)]
        t: Option<String>,
        /// Strictly decreasing, comma separated.
        #[arg(long)]
        c_list: Option<String>,
    },
    /// Exact-identity suites on small parameters.
    Selftest,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Polygon { .. } => "polygon",
            Command::Qv { .. } => "qv",
            Command::Sweep { .. } => "sweep",
            Command::Crossings { .. } => "crossings",
            Command::Ttv { .. } => "ttv",
            Command::Localtime { .. } => "localtime",
            Command::Occupation { .. } => "occupation",
            Command::Weaklimit { .. } => "weaklimit",
            Command::Selftest => "selftest",
        }
    }

    /// Command-specific flags with their defaults.
    fn flags(&self) -> Vec<(&'static str, Option<String>, Option<&'static str>)> {
        let c = |v: &Option<String>| v.clone();
        match self {
            Command::Eval { t } => vec![("t", c(t), None)],
            Command::Polygon { m, kind } => vec![("m", c(m), None), ("kind", c(kind), Some("x"))],
            Command::Qv { c: cc, r, t, direct } => vec![
                ("c", c(cc), None),
                ("r", c(r), Some("0")),
                ("t", c(t), Some("1")),
                ("direct", direct.then(|| "true".into()), Some("false")),
            ],
            Command::Sweep { p, r, t, n_min, n_max } => vec![
                ("p", c(p), None),
                ("r", c(r), Some("0")),
                ("t", c(t), Some("1")),
                ("n-min", c(n_min), Some("1")),
                ("n-max", c(n_max), None),
            ],
            Command::Crossings { z, c: cc, t } => {
                vec![("z", c(z), None), ("c", c(cc), None), ("t", c(t), Some("1"))]
            }
            Command::Ttv { c: cc, t, rel_tol, max_depth } => vec![
                ("c", c(cc), None),
                ("t", c(t), Some("1")),
                ("rel-tol", c(rel_tol), Some("1e-3")),
                ("max-depth", c(max_depth), Some("14")),
            ],
            Command::Localtime { t } => vec![("t", c(t), None)],
            Command::Occupation { t, a, b } => vec![("t", c(t), None), ("a", c(a), None), ("b", c(b), None)],
            Command::Weaklimit { g, t, c_list } => {
                vec![("g", c(g), None), ("t", c(t), Some("1")), ("c-list", c(c_list), None)]
            }
            Command::Selftest => vec![],
        }
    }
}

fn exec_of(params: &Params) -> Result<Exec> {
    Ok(if params.flag("sequential")? { Exec::Sequential } else { Exec::Parallel })
}

fn time(params: &Params, key: &str) -> Result<TernaryTime> {
    Ok(TernaryTime::parse(params.get(key)?)?)
}

fn rational(params: &Params, key: &str) -> Result<Rational> {
    Ok(parse_rational(params.get(key)?)?)
}

fn real(params: &Params, key: &str) -> Result<ExactReal> {
    Ok(parse_exact_real(params.get(key)?)?)
}

fn number<T: std::str::FromStr>(params: &Params, key: &str) -> Result<T> {
    let s = params.get(key)?;
    s.parse().map_err(|_| anyhow!(peano_core::Error::Parse(s.into(), format!("expected a number for `{key}`"))))
}

fn run(cmd: &Command, params: &Params) -> Result<Table> {
    let exec = exec_of(params)?;
    let lifted = params.flag("unsafe-depth")?;
    let table = match cmd {
        Command::Eval { .. } => {
            let t = time(params, "t")?;
            let (x, y) = (x_eval(&t), y_eval(&t));
            println!("x={}", output::exact(&x));
            println!("y={}", output::exact(&y));
            Table::new(["t", "x", "y"]).with_row(vec![Cell::Exact(t.value()), Cell::Exact(x), Cell::Exact(y)])
        }
        Command::Polygon { .. } => {
            let m: u32 = number(params, "m")?;
            let kind = match params.get("kind")? {
                "x" => PolygonKind::XGraph,
                "xy" => PolygonKind::XyCurve,
                other => bail!(peano_core::Error::InvalidArgument(format!("kind must be `x` or `xy`, got `{other}`"))),
            };
            let poly = polygon(m, kind, if lifted { u32::MAX } else { POLYGON_CAP })?;
            let mut table = Table::new(poly.header());
            for i in 0..poly.len() {
                let (a, b) = poly.vertex(i);
                table.push(vec![Cell::Exact(a), Cell::Exact(b)]);
            }
            table
        }
        Command::Qv { .. } => {
            let (c, r, t) = (rational(params, "c")?, real(params, "r")?, time(params, "t")?);
            let grid = Grid::new(c.clone(), r.clone())?;
            let v = if params.flag("direct")? { qv_direct(&grid, &t, exec)? } else { qv(&grid, &t)? };
            Table::new(["c", "r", "t", "qv"]).with_row(vec![
                Cell::Exact(c),
                Cell::Real(r),
                Cell::Exact(t.value()),
                Cell::Exact(v),
            ])
        }
        Command::Sweep { .. } => {
            let family = GridFamily::new(rational(params, "p")?, real(params, "r")?)?;
            let t = time(params, "t")?;
            let (n_min, n_max): (i64, i64) = (number(params, "n-min")?, number(params, "n-max")?);
            let cap = if lifted { n_max.max(SWEEP_CAP) } else { SWEEP_CAP };
            let rows = convergence_sweep(&family, &t, n_min, n_max, cap, &SweepCache::new(), exec)?;
            let mut table = Table::new(["n", "c_n", "r_n", "qv", "limit", "rel_error"]);
            for row in rows {
                table.push(vec![
                    Cell::Int(row.n.into()),
                    Cell::Exact(row.c_n),
                    Cell::Real(row.r_n),
                    Cell::Exact(row.qv),
                    Cell::Exact(row.limit),
                    Cell::Float(row.rel_error),
                ]);
            }
            table
        }
        Command::Crossings { .. } => {
            let (z, c, t) = (real(params, "z")?, rational(params, "c")?, time(params, "t")?);
            let n = crossings(&z, &c, &t)?;
            Table::new(["z", "c", "down", "up"]).with_row(vec![
                Cell::Real(z),
                Cell::Exact(c),
                Cell::Int(n.down.into()),
                Cell::Int(n.up.into()),
            ])
        }
        Command::Ttv { .. } => {
            let (c, t) = (rational(params, "c")?, time(params, "t")?);
            let rel_tol: f64 = number(params, "rel-tol")?;
            let max_depth: u32 = number(params, "max-depth")?;
            let res = truncated_variation(&c, &t, rel_tol, max_depth)?;
            Table::new(["c", "depth", "ttv", "bracket_lo", "bracket_hi"]).with_row(vec![
                Cell::Exact(c),
                Cell::Int(res.depth.into()),
                Cell::Exact(res.value),
                Cell::Exact(res.bracket.0),
                Cell::Exact(res.bracket.1),
            ])
        }
        Command::Localtime { .. } => {
            let t = time(params, "t")?;
            let profile = local_time_profile(&t, if lifted { u32::MAX } else { PROFILE_DEPTH_CAP })?;
            let mut table = Table::new(["cell_lo", "cell_hi", "value"]);
            for i in 0..profile.len() {
                let (lo, hi) = profile.cell(i);
                table.push(vec![Cell::Exact(lo), Cell::Exact(hi), Cell::Exact(profile.value(i))]);
            }
            table
        }
        Command::Occupation { .. } => {
            let (t, a, b) = (time(params, "t")?, rational(params, "a")?, rational(params, "b")?);
            let rep = occupation_identity_check(&t, &a, &b)?;
            let residual = rep.residual();
            Table::new(["t", "a", "b", "occupation", "profile_integral", "residual"]).with_row(vec![
                Cell::Exact(t.value()),
                Cell::Exact(a),
                Cell::Exact(b),
                Cell::Exact(rep.occupation),
                Cell::Exact(rep.profile_integral),
                Cell::Exact(residual),
            ])
        }
        Command::Weaklimit { .. } => {
            let g = TestFunction::parse(params.get("g")?)?;
            let t = time(params, "t")?;
            let cs = params
                .get("c-list")?
                .split(',')
                .map(|s| parse_rational(s.trim()))
                .collect::<peano_core::Result<Vec<_>>>()?;
            let rows = weak_limit_check(&g, &t, &cs, exec)?;
            let mut table =
                Table::new(["c", "phi", "crossing_integral", "normalized", "limit", "abs_error", "rel_error"]);
            for row in rows {
                table.push(vec![
                    Cell::Exact(row.c),
                    Cell::Exact(row.phi),
                    Cell::Exact(row.crossing_integral),
                    Cell::Exact(row.normalized),
                    Cell::Exact(row.limit),
                    Cell::Float(row.abs_error),
                    Cell::Float(row.rel_error),
                ]);
            }
            table
        }
        Command::Selftest => selftest::run()?,
    };
    Ok(table)
}

fn execute(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let file = match &cli.config {
        Some(path) => config::read_file(path)?,
        None => BTreeMap::new(),
    };
    let mut flags = cli.command.flags();
    flags.push(("out", cli.out.clone(), None));
    flags.push(("decimals", cli.decimals.clone(), None));
    flags.push(("unsafe-depth", cli.unsafe_depth.then(|| "true".into()), Some("false")));
    flags.push(("sequential", cli.sequential.then(|| "true".into()), Some("false")));
    let params = Params::resolve(flags, file)?;

    let table = run(&cli.command, &params)?;
    let decimals = params.opt("decimals").map(|_| number::<u32>(&params, "decimals")).transpose()?;
    let csv = table.to_csv(decimals)?;

    let dest = output::destination(params.opt("out"), cli.command.name());
    match dest {
        Some(path) => {
            output::write_artifact(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
            let manifest = output::manifest(cli.command.name(), &params, &table, &path, start.elapsed());
            output::write_artifact(&output::manifest_path(&path), manifest.as_bytes())?;
        }
        None if matches!(cli.command, Command::Eval { .. }) => {}
        None => print!("{}", String::from_utf8(csv)?),
    }
    if let Command::Selftest = cli.command {
        if let Some(failed) = selftest::first_failure(&table) {
            bail!(selftest::Failed(failed));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, json) = output::error_json(&err);
            eprintln!("{json}");
            ExitCode::from(code)
        }
    }
}
