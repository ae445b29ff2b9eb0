//! Command-line driver. `run` takes the argument list and output sinks so
//! integration tests can drive it without spawning a process.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde_json::{json, Value};

use crate::bounds::{BoundCurve, BoundMode, EXACT_MAX_N};
use crate::error::Error;
use crate::fq_arith::{build_field, prime_power, FieldSpec};
use crate::gl_combinat::{rat_to_string, BigRat};
use crate::par::{self, Exec};
use crate::spectral::{spectrum, spectrum_json};
use crate::verify::{self, csv_field, Suite, VerifyConfig};
use crate::walk::{
    form_count, form_walk_distribution, group_walk_distribution, lumped_tv_estimate,
    poly_from_roots, ChainModel, DEFAULT_STATE_CAP,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_CAP: i32 = 3;

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Largest n enumerated by default.
pub const DEFAULT_MAX_N: usize = 14;

pub const DEFAULT_VERIFY_MAX_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExecArg {
    Parallel,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WalkKind {
    /// Move the form by a uniform non-preserving transvection.
    Form,
    /// Multiply on the right by a uniform element of the transvection double coset.
    Group,
}

#[derive(Debug, Parser)]
#[command(
    name = "symwalk",
    version,
    about = "Exact and simulated analysis of the transvection walk on symplectic forms"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Half the dimension: forms live on F_q^{2n}.
    #[arg(long, global = true, default_value_t = 2)]
    pub n: usize,
    /// Field size, a prime power.
    #[arg(long, global = true, conflicts_with_all = ["p", "k"])]
    pub q: Option<u64>,
    /// Field characteristic (with --k).
    #[arg(long, global = true)]
    pub p: Option<u64>,
    /// Extension degree (with --p).
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = ExecArg::Parallel)]
    pub exec: ExecArg,
    /// Refuse to enumerate types above this n (default 14); for `verify`,
    /// the largest n the suites sweep (default 4).
    #[arg(long, global = true)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues with multiplicities.
    Spectrum,
    /// Upper and lower total variation bounds over a range of steps.
    Bounds(BoundsArgs),
    /// Exact chain on all forms: lumped matrix and TV curve.
    Chain(ChainArgs),
    /// Monte Carlo TV estimates.
    Simulate(SimulateArgs),
    /// Run the property suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Steps as A..B (inclusive).
    #[arg(long, default_value = "1..12")]
    pub k_range: String,
    #[arg(long, conflicts_with = "logfloat")]
    pub exact: bool,
    #[arg(long)]
    pub logfloat: bool,
    /// Also build the exact chain and fill the tv_exact column.
    #[arg(long)]
    pub with_exact: bool,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 10)]
    pub kmax: usize,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub steps: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, value_enum, default_value_t = WalkKind::Form)]
    pub walk: WalkKind,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run only this suite (repeatable).
    #[arg(long)]
    pub suite: Vec<String>,
    #[arg(long, default_value_t = 2000)]
    pub samples: u64,
    /// Perturb a_mu so class sizes stop being integers (negative test).
    #[arg(long)]
    pub inject_fault: bool,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::StateSpaceTooLarge { .. }
            | Error::EnumerationTooLarge(_)
            | Error::FieldTooLarge { .. } => EXIT_CAP,
            Error::NonIntegerResult(_)
            | Error::OddMultiplicity(_)
            | Error::InternalError(_)
            | Error::NotSingleBox
            | Error::WeightMismatch { .. } => EXIT_VERIFY,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: msg.into(),
    }
}

type CmdResult = std::result::Result<(String, i32), Failure>;

impl Global {
    fn field(&self) -> std::result::Result<FieldSpec, Failure> {
        let (p, k) = match (self.q, self.p, self.k) {
            (Some(q), None, None) => {
                let (p, k) =
                    prime_power(q).ok_or_else(|| usage(format!("q = {q} is not a prime power")))?;
                (p as u64, k)
            }
            (None, Some(p), k) => (p, k.unwrap_or(1)),
            (None, None, None) => (2, 1),
            _ => return Err(usage("give either --q or --p/--k")),
        };
        Ok(build_field(p, k)?)
    }

    fn exec(&self) -> Exec {
        match self.exec {
            ExecArg::Parallel => Exec::Parallel,
            ExecArg::Sequential => Exec::Sequential,
        }
    }

    fn check_n(&self, min: usize) -> std::result::Result<(), Failure> {
        if self.n < min {
            return Err(usage(format!("--n must be at least {min}")));
        }
        let cap = self.max_n.unwrap_or(DEFAULT_MAX_N);
        if self.n > cap {
            return Err(Failure {
                code: EXIT_CAP,
                message: format!(
                    "n = {} exceeds the enumeration cap {cap} (raise --max-n)",
                    self.n
                ),
            });
        }
        Ok(())
    }
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), Failure> {
    let bad = || usage(format!("bad range {s:?}, expected A..B"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .map_err(|_| bad())?;
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn cmd_spectrum(g: &Global) -> CmdResult {
    g.check_n(1)?;
    let field = g.field()?;
    let q = field.q() as u64;
    let lines = spectrum(g.n, q, g.exec())?;
    let out = match g.format {
        Format::Json => pretty(&spectrum_json(g.n, q, &lines)),
        Format::Csv => {
            let mut s = String::from("lambda,phi,multiplicity,type_count\n");
            for l in &lines {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    csv_field(&l.lambda_type.to_json().to_string()),
                    rat_to_string(&l.phi),
                    l.multiplicity,
                    l.type_count
                ));
            }
            s
        }
    };
    Ok((out, EXIT_OK))
}

fn cmd_bounds(g: &Global, a: &BoundsArgs) -> CmdResult {
    g.check_n(2)?;
    let field = g.field()?;
    let q = field.q() as u64;
    let (lo, hi) = parse_range(&a.k_range)?;
    let mode = match (a.exact, a.logfloat) {
        (true, _) => BoundMode::Exact,
        (_, true) => BoundMode::LogFloat,
        _ => BoundMode::Auto,
    };
    let mut curve = BoundCurve::build(g.n, q, lo..=hi, mode, g.exec())?;
    if a.with_exact {
        let chain = ChainModel::build(g.n, &field, a.state_cap, g.exec())?;
        let tv: Vec<(usize, BigRat)> = chain
            .tv_curve(hi, g.exec())
            .into_iter()
            .map(|p| (p.k, p.full))
            .collect();
        curve = curve.with_exact(&tv);
    }
    let out = match g.format {
        Format::Csv => curve.to_csv(),
        Format::Json => pretty(&json!({
            "n": g.n,
            "q": q,
            "exact_max_n": EXACT_MAX_N,
            "points": curve.points.iter().map(|p| json!({
                "k": p.k,
                "tv_exact": p.tv_exact.as_ref().map(rat_to_string),
                "tv_upper": p.tv_upper.as_ref().map(|u| u.clamped()),
                "tv_upper_raw": p.tv_upper.as_ref().map(|u| u.raw()),
                "tv_lower": p.tv_lower.as_ref().map(rat_to_string),
                "mode": p.tv_upper.as_ref().map(|u| u.mode()),
            })).collect::<Vec<_>>(),
        })),
    };
    Ok((out, EXIT_OK))
}

fn cmd_chain(g: &Global, a: &ChainArgs) -> CmdResult {
    g.check_n(2)?;
    let field = g.field()?;
    let q = field.q() as u64;
    let states = form_count(g.n, q);
    if states > a.state_cap.into() {
        return Err(Error::StateSpaceTooLarge {
            states: states.to_u128().unwrap_or(u128::MAX),
            cap: a.state_cap,
        }
        .into());
    }
    let chain = ChainModel::build(g.n, &field, a.state_cap, g.exec())?;
    let tv = chain.tv_curve(a.kmax, g.exec());
    let out = match g.format {
        Format::Csv => {
            let mut s = String::from("k,tv,stderr\n");
            for p in &tv {
                s.push_str(&format!("{},{},\n", p.k, rat_to_string(&p.full)));
            }
            s
        }
        Format::Json => {
            let lines = spectrum(g.n, q, g.exec())?;
            let roots: Vec<(BigRat, usize)> = lines
                .iter()
                .map(|l| (l.phi.clone(), l.type_count.to_usize().unwrap_or(0)))
                .collect();
            let mut v = chain.lumped_json();
            v["eigenvalues"] = lines
                .iter()
                .map(|l| json!({"phi": rat_to_string(&l.phi), "count": l.type_count.to_string()}))
                .collect();
            v["charpoly_matches_spectrum"] =
                json!(chain.lumped_charpoly() == poly_from_roots(&roots));
            v["lumpable"] = json!(true);
            v["stationary_matches_formula"] = json!(chain.stationary_matches_formula()?);
            v["tv"] = tv
                .iter()
                .map(|p| json!({"k": p.k, "tv": rat_to_string(&p.full), "tv_lumped": rat_to_string(&p.lumped)}))
                .collect();
            pretty(&v)
        }
    };
    Ok((out, EXIT_OK))
}

fn cmd_simulate(g: &Global, a: &SimulateArgs) -> CmdResult {
    g.check_n(2)?;
    if a.trials == 0 {
        return Err(usage("--trials must be positive"));
    }
    let field = g.field()?;
    let q = field.q() as u64;
    let mut rows = Vec::new();
    for k in 0..=a.steps {
        // an independent stream per k keeps rows reproducible on their own
        let seed = g.seed.wrapping_add(k as u64);
        let counts = match a.walk {
            WalkKind::Form => form_walk_distribution(g.n, &field, k, a.trials, seed, g.exec())?,
            WalkKind::Group => group_walk_distribution(g.n, &field, k, a.trials, seed, g.exec())?,
        };
        let (est, se, cells, _) = lumped_tv_estimate(&counts, g.n, q, a.trials)?;
        rows.push((k, est, se, cells));
    }
    let out = match g.format {
        Format::Csv => {
            let mut s = String::from("k,tv,stderr\n");
            for (k, est, se, _) in &rows {
                s.push_str(&format!("{k},{est:.10},{se:.10}\n"));
            }
            s
        }
        Format::Json => pretty(&json!({
            "n": g.n,
            "q": q,
            "trials": a.trials,
            "seed": g.seed,
            "walk": format!("{:?}", a.walk).to_lowercase(),
            "rows": rows.iter().map(|(k, est, se, cells)| json!({
                "k": k,
                "tv": est,
                "stderr": se,
                "cells": cells.iter().map(|(l, c, pi)| json!({
                    "label": l.to_json(),
                    "count": c,
                    "stationary": rat_to_string(pi),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })),
    };
    Ok((out, EXIT_OK))
}

fn cmd_verify(g: &Global, a: &VerifyArgs) -> CmdResult {
    let suites = if a.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suite
            .iter()
            .map(|s| s.parse::<Suite>())
            .collect::<Result<Vec<_>, _>>()?
    };
    let cfg = VerifyConfig {
        suites,
        max_n: g.max_n.unwrap_or(DEFAULT_VERIFY_MAX_N),
        inject_fault: a.inject_fault,
        samples: a.samples,
        seed: g.seed,
        exec: g.exec(),
    };
    let checks = verify::run(&cfg);
    let code = if checks.iter().all(|c| c.ok) {
        EXIT_OK
    } else {
        EXIT_VERIFY
    };
    let out = match g.format {
        Format::Json => pretty(&verify::checks_json(&checks)),
        Format::Csv => verify::checks_csv(&checks),
    };
    Ok((out, code))
}

fn dispatch(cli: &Cli) -> CmdResult {
    let g = &cli.global;
    match &cli.command {
        Command::Spectrum => cmd_spectrum(g),
        Command::Bounds(a) => cmd_bounds(g, a),
        Command::Chain(a) => cmd_chain(g, a),
        Command::Simulate(a) => cmd_simulate(g, a),
        Command::Verify(a) => cmd_verify(g, a),
    }
}

/// Parses `args` (including the program name), runs the command, writes the
/// report to `out` (or --out) and diagnostics to `err`; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = par::with_threads(cli.global.threads, || dispatch(&cli));
    match result {
        Ok((report, code)) => {
            let written = match &cli.global.out {
                Some(path) => std::fs::write(path, &report).map_err(|e| e.to_string()),
                None => out.write_all(report.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: cannot write report: {e}");
                return EXIT_USAGE;
            }
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
