//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, parse or configuration error, 2 infinite
//! price, 3 a verified invariant failed.

mod config;
mod verify;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::duality::DualityError;
use crate::envelope::{concave_envelope, envelope_from_table, hedge_from_envelope, ConcaveEnvelope, EnvelopeError};
use crate::exec::with_threads;
use crate::models::{simulate, ModelError, ModelSpec};
use crate::payoff::{parse_payoff_bounded_below, PayoffError, ShiftedPayoff};

pub use config::{AttainmentConfig, ModelChoice, Overrides, ProbeConfig, ProximityConfig, RunConfig, StoppingConfig};
pub use verify::{run_verify, Check, VerifyOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFINITE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("payoff: {0}")]
    Payoff(#[from] PayoffError),
    #[error("envelope: {0}")]
    Envelope(EnvelopeError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("experiment: {0}")]
    Duality(DualityError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<EnvelopeError> for CliError {
    fn from(e: EnvelopeError) -> Self {
        CliError::Envelope(e)
    }
}

impl From<DualityError> for CliError {
    fn from(e: DualityError) -> Self {
        match e {
            DualityError::Envelope(inner) => CliError::Envelope(inner),
            DualityError::Model(inner) => CliError::Model(inner),
            other => CliError::Duality(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Envelope(EnvelopeError::Infinite { .. }) => EXIT_INFINITE,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "superhedge",
    version,
    about = "Buy-and-hold super-replication prices and their Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price and hedge ratio of a claim.
    Price(CommonArgs),
    /// Concave envelope of a claim as CSV.
    Envelope(CommonArgs),
    /// Dump simulated paths as CSV.
    Simulate(CommonArgs),
    /// Run verification experiments.
    Verify {
        #[arg(value_enum)]
        which: Which,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Domination,
    Upper,
    Attainment,
    Probe,
    Proximity,
    Stopping,
    All,
}

#[derive(Args, Debug, Clone, Default)]
struct CommonArgs {
    /// Payoff expression in x, e.g. "pos(x-100)".
    #[arg(long)]
    payoff: Option<String>,
    /// Tabulated payoff: CSV of x,g rows (price and envelope only).
    #[arg(long, conflicts_with = "payoff")]
    table: Option<PathBuf>,
    /// Declared slope of a tabulated payoff beyond its last sample; `inf` for superlinear growth.
    #[arg(long, requires = "table", allow_negative_numbers = true)]
    tail_slope: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    s0: Option<f64>,
    /// `all`, a model name, or `name:key=value,...`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV reports and the resolved config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker cap (0 = all cores); results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// INI config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replace the computed hedge ratio (for exercising the checks).
    #[arg(long, allow_negative_numbers = true)]
    delta_override: Option<f64>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        RunConfig::resolve(
            self.config.as_deref(),
            Overrides {
                payoff: self.payoff.clone(),
                s0: self.s0,
                model: self.model.clone(),
                paths: self.paths,
                steps: self.steps,
                horizon: self.horizon,
                seed: self.seed,
                threads: self.threads,
                out: self.out.clone(),
                delta_override: self.delta_override,
            },
        )
    }
}

/// Parses `args` (program name first) and runs, printing to stdout/stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_output(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with_output<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Price(args) => cmd_price(&args, out, err),
        Command::Envelope(args) => cmd_envelope(&args, out, err),
        Command::Simulate(args) => {
            let cfg = args.resolve()?;
            cmd_simulate(&cfg, out)
        }
        Command::Verify { which, common } => {
            if common.table.is_some() {
                return Err(CliError::Usage(
                    "verify needs a --payoff expression, not a table".into(),
                ));
            }
            let cfg = common.resolve()?;
            let threads = cfg.threads;
            let outcome = with_threads(threads, || run_verify(&cfg, which))?;
            for note in &outcome.notes {
                writeln!(err, "note: {note}")?;
            }
            for check in &outcome.checks {
                writeln!(out, "{check}")?;
            }
            let failed = outcome.checks.iter().filter(|c| !c.passed && c.hard).count();
            writeln!(out, "{} checks, {failed} failed", outcome.checks.len())?;
            if let Some(dir) = &cfg.out {
                write_outputs(dir, &cfg, &outcome.files)?;
            }
            Ok(if failed > 0 { EXIT_INVARIANT } else { EXIT_OK })
        }
    }
}

/// Loads the claim (expression or table) and its envelope. Payoffs that
/// dip below zero are shifted by cash, which is reported on `err`.
fn load_envelope(args: &CommonArgs, cfg: &RunConfig, err: &mut dyn Write) -> Result<(ConcaveEnvelope, f64), CliError> {
    if let Some(path) = &args.table {
        let text = fs::read_to_string(path)?;
        let samples = parse_table(&text)?;
        let tail = args
            .tail_slope
            .ok_or_else(|| CliError::Usage("a tabulated payoff needs --tail-slope".into()))?;
        return Ok((envelope_from_table(&samples, tail)?, 0.0));
    }
    let text = cfg
        .payoff
        .as_deref()
        .ok_or_else(|| CliError::Usage("missing --payoff".into()))?;
    let ShiftedPayoff { ast, cash_shift } = load_payoff(text, err)?;
    Ok((concave_envelope(&ast.to_piecewise())?, cash_shift))
}

pub(crate) fn load_payoff(text: &str, err: &mut dyn Write) -> Result<ShiftedPayoff, CliError> {
    let shifted = parse_payoff_bounded_below(text)?;
    for w in shifted.ast.warnings() {
        writeln!(err, "note: {w}")?;
    }
    if shifted.cash_shift > 0.0 {
        writeln!(
            err,
            "note: payoff dips below zero; pricing g + {} and subtracting the cash afterwards",
            shifted.cash_shift
        )?;
    }
    Ok(shifted)
}

fn parse_table(text: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(CliError::Usage(format!("table line {}: expected x,g", i + 1)));
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(x), Ok(g)) => rows.push((x, g)),
            // a header row is allowed on the first line
            _ if rows.is_empty() && i == 0 => {}
            _ => return Err(CliError::Usage(format!("table line {}: not numeric", i + 1))),
        }
    }
    Ok(rows)
}

fn cmd_price(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = args.resolve()?;
    let (env, cash) = load_envelope(args, &cfg, err)?;
    let hedge = hedge_from_envelope(&env, cfg.s0)?;
    writeln!(out, "price={} delta={}", hedge.price - cash, hedge.delta)?;
    write!(out, "{}", env.to_csv())?;
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &cfg, &[("envelope.csv".into(), env.to_csv())])?;
    }
    Ok(EXIT_OK)
}

fn cmd_envelope(args: &CommonArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    let cfg = args.resolve()?;
    let (env, _) = load_envelope(args, &cfg, err)?;
    write!(out, "{}", env.to_csv())?;
    if let Some(dir) = &cfg.out {
        write_outputs(dir, &cfg, &[("envelope.csv".into(), env.to_csv())])?;
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let ModelChoice::One(kind) = cfg.model else {
        return Err(CliError::Usage("simulate needs a single --model".into()));
    };
    let spec = ModelSpec::new(kind, cfg.s0, cfg.horizon, cfg.n_steps);
    let batch = with_threads(cfg.threads, || simulate(&spec, cfg.n_paths, cfg.seed))?;
    let csv = batch.to_csv();
    match &cfg.out {
        Some(dir) => write_outputs(dir, cfg, &[("paths.csv".into(), csv)])?,
        None => write!(out, "{csv}")?,
    }
    Ok(EXIT_OK)
}

/// Writes `files` and the resolved config into `dir`.
fn write_outputs(dir: &Path, cfg: &RunConfig, files: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.ini"), cfg.to_ini())?;
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with_output(
            std::iter::once("superhedge").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn price_examples() {
        let (code, out, _) = call(&["price", "--payoff", "pos(x-100)", "--s0", "100"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("price=100 delta=1\n"), "{out}");
        let (code, out, _) = call(&["price", "--payoff", "5", "--s0", "7"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("price=5 delta=0\n"));
        let (code, _, err) = call(&["price", "--payoff", "x*x", "--s0", "1"]);
        assert_eq!(code, 1);
        assert!(err.contains("position 2"), "{err}");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(call(&["price"]).0, 1);
        assert_eq!(call(&["frobnicate"]).0, 1);
        assert_eq!(call(&["price", "--payoff", "x", "--s0", "-3"]).0, 1);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn shifted_payoff_prices_original() {
        let (code, out, err) = call(&["price", "--payoff", "x - 5", "--s0", "10"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("price=5 delta=1\n"), "{out}");
        assert!(err.contains("below zero"));
    }

    #[test]
    fn superlinear_table_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        fs::write(&path, "x,g\n0,0\n1,1\n2,4\n").unwrap();
        let p = path.to_str().unwrap();
        let (code, _, err) = call(&["price", "--table", p, "--tail-slope", "inf", "--s0", "1"]);
        assert_eq!(code, 2, "{err}");
        let (code, out, _) = call(&["price", "--table", p, "--tail-slope", "5", "--s0", "1"]);
        assert_eq!(code, 0);
        assert!(out.starts_with("price=5 delta=5\n"), "{out}");
    }

    #[test]
    fn simulate_needs_one_model() {
        assert_eq!(call(&["simulate", "--paths", "2", "--steps", "2"]).0, 1);
        let (code, out, _) = call(&[
            "simulate", "--model", "gbm", "--paths", "2", "--steps", "3", "--seed", "5",
        ]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), 2 + 2 * 4);
        assert!(out.starts_with("# seed=5 model=gbm"));
    }
}
