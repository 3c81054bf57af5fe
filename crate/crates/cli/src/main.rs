//! `ncforms` batch front end.

mod config;
mod experiments;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use ncforms::{Error, Report};
use serde::Serialize;
use serde_json::{json, Value};

use config::{bail, ConfigError, ConfigFile, Experiment, Resolved};
use experiments::{Outcome, Table};

#[derive(Parser, Debug)]
#[command(name = "ncforms", version, about = "Deformed differential calculi: suites, derivations and simulations")]
struct Cli {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and tables.
    #[arg(long, global = true, default_value = "ncforms-out")]
    out: PathBuf,
    /// Seed for randomized suites; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Primary tolerance; overrides the config.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Randomized d^2 = 0, Leibniz and d1 = 0 suite.
    Axioms,
    /// Symbolic derivations on the semi-discrete and (a,b) calculi.
    Derive,
    /// Solve the 2D lattice field equation and build conserved currents.
    Tower,
    /// Integrate the Toda lattice and measure its invariants.
    Toda,
    /// Weyl-Heisenberg algebra checks.
    Heisenberg,
    /// Metric reproduction on rescaled lattices and the quantum plane.
    Metric,
    /// Every experiment, each into its own subdirectory.
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Status {
    Passed,
    Failed,
    ConfigError,
    NumericalAbort,
}

impl Status {
    fn code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
            Status::ConfigError => 2,
            Status::NumericalAbort => 3,
        }
    }
}

fn classify(err: &anyhow::Error) -> Status {
    if err.downcast_ref::<ConfigError>().is_some() {
        return Status::ConfigError;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::NewtonDiverged { .. }
            | Error::Overflow { .. }
            | Error::NonFinite(_)
            | Error::Singular { .. }
            | Error::NotClosed { .. }
            | Error::PeriodObstruction { .. }
            | Error::NoReciprocal
            | Error::NotReciprocal(_),
        ) => Status::NumericalAbort,
        _ => Status::ConfigError,
    }
}

#[derive(Serialize)]
struct Violation<'a> {
    report: &'a str,
    name: &'a str,
    property: &'a str,
    value: f64,
    tolerance: f64,
}

/// Deterministic report; wall-clock data lives in metadata.json.
#[derive(Serialize)]
struct RunReport<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a str,
    status: Status,
    passed: bool,
    config: Option<&'a Resolved>,
    violations: Vec<Violation<'a>>,
    error: Option<String>,
    reports: &'a [Report],
    data: &'a Value,
}

fn violations(reports: &[Report]) -> Vec<Violation<'_>> {
    reports
        .iter()
        .flat_map(|r| {
            r.failures().into_iter().map(move |c| Violation {
                report: &r.title,
                name: &c.name,
                property: &c.property,
                value: c.value,
                tolerance: c.tolerance,
            })
        })
        .collect()
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| bail(format!("cannot write {}: {e}", path.display())))
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
fn number(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn write_table(path: &Path, t: &Table) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| bail(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(&t.header)?;
    for row in &t.rows {
        w.write_record(row.iter().map(|&x| number(x)))?;
    }
    w.flush().with_context(|| format!("flushing {}", path.display()))?;
    Ok(())
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Run one experiment into `dir` and return its status.
fn run_one(file: &ConfigFile, cli: &Cli, e: Experiment, dir: &Path) -> Status {
    let started = unix_seconds();
    let clock = Instant::now();
    let resolved = file.resolve(e, cli.seed, cli.tolerance);
    let result = resolved.as_ref().map_err(|err| anyhow::anyhow!("{err:#}")).and_then(|r| {
        std::fs::create_dir_all(dir).map_err(|err| bail(format!("cannot create {}: {err}", dir.display())))?;
        experiments::run(file, r)
    });
    let (status, outcome, error) = match (&resolved, result) {
        (Err(err), _) => (Status::ConfigError, Outcome::default(), Some(format!("{err:#}"))),
        (Ok(_), Ok(o)) => (if o.passed() { Status::Passed } else { Status::Failed }, o, None),
        (Ok(_), Err(err)) => (classify(&err), Outcome::default(), Some(format!("{err:#}"))),
    };
    let report = RunReport {
        tool: "ncforms",
        version: env!("CARGO_PKG_VERSION"),
        experiment: e.name(),
        status,
        passed: status == Status::Passed,
        config: resolved.as_ref().ok(),
        violations: violations(&outcome.reports),
        error: error.clone(),
        reports: &outcome.reports,
        data: &outcome.data,
    };
    let write = || -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|err| bail(format!("cannot create {}: {err}", dir.display())))?;
        write_json(&dir.join("report.json"), &report)?;
        for (name, t) in &outcome.tables {
            write_table(&dir.join(name), t)?;
        }
        write_json(
            &dir.join("metadata.json"),
            &json!({
                "experiment": e.name(),
                "started_unix": started,
                "finished_unix": unix_seconds(),
                "elapsed_seconds": clock.elapsed().as_secs_f64(),
                "threads": ncforms::par::threads(),
                "parallel": ncforms::par::is_parallel(),
                "os": std::env::consts::OS,
                "arch": std::env::consts::ARCH,
            }),
        )
    };
    let status = match write() {
        Ok(()) => status,
        Err(err) => {
            eprintln!("{}: {err:#}", e.name());
            Status::ConfigError
        }
    };
    match &error {
        Some(msg) => eprintln!("{}: {:?}: {msg}", e.name(), status),
        None => {
            let checks: usize = outcome.reports.iter().map(|r| r.checks.len()).sum();
            println!("{}: {} ({checks} checks)", e.name(), if status == Status::Passed { "PASS" } else { "FAIL" });
            for v in &report.violations {
                println!("  violated {} / {}: {} (value {:e}, tolerance {:e})", v.report, v.name, v.property, v.value, v.tolerance);
            }
        }
    }
    status
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NCFORMS_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| bail(format!("NCFORMS_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(bail("NCFORMS_THREADS must be positive"));
        }
        ncforms::par::init_threads(n);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let setup = init_threads().and_then(|_| ConfigFile::load(cli.config.as_deref()));
    let file = match setup {
        Ok(f) => f,
        Err(err) => {
            eprintln!("{err:#}");
            return ExitCode::from(Status::ConfigError.code());
        }
    };
    let chosen = match cli.command {
        Command::Axioms => Some(Experiment::Axioms),
        Command::Derive => Some(Experiment::Derive),
        Command::Tower => Some(Experiment::Tower),
        Command::Toda => Some(Experiment::Toda),
        Command::Heisenberg => Some(Experiment::Heisenberg),
        Command::Metric => Some(Experiment::Metric),
        Command::All => None,
    };
    let status = match chosen {
        Some(e) => run_one(&file, &cli, e, &cli.out),
        None => {
            if file.calculus.is_some() {
                eprintln!("configuration error: `all` runs each experiment on its default calculus; remove \"calculus\"");
                return ExitCode::from(Status::ConfigError.code());
            }
            let statuses: Vec<(Experiment, Status)> =
                Experiment::ALL.iter().map(|&e| (e, run_one(&file, &cli, e, &cli.out.join(e.name())))).collect();
            let summary: serde_json::Map<String, Value> =
                statuses.iter().map(|(e, s)| (e.name().to_string(), json!(s))).collect();
            if let Err(err) = write_json(&cli.out.join("summary.json"), &summary) {
                eprintln!("{err:#}");
                return ExitCode::from(Status::ConfigError.code());
            }
            statuses.iter().map(|(_, s)| *s).max_by_key(|s| s.code()).unwrap_or(Status::Passed)
        }
    };
    ExitCode::from(status.code())
}
