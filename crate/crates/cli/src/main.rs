//! `celltrail`: audit spreadsheet change logs, run the load benchmarks and
//! manage a leased version repository.
//!
//! Exit codes: 0 success, 1 domain error (bad input, locked, no privilege,
//! stale token, engine failure), 2 usage error.

mod audit_cmd;
mod bench_cmd;
mod config;
mod repo_cmd;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use chrono::{DateTime, Utc};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "celltrail",
    version,
    about = "Spreadsheet audit trails, load benchmarks and a leased version repository"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report a container's change log.
    Audit(audit_cmd::AuditArgs),
    /// Write the document as it stood after a given change.
    Reconstruct(audit_cmd::ReconstructArgs),
    /// Recalculate a container, storing the computed values.
    Recalc(audit_cmd::RecalcArgs),
    /// Write the sample gradebook container used in the documentation.
    Fixture(audit_cmd::FixtureArgs),
    /// Benchmark sheets, timing runs and model fits.
    #[command(subcommand)]
    Bench(bench_cmd::BenchCommand),
    /// The versioned file repository.
    #[command(subcommand)]
    Repo(repo_cmd::RepoCommand),
}

/// Misuse of the command line, reported with exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Usage(message.into()).into()
}

/// `--when` value, or the wall clock.
pub fn instant(when: Option<&str>) -> anyhow::Result<DateTime<Utc>> {
    match when {
        None => Ok(Utc::now()),
        Some(s) => celltrail::container::parse_timestamp(s)
            .ok_or_else(|| usage(format!("--when {s:?} is not an RFC 3339 timestamp"))),
    }
}

pub fn read_file(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Writes to `path`, or to stdout for `-`.
pub fn write_output(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if path == Path::new("-") {
        std::io::stdout().write_all(bytes)?;
        return Ok(());
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Audit(a) => audit_cmd::audit(a),
        Command::Reconstruct(a) => audit_cmd::reconstruct(a),
        Command::Recalc(a) => audit_cmd::recalc(a),
        Command::Fixture(a) => audit_cmd::fixture(a),
        Command::Bench(c) => bench_cmd::run(c),
        Command::Repo(c) => repo_cmd::run(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<Usage>() { 2 } else { 1 })
        }
    }
}
