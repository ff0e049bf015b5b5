// SPDX-License-Identifier: Apache-2.0

//! Command-line driver for the simulator.
//!
//! Exit status: 0 when every enabled check passes, 1 when a check fails,
//! 2 on a configuration or usage error.

use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use bullshark::harness::{self, fixture, ExportFormat, Outcome, Scenario};
use bullshark::{PartyId, RuleVariant};

#[derive(Parser)]
#[command(name = "bullshark-sim", version, about = "Deterministic DAG consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Standard,
    NoWalkBack,
    WeakThreshold,
}

impl From<Variant> for RuleVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Standard => RuleVariant::Standard,
            Variant::NoWalkBack => RuleVariant::NoWalkBack,
            Variant::WeakThreshold => RuleVariant::WeakThreshold,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Jsonl,
    Log,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Dot => ExportFormat::Dot,
            Format::Jsonl => ExportFormat::Jsonl,
            Format::Log => ExportFormat::Log,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write the report.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "standard")]
        variant: Variant,
        /// Report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a range of seeds and summarize.
    Sweep {
        /// Inclusive range `a..b` (also written `a..=b`).
        #[arg(long, value_parser = parse_range)]
        seeds: RangeInclusive<u64>,
        /// Base scenario; its seed is replaced by each seed in the range.
        #[arg(long, conflicts_with = "n")]
        scenario: Option<PathBuf>,
        /// Random adversarial scenarios with this committee size.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 30)]
        rounds: u64,
        #[arg(long, value_enum, default_value = "standard")]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a bundled fixture.
    Fixture {
        #[arg(value_parser = fixture_name)]
        name: String,
        #[arg(long, value_enum, default_value = "standard")]
        variant: Variant,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export one party's final DAG or commit log.
    Export {
        #[arg(long, required_unless_present = "fixture", conflicts_with = "fixture")]
        scenario: Option<PathBuf>,
        #[arg(long, value_parser = fixture_name)]
        fixture: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long, default_value_t = 0)]
        party: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u64 = a.parse().map_err(|e| format!("{a}: {e}"))?;
    let b: u64 = b.parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..=b)
}

fn fixture_name(s: &str) -> Result<String, String> {
    if fixture::bundled_names().any(|n| n == s) {
        Ok(s.to_string())
    } else {
        Err(format!("unknown fixture; available: {}", fixture::bundled_names().collect::<Vec<_>>().join(", ")))
    }
}

enum Failure {
    Checks,
    Config(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.to_string())
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::Config(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Config(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn summarize(outcome: &Outcome) {
    for c in &outcome.checks {
        eprintln!("{:<15} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut scenario = Scenario::load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    Ok(scenario)
}

#[derive(Serialize)]
struct SweepRow {
    seed: u64,
    passed: bool,
    failed: Vec<String>,
    trace_hash: String,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { scenario, seed, variant, out, trace } => {
            let scenario = load(&scenario, seed)?;
            let outcome = harness::run_scenario(&scenario, variant.into(), trace.is_some())?;
            summarize(&outcome);
            if let Some(path) = trace {
                let mut text = outcome.report.trace.join("\n");
                text.push('\n');
                emit(Some(&path), &text)?;
            }
            emit(out.as_deref(), &outcome.to_json())?;
            if outcome.passed() { Ok(()) } else { Err(Failure::Checks) }
        }
        Command::Sweep { seeds, scenario, n, rounds, variant, out } => {
            let base = match (scenario, n) {
                (Some(path), _) => Some(load(&path, None)?),
                (None, Some(n)) if n >= 1 => None,
                (None, Some(_)) => return Err(Failure::Config("--n must be positive".into())),
                (None, None) => return Err(Failure::Config("one of --scenario or --n is required".into())),
            };
            let variant = RuleVariant::from(variant);
            let rows: Vec<Result<SweepRow, String>> = seeds
                .into_par_iter()
                .map(|seed| {
                    let scenario = match &base {
                        Some(b) => Scenario { seed, ..b.clone() },
                        None => Scenario::random(n.unwrap_or(4), rounds, seed),
                    };
                    let outcome = harness::run_scenario(&scenario, variant, false).map_err(|e| format!("seed {seed}: {e}"))?;
                    Ok(SweepRow {
                        seed,
                        passed: outcome.passed(),
                        failed: outcome.checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect(),
                        trace_hash: outcome.report.trace_hash,
                    })
                })
                .collect();
            let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>().map_err(Failure::Config)?;
            let failures = rows.iter().filter(|r| !r.passed).count();
            eprintln!("{} seeds, {failures} failing", rows.len());
            for r in rows.iter().filter(|r| !r.passed) {
                eprintln!("seed {}: {}", r.seed, r.failed.join("; "));
            }
            let text = rows.iter().map(|r| serde_json::to_string(r).expect("row serializes")).collect::<Vec<_>>().join("\n");
            emit(out.as_deref(), &text)?;
            if failures == 0 { Ok(()) } else { Err(Failure::Checks) }
        }
        Command::Fixture { name, variant, out } => {
            let fixture = fixture::bundled(&name).expect("validated by clap");
            let outcome = harness::run_fixture(&fixture, variant.into())?;
            summarize(&outcome);
            emit(out.as_deref(), &outcome.to_json())?;
            if outcome.passed() { Ok(()) } else { Err(Failure::Checks) }
        }
        Command::Export { scenario, fixture: name, seed, format, party, out } => {
            let report = match (scenario, name) {
                (Some(path), _) => harness::run_scenario(&load(&path, seed)?, RuleVariant::Standard, false)?.report,
                (None, Some(name)) => fixture::bundled(&name).expect("validated by clap").run(RuleVariant::Standard)?,
                (None, None) => unreachable!("clap requires one source"),
            };
            let text = harness::export(&report, format.into(), PartyId(party))?;
            emit(out.as_deref(), text.trim_end())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
