// SPDX-License-Identifier: Apache-2.0

//! Scenario runner, fixtures, checks and exports.

pub mod checks;
pub mod fixture;
pub mod scenario;

use serde::Serialize;
use thiserror::Error;

pub use checks::{check_integrity, check_liveness, check_safety, check_skip_soundness, CheckResult};
pub use fixture::{Fixture, FixtureError};
pub use scenario::{ByzantineSpec, Checks, ConfigError, DelayKind, DelaySpec, ModeName, Scenario, ALL_MODES};

use crate::dag::{write_dot, write_jsonl, PartyId};
use crate::ordering::RuleVariant;
use crate::sim::{simulate, SimError, SimulationReport};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// A finished run and the checks its scenario asked for.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub report: SimulationReport,
    pub checks: Vec<CheckResult>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("outcome serializes")
    }
}

/// Runs the checks enabled in `checks`. Integrity is always checked.
pub fn evaluate(report: &SimulationReport, checks: &Checks) -> Vec<CheckResult> {
    let mut out = vec![check_integrity(report)];
    if checks.safety {
        out.push(check_safety(report));
    }
    if checks.skip_soundness {
        out.push(check_skip_soundness(report));
    }
    if checks.liveness {
        out.push(check_liveness(report));
    }
    out
}

pub fn run_scenario(scenario: &Scenario, variant: RuleVariant, record_trace: bool) -> Result<Outcome, RunError> {
    let mut config = scenario.to_sim_config()?;
    config.variant = variant;
    config.record_trace = record_trace;
    let report = simulate(config)?;
    let checks = evaluate(&report, &scenario.checks);
    Ok(Outcome { report, checks })
}

/// Replays a fixture. Liveness does not apply to hand-made schedules.
pub fn run_fixture(fixture: &Fixture, variant: RuleVariant) -> Result<Outcome, FixtureError> {
    let report = fixture.run(variant)?;
    let checks = evaluate(&report, &Checks::default());
    Ok(Outcome { report, checks })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Jsonl,
    Log,
}

#[derive(Debug, Error)]
#[error("party {party} is not in the report (n={n})")]
pub struct UnknownParty {
    pub party: u32,
    pub n: usize,
}

/// One party's final DAG or commit log, rendered in `format`.
pub fn export(report: &SimulationReport, format: ExportFormat, party: PartyId) -> Result<String, UnknownParty> {
    let unknown = UnknownParty { party: party.0, n: report.n };
    let (Some(view), Some(p)) = (report.views.get(party.index()), report.parties.get(party.index())) else {
        return Err(unknown);
    };
    Ok(match format {
        ExportFormat::Dot => write_dot(view, &p.anchor_marks()),
        ExportFormat::Jsonl => write_jsonl(view),
        ExportFormat::Log => p.log_text(),
    })
}
