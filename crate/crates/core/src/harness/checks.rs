// SPDX-License-Identifier: Apache-2.0

//! Safety, skip-soundness and liveness checks over a finished run.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::dag::{PartyId, Round, VertexId};
use crate::sim::{divergence, SimulationReport, Stamp, Violation};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn pass(name: &str, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed: true, detail: detail.into() }
    }

    fn fail(name: &str, detail: impl Into<String>) -> Self {
        CheckResult { name: name.into(), passed: false, detail: detail.into() }
    }
}

/// Pairwise prefix check over final logs.
pub fn check_logs_prefix(logs: &[(PartyId, Vec<VertexId>)]) -> CheckResult {
    for (i, (a, la)) in logs.iter().enumerate() {
        for (b, lb) in &logs[i + 1..] {
            if let Some(index) = divergence(la, lb) {
                return CheckResult::fail(
                    "safety",
                    format!("logs of {a} and {b} diverge at index {index}"),
                );
            }
        }
    }
    CheckResult::pass("safety", format!("{} logs pairwise prefix-related", logs.len()))
}

/// Prefix agreement between honest parties, as monitored after every event
/// and re-checked on the final logs.
pub fn check_safety(report: &SimulationReport) -> CheckResult {
    let first = report.violations.iter().find_map(|v| match v {
        Violation::Safety { at, index, party, found, reference_party, expected } => {
            Some((*at, *index, *party, *found, *reference_party, *expected))
        }
        _ => None,
    });
    if let Some((at, index, party, found, reference_party, expected)) = first {
        return CheckResult::fail(
            "safety",
            format!(
                "first divergence at event {at}: {party} logged {} at index {index} where {reference_party} logged {}",
                found.short(),
                expected.short()
            ),
        );
    }
    let logs: Vec<_> = report.honest().map(|p| (p.party, p.log_ids())).collect();
    let final_check = check_logs_prefix(&logs);
    if !final_check.passed {
        return final_check;
    }
    let longest = logs.iter().map(|(_, l)| l.len()).max().unwrap_or(0);
    CheckResult::pass(
        "safety",
        format!("{} honest logs prefix-related at every event; longest has {longest} entries", logs.len()),
    )
}

/// No anchor skipped by an honest party was committed by any honest party.
pub fn check_skip_soundness(report: &SimulationReport) -> CheckResult {
    let mut committed: BTreeMap<Round, (PartyId, Stamp, usize)> = BTreeMap::new();
    for p in report.honest() {
        for c in &p.commits {
            let entry = committed.entry(c.item.anchor_round).or_insert((p.party, c.at, c.item.votes));
            if c.at < entry.1 {
                *entry = (p.party, c.at, c.item.votes);
            }
        }
    }
    let mut earliest: Option<(Stamp, String)> = None;
    let mut skips = 0;
    for p in report.honest() {
        for s in &p.skips {
            skips += 1;
            let Some(&(by, commit_at, votes)) = committed.get(&s.item.round) else {
                continue;
            };
            let at = commit_at.max(s.at);
            if earliest.as_ref().is_none_or(|(t, _)| at < *t) {
                let detail = format!(
                    "anchor of round {} skipped by {} at {} but committed by {by} with {votes} votes at {commit_at}; violation visible at event {at}",
                    s.item.round, p.party, s.at
                );
                earliest = Some((at, detail));
            }
        }
    }
    match earliest {
        Some((_, detail)) => CheckResult::fail("skip_soundness", detail),
        None => CheckResult::pass(
            "skip_soundness",
            format!("{skips} skips, none of a committed anchor ({} anchor rounds committed)", committed.len()),
        ),
    }
}

/// No insert or engine errors occurred during the run.
pub fn check_integrity(report: &SimulationReport) -> CheckResult {
    let bad = report.violations.iter().find(|v| !matches!(v, Violation::Safety { .. }));
    match bad {
        Some(Violation::Insert { at, party, error }) => {
            CheckResult::fail("integrity", format!("{party} rejected a delivery at event {at}: {error}"))
        }
        Some(Violation::Engine { at, party, error }) => {
            CheckResult::fail("integrity", format!("{party} engine error at event {at}: {error}"))
        }
        _ if !report.quiescent => CheckResult::fail("integrity", "run stopped before quiescence"),
        _ => CheckResult::pass("integrity", "no rejected deliveries or engine errors"),
    }
}

/// Anchor rounds the responsiveness guarantee covers: honest leader, the
/// round before it entered only after GST, and two later rounds to vote and
/// trigger the commit.
pub fn live_anchor_rounds(report: &SimulationReport) -> Vec<Round> {
    let committee = report.committee();
    let mut first_entry: BTreeMap<Round, crate::time::SimTime> = BTreeMap::new();
    for p in report.honest() {
        for b in &p.broadcasts {
            let t = first_entry.entry(b.round).or_insert(b.at);
            *t = (*t).min(b.at);
        }
    }
    (1..=report.rounds.0 / 2)
        .map(|k| Round(2 * k))
        .filter(|&r| r.0 + 2 <= report.rounds.0)
        .filter(|&r| committee.leader(r).is_some_and(|l| report.is_honest(l)))
        .filter(|&r| {
            let prev = Round(r.0 - 1);
            prev == Round::GENESIS || first_entry.get(&prev).is_some_and(|t| *t >= report.gst)
        })
        .collect()
}

/// Every covered anchor reaches every honest party's log exactly two rounds
/// after its own round, and no honest even-round timer fires for it.
pub fn check_liveness(report: &SimulationReport) -> CheckResult {
    let live = live_anchor_rounds(report);
    if live.is_empty() {
        return CheckResult::fail(
            "liveness",
            "no anchor round with an honest leader starts after GST and leaves two rounds to commit",
        );
    }
    for p in report.honest() {
        for &r in &live {
            match p.latencies.iter().find(|l| l.anchor_round == r) {
                None => {
                    return CheckResult::fail("liveness", format!("{} never ordered the anchor of round {r}", p.party))
                }
                Some(l) if l.rounds > 2 => {
                    return CheckResult::fail(
                        "liveness",
                        format!(
                            "{} ordered the anchor of round {r} at round {} ({} rounds), event {}",
                            p.party, l.trigger_round, l.rounds, l.committed_at
                        ),
                    )
                }
                Some(_) => {}
            }
        }
        if let Some(t) = p.timeouts.iter().find(|t| t.round.is_even() && live.contains(&t.round)) {
            return CheckResult::fail(
                "liveness",
                format!("{} timed out in round {} at t={} despite an honest leader after GST", p.party, t.round, t.at),
            );
        }
    }
    CheckResult::pass(
        "liveness",
        format!("{} anchors committed within 2 rounds at every honest party, no even-round timeouts", live.len()),
    )
}
