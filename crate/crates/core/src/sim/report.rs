// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use crate::dag::{AnchorMark, AnchorMarks, Committee, DagView, PartyId, Round, VertexId};
use crate::ordering::{format_log, CommitObservation, LogEntry, RuleVariant, SkipRecord};
use crate::time::SimTime;

use super::network::{ByzantineMode, EquivocationAttempt};
use super::replica::{Replica, Stamp, Stamped, Violation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TimeoutRecord {
    pub round: Round,
    pub at: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BroadcastRecord {
    pub round: Round,
    pub at: SimTime,
}

/// How long an anchor took to enter one party's log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Latency {
    pub anchor: VertexId,
    pub anchor_round: Round,
    pub direct: bool,
    pub trigger_round: Round,
    /// `trigger_round - anchor_round`.
    pub rounds: u64,
    pub committed_at: Stamp,
    /// Commit time minus the leader's send time, when known.
    pub time: Option<SimTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartyReport {
    pub party: PartyId,
    pub honest: bool,
    pub behavior: Option<ByzantineMode>,
    pub round_reached: Round,
    pub stopped: bool,
    pub log: Vec<LogEntry>,
    pub commits: Vec<Stamped<CommitObservation>>,
    pub skips: Vec<Stamped<SkipRecord>>,
    pub latencies: Vec<Latency>,
    pub timeouts: Vec<TimeoutRecord>,
    pub broadcasts: Vec<BroadcastRecord>,
}

impl PartyReport {
    pub fn new(
        replica: &Replica,
        behavior: Option<ByzantineMode>,
        round_reached: Round,
        stopped: bool,
        timeouts: Vec<TimeoutRecord>,
        broadcasts: Vec<BroadcastRecord>,
        sent_at: impl Fn(PartyId, Round) -> Option<SimTime>,
    ) -> Self {
        let record = replica.record();
        let latencies = record
            .ordered_anchors
            .iter()
            .map(|a| {
                let source = replica.view().get(&a.item.anchor).map(|v| v.source());
                let sent = source.and_then(|s| sent_at(s, a.item.round));
                Latency {
                    anchor: a.item.anchor,
                    anchor_round: a.item.round,
                    direct: a.item.direct,
                    trigger_round: a.item.trigger_round,
                    rounds: a.item.trigger_round.0 - a.item.round.0,
                    committed_at: a.at,
                    time: sent.map(|s| a.at.time.saturating_sub(s)),
                }
            })
            .collect();
        PartyReport {
            party: replica.id(),
            honest: behavior.is_none(),
            behavior,
            round_reached,
            stopped,
            log: replica.log().to_vec(),
            commits: record.commits.clone(),
            skips: record.skips.clone(),
            latencies,
            timeouts,
            broadcasts,
        }
    }

    pub fn log_ids(&self) -> Vec<VertexId> {
        self.log.iter().map(|e| e.id).collect()
    }

    /// The commit-log export for this party.
    pub fn log_text(&self) -> String {
        format_log(&self.log)
    }

    /// Committed, walked-to and skipped anchors, by round. A later mark
    /// never downgrades a direct commit.
    pub fn anchor_marks(&self) -> AnchorMarks {
        let mut marks = AnchorMarks::new();
        for s in &self.skips {
            marks.insert(s.item.round, AnchorMark::Skipped);
        }
        for l in &self.latencies {
            marks.insert(l.anchor_round, if l.direct { AnchorMark::Committed } else { AnchorMark::Ordered });
        }
        for c in self.commits.iter().filter(|c| c.item.fresh) {
            marks.insert(c.item.anchor_round, AnchorMark::Committed);
        }
        marks
    }
}

/// Outcome of one run: per-party logs and decisions, violations found while
/// running, and the final views.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub n: usize,
    pub f: usize,
    pub rounds: Round,
    pub seed: u64,
    pub variant: RuleVariant,
    pub gst: SimTime,
    pub post_gst_bound: SimTime,
    pub timeout: SimTime,
    pub events: u64,
    pub final_time: SimTime,
    pub quiescent: bool,
    pub parties: Vec<PartyReport>,
    pub equivocation_attempts: Vec<EquivocationAttempt>,
    pub violations: Vec<Violation>,
    pub trace_hash: String,
    #[serde(skip)]
    pub trace: Vec<String>,
    #[serde(skip)]
    pub views: Vec<DagView>,
}

impl SimulationReport {
    pub fn committee(&self) -> Committee {
        Committee::new(self.n, self.f).expect("report built from a valid committee")
    }

    pub fn honest(&self) -> impl Iterator<Item = &PartyReport> {
        self.parties.iter().filter(|p| p.honest)
    }

    pub fn is_honest(&self, party: PartyId) -> bool {
        self.parties.get(party.index()).is_some_and(|p| p.honest)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
