// SPDX-License-Identifier: Apache-2.0

//! The per-party ordering state machine.
//!
//! Each party feeds every vertex it inserts into [`OrderingState::try_committing`].
//! An even-round vertex counts the votes its own edges give to the anchor
//! two rounds below; with `f + 1` votes the anchor is committed, earlier
//! anchors reachable from it are ordered first, and unreachable ones are
//! skipped. Vote counting uses `path` from each edge, which for edges one
//! round above the anchor is the same as a direct edge.
//!
//! Nothing here performs I/O: the total order is a pure function of the
//! sequence of views a party has seen.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dag::{Committee, DagView, PartyId, Round, Vertex, VertexId};

/// Deliberately broken rules, used only to show that the property checkers
/// catch violations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleVariant {
    #[default]
    Standard,
    /// `order_anchors` never walks back to earlier anchors.
    NoWalkBack,
    /// Commits with `f` votes instead of `f + 1`.
    WeakThreshold,
}

/// One position of the committed total order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub seq: u64,
    pub id: VertexId,
    pub round: Round,
    pub source: PartyId,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seq={} round={} source={} id={}", self.seq, self.round, self.source.0, self.id.short())
    }
}

/// Commit-log export: one `seq=.. round=.. source=.. id=..` line per entry.
pub fn format_log(log: &[LogEntry]) -> String {
    log.iter().map(|e| format!("{e}\n")).collect()
}

/// An even-round vertex whose edges carried at least the commit threshold
/// of votes for the anchor two rounds below.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommitObservation {
    pub anchor: VertexId,
    pub anchor_round: Round,
    pub anchor_source: PartyId,
    pub votes: usize,
    pub trigger: VertexId,
    pub trigger_round: Round,
    /// False when the anchor's round was already at or below the last
    /// ordered round, so nothing was re-ordered.
    pub fresh: bool,
}

/// An anchor round passed over while walking back from a committed anchor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkipRecord {
    pub round: Round,
    /// `None` when the anchor was not in the view at all.
    pub anchor: Option<VertexId>,
    pub from: VertexId,
    pub from_round: Round,
}

/// An anchor whose causal history entered the log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnchorOrdered {
    pub anchor: VertexId,
    pub round: Round,
    /// Committed by votes, as opposed to reached by the walk back.
    pub direct: bool,
    /// Round of the vertex that triggered the commit.
    pub trigger_round: Round,
}

/// Everything one `try_committing` call decided.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CommitOutcome {
    /// Newly appended suffix of the log.
    pub ordered: Vec<VertexId>,
    pub observation: Option<CommitObservation>,
    pub skipped: Vec<SkipRecord>,
    /// Anchors ordered by this call, oldest first.
    pub anchors: Vec<AnchorOrdered>,
}

#[derive(Clone, Debug)]
pub struct OrderingState {
    committee: Committee,
    variant: RuleVariant,
    ordered: HashSet<VertexId>,
    last_ordered_round: Round,
    stack: Vec<Arc<Vertex>>,
    log: Vec<LogEntry>,
}

impl OrderingState {
    pub fn new(committee: Committee) -> Self {
        Self::with_variant(committee, RuleVariant::Standard)
    }

    pub fn with_variant(committee: Committee, variant: RuleVariant) -> Self {
        OrderingState {
            committee,
            variant,
            ordered: HashSet::new(),
            last_ordered_round: Round::GENESIS,
            stack: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn last_ordered_round(&self) -> Round {
        self.last_ordered_round
    }

    pub fn is_ordered(&self, id: &VertexId) -> bool {
        self.ordered.contains(id)
    }

    pub fn stack_is_empty(&self) -> bool {
        self.stack.is_empty()
    }

    fn threshold(&self) -> usize {
        match self.variant {
            RuleVariant::WeakThreshold => self.committee.f(),
            _ => self.committee.validity(),
        }
    }

    /// Runs the commit rule for a vertex that was just inserted into `view`.
    pub fn try_committing(&mut self, view: &DagView, v: &Vertex) -> CommitOutcome {
        let mut outcome = CommitOutcome::default();
        if !v.round().is_even() || v.round() == Round::GENESIS {
            return outcome;
        }
        let Some(anchor_round) = v.round().back(2) else {
            return outcome;
        };
        // Round 2 triggers look at round 0, which has no anchor.
        let Ok(Some(anchor)) = view.anchor(anchor_round) else {
            return outcome;
        };
        let anchor = Arc::clone(anchor);
        let votes = v.edges().iter().filter(|e| view.path(e, &anchor.id())).count();
        if votes < self.threshold() {
            return outcome;
        }

        // An anchor at or below the last ordered round was either ordered
        // already or skipped; re-running the walk would move
        // `last_ordered_round` backwards.
        let fresh = anchor.round() > self.last_ordered_round;
        outcome.observation = Some(CommitObservation {
            anchor: anchor.id(),
            anchor_round: anchor.round(),
            anchor_source: anchor.source(),
            votes,
            trigger: v.id(),
            trigger_round: v.round(),
            fresh,
        });
        if fresh {
            let walk = self.order_anchors(view, &anchor);
            outcome.ordered = walk.ordered;
            outcome.skipped = walk.skipped;
            outcome.anchors = walk
                .anchors
                .into_iter()
                .map(|a| AnchorOrdered {
                    direct: a.id() == anchor.id(),
                    anchor: a.id(),
                    round: a.round(),
                    trigger_round: v.round(),
                })
                .collect();
        }
        outcome
    }

    /// Orders `anchor` together with every earlier, not yet ordered anchor
    /// that it reaches through a chain of paths.
    pub fn order_anchors(&mut self, view: &DagView, anchor: &Arc<Vertex>) -> AnchorWalk {
        let mut walk = AnchorWalk::default();
        let mut current = Arc::clone(anchor);
        self.stack.push(Arc::clone(&current));

        if self.variant != RuleVariant::NoWalkBack {
            let mut r = anchor.round().back(2).unwrap_or(Round::GENESIS);
            while r > self.last_ordered_round {
                // An absent anchor is treated like one with no path to it.
                let prev = view.anchor(r).ok().flatten();
                match prev {
                    Some(prev) if view.path(&current.id(), &prev.id()) => {
                        self.stack.push(Arc::clone(prev));
                        current = Arc::clone(prev);
                    }
                    _ => walk.skipped.push(SkipRecord {
                        round: r,
                        anchor: prev.map(|p| p.id()),
                        from: current.id(),
                        from_round: current.round(),
                    }),
                }
                r = r.back(2).unwrap_or(Round::GENESIS);
            }
        }

        self.last_ordered_round = anchor.round();
        walk.anchors = self.stack.iter().rev().cloned().collect();
        walk.ordered = self.order_history(view);
        walk
    }

    /// Pops the anchor stack, appending each anchor's not yet ordered causal
    /// history in `(round, source)` order.
    pub fn order_history(&mut self, view: &DagView) -> Vec<VertexId> {
        let mut appended = Vec::new();
        while let Some(anchor) = self.stack.pop() {
            for v in view.causal_history(&anchor.id()) {
                if self.ordered.insert(v.id()) {
                    self.log.push(LogEntry {
                        seq: self.log.len() as u64,
                        id: v.id(),
                        round: v.round(),
                        source: v.source(),
                    });
                    appended.push(v.id());
                }
            }
        }
        appended
    }
}

/// Result of [`OrderingState::order_anchors`].
#[derive(Clone, Debug, Default)]
pub struct AnchorWalk {
    /// Anchors ordered, oldest first.
    pub anchors: Vec<Arc<Vertex>>,
    pub skipped: Vec<SkipRecord>,
    pub ordered: Vec<VertexId>,
}
