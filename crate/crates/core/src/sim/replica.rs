// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dag::{Committee, DagError, DagView, Insertion, PartyId, Vertex, VertexId};
use crate::ordering::{
    AnchorOrdered, CommitObservation, CommitOutcome, LogEntry, OrderingState, RuleVariant, SkipRecord,
};
use crate::time::SimTime;

/// Position of an event in a run: simulated time plus queue sequence number.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Stamp {
    pub time: SimTime,
    pub seq: u64,
}

impl fmt::Display for Stamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(t={}, seq={})", self.time, self.seq)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stamped<T> {
    pub at: Stamp,
    #[serde(flatten)]
    pub item: T,
}

/// Commit decisions a party made, in the order it made them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PartyRecord {
    pub commits: Vec<Stamped<CommitObservation>>,
    pub skips: Vec<Stamped<SkipRecord>>,
    pub ordered_anchors: Vec<Stamped<AnchorOrdered>>,
}

/// A party's DAG view and ordering state, fed one delivered vertex at a time.
#[derive(Clone, Debug)]
pub struct Replica {
    id: PartyId,
    view: DagView,
    ordering: OrderingState,
    record: PartyRecord,
}

impl Replica {
    pub fn new(id: PartyId, committee: Committee, variant: RuleVariant) -> Self {
        Replica {
            id,
            view: DagView::with_genesis(committee),
            ordering: OrderingState::with_variant(committee, variant),
            record: PartyRecord::default(),
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn view(&self) -> &DagView {
        &self.view
    }

    pub fn ordering(&self) -> &OrderingState {
        &self.ordering
    }

    pub fn log(&self) -> &[LogEntry] {
        self.ordering.log()
    }

    pub fn record(&self) -> &PartyRecord {
        &self.record
    }

    /// Inserts `vertex` and runs the commit rule on it. `Ok(None)` when the
    /// vertex was already present.
    pub fn insert(&mut self, vertex: Arc<Vertex>, at: Stamp) -> Result<Option<CommitOutcome>, DagError> {
        if self.view.insert(Arc::clone(&vertex))? == Insertion::AlreadyPresent {
            return Ok(None);
        }
        let outcome = self.ordering.try_committing(&self.view, &vertex);
        if let Some(obs) = &outcome.observation {
            self.record.commits.push(Stamped { at, item: obs.clone() });
        }
        self.record.skips.extend(outcome.skipped.iter().map(|s| Stamped { at, item: s.clone() }));
        self.record
            .ordered_anchors
            .extend(outcome.anchors.iter().map(|a| Stamped { at, item: a.clone() }));
        Ok(Some(outcome))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Two honest logs stopped being prefix-related.
    Safety {
        at: Stamp,
        index: u64,
        party: PartyId,
        found: VertexId,
        reference_party: PartyId,
        expected: VertexId,
    },
    /// The simulator handed a party a vertex its view rejected.
    Insert { at: Stamp, party: PartyId, error: String },
    Engine { at: Stamp, party: PartyId, error: String },
}

impl Violation {
    pub fn at(&self) -> Stamp {
        match self {
            Violation::Safety { at, .. } | Violation::Insert { at, .. } | Violation::Engine { at, .. } => *at,
        }
    }
}

/// Incremental prefix-agreement check. Keeps the longest honest log seen so
/// far; every honest log must be a prefix of it.
#[derive(Clone, Debug, Default)]
pub struct PrefixMonitor {
    reference: Vec<(VertexId, PartyId)>,
    diverged: BTreeSet<PartyId>,
}

impl PrefixMonitor {
    /// Checks `log[from..]` of `party`. Reports at most one violation per
    /// party per run.
    pub fn observe(&mut self, party: PartyId, log: &[LogEntry], from: usize, at: Stamp) -> Option<Violation> {
        if self.diverged.contains(&party) {
            return None;
        }
        for (i, entry) in log.iter().enumerate().skip(from) {
            match self.reference.get(i) {
                Some(&(expected, _)) if expected == entry.id => {}
                Some(&(expected, reference_party)) => {
                    self.diverged.insert(party);
                    return Some(Violation::Safety {
                        at,
                        index: i as u64,
                        party,
                        found: entry.id,
                        reference_party,
                        expected,
                    });
                }
                None => self.reference.push((entry.id, party)),
            }
        }
        None
    }
}

/// Index of the first position where neither log is a prefix of the other.
pub fn divergence(a: &[VertexId], b: &[VertexId]) -> Option<usize> {
    a.iter().zip(b).position(|(x, y)| x != y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dag::Round;

    fn entries(ids: &[u8]) -> Vec<LogEntry> {
        ids.iter()
            .enumerate()
            .map(|(i, &b)| LogEntry { seq: i as u64, id: VertexId([b; 32]), round: Round(0), source: PartyId(0) })
            .collect()
    }

    #[test]
    fn monitor_accepts_prefixes() {
        let mut m = PrefixMonitor::default();
        let long = entries(&[1, 2, 3]);
        assert_eq!(m.observe(PartyId(0), &long[..1], 0, Stamp::default()), None);
        assert_eq!(m.observe(PartyId(1), &long, 0, Stamp::default()), None);
        assert_eq!(m.observe(PartyId(0), &long, 1, Stamp::default()), None);
        assert_eq!(m.observe(PartyId(2), &[], 0, Stamp::default()), None);
    }

    #[test]
    fn monitor_reports_first_divergence_once() {
        let mut m = PrefixMonitor::default();
        m.observe(PartyId(0), &entries(&[1, 2, 3]), 0, Stamp::default());
        let at = Stamp { time: SimTime(7), seq: 3 };
        let v = m.observe(PartyId(1), &entries(&[1, 9]), 0, at).unwrap();
        match v {
            Violation::Safety { index, party, reference_party, at: when, .. } => {
                assert_eq!((index, party, reference_party, when), (1, PartyId(1), PartyId(0), at));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(m.observe(PartyId(1), &entries(&[1, 9, 9]), 2, at), None);
    }

    #[test]
    fn divergence_index() {
        let ids = |v: &[u8]| v.iter().map(|&b| VertexId([b; 32])).collect::<Vec<_>>();
        assert_eq!(divergence(&ids(&[1, 2]), &ids(&[1, 2, 3])), None);
        assert_eq!(divergence(&ids(&[]), &ids(&[1])), None);
        assert_eq!(divergence(&ids(&[1, 2]), &ids(&[3])), Some(0));
    }
}
