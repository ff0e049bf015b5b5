// SPDX-License-Identifier: Apache-2.0

//! Vertices and one party's local view of the round-based DAG.
//!
//! A [`DagView`] only ever holds vertices whose full causal history is
//! already present: [`DagView::insert`] rejects anything else, and the
//! broadcast layer is expected to buffer and retry.

mod export;

pub use export::{read_jsonl, write_dot, write_jsonl, AnchorMark, AnchorMarks, ExportError};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Index of a party in the committee, in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl PartyId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// A DAG layer. Even rounds carry anchors, odd rounds carry votes.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Round(pub u64);

impl Round {
    pub const GENESIS: Round = Round(0);

    pub fn is_even(self) -> bool {
        self.0.is_multiple_of(2)
    }

    pub fn next(self) -> Round {
        Round(self.0 + 1)
    }

    pub fn prev(self) -> Option<Round> {
        self.0.checked_sub(1).map(Round)
    }

    /// `self - k`, or `None` on underflow.
    pub fn back(self, k: u64) -> Option<Round> {
        self.0.checked_sub(k).map(Round)
    }
}

impl fmt::Display for Round {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// SHA-256 content digest of a vertex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub [u8; 32]);

impl VertexId {
    /// First eight hex characters, used in logs and traces.
    pub fn short(&self) -> String {
        hex::encode(&self.0[..4])
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<VertexId> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out).ok()?;
        Some(VertexId(out))
    }
}

impl fmt::Debug for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VertexId({})", self.short())
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for VertexId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for VertexId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        VertexId::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex chars"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid committee: n={n}, f={f} (need n >= 3f + 1)")]
pub struct CommitteeError {
    pub n: usize,
    pub f: usize,
}

/// Committee size and fault bound, plus the derived thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Committee {
    n: usize,
    f: usize,
}

impl Committee {
    pub fn new(n: usize, f: usize) -> Result<Self, CommitteeError> {
        if n == 0 || n < 3 * f + 1 {
            return Err(CommitteeError { n, f });
        }
        Ok(Committee { n, f })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// `n - f`: edges per vertex, vertices needed to leave a round.
    pub fn quorum(&self) -> usize {
        self.n - self.f
    }

    /// `f + 1`: votes needed to commit an anchor.
    pub fn validity(&self) -> usize {
        self.f + 1
    }

    pub fn contains(&self, party: PartyId) -> bool {
        party.index() < self.n
    }

    pub fn parties(&self) -> impl Iterator<Item = PartyId> {
        (0..self.n as u32).map(PartyId)
    }

    /// Round-robin leader of an anchor round: party `(r/2 - 1) mod n`.
    /// `None` for odd rounds and for round 0.
    pub fn leader(&self, round: Round) -> Option<PartyId> {
        if round.0 == 0 || !round.is_even() {
            return None;
        }
        Some(PartyId(((round.0 / 2 - 1) % self.n as u64) as u32))
    }
}

/// One DAG node. Immutable once built; the id is computed at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    round: Round,
    source: PartyId,
    block: Vec<u8>,
    edges: BTreeSet<VertexId>,
    id: VertexId,
}

impl Vertex {
    pub fn new(
        round: Round,
        source: PartyId,
        block: Vec<u8>,
        edges: impl IntoIterator<Item = VertexId>,
    ) -> Self {
        let edges: BTreeSet<VertexId> = edges.into_iter().collect();
        let id = Self::digest(round, source, &block, &edges);
        Vertex { round, source, block, edges, id }
    }

    /// The well-known round-0 vertex of `source`.
    pub fn genesis(source: PartyId) -> Self {
        Vertex::new(Round::GENESIS, source, Vec::new(), [])
    }

    // Canonical encoding: round, source, block length + bytes, edge count +
    // edges in ascending order. All integers big-endian.
    fn digest(round: Round, source: PartyId, block: &[u8], edges: &BTreeSet<VertexId>) -> VertexId {
        let mut hasher = Sha256::new();
        hasher.update(round.0.to_be_bytes());
        hasher.update(source.0.to_be_bytes());
        hasher.update((block.len() as u64).to_be_bytes());
        hasher.update(block);
        hasher.update((edges.len() as u64).to_be_bytes());
        for edge in edges {
            hasher.update(edge.0);
        }
        VertexId(hasher.finalize().into())
    }

    pub fn id(&self) -> VertexId {
        self.id
    }

    pub fn round(&self) -> Round {
        self.round
    }

    pub fn source(&self) -> PartyId {
        self.source
    }

    pub fn block(&self) -> &[u8] {
        &self.block
    }

    pub fn edges(&self) -> &BTreeSet<VertexId> {
        &self.edges
    }

    /// `r<round>/p<source>`.
    pub fn label(&self) -> String {
        format!("r{}/p{}", self.round.0, self.source.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DagError {
    #[error("vertex source {party} is outside the committee of {n}")]
    UnknownParty { party: PartyId, n: usize },
    #[error("vertex {vertex:?} references {} parent(s) not in the view", missing.len())]
    MissingParents { vertex: VertexId, missing: Vec<VertexId> },
    #[error("{party} already has vertex {existing:?} in round {round}, rejected {offered:?}")]
    Equivocation { party: PartyId, round: Round, existing: VertexId, offered: VertexId },
    #[error("round {round} vertex has {got} edges, needs at least {need}")]
    TooFewEdges { round: Round, got: usize, need: usize },
    #[error("genesis vertex must not have edges")]
    GenesisWithEdges,
    #[error("edge to {parent:?} points at round {found}, expected round {expected}")]
    ParentRoundMismatch { parent: VertexId, expected: Round, found: Round },
    #[error("round {0} is not an anchor round")]
    OddRound(Round),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Insertion {
    Added,
    /// The identical vertex was already present.
    AlreadyPresent,
}

/// A party's local DAG: per-round vertex sets plus an id index.
#[derive(Clone, Debug, PartialEq)]
pub struct DagView {
    committee: Committee,
    rounds: Vec<BTreeMap<PartyId, Arc<Vertex>>>,
    by_id: HashMap<VertexId, Arc<Vertex>>,
}

impl DagView {
    /// An empty view, without genesis.
    pub fn new(committee: Committee) -> Self {
        DagView { committee, rounds: Vec::new(), by_id: HashMap::new() }
    }

    /// A view holding the `n` genesis vertices.
    pub fn with_genesis(committee: Committee) -> Self {
        let mut view = DagView::new(committee);
        for party in committee.parties() {
            view.insert(Vertex::genesis(party)).expect("genesis inserts cleanly");
        }
        view
    }

    pub fn committee(&self) -> &Committee {
        &self.committee
    }

    pub fn insert(&mut self, vertex: impl Into<Arc<Vertex>>) -> Result<Insertion, DagError> {
        let vertex = vertex.into();
        let (round, source) = (vertex.round, vertex.source);
        if !self.committee.contains(source) {
            return Err(DagError::UnknownParty { party: source, n: self.committee.n });
        }
        if let Some(existing) = self.vertex_at(round, source) {
            if existing.id == vertex.id {
                return Ok(Insertion::AlreadyPresent);
            }
            return Err(DagError::Equivocation {
                party: source,
                round,
                existing: existing.id,
                offered: vertex.id,
            });
        }
        match round.prev() {
            None if !vertex.edges.is_empty() => return Err(DagError::GenesisWithEdges),
            None => {}
            Some(parent_round) => {
                let need = self.committee.quorum();
                if vertex.edges.len() < need {
                    return Err(DagError::TooFewEdges { round, got: vertex.edges.len(), need });
                }
                let missing = self.missing_parents(&vertex);
                if !missing.is_empty() {
                    return Err(DagError::MissingParents { vertex: vertex.id, missing });
                }
                for edge in &vertex.edges {
                    let found = self.by_id[edge].round;
                    if found != parent_round {
                        return Err(DagError::ParentRoundMismatch {
                            parent: *edge,
                            expected: parent_round,
                            found,
                        });
                    }
                }
            }
        }

        let slot = round.0 as usize;
        if self.rounds.len() <= slot {
            self.rounds.resize_with(slot + 1, BTreeMap::new);
        }
        self.rounds[slot].insert(source, Arc::clone(&vertex));
        self.by_id.insert(vertex.id, vertex);
        Ok(Insertion::Added)
    }

    /// Edges of `vertex` that do not resolve in this view.
    pub fn missing_parents(&self, vertex: &Vertex) -> Vec<VertexId> {
        vertex.edges.iter().filter(|e| !self.by_id.contains_key(e)).copied().collect()
    }

    pub fn get(&self, id: &VertexId) -> Option<&Arc<Vertex>> {
        self.by_id.get(id)
    }

    pub fn contains(&self, id: &VertexId) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn vertex_at(&self, round: Round, source: PartyId) -> Option<&Arc<Vertex>> {
        self.rounds.get(round.0 as usize)?.get(&source)
    }

    /// Vertices of `round`, by ascending source.
    pub fn round(&self, round: Round) -> impl Iterator<Item = &Arc<Vertex>> {
        self.rounds.get(round.0 as usize).into_iter().flat_map(|m| m.values())
    }

    pub fn round_len(&self, round: Round) -> usize {
        self.rounds.get(round.0 as usize).map_or(0, BTreeMap::len)
    }

    /// Highest round holding at least one vertex.
    pub fn highest_round(&self) -> Option<Round> {
        self.rounds.iter().rposition(|m| !m.is_empty()).map(|r| Round(r as u64))
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// All vertices in `(round, source)` order.
    pub fn iter(&self) -> impl Iterator<Item = &Arc<Vertex>> {
        self.rounds.iter().flat_map(|m| m.values())
    }

    /// Whether `to` is reachable from `from` along edges, reflexively.
    /// False if either endpoint is absent.
    pub fn path(&self, from: &VertexId, to: &VertexId) -> bool {
        let (Some(start), Some(target)) = (self.by_id.get(from), self.by_id.get(to)) else {
            return false;
        };
        if start.id == target.id {
            return true;
        }
        if start.round <= target.round {
            return false;
        }
        let floor = target.round;
        let mut seen = HashSet::new();
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for edge in &v.edges {
                if edge == to {
                    return true;
                }
                let parent = &self.by_id[edge];
                // Nothing below the target's round can lead back up to it.
                if parent.round > floor && seen.insert(*edge) {
                    stack.push(parent);
                }
            }
        }
        false
    }

    /// Every vertex reachable from `id`, including itself, in
    /// `(round, source)` order. Empty if `id` is absent.
    pub fn causal_history(&self, id: &VertexId) -> Vec<Arc<Vertex>> {
        let Some(start) = self.by_id.get(id) else {
            return Vec::new();
        };
        let mut seen = HashSet::from([start.id]);
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(v) = stack.pop() {
            out.push(Arc::clone(v));
            for edge in &v.edges {
                if seen.insert(*edge) {
                    stack.push(&self.by_id[edge]);
                }
            }
        }
        out.sort_by_key(|v| (v.round, v.source));
        out
    }

    /// The leader's vertex for anchor round `round`, if present.
    pub fn anchor(&self, round: Round) -> Result<Option<&Arc<Vertex>>, DagError> {
        let leader = self.committee.leader(round).ok_or(DagError::OddRound(round))?;
        Ok(self.vertex_at(round, leader))
    }
}
