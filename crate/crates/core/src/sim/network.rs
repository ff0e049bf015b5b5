// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dag::{PartyId, Round, Vertex, VertexId};
use crate::time::SimTime;

/// Per-message delay distribution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayDist {
    Fixed { delay: SimTime },
    /// Inclusive on both ends.
    Uniform { lo: SimTime, hi: SimTime },
}

impl DelayDist {
    fn sample(&self, rng: &mut impl Rng) -> SimTime {
        match *self {
            DelayDist::Fixed { delay } => delay,
            DelayDist::Uniform { lo, hi } => SimTime(rng.gen_range(lo.0..=hi.0)),
        }
    }
}

/// Partial synchrony: before `gst` delays follow `pre_gst`, and any message
/// sent at `t` arrives by `max(t, gst) + post_gst_bound`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DelayModel {
    pub pre_gst: DelayDist,
    pub post_gst_bound: SimTime,
    pub gst: SimTime,
}

impl DelayModel {
    /// Synchronous from time zero with a fixed delay.
    pub fn synchronous(delay: SimTime) -> Self {
        DelayModel { pre_gst: DelayDist::Fixed { delay }, post_gst_bound: delay, gst: SimTime::ZERO }
    }

    pub fn delivery_time(&self, sent: SimTime, rng: &mut impl Rng) -> SimTime {
        let drawn = sent + self.pre_gst.sample(rng);
        let bound = sent.max(self.gst) + self.post_gst_bound;
        drawn.min(bound)
    }
}

/// Independent generator for one (source, round, receiver, copy) message, so
/// adding parties or messages leaves every other draw unchanged.
pub fn message_rng(seed: u64, source: PartyId, round: Round, receiver: PartyId, copy: u32) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(b"delay");
    hasher.update(seed.to_be_bytes());
    hasher.update(source.0.to_be_bytes());
    hasher.update(round.0.to_be_bytes());
    hasher.update(receiver.0.to_be_bytes());
    hasher.update(copy.to_be_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ByzantineMode {
    /// Stops entirely instead of broadcasting a vertex above `after_round`.
    Crash { after_round: Round },
    /// Never broadcasts anything.
    Silent,
    /// Follows the protocol but leaves the anchor out of its votes whenever
    /// it still has `n - f` other edges.
    AvoidAnchorEdges,
    /// Holds each of its own broadcasts back by `amount`.
    DelayOwnBroadcast { amount: SimTime },
    /// Sends a second, conflicting vertex for every round.
    AttemptEquivocation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ByzantineBehavior {
    pub party: PartyId,
    #[serde(flatten)]
    pub mode: ByzantineMode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivocationAttempt {
    pub source: PartyId,
    pub round: Round,
    pub kept: VertexId,
    pub dropped: VertexId,
    pub at: SimTime,
}

/// Sending half of the idealized reliable, non-equivocating broadcast.
/// The first vertex recorded for a `(source, round)` is the only one ever
/// delivered.
#[derive(Clone, Debug, Default)]
pub struct BroadcastChannel {
    sent: BTreeMap<(PartyId, Round), (VertexId, SimTime)>,
    attempts: Vec<EquivocationAttempt>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SendOutcome {
    Accepted,
    /// Same vertex sent again; nothing to deliver.
    Duplicate,
    /// Conflicting vertex for an already used `(source, round)`.
    Dropped,
}

impl BroadcastChannel {
    pub fn broadcast(&mut self, from: PartyId, vertex: &Vertex, at: SimTime) -> SendOutcome {
        debug_assert_eq!(from, vertex.source());
        let key = (from, vertex.round());
        match self.sent.get(&key) {
            None => {
                self.sent.insert(key, (vertex.id(), at));
                SendOutcome::Accepted
            }
            Some((id, _)) if *id == vertex.id() => SendOutcome::Duplicate,
            Some((id, _)) => {
                self.attempts.push(EquivocationAttempt {
                    source: from,
                    round: vertex.round(),
                    kept: *id,
                    dropped: vertex.id(),
                    at,
                });
                SendOutcome::Dropped
            }
        }
    }

    /// When the accepted vertex of `(source, round)` was sent.
    pub fn sent_at(&self, source: PartyId, round: Round) -> Option<SimTime> {
        self.sent.get(&(source, round)).map(|(_, t)| *t)
    }

    pub fn equivocation_attempts(&self) -> &[EquivocationAttempt] {
        &self.attempts
    }
}
