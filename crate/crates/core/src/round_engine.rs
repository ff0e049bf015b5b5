// SPDX-License-Identifier: Apache-2.0

//! Round advancement for one honest party.
//!
//! The engine is a reactor: deliveries and timer expiries go in, broadcasts
//! and timer requests come out. A party leaves round `r` once it holds
//! `n - f` round-`r` vertices and
//!
//! * even `r`: the anchor of `r` is present, or the round timer expired;
//! * odd `r`: `f + 1` of them vote for the anchor of `r - 1`, or `2f + 1`
//!   do not, or the round timer expired.
//!
//! The timer for a round is armed the first time the quorum is there but
//! the rest of the condition is not.

use serde::Serialize;
use thiserror::Error;

use crate::dag::{Committee, DagView, PartyId, Round, Vertex, VertexId};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartyConfig {
    pub id: PartyId,
    pub committee: Committee,
    pub timeout: SimTime,
    /// The party does not broadcast beyond this round.
    pub last_round: Round,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Broadcast(Vertex),
    ArmTimer { round: Round, deadline: SimTime },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Timer {
    pub round: Round,
    pub deadline: SimTime,
    pub expired: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("timer for round {round} fired with {have} vertices, need {need}")]
    PrematureTimeout { round: Round, have: usize, need: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundState {
    pub current_round: Round,
    pub timer: Option<Timer>,
    /// Highest round this party broadcast a vertex for.
    pub last_broadcast: Option<Round>,
}

/// Deterministic transaction placeholder for a party's vertex.
pub fn payload(source: PartyId, round: Round) -> Vec<u8> {
    format!("block:{}:{}", source.0, round.0).into_bytes()
}

#[derive(Clone, Debug)]
pub struct RoundEngine {
    config: PartyConfig,
    state: RoundState,
}

impl RoundEngine {
    pub fn new(config: PartyConfig) -> Self {
        RoundEngine {
            config,
            state: RoundState { current_round: Round::GENESIS, timer: None, last_broadcast: None },
        }
    }

    pub fn config(&self) -> &PartyConfig {
        &self.config
    }

    pub fn state(&self) -> &RoundState {
        &self.state
    }

    pub fn current_round(&self) -> Round {
        self.state.current_round
    }

    pub fn on_vertex_delivered(&mut self, view: &DagView, now: SimTime) -> Vec<Command> {
        self.poll(view, now)
    }

    /// Handles expiry of the timer for `round`. Timers of rounds the party
    /// already left are ignored.
    pub fn on_timeout(
        &mut self,
        view: &DagView,
        round: Round,
        now: SimTime,
    ) -> Result<Vec<Command>, EngineError> {
        match &mut self.state.timer {
            Some(timer) if timer.round == round && round == self.state.current_round => {
                let need = self.config.committee.quorum();
                let have = view.round_len(round);
                if have < need {
                    return Err(EngineError::PrematureTimeout { round, have, need });
                }
                timer.expired = true;
            }
            _ => return Ok(Vec::new()),
        }
        Ok(self.poll(view, now))
    }

    /// Whether the party may leave round `r` given `view`.
    pub fn advance_ready(&self, view: &DagView, r: Round) -> bool {
        let committee = &self.config.committee;
        let present = view.round_len(r);
        if present < committee.quorum() {
            return false;
        }
        if r == Round::GENESIS {
            return true;
        }
        let expired = matches!(self.state.timer, Some(t) if t.round == r && t.expired);
        if r.is_even() {
            return expired || matches!(view.anchor(r), Ok(Some(_)));
        }
        let anchor_round = Round(r.0 - 1);
        let anchor = match view.anchor(anchor_round) {
            Ok(Some(a)) => a.id(),
            _ => return true,
        };
        let voters = view.round(r).filter(|v| v.edges().contains(&anchor)).count();
        let non_voters = present - voters;
        voters >= committee.validity() || non_voters > 2 * committee.f() || expired
    }

    /// Every vertex present in round `r`, by ascending source.
    pub fn pick_edges(&self, view: &DagView, r: Round) -> Vec<VertexId> {
        view.round(r).map(|v| v.id()).collect()
    }

    fn poll(&mut self, view: &DagView, now: SimTime) -> Vec<Command> {
        let mut commands = Vec::new();
        loop {
            let r = self.state.current_round;
            if r >= self.config.last_round {
                break;
            }
            if self.advance_ready(view, r) {
                let next = r.next();
                let edges = self.pick_edges(view, r);
                let vertex = Vertex::new(next, self.config.id, payload(self.config.id, next), edges);
                commands.push(Command::Broadcast(vertex));
                self.state.current_round = next;
                self.state.last_broadcast = Some(next);
                self.state.timer = None;
                continue;
            }
            if view.round_len(r) >= self.config.committee.quorum() && self.state.timer.is_none() {
                let deadline = now + self.config.timeout;
                self.state.timer = Some(Timer { round: r, deadline, expired: false });
                commands.push(Command::ArmTimer { round: r, deadline });
            }
            break;
        }
        commands
    }
}
