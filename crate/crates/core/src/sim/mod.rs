// SPDX-License-Identifier: Apache-2.0

//! Deterministic discrete-event simulation of `n` parties building and
//! ordering the DAG over an idealized reliable broadcast.
//!
//! Events are processed in `(time, seq)` order. A delivered vertex goes
//! through the receiver's causal buffer, into its DAG view, through the
//! commit rule and finally into its round engine, whose commands are
//! scheduled back onto the queue. Every run is a pure function of its
//! [`SimConfig`].

mod network;
mod replica;
mod report;

pub use network::{
    message_rng, BroadcastChannel, ByzantineBehavior, ByzantineMode, DelayDist, DelayModel,
    EquivocationAttempt, SendOutcome,
};
pub use replica::{divergence, PartyRecord, PrefixMonitor, Replica, Stamp, Stamped, Violation};
pub use report::{BroadcastRecord, Latency, PartyReport, SimulationReport, TimeoutRecord};

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dag::{Committee, PartyId, Round, Vertex, VertexId};
use crate::ordering::{CommitOutcome, RuleVariant};
use crate::round_engine::{Command, PartyConfig, RoundEngine};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub committee: Committee,
    /// Highest round any party broadcasts.
    pub rounds: Round,
    pub delay: DelayModel,
    pub timeout: SimTime,
    pub byzantine: Vec<ByzantineBehavior>,
    pub seed: u64,
    pub variant: RuleVariant,
    /// Abort with [`SimError::NonTermination`] past this many events.
    pub max_events: u64,
    /// Keep the trace lines in memory, not just their hash.
    pub record_trace: bool,
}

impl SimConfig {
    /// All honest, synchronous with delay 1, timeout 10.
    pub fn new(committee: Committee, rounds: u64) -> Self {
        SimConfig {
            committee,
            rounds: Round(rounds),
            delay: DelayModel::synchronous(SimTime(1_000)),
            timeout: SimTime(10_000),
            byzantine: Vec::new(),
            seed: 0,
            variant: RuleVariant::Standard,
            max_events: default_max_events(committee.n(), rounds),
            record_trace: false,
        }
    }
}

/// Generous ceiling: every vertex is delivered to every party, plus
/// equivocation copies, timers and injections.
pub fn default_max_events(n: usize, rounds: u64) -> u64 {
    let n = n as u64;
    (rounds + 1) * n * (2 * n + 2) + n + 1_000
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no quiescence after {events} events (t={time})")]
    NonTermination { events: u64, time: SimTime },
    #[error("byzantine party {0} is outside the committee")]
    UnknownParty(PartyId),
    #[error("byzantine party {0} listed twice")]
    DuplicateParty(PartyId),
    #[error("{count} byzantine parties exceed f={f}")]
    TooManyFaults { count: usize, f: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EventKind {
    Deliver { vertex: Arc<Vertex>, to: PartyId },
    TimerFire { party: PartyId, round: Round },
    Inject { party: PartyId },
}

#[derive(Clone, Debug)]
pub struct Event {
    pub time: SimTime,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        (self.time, self.seq) == (other.time, other.seq)
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopCondition {
    Quiescent,
    /// Every running honest party reached this round.
    RoundReached(Round),
    /// No event after this time is processed.
    TimeReached(SimTime),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step {
    Processed(Stamp),
    Quiescent,
}

struct Party {
    replica: Replica,
    engine: RoundEngine,
    behavior: Option<ByzantineMode>,
    pending: BTreeMap<(Round, PartyId, VertexId), Arc<Vertex>>,
    running: bool,
    timeouts: Vec<TimeoutRecord>,
    broadcasts: Vec<BroadcastRecord>,
}

pub struct Simulator {
    config: SimConfig,
    parties: Vec<Party>,
    queue: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now: Stamp,
    events: u64,
    channel: BroadcastChannel,
    monitor: PrefixMonitor,
    violations: Vec<Violation>,
    trace: Vec<String>,
    trace_hash: Sha256,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Result<Self, SimError> {
        let committee = config.committee;
        let mut behaviors: BTreeMap<PartyId, ByzantineMode> = BTreeMap::new();
        for b in &config.byzantine {
            if !committee.contains(b.party) {
                return Err(SimError::UnknownParty(b.party));
            }
            if behaviors.insert(b.party, b.mode).is_some() {
                return Err(SimError::DuplicateParty(b.party));
            }
        }
        if behaviors.len() > committee.f() {
            return Err(SimError::TooManyFaults { count: behaviors.len(), f: committee.f() });
        }

        let parties = committee
            .parties()
            .map(|id| {
                let behavior = behaviors.get(&id).copied();
                let party_config =
                    PartyConfig { id, committee, timeout: config.timeout, last_round: config.rounds };
                Party {
                    replica: Replica::new(id, committee, config.variant),
                    engine: RoundEngine::new(party_config),
                    behavior,
                    pending: BTreeMap::new(),
                    running: !matches!(behavior, Some(ByzantineMode::Silent)),
                    timeouts: Vec::new(),
                    broadcasts: Vec::new(),
                }
            })
            .collect();

        let mut sim = Simulator {
            config,
            parties,
            queue: BinaryHeap::new(),
            next_seq: 0,
            now: Stamp::default(),
            events: 0,
            channel: BroadcastChannel::default(),
            monitor: PrefixMonitor::default(),
            violations: Vec::new(),
            trace: Vec::new(),
            trace_hash: Sha256::new(),
        };
        for party in committee.parties() {
            if sim.parties[party.index()].running {
                sim.schedule(SimTime::ZERO, EventKind::Inject { party });
            }
        }
        Ok(sim)
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn now(&self) -> Stamp {
        self.now
    }

    pub fn is_honest(&self, party: PartyId) -> bool {
        self.parties[party.index()].behavior.is_none()
    }

    pub fn replica(&self, party: PartyId) -> &Replica {
        &self.parties[party.index()].replica
    }

    pub fn engine(&self, party: PartyId) -> &RoundEngine {
        &self.parties[party.index()].engine
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    /// Trace lines so far; empty unless `record_trace` is set.
    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    /// Vertices `party` holds back until their parents arrive.
    pub fn buffered(&self, party: PartyId) -> usize {
        self.parties[party.index()].pending.len()
    }

    /// Processes the next event in `(time, seq)` order.
    pub fn step(&mut self) -> Step {
        let Some(Reverse(event)) = self.queue.pop() else {
            return Step::Quiescent;
        };
        self.now = Stamp { time: event.time, seq: event.seq };
        self.events += 1;
        match event.kind {
            EventKind::Inject { party } => {
                self.log(format!("ev=inject party={}", party.0));
                let p = &mut self.parties[party.index()];
                let commands = p.engine.on_vertex_delivered(p.replica.view(), self.now.time);
                self.apply(party, commands);
            }
            EventKind::Deliver { vertex, to } => self.deliver(to, vertex),
            EventKind::TimerFire { party, round } => self.timer_fired(party, round),
        }
        Step::Processed(self.now)
    }

    pub fn run_until(&mut self, condition: StopCondition) -> Result<SimulationReport, SimError> {
        loop {
            match condition {
                StopCondition::Quiescent => {}
                StopCondition::TimeReached(limit) => {
                    if self.queue.peek().is_some_and(|Reverse(e)| e.time > limit) {
                        break;
                    }
                }
                StopCondition::RoundReached(round) => {
                    let reached = self
                        .parties
                        .iter()
                        .filter(|p| p.behavior.is_none() && p.running)
                        .all(|p| p.engine.current_round() >= round);
                    if reached {
                        break;
                    }
                }
            }
            if self.events >= self.config.max_events && !self.queue.is_empty() {
                return Err(SimError::NonTermination { events: self.events, time: self.now.time });
            }
            if self.step() == Step::Quiescent {
                break;
            }
        }
        Ok(self.report())
    }

    fn schedule(&mut self, time: SimTime, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Event { time, seq, kind }));
    }

    fn log(&mut self, line: String) {
        let line = format!("t={} seq={} {}", self.now.time, self.now.seq, line);
        self.trace_hash.update(line.as_bytes());
        self.trace_hash.update(b"\n");
        if self.config.record_trace {
            self.trace.push(line);
        }
    }

    fn deliver(&mut self, to: PartyId, vertex: Arc<Vertex>) {
        let p = &mut self.parties[to.index()];
        let status = if !p.running {
            "ignored"
        } else if p.replica.view().contains(&vertex.id()) {
            "duplicate"
        } else if !p.replica.view().missing_parents(&vertex).is_empty() {
            p.pending.insert((vertex.round(), vertex.source(), vertex.id()), Arc::clone(&vertex));
            "buffered"
        } else {
            "ready"
        };
        self.log(format!("ev=deliver to={} vertex={} id={} status={}", to.0, vertex.label(), vertex.id().short(), status));
        if status != "ready" {
            return;
        }
        self.insert(to, vertex);
        // Drain whatever the new vertex unblocked, lowest round first.
        loop {
            let p = &mut self.parties[to.index()];
            if !p.running {
                break;
            }
            let view = p.replica.view();
            let Some(key) = p.pending.iter().find(|(_, v)| view.missing_parents(v).is_empty()).map(|(k, _)| *k)
            else {
                break;
            };
            let vertex = p.pending.remove(&key).expect("key just found");
            self.log(format!("ev=unbuffer to={} vertex={} id={}", to.0, vertex.label(), vertex.id().short()));
            self.insert(to, vertex);
        }
    }

    fn insert(&mut self, party: PartyId, vertex: Arc<Vertex>) {
        let at = self.now;
        let p = &mut self.parties[party.index()];
        let before = p.replica.log().len();
        let outcome = match p.replica.insert(vertex, at) {
            Ok(Some(outcome)) => outcome,
            Ok(None) => return,
            Err(e) => {
                let error = e.to_string();
                self.log(format!("ev=violation kind=insert party={} error={:?}", party.0, error));
                self.violations.push(Violation::Insert { at, party, error });
                return;
            }
        };
        self.log_outcome(party, &outcome);

        let p = &mut self.parties[party.index()];
        if p.behavior.is_none() {
            if let Some(v) = self.monitor.observe(party, p.replica.log(), before, at) {
                self.log(format!("ev=violation kind=safety party={}", party.0));
                self.violations.push(v);
            }
        }
        let p = &mut self.parties[party.index()];
        let commands = p.engine.on_vertex_delivered(p.replica.view(), at.time);
        self.apply(party, commands);
    }

    fn log_outcome(&mut self, party: PartyId, outcome: &CommitOutcome) {
        if let Some(obs) = &outcome.observation {
            self.log(format!(
                "ev=commit party={} anchor=r{}/p{} votes={} trigger_round={} fresh={}",
                party.0, obs.anchor_round.0, obs.anchor_source.0, obs.votes, obs.trigger_round.0, obs.fresh
            ));
        }
        for skip in &outcome.skipped {
            self.log(format!("ev=skip party={} round={} present={}", party.0, skip.round.0, skip.anchor.is_some()));
        }
        if !outcome.ordered.is_empty() {
            let len = self.parties[party.index()].replica.log().len();
            self.log(format!("ev=order party={} appended={} log_len={}", party.0, outcome.ordered.len(), len));
        }
    }

    fn timer_fired(&mut self, party: PartyId, round: Round) {
        let now = self.now.time;
        let p = &mut self.parties[party.index()];
        if !p.running {
            self.log(format!("ev=timer party={} round={} status=ignored", party.0, round.0));
            return;
        }
        let live = p.engine.current_round() == round
            && matches!(p.engine.state().timer, Some(t) if t.round == round && !t.expired);
        match p.engine.on_timeout(p.replica.view(), round, now) {
            Ok(commands) => {
                if live {
                    p.timeouts.push(TimeoutRecord { round, at: now });
                }
                let status = if live { "fired" } else { "stale" };
                self.log(format!("ev=timer party={} round={} status={}", party.0, round.0, status));
                self.apply(party, commands);
            }
            Err(e) => {
                let error = e.to_string();
                self.log(format!("ev=violation kind=engine party={} error={:?}", party.0, error));
                self.violations.push(Violation::Engine { at: self.now, party, error });
            }
        }
    }

    fn apply(&mut self, party: PartyId, commands: Vec<Command>) {
        for command in commands {
            if !self.parties[party.index()].running {
                return;
            }
            match command {
                Command::Broadcast(vertex) => self.broadcast(party, vertex),
                Command::ArmTimer { round, deadline } => {
                    self.log(format!("ev=arm party={} round={} deadline={}", party.0, round.0, deadline));
                    self.schedule(deadline, EventKind::TimerFire { party, round });
                }
            }
        }
    }

    fn broadcast(&mut self, party: PartyId, vertex: Vertex) {
        let now = self.now.time;
        let quorum = self.config.committee.quorum();
        let p = &mut self.parties[party.index()];
        let mut vertex = vertex;
        let mut send_at = now;
        match p.behavior {
            Some(ByzantineMode::Crash { after_round }) if vertex.round() > after_round => {
                p.running = false;
                p.pending.clear();
                self.log(format!("ev=crash party={} round={}", party.0, vertex.round().0));
                return;
            }
            Some(ByzantineMode::AvoidAnchorEdges) if !vertex.round().is_even() => {
                let anchor = vertex.round().prev().and_then(|r| p.replica.view().anchor(r).ok().flatten());
                if let Some(anchor) = anchor {
                    if vertex.edges().contains(&anchor.id()) && vertex.edges().len() > quorum {
                        let edges = vertex.edges().iter().filter(|e| **e != anchor.id()).copied().collect::<Vec<_>>();
                        vertex = Vertex::new(vertex.round(), party, vertex.block().to_vec(), edges);
                    }
                }
            }
            Some(ByzantineMode::DelayOwnBroadcast { amount }) => send_at = now + amount,
            _ => {}
        }
        p.broadcasts.push(BroadcastRecord { round: vertex.round(), at: send_at });
        let equivocate = matches!(p.behavior, Some(ByzantineMode::AttemptEquivocation));
        let twin = equivocate.then(|| {
            Vertex::new(vertex.round(), party, b"equivocation".to_vec(), vertex.edges().iter().copied())
        });
        self.send(party, Arc::new(vertex), send_at, 0);
        if let Some(twin) = twin {
            self.send(party, Arc::new(twin), send_at, 1);
        }
    }

    fn send(&mut self, from: PartyId, vertex: Arc<Vertex>, at: SimTime, copy: u32) {
        match self.channel.broadcast(from, &vertex, at) {
            SendOutcome::Accepted => {
                self.log(format!(
                    "ev=broadcast party={} vertex={} id={} edges={} at={}",
                    from.0,
                    vertex.label(),
                    vertex.id().short(),
                    vertex.edges().len(),
                    at
                ));
                for to in self.config.committee.parties() {
                    let mut rng = message_rng(self.config.seed, from, vertex.round(), to, copy);
                    let when = self.config.delay.delivery_time(at, &mut rng);
                    self.schedule(when, EventKind::Deliver { vertex: Arc::clone(&vertex), to });
                }
            }
            SendOutcome::Duplicate => {}
            SendOutcome::Dropped => {
                self.log(format!("ev=equivocation party={} vertex={} dropped={}", from.0, vertex.label(), vertex.id().short()));
            }
        }
    }

    /// Snapshot of the run so far.
    pub fn report(&self) -> SimulationReport {
        let committee = self.config.committee;
        let parties = self
            .parties
            .iter()
            .map(|p| {
                PartyReport::new(
                    &p.replica,
                    p.behavior,
                    p.engine.current_round(),
                    !p.running,
                    p.timeouts.clone(),
                    p.broadcasts.clone(),
                    |source, round| self.channel.sent_at(source, round),
                )
            })
            .collect();
        SimulationReport {
            n: committee.n(),
            f: committee.f(),
            rounds: self.config.rounds,
            seed: self.config.seed,
            variant: self.config.variant,
            gst: self.config.delay.gst,
            post_gst_bound: self.config.delay.post_gst_bound,
            timeout: self.config.timeout,
            events: self.events,
            final_time: self.now.time,
            quiescent: self.queue.is_empty(),
            parties,
            equivocation_attempts: self.channel.equivocation_attempts().to_vec(),
            violations: self.violations.clone(),
            trace_hash: hex::encode(self.trace_hash.clone().finalize()),
            trace: self.trace.clone(),
            views: self.parties.iter().map(|p| p.replica.view().clone()).collect(),
        }
    }
}

/// Runs `config` to quiescence.
pub fn simulate(config: SimConfig) -> Result<SimulationReport, SimError> {
    Simulator::new(config)?.run_until(StopCondition::Quiescent)
}
