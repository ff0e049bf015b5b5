// SPDX-License-Identifier: Apache-2.0

//! Hand-built delivery schedules.
//!
//! A fixture fixes the DAG topology (every vertex with the sources of its
//! parents) and the exact order in which each party receives vertices.
//! Vertices are named `r<round>/p<source>`; genesis vertices `r0/p<i>`
//! exist implicitly. In a delivery list, `r<round>/*` stands for every
//! fixture vertex of that round in source order.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Deserialize;
use thiserror::Error;

use crate::dag::{Committee, DagError, PartyId, Round, Vertex};
use crate::ordering::RuleVariant;
use crate::round_engine::payload;
use crate::sim::{PartyReport, PrefixMonitor, Replica, SimulationReport, Stamp};
use crate::time::SimTime;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureVertex {
    pub round: u64,
    pub source: u32,
    /// Sources of the parents in `round - 1`.
    pub edges: Vec<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureStep {
    pub party: u32,
    pub deliver: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub name: String,
    pub description: String,
    pub n: usize,
    pub f: usize,
    #[serde(rename = "vertex")]
    pub vertices: Vec<FixtureVertex>,
    #[serde(rename = "step")]
    pub steps: Vec<FixtureStep>,
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("fixture does not parse: {0}")]
    Parse(String),
    #[error("invalid committee n={n} f={f}")]
    Committee { n: usize, f: usize },
    #[error("unknown vertex label `{0}`")]
    UnknownLabel(String),
    #[error("{label}: parent r{round}/p{parent} is not defined")]
    UnknownParent { label: String, round: u64, parent: u32 },
    #[error("step {step}: party {party} is outside the committee")]
    UnknownParty { step: usize, party: u32 },
    #[error("step {step}: delivering {label} to party {party}: {source}")]
    Delivery { step: usize, party: u32, label: String, source: DagError },
}

const BUNDLED: [(&str, &str); 5] = [
    ("fig2", include_str!("../../fixtures/fig2.toml")),
    ("fig3", include_str!("../../fixtures/fig3.toml")),
    ("fig4", include_str!("../../fixtures/fig4.toml")),
    ("fig5", include_str!("../../fixtures/fig5.toml")),
    ("weak_threshold", include_str!("../../fixtures/weak_threshold.toml")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

pub fn bundled(name: &str) -> Option<Fixture> {
    let (_, text) = BUNDLED.iter().find(|(n, _)| *n == name)?;
    Some(Fixture::parse(text).expect("bundled fixtures parse"))
}

/// The fixture's vertices, materialized and indexed by label.
pub struct FixtureDag {
    pub committee: Committee,
    pub vertices: BTreeMap<(u64, u32), Arc<Vertex>>,
}

impl FixtureDag {
    pub fn get(&self, label: &str) -> Option<&Arc<Vertex>> {
        let (round, source) = parse_label(label)?;
        self.vertices.get(&(round, source?))
    }

    /// Expands a delivery entry into vertices.
    fn expand(&self, label: &str) -> Result<Vec<Arc<Vertex>>, FixtureError> {
        let unknown = || FixtureError::UnknownLabel(label.to_string());
        match parse_label(label).ok_or_else(unknown)? {
            (round, Some(source)) => Ok(vec![Arc::clone(self.vertices.get(&(round, source)).ok_or_else(unknown)?)]),
            (round, None) => {
                let all: Vec<_> = self.vertices.range((round, 0)..=(round, u32::MAX)).map(|(_, v)| Arc::clone(v)).collect();
                if all.is_empty() {
                    return Err(unknown());
                }
                Ok(all)
            }
        }
    }
}

/// `r3/p1` → `(3, Some(1))`, `r3/*` → `(3, None)`.
fn parse_label(label: &str) -> Option<(u64, Option<u32>)> {
    let (round, source) = label.strip_prefix('r')?.split_once('/')?;
    let round = round.parse().ok()?;
    if source == "*" {
        return Some((round, None));
    }
    Some((round, Some(source.strip_prefix('p')?.parse().ok()?)))
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        toml::from_str(text).map_err(|e| FixtureError::Parse(e.to_string()))
    }

    pub fn committee(&self) -> Result<Committee, FixtureError> {
        Committee::new(self.n, self.f).map_err(|_| FixtureError::Committee { n: self.n, f: self.f })
    }

    pub fn build(&self) -> Result<FixtureDag, FixtureError> {
        let committee = self.committee()?;
        let mut vertices: BTreeMap<(u64, u32), Arc<Vertex>> = BTreeMap::new();
        for p in 0..self.n as u32 {
            vertices.insert((0, p), Arc::new(Vertex::genesis(PartyId(p))));
        }
        let mut defs: Vec<_> = self.vertices.iter().collect();
        defs.sort_by_key(|v| (v.round, v.source));
        for def in defs {
            let label = format!("r{}/p{}", def.round, def.source);
            let mut edges = Vec::new();
            for &parent in &def.edges {
                let key = (def.round.saturating_sub(1), parent);
                let v = vertices.get(&key).ok_or(FixtureError::UnknownParent {
                    label: label.clone(),
                    round: key.0,
                    parent,
                })?;
                edges.push(v.id());
            }
            let (round, source) = (Round(def.round), PartyId(def.source));
            vertices.insert((def.round, def.source), Arc::new(Vertex::new(round, source, payload(source, round), edges)));
        }
        Ok(FixtureDag { committee, vertices })
    }

    /// Replays the schedule with every party honest. Each single delivery is
    /// one event at time `k` units for the `k`-th delivery.
    pub fn run(&self, variant: RuleVariant) -> Result<SimulationReport, FixtureError> {
        let dag = self.build()?;
        let committee = dag.committee;
        let mut replicas: Vec<Replica> = committee.parties().map(|p| Replica::new(p, committee, variant)).collect();
        let mut monitor = PrefixMonitor::default();
        let mut violations = Vec::new();
        let mut trace = Vec::new();
        let mut seq = 0u64;

        for (step, s) in self.steps.iter().enumerate() {
            let replica = replicas
                .get_mut(s.party as usize)
                .ok_or(FixtureError::UnknownParty { step, party: s.party })?;
            for label in &s.deliver {
                for vertex in dag.expand(label)? {
                    seq += 1;
                    let at = Stamp { time: SimTime(seq * SimTime::TICKS_PER_UNIT), seq };
                    let vlabel = vertex.label();
                    let before = replica.log().len();
                    let outcome = replica.insert(vertex, at).map_err(|source| FixtureError::Delivery {
                        step,
                        party: s.party,
                        label: vlabel.clone(),
                        source,
                    })?;
                    trace.push(format!("t={} seq={} ev=deliver to={} vertex={}", at.time, seq, s.party, vlabel));
                    if let Some(obs) = outcome.as_ref().and_then(|o| o.observation.as_ref()) {
                        trace.push(format!(
                            "t={} seq={} ev=commit party={} anchor=r{}/p{} votes={} fresh={}",
                            at.time, seq, s.party, obs.anchor_round.0, obs.anchor_source.0, obs.votes, obs.fresh
                        ));
                    }
                    if let Some(v) = monitor.observe(replica.id(), replica.log(), before, at) {
                        violations.push(v);
                    }
                }
            }
        }

        let parties = replicas
            .iter()
            .map(|r| {
                let round = r.view().highest_round().unwrap_or_default();
                PartyReport::new(r, None, round, false, Vec::new(), Vec::new(), |_, _| None)
            })
            .collect();
        let hash = {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            for line in &trace {
                h.update(line.as_bytes());
                h.update(b"\n");
            }
            hex::encode(h.finalize())
        };
        let rounds = dag.vertices.keys().map(|(r, _)| *r).max().unwrap_or(0);
        Ok(SimulationReport {
            n: committee.n(),
            f: committee.f(),
            rounds: Round(rounds),
            seed: 0,
            variant,
            gst: SimTime::ZERO,
            post_gst_bound: SimTime::ZERO,
            timeout: SimTime::ZERO,
            events: seq,
            final_time: SimTime(seq * SimTime::TICKS_PER_UNIT),
            quiescent: true,
            parties,
            equivocation_attempts: Vec::new(),
            violations,
            trace_hash: hash,
            trace,
            views: replicas.iter().map(|r| r.view().clone()).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(parse_label("r3/p1"), Some((3, Some(1))));
        assert_eq!(parse_label("r12/*"), Some((12, None)));
        assert_eq!(parse_label("3/1"), None);
        assert_eq!(parse_label("r3/q1"), None);
    }

    #[test]
    fn all_bundled_fixtures_build_and_run() {
        for name in bundled_names() {
            let fixture = bundled(name).unwrap();
            assert_eq!(fixture.name, name);
            let report = fixture.run(RuleVariant::Standard).unwrap();
            assert!(report.violations.is_empty(), "{name}: {:?}", report.violations);
        }
    }

    #[test]
    fn schedule_errors_are_reported() {
        let text = r#"
name = "bad"
description = "delivers a child before its parents"
n = 4
f = 1
[[vertex]]
round = 1
source = 0
edges = [0, 1, 2]
[[vertex]]
round = 2
source = 0
edges = [0, 0, 0]
[[step]]
party = 0
deliver = ["r2/p0"]
"#;
        let fixture = Fixture::parse(text).unwrap();
        // duplicate parents collapse to one edge
        assert!(matches!(
            fixture.run(RuleVariant::Standard),
            Err(FixtureError::Delivery { source: DagError::TooFewEdges { .. }, .. })
        ));
        let missing = text.replace("edges = [0, 0, 0]", "edges = [0, 1, 2]");
        assert!(matches!(Fixture::parse(&missing).unwrap().build(), Err(FixtureError::UnknownParent { .. })));
        let unknown = text.replace("\"r2/p0\"", "\"r9/p0\"");
        assert!(matches!(Fixture::parse(&unknown).unwrap().run(RuleVariant::Standard), Err(FixtureError::UnknownLabel(_))));
    }
}
