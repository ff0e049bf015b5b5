// SPDX-License-Identifier: Apache-2.0

//! Shared test helpers: random DAGs and brute-force oracles that never call
//! into the reachability code under test.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bullshark::harness::fixture::{self, FixtureDag};
use bullshark::{Committee, DagView, PartyId, Round, Vertex, VertexId};

#[derive(Debug)]
pub struct RandomDag {
    pub committee: Committee,
    /// Every vertex, genesis included, in a valid insertion order.
    pub vertices: Vec<Arc<Vertex>>,
    pub view: DagView,
}

/// Each round keeps a random subset of at least `n - f` parties; each
/// vertex links to a random subset of at least `n - f` vertices of the
/// previous round.
pub fn random_dag(seed: u64, n: usize, rounds: u64) -> RandomDag {
    let committee = Committee::new(n, (n - 1) / 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices: Vec<Arc<Vertex>> = (0..n as u32).map(|p| Arc::new(Vertex::genesis(PartyId(p)))).collect();
    let mut prev: Vec<VertexId> = vertices.iter().map(|v| v.id()).collect();
    for r in 1..=rounds {
        let mut parties: Vec<u32> = (0..n as u32).collect();
        parties.shuffle(&mut rng);
        parties.truncate(rng.gen_range(committee.quorum()..=n));
        parties.sort_unstable();
        let mut current = Vec::new();
        for p in parties {
            let k = rng.gen_range(committee.quorum()..=prev.len());
            let edges: Vec<VertexId> = prev.choose_multiple(&mut rng, k).copied().collect();
            let v = Arc::new(Vertex::new(Round(r), PartyId(p), format!("{seed}:{r}:{p}").into_bytes(), edges));
            current.push(v.id());
            vertices.push(v);
        }
        prev = current;
    }
    let mut view = DagView::new(committee);
    for v in &vertices {
        view.insert(Arc::clone(v)).unwrap();
    }
    RandomDag { committee, vertices, view }
}

fn adjacency(vertices: &[Arc<Vertex>]) -> HashMap<VertexId, Vec<VertexId>> {
    vertices.iter().map(|v| (v.id(), v.edges().iter().copied().collect())).collect()
}

/// Exhaustive depth-first search with no pruning.
pub fn dfs_path(vertices: &[Arc<Vertex>], from: &VertexId, to: &VertexId) -> bool {
    let adj = adjacency(vertices);
    if !adj.contains_key(from) {
        return false;
    }
    let mut seen = HashSet::new();
    let mut stack = vec![*from];
    while let Some(x) = stack.pop() {
        if x == *to {
            return true;
        }
        if seen.insert(x) {
            stack.extend(adj.get(&x).into_iter().flatten().copied());
        }
    }
    false
}

/// Reflexive transitive closure by Warshall's algorithm over vertex indices.
pub fn transitive_closure(vertices: &[Arc<Vertex>]) -> Vec<Vec<bool>> {
    let index: HashMap<VertexId, usize> = vertices.iter().enumerate().map(|(i, v)| (v.id(), i)).collect();
    let m = vertices.len();
    let mut reach = vec![vec![false; m]; m];
    for (i, v) in vertices.iter().enumerate() {
        reach[i][i] = true;
        for e in v.edges() {
            reach[i][index[e]] = true;
        }
    }
    for k in 0..m {
        let through = reach[k].clone();
        for row in reach.iter_mut().filter(|row| row[k]) {
            for (cell, &via) in row.iter_mut().zip(&through) {
                *cell |= via;
            }
        }
    }
    reach
}

/// Causal history from the closure, sorted by (round, source).
pub fn closure_history(vertices: &[Arc<Vertex>], closure: &[Vec<bool>], i: usize) -> Vec<VertexId> {
    let mut out: Vec<&Arc<Vertex>> = (0..vertices.len()).filter(|&j| closure[i][j]).map(|j| &vertices[j]).collect();
    out.sort_by_key(|v| (v.round(), v.source()));
    out.iter().map(|v| v.id()).collect()
}

/// Causal history by DFS, sorted by (round, source).
pub fn dfs_history(vertices: &[Arc<Vertex>], from: &VertexId) -> Vec<VertexId> {
    let mut out: Vec<&Arc<Vertex>> = vertices.iter().filter(|v| dfs_path(vertices, from, &v.id())).collect();
    out.sort_by_key(|v| (v.round(), v.source()));
    out.iter().map(|v| v.id()).collect()
}

/// The expected log after committing `anchors` in order: each anchor's
/// history minus what was already emitted, sorted by (round, source).
pub fn expected_log(vertices: &[Arc<Vertex>], anchors: &[VertexId]) -> Vec<VertexId> {
    let mut done = BTreeSet::new();
    let mut log = Vec::new();
    for a in anchors {
        for id in dfs_history(vertices, a) {
            if done.insert(id) {
                log.push(id);
            }
        }
    }
    log
}

pub fn fixture_dag(name: &str) -> FixtureDag {
    fixture::bundled(name).unwrap().build().unwrap()
}

pub fn fixture_vertices(dag: &FixtureDag) -> Vec<Arc<Vertex>> {
    dag.vertices.values().cloned().collect()
}

pub fn id(dag: &FixtureDag, label: &str) -> VertexId {
    dag.get(label).unwrap_or_else(|| panic!("no vertex {label}")).id()
}

/// Per-party insertion order recovered from a recorded trace: deliveries
/// that were inserted immediately plus vertices released from the buffer.
pub fn insertion_order(trace: &[String], n: usize) -> Vec<Vec<(u64, u32)>> {
    let mut order = vec![Vec::new(); n];
    for line in trace {
        let fields: HashMap<&str, &str> = line.split(' ').filter_map(|f| f.split_once('=')).collect();
        let inserted = match fields.get("ev") {
            Some(&"deliver") => fields.get("status").is_none_or(|s| *s == "ready"),
            Some(&"unbuffer") => true,
            _ => false,
        };
        if !inserted {
            continue;
        }
        let to: usize = fields["to"].parse().unwrap();
        let (r, p) = fields["vertex"].split_once('/').unwrap();
        order[to].push((r[1..].parse().unwrap(), p[1..].parse().unwrap()));
    }
    order
}

/// Re-runs the commit rule on `order` against the final view alone.
pub fn replay_log(view: &DagView, variant: bullshark::RuleVariant, order: &[(u64, u32)]) -> Vec<VertexId> {
    let mut state = bullshark::OrderingState::with_variant(*view.committee(), variant);
    for &(r, p) in order {
        let v = view.vertex_at(Round(r), PartyId(p)).expect("inserted vertex is in the final view");
        state.try_committing(view, v);
    }
    state.log().iter().map(|e| e.id).collect()
}
