// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use bullshark::harness::fixture::bundled;
use bullshark::harness::{self, check_safety, check_skip_soundness, ModeName, Scenario, ALL_MODES};
use bullshark::sim::SimulationReport;
use bullshark::{Round, RuleVariant, VertexId};
use common::*;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn fixture(name: &str, variant: RuleVariant) -> (SimulationReport, Duration) {
    let start = Instant::now();
    let report = bundled(name).unwrap().run(variant).unwrap();
    (report, start.elapsed())
}

fn prefix_related(a: &[VertexId], b: &[VertexId]) -> bool {
    a.iter().zip(b).all(|(x, y)| x == y)
}

fn fig3() -> Result<String, String> {
    let dag = fixture_dag("fig3");
    let (a1, a2) = (id(&dag, "r2/p0"), id(&dag, "r4/p1"));
    let (report, took) = fixture("fig3", RuleVariant::Standard);
    for p in &report.parties {
        let c = p.commits.iter().find(|c| c.item.fresh).ok_or(format!("{} commits nothing", p.party))?;
        if c.item.anchor != a2 || c.item.votes != 3 {
            return Err(format!("{} committed {} with {} votes", p.party, c.item.anchor.short(), c.item.votes));
        }
        if p.commits.iter().any(|c| c.item.anchor == a1) {
            return Err(format!("{} committed A1 directly", p.party));
        }
    }
    if took >= Duration::from_secs(1) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("A2 committed with 3 votes at all 4 parties, A1 never directly ({took:.1?})"))
}

fn fig4() -> Result<String, String> {
    let dag = fixture_dag("fig4");
    let a1 = id(&dag, "r2/p0");
    let (report, took) = fixture("fig4", RuleVariant::Standard);
    let f = report.f;
    let at_p2 = report.parties[2].commits.iter().find(|c| c.item.anchor == a1 && c.item.fresh);
    match at_p2 {
        Some(c) if c.item.votes == f + 1 => {}
        Some(c) => return Err(format!("p2 committed A1 with {} votes", c.item.votes)),
        None => return Err("p2 did not commit A1".into()),
    }
    if report.parties[1].commits.iter().any(|c| c.item.anchor == a1) {
        return Err("p1 committed A1 directly".into());
    }
    let logs: Vec<Vec<VertexId>> = report.parties.iter().map(|p| p.log_ids()).collect();
    if !logs.iter().all(|l| prefix_related(l, &logs[0])) || !check_safety(&report).passed {
        return Err("logs are not prefix-consistent".into());
    }
    if !logs.iter().all(|l| l.contains(&a1)) {
        return Err("A1 missing from a final log".into());
    }
    if took >= Duration::from_secs(1) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("p2 commits A1 with {} = f+1 votes, p1 does not, logs prefix-consistent ({took:.1?})", f + 1))
}

fn fig5() -> Result<String, String> {
    let dag = fixture_dag("fig5");
    let (a1, a2, a3) = (id(&dag, "r2/p0"), id(&dag, "r4/p1"), id(&dag, "r6/p2"));
    let a1_history: BTreeSet<VertexId> = dfs_history(&fixture_vertices(&dag), &a1).into_iter().collect();
    let (report, took) = fixture("fig5", RuleVariant::Standard);
    for p in &report.parties {
        if !p.skips.iter().any(|s| s.item.round == Round(4)) {
            return Err(format!("{} did not skip A2", p.party));
        }
        if p.commits.iter().any(|c| c.item.anchor == a2) {
            return Err(format!("{} committed A2", p.party));
        }
        let log = p.log_ids();
        let pos = |x: &VertexId| log.iter().position(|y| y == x);
        match (pos(&a1), pos(&a3)) {
            (Some(i), Some(j)) if i < j => {}
            _ => return Err(format!("{} does not order A1 before A3", p.party)),
        }
        let boundary = log.iter().position(|x| !a1_history.contains(x)).unwrap_or(log.len());
        if log[..boundary].len() != a1_history.len() {
            return Err(format!("{} interleaves A3's history with A1's", p.party));
        }
    }
    if took >= Duration::from_secs(1) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("A2 skipped, A1 ordered before A3 at all 4 parties ({took:.1?})"))
}

fn criterion_fixtures() -> Verdict {
    let mut details = Vec::new();
    let mut passed = true;
    for (name, check) in [("fig3", fig3 as fn() -> _), ("fig4", fig4), ("fig5", fig5)] {
        match check() {
            Ok(d) => details.push(format!("{name}: {d}")),
            Err(e) => {
                passed = false;
                details.push(format!("{name}: {e}"));
            }
        }
    }
    verdict(passed, details.join("; "))
}

struct SweepRun {
    safety: bool,
    skip: bool,
    error: Option<String>,
    modes: Vec<ModeName>,
    skips: usize,
    walked: usize,
}

/// Prefix agreement and skip soundness recomputed from the report, next to
/// the library checkers.
fn sweep_one(n: usize, seed: u64) -> SweepRun {
    let scenario = Scenario::random(n, 30, seed);
    let modes = scenario.byzantine.iter().map(|b| b.mode).collect();
    let report = match harness::run_scenario(&scenario, RuleVariant::Standard, false) {
        Ok(o) => o.report,
        Err(e) => {
            let error = Some(format!("n={n} seed={seed}: {e}"));
            return SweepRun { safety: false, skip: false, error, modes, skips: 0, walked: 0 };
        }
    };
    let logs: Vec<Vec<VertexId>> = report.honest().map(|p| p.log_ids()).collect();
    let own_safety = logs.iter().all(|a| logs.iter().all(|b| prefix_related(a, b)));
    let committed: BTreeSet<Round> = report.honest().flat_map(|p| p.commits.iter().map(|c| c.item.anchor_round)).collect();
    let own_skip = report.honest().all(|p| p.skips.iter().all(|s| !committed.contains(&s.item.round)));
    let integrity = harness::check_integrity(&report);
    SweepRun {
        safety: own_safety && check_safety(&report).passed,
        skip: own_skip && check_skip_soundness(&report).passed,
        error: (!integrity.passed).then(|| format!("n={n} seed={seed}: {}", integrity.detail)),
        modes,
        skips: report.honest().map(|p| p.skips.len()).sum(),
        walked: report.honest().map(|p| p.latencies.iter().filter(|l| !l.direct).count()).sum(),
    }
}

fn criterion_sweep() -> Verdict {
    let start = Instant::now();
    let jobs: Vec<(usize, u64)> = [4, 7, 10].iter().flat_map(|&n| (0..1000).map(move |s| (n, s))).collect();
    let runs: Vec<SweepRun> = jobs.par_iter().map(|&(n, s)| sweep_one(n, s)).collect();
    let took = start.elapsed();
    let safety = runs.iter().filter(|r| !r.safety).count();
    let skip = runs.iter().filter(|r| !r.skip).count();
    let errors: Vec<&String> = runs.iter().filter_map(|r| r.error.as_ref()).collect();
    let mut modes: BTreeMap<ModeName, usize> = BTreeMap::new();
    for m in runs.iter().flat_map(|r| &r.modes) {
        *modes.entry(*m).or_default() += 1;
    }
    let all_modes = ALL_MODES.iter().all(|m| modes.contains_key(m));
    let passed = safety == 0 && skip == 0 && errors.is_empty() && all_modes && took < Duration::from_secs(300);
    let mut detail = format!(
        "{} runs (n=4,7,10 x 1000 seeds, 30 rounds): {safety} safety, {skip} skip-soundness violations, {} integrity errors; {} skips, {} anchors ordered by walking back; modes {:?}, {:.1}s",
        runs.len(),
        errors.len(),
        runs.iter().map(|r| r.skips).sum::<usize>(),
        runs.iter().map(|r| r.walked).sum::<usize>(),
        modes,
        took.as_secs_f64()
    );
    if let Some(e) = errors.first() {
        detail.push_str(&format!("; first error {e}"));
    }
    verdict(passed, detail)
}

fn criterion_oracles() -> Verdict {
    let mut pairs = 0usize;
    let mut mismatches = Vec::new();
    let dags = 120;
    for seed in 0..dags {
        let n = 4 + (seed % 4) as usize;
        let rounds = 1 + seed % 10;
        let dag = random_dag(1_000 + seed, n, rounds);
        let closure = transitive_closure(&dag.vertices);
        for (i, v) in dag.vertices.iter().enumerate() {
            let reachable: BTreeSet<VertexId> = dfs_history(&dag.vertices, &v.id()).into_iter().collect();
            for u in &dag.vertices {
                pairs += 1;
                if dag.view.path(&v.id(), &u.id()) != reachable.contains(&u.id()) {
                    mismatches.push(format!("seed {seed}: path({}, {})", v.label(), u.label()));
                }
            }
            let history: Vec<VertexId> = dag.view.causal_history(&v.id()).iter().map(|x| x.id()).collect();
            if history != closure_history(&dag.vertices, &closure, i) {
                mismatches.push(format!("seed {seed}: causal_history({})", v.label()));
            }
        }
    }
    let mut detail = format!("{dags} DAGs (n=4..7, 1..10 rounds), {pairs} vertex pairs, {} mismatches", mismatches.len());
    if let Some(m) = mismatches.first() {
        detail.push_str(&format!("; first {m}"));
    }
    verdict(mismatches.is_empty(), detail)
}

fn criterion_liveness() -> Verdict {
    let mut anchors = 0;
    let mut even_timeouts = 0;
    let mut problems = Vec::new();
    for seed in 0..100u64 {
        let n = [4, 7, 10][seed as usize % 3];
        let rounds = 20;
        let report = match harness::run_scenario(&Scenario::synchronous(n, rounds, seed), RuleVariant::Standard, false) {
            Ok(o) => o.report,
            Err(e) => {
                problems.push(format!("seed {seed}: {e}"));
                continue;
            }
        };
        for p in report.honest() {
            even_timeouts += p.timeouts.iter().filter(|t| t.round.is_even()).count();
            for r in (2..=rounds - 2).step_by(2) {
                match p.latencies.iter().find(|l| l.anchor_round == Round(r)) {
                    Some(l) if l.rounds == 2 && l.direct => anchors += 1,
                    Some(l) => problems.push(format!("seed {seed} {} round {r}: latency {} rounds", p.party, l.rounds)),
                    None => problems.push(format!("seed {seed} {} never ordered the round {r} anchor", p.party)),
                }
            }
        }
    }
    let mut detail = format!(
        "100 all-honest runs (n=4,7,10, 20 rounds): {anchors} anchor commits at exactly 2 rounds, {} exceptions, {even_timeouts} even-round timeouts",
        problems.len()
    );
    if let Some(p) = problems.first() {
        detail.push_str(&format!("; first {p}"));
    }
    verdict(problems.is_empty() && even_timeouts == 0 && anchors > 0, detail)
}

fn digest(report: &SimulationReport) -> (String, String) {
    let mut trace = Sha256::new();
    for line in &report.trace {
        trace.update(line.as_bytes());
        trace.update(b"\n");
    }
    (hex::encode(trace.finalize()), hex::encode(Sha256::digest(report.to_json().as_bytes())))
}

fn criterion_determinism() -> Verdict {
    let mut scenarios: Vec<Scenario> = (0..12).map(|s| Scenario::random([4, 7, 10][s % 3], 24, 500 + s as u64)).collect();
    scenarios.extend((0..8).map(|s| Scenario::synchronous([4, 7][s % 2], 16, 900 + s as u64)));
    let first: Vec<_> = scenarios
        .iter()
        .map(|s| harness::run_scenario(s, RuleVariant::Standard, true).map(|o| o.report))
        .collect();
    // second pass in reverse order on the thread pool
    let second: Vec<_> = scenarios
        .par_iter()
        .rev()
        .map(|s| harness::run_scenario(s, RuleVariant::Standard, true).map(|o| o.report))
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let mut mismatches = Vec::new();
    for (i, (a, b)) in first.iter().zip(&second).enumerate() {
        let (Ok(a), Ok(b)) = (a, b) else {
            mismatches.push(format!("scenario {i} failed to run"));
            continue;
        };
        let (da, db) = (digest(a), digest(b));
        if da != db || da.0 != a.trace_hash || a.trace.is_empty() {
            mismatches.push(format!("scenario {i} (seed {})", scenarios[i].seed));
        }
    }
    let mut detail = format!("{} scenarios run twice, trace and report SHA-256 compared: {} mismatches", scenarios.len(), mismatches.len());
    if let Some(m) = mismatches.first() {
        detail.push_str(&format!("; first {m}"));
    }
    verdict(mismatches.is_empty(), detail)
}

fn criterion_negative() -> Verdict {
    let (standard4, _) = fixture("fig4", RuleVariant::Standard);
    let (broken4, _) = fixture("fig4", RuleVariant::NoWalkBack);
    let (standard_w, _) = fixture("weak_threshold", RuleVariant::Standard);
    let (weak_w, _) = fixture("weak_threshold", RuleVariant::WeakThreshold);
    let no_walk = check_safety(&broken4);
    let weak = check_skip_soundness(&weak_w);
    let controls = check_safety(&standard4).passed && check_skip_soundness(&standard_w).passed;
    verdict(
        !no_walk.passed && !weak.passed && controls,
        format!(
            "no-walk-back on fig4: safety {} ({}); f-vote threshold: skip-soundness {} ({}); standard rule on both schedules passes: {controls}",
            if no_walk.passed { "PASS" } else { "FAIL" },
            no_walk.detail,
            if weak.passed { "PASS" } else { "FAIL" },
            weak.detail
        ),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 6] = [
        ("1 fixture reproduction", criterion_fixtures),
        ("2 safety sweep", criterion_sweep),
        ("3 oracle equivalence", criterion_oracles),
        ("4 liveness", criterion_liveness),
        ("5 determinism", criterion_determinism),
        ("6 negative self-tests", criterion_negative),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let v = run();
        println!("{} [{name}] {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        if !v.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
