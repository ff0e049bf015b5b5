// SPDX-License-Identifier: Apache-2.0

//! Scenario files.
//!
//! A scenario is a TOML document with the keys `n`, `f`, `rounds`, `delay`,
//! `gst`, `timeout`, `byzantine`, `seed` and `checks`. Unknown keys are
//! rejected. Times are given in simulated units and stored with three
//! decimals.
//!
//! ```toml
//! n = 4
//! f = 1
//! rounds = 30
//! gst = 5.0
//! timeout = 10.0
//! seed = 7
//!
//! [delay]
//! kind = "uniform"
//! lo = 0.1
//! hi = 8.0
//! post_gst_bound = 1.0
//!
//! [[byzantine]]
//! party = 3
//! mode = "crash"
//! after_round = 6
//!
//! [checks]
//! safety = true
//! skip_soundness = true
//! liveness = false
//! ```

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dag::{Committee, PartyId, Round};
use crate::sim::{default_max_events, ByzantineBehavior, ByzantineMode, DelayDist, DelayModel, SimConfig};
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    Fixed,
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub kind: DelayKind,
    /// For `fixed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    /// For `uniform`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    pub post_gst_bound: f64,
}

impl Default for DelaySpec {
    fn default() -> Self {
        DelaySpec { kind: DelayKind::Fixed, delay: Some(1.0), lo: None, hi: None, post_gst_bound: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Crash,
    Silent,
    AvoidAnchorEdges,
    DelayOwnBroadcast,
    AttemptEquivocation,
}

pub const ALL_MODES: [ModeName; 5] = [
    ModeName::Crash,
    ModeName::Silent,
    ModeName::AvoidAnchorEdges,
    ModeName::DelayOwnBroadcast,
    ModeName::AttemptEquivocation,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ByzantineSpec {
    pub party: u32,
    pub mode: ModeName,
    /// For `crash`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after_round: Option<u64>,
    /// For `delay_own_broadcast`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    #[serde(default = "yes")]
    pub safety: bool,
    #[serde(default = "yes")]
    pub skip_soundness: bool,
    #[serde(default)]
    pub liveness: bool,
}

fn yes() -> bool {
    true
}

impl Default for Checks {
    fn default() -> Self {
        Checks { safety: true, skip_soundness: true, liveness: false }
    }
}

fn default_timeout() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub f: usize,
    pub rounds: u64,
    #[serde(default)]
    pub delay: DelaySpec,
    #[serde(default)]
    pub gst: f64,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default)]
    pub byzantine: Vec<ByzantineSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checks: Checks,
}

fn time_field(field: &str, units: f64) -> Result<SimTime, ConfigError> {
    SimTime::from_units(units).ok_or_else(|| invalid(field, format!("{units} is not a non-negative time")))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn committee(&self) -> Result<Committee, ConfigError> {
        Committee::new(self.n, self.f)
            .map_err(|_| invalid("f", format!("n={} f={} violates n >= 3f + 1", self.n, self.f)))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.to_sim_config().map(|_| ())
    }

    pub fn to_sim_config(&self) -> Result<SimConfig, ConfigError> {
        let committee = self.committee()?;
        if self.rounds < 2 {
            return Err(invalid("rounds", "need at least 2 rounds"));
        }
        let gst = time_field("gst", self.gst)?;
        let timeout = time_field("timeout", self.timeout)?;
        let d = &self.delay;
        let post_gst_bound = time_field("delay.post_gst_bound", d.post_gst_bound)?;
        let pre_gst = match d.kind {
            DelayKind::Fixed => {
                let delay = d.delay.ok_or_else(|| invalid("delay.delay", "required for kind = \"fixed\""))?;
                DelayDist::Fixed { delay: time_field("delay.delay", delay)? }
            }
            DelayKind::Uniform => {
                let lo = d.lo.ok_or_else(|| invalid("delay.lo", "required for kind = \"uniform\""))?;
                let hi = d.hi.ok_or_else(|| invalid("delay.hi", "required for kind = \"uniform\""))?;
                let (lo, hi) = (time_field("delay.lo", lo)?, time_field("delay.hi", hi)?);
                if lo > hi {
                    return Err(invalid("delay.lo", "must not exceed delay.hi"));
                }
                DelayDist::Uniform { lo, hi }
            }
        };

        let mut seen = BTreeSet::new();
        let mut byzantine = Vec::new();
        for (i, b) in self.byzantine.iter().enumerate() {
            let field = |name: &str| format!("byzantine[{i}].{name}");
            if b.party as usize >= self.n {
                return Err(invalid(field("party"), format!("party {} is not below n={}", b.party, self.n)));
            }
            if !seen.insert(b.party) {
                return Err(invalid(field("party"), format!("party {} listed twice", b.party)));
            }
            let mode = match b.mode {
                ModeName::Crash => ByzantineMode::Crash {
                    after_round: Round(b.after_round.ok_or_else(|| invalid(field("after_round"), "required for crash"))?),
                },
                ModeName::Silent => ByzantineMode::Silent,
                ModeName::AvoidAnchorEdges => ByzantineMode::AvoidAnchorEdges,
                ModeName::DelayOwnBroadcast => {
                    let amount = b.amount.ok_or_else(|| invalid(field("amount"), "required for delay_own_broadcast"))?;
                    ByzantineMode::DelayOwnBroadcast { amount: time_field(&field("amount"), amount)? }
                }
                ModeName::AttemptEquivocation => ByzantineMode::AttemptEquivocation,
            };
            byzantine.push(ByzantineBehavior { party: PartyId(b.party), mode });
        }
        if byzantine.len() > self.f {
            return Err(invalid("byzantine", format!("{} faulty parties exceed f={}", byzantine.len(), self.f)));
        }

        let mut config = SimConfig::new(committee, self.rounds);
        config.delay = DelayModel { pre_gst, post_gst_bound, gst };
        config.timeout = timeout;
        config.byzantine = byzantine;
        config.seed = self.seed;
        config.max_events = default_max_events(self.n, self.rounds);
        Ok(config)
    }

    /// All honest, synchronous from time zero, delays uniform in
    /// `[0.1, 1.0]` with bound 1, timeout 10, liveness checked.
    pub fn synchronous(n: usize, rounds: u64, seed: u64) -> Self {
        Scenario {
            n,
            f: (n - 1) / 3,
            rounds,
            delay: DelaySpec {
                kind: DelayKind::Uniform,
                delay: None,
                lo: Some(0.1),
                hi: Some(1.0),
                post_gst_bound: 1.0,
            },
            gst: 0.0,
            timeout: 10.0,
            byzantine: Vec::new(),
            seed,
            checks: Checks { safety: true, skip_soundness: true, liveness: true },
        }
    }

    /// A random adversarial scenario: `f = (n-1)/3` Byzantine parties with
    /// modes drawn from every behavior, heavy pre-GST delays and a random
    /// GST. Fully determined by `(n, rounds, seed)`.
    pub fn random(n: usize, rounds: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca1_ab1e_0000_0000 ^ ((n as u64) << 16));
        let f = (n - 1) / 3;
        let mut parties: Vec<u32> = (0..n as u32).collect();
        parties.shuffle(&mut rng);
        let byzantine = parties[..f]
            .iter()
            .map(|&party| {
                let mode = *ALL_MODES.choose(&mut rng).expect("non-empty");
                ByzantineSpec {
                    party,
                    mode,
                    after_round: (mode == ModeName::Crash).then(|| rng.gen_range(0..=rounds)),
                    amount: (mode == ModeName::DelayOwnBroadcast)
                        .then(|| f64::from(rng.gen_range(1..=400u32)) / 20.0),
                }
            })
            .collect();
        let lo = f64::from(rng.gen_range(0..=10u32)) / 20.0;
        let hi = f64::from(rng.gen_range(20..=500u32)) / 20.0;
        Scenario {
            n,
            f,
            rounds,
            delay: DelaySpec { kind: DelayKind::Uniform, delay: None, lo: Some(lo), hi: Some(hi), post_gst_bound: 1.0 },
            gst: f64::from(rng.gen_range(0..=1200u32)) / 20.0,
            timeout: f64::from(rng.gen_range(40..=240u32)) / 20.0,
            byzantine,
            seed,
            checks: Checks::default(),
        }
    }
}
