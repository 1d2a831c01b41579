// Copyright 2026 The logdim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Seeded synthetic multi-dimension logs with planted cause/effect chains.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with the scenario
//! seed and consumed in a fixed order: background streams (in declaration
//! order, node by node), then chains. The same spec and seed therefore
//! give byte-identical output on every platform.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{mask_message, Dimension};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

/// A background message stream. `msg` may contain `{num}`, `{ip}` and
/// `{hex}` placeholders, filled in fresh for every event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Background {
    pub dim: Dimension,
    pub msg: String,
    /// Events per hour per node.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainEnd {
    pub dim: Dimension,
    pub msg: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub trigger: ChainEnd,
    pub effect: ChainEnd,
    pub probability: f64,
    /// Effect lag bounds in seconds, inclusive.
    pub lag: [f64; 2],
    /// Triggers per hour.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    /// Seconds.
    pub duration: f64,
    pub nodes: Vec<String>,
    #[serde(default)]
    pub background: Vec<Background>,
    #[serde(default)]
    pub chains: Vec<Chain>,
    #[serde(default)]
    pub seed: u64,
}

/// One line of the generated log, in the ingest JSON Lines schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthEvent {
    pub ts: f64,
    pub node: String,
    pub dim: Dimension,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub ts: f64,
    pub node: String,
    pub dim: Dimension,
    /// Masked form of the emitted message.
    pub template: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub chain: usize,
    pub trigger: PlantedEvent,
    pub effect: PlantedEvent,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    /// Sorted by (ts, node, dim, msg).
    pub events: Vec<SynthEvent>,
    /// Every trigger that got its effect, in trigger order per chain.
    pub pairs: Vec<PlantedPair>,
    /// Trigger count per chain.
    pub triggers: Vec<usize>,
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        let spec: ScenarioSpec = toml::from_str(text).map_err(|e| SynthError::Parse(e.message().to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Every violated constraint, not just the first.
    pub fn validate(&self) -> Result<(), SynthError> {
        let mut errs = Vec::new();
        if !(self.duration.is_finite() && self.duration > 0.0) {
            errs.push(format!("duration must be positive, got {}", self.duration));
        }
        if self.nodes.is_empty() {
            errs.push("nodes must not be empty".to_string());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if self.nodes[..i].contains(n) {
                errs.push(format!("duplicate node `{n}`"));
            }
        }
        for (i, b) in self.background.iter().enumerate() {
            if !(b.rate.is_finite() && b.rate >= 0.0) {
                errs.push(format!("background[{i}].rate must be >= 0, got {}", b.rate));
            }
        }
        for (i, c) in self.chains.iter().enumerate() {
            if !(0.0..=1.0).contains(&c.probability) {
                errs.push(format!("chains[{i}].probability must be in [0, 1], got {}", c.probability));
            }
            let [a, b] = c.lag;
            if !(a.is_finite() && b.is_finite() && 0.0 <= a && a <= b) {
                errs.push(format!("chains[{i}].lag must satisfy 0 <= a <= b, got [{a}, {b}]"));
            }
            if !(c.rate.is_finite() && c.rate >= 0.0) {
                errs.push(format!("chains[{i}].rate must be >= 0, got {}", c.rate));
            }
            for (end, e) in [("trigger", &c.trigger), ("effect", &c.effect)] {
                if !self.nodes.contains(&e.node) {
                    errs.push(format!("chains[{i}].{end}.node `{}` is not in nodes", e.node));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SynthError::Invalid(errs))
        }
    }

    /// Two-node configuration-change / degradation scenario with four
    /// chatty background streams. Nodes past the first two carry
    /// background only.
    pub fn config_degradation(node_count: usize, hours: f64, seed: u64) -> Self {
        let nodes: Vec<String> = (0..node_count.max(2))
            .map(|i| match i {
                0 => "node-a".to_string(),
                1 => "node-b".to_string(),
                _ => format!("node-{i:03}"),
            })
            .collect();
        let bg = |dim, msg: &str| Background { dim, msg: msg.to_string(), rate: 60.0 };
        ScenarioSpec {
            duration: hours * 3600.0,
            background: vec![
                bg(Dimension::Event, "session {num} opened from {ip}"),
                bg(Dimension::Status, "cpu load {num} pct"),
                bg(Dimension::Comm, "sent {num} bytes to {ip}"),
                bg(Dimension::Ras, "sensor {hex} reads {num} C"),
            ],
            chains: vec![Chain {
                trigger: ChainEnd {
                    dim: Dimension::Event,
                    msg: "config changed by admin in /etc/app/app.conf".to_string(),
                    node: nodes[0].clone(),
                },
                effect: ChainEnd {
                    dim: Dimension::Status,
                    msg: "perf degraded latency {num} ms".to_string(),
                    node: nodes[1].clone(),
                },
                probability: 0.8,
                lag: [10.0, 60.0],
                rate: 12.0,
            }],
            nodes,
            seed,
        }
    }
}

/// Masked template every rendering of a scenario message maps to.
pub fn template_of(msg: &str) -> String {
    let sample = msg.replace("{num}", "7").replace("{ip}", "10.0.0.1").replace("{hex}", "0x0000beef");
    mask_message(&sample)
}

fn render(msg: &str, rng: &mut ChaCha8Rng) -> String {
    let mut out = msg.to_string();
    while let Some(i) = out.find("{num}") {
        out.replace_range(i..i + 5, &rng.random_range(0..10_000u32).to_string());
    }
    while let Some(i) = out.find("{ip}") {
        let ip = format!("10.{}.{}.{}", rng.random_range(0..=255u8), rng.random_range(0..=255u8), rng.random_range(1..=254u8));
        out.replace_range(i..i + 4, &ip);
    }
    while let Some(i) = out.find("{hex}") {
        out.replace_range(i..i + 5, &format!("0x{:08x}", rng.random::<u32>()));
    }
    out
}

/// Millisecond resolution keeps the log readable and exact in JSON.
fn ms(ts: f64) -> f64 {
    (ts * 1000.0).round() / 1000.0
}

pub fn generate(spec: &ScenarioSpec) -> Result<Generated, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events = Vec::new();

    for b in &spec.background {
        if b.rate == 0.0 {
            continue;
        }
        let gap = Exp::new(b.rate / 3600.0).expect("positive rate");
        for node in &spec.nodes {
            let mut t = gap.sample(&mut rng);
            while t < spec.duration {
                events.push(SynthEvent { ts: ms(t), node: node.clone(), dim: b.dim, msg: render(&b.msg, &mut rng) });
                t += gap.sample(&mut rng);
            }
        }
    }

    // Triggers: a fixed count, one uniformly placed per equal time slot.
    let mut pairs = Vec::new();
    let mut triggers = Vec::with_capacity(spec.chains.len());
    for (ci, c) in spec.chains.iter().enumerate() {
        let count = (c.rate * spec.duration / 3600.0).round() as usize;
        triggers.push(count);
        let slot = spec.duration / count.max(1) as f64;
        for k in 0..count {
            let t = ms(slot * (k as f64 + rng.random::<f64>()));
            let msg = render(&c.trigger.msg, &mut rng);
            let trigger = PlantedEvent { ts: t, node: c.trigger.node.clone(), dim: c.trigger.dim, template: mask_message(&msg) };
            events.push(SynthEvent { ts: t, node: c.trigger.node.clone(), dim: c.trigger.dim, msg });
            if rng.random_bool(c.probability) {
                let [a, b] = c.lag;
                let lag = if a == b { a } else { rng.random_range(a..=b) };
                let te = ms(t + lag);
                let msg = render(&c.effect.msg, &mut rng);
                pairs.push(PlantedPair {
                    chain: ci,
                    trigger,
                    effect: PlantedEvent { ts: te, node: c.effect.node.clone(), dim: c.effect.dim, template: mask_message(&msg) },
                });
                events.push(SynthEvent { ts: te, node: c.effect.node.clone(), dim: c.effect.dim, msg });
            }
        }
    }

    events.sort_by(|a, b| {
        a.ts.total_cmp(&b.ts)
            .then_with(|| a.node.cmp(&b.node))
            .then_with(|| a.dim.cmp(&b.dim))
            .then_with(|| a.msg.cmp(&b.msg))
    });
    Ok(Generated { events, pairs, triggers })
}

pub fn write_log_jsonl<W: Write>(events: &[SynthEvent], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_manifest_jsonl<W: Write>(pairs: &[PlantedPair], mut w: W) -> std::io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_manifest_jsonl(text: &str) -> Result<Vec<PlantedPair>, serde_json::Error> {
    text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect()
}
