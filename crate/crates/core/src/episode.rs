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

//! Per-dimension serial episode mining.
//!
//! Support is the fraction of sliding windows containing an occurrence.
//! For a window width of `w` granularity units and quantized timestamps
//! `q_min..=q_max`, the windows are the half-open intervals `[t, t + w)`
//! for every integer `t` in `q_min - w + 1 ..= q_max`, i.e.
//! `q_max - q_min + w` windows in total.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CanonicalEvent, Dimension, TemplateId};

#[derive(Debug, Error, PartialEq)]
pub enum EpisodeError {
    #[error("empty dimension: no events to mine")]
    EmptyDimension,
    #[error("window width {width}s must be at least one time unit ({granularity}s)")]
    BadWindow { width: f64, granularity: f64 },
    #[error("minimum support {0} must lie in (0, 1]")]
    BadMinSupport(f64),
    #[error("episode {labels:?} in {dim} has no prefix episode in the input")]
    MissingPrefix { dim: Dimension, labels: Vec<TemplateId> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub u32);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Sliding-window geometry shared by support counting and instance search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub width: f64,
    pub granularity: f64,
}

impl WindowSpec {
    pub fn new(width: f64, granularity: f64) -> Result<Self, EpisodeError> {
        let spec = WindowSpec { width, granularity };
        if granularity.is_nan() || granularity <= 0.0 || !width.is_finite() || spec.units() < 1 {
            return Err(EpisodeError::BadWindow { width, granularity });
        }
        Ok(spec)
    }

    /// Window width in granularity units.
    pub fn units(&self) -> i64 {
        (self.width / self.granularity).round() as i64
    }

    pub fn quantize(&self, ts: f64) -> i64 {
        (ts / self.granularity).floor() as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub dim: Dimension,
    pub labels: Vec<TemplateId>,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRule {
    pub rule_id: RuleId,
    pub dim: Dimension,
    pub antecedent: Vec<TemplateId>,
    pub consequent: TemplateId,
    pub support: f64,
    pub confidence: f64,
}

impl SequenceRule {
    /// The full episode: antecedent followed by consequent.
    pub fn labels(&self) -> Vec<TemplateId> {
        let mut labels = self.antecedent.clone();
        labels.push(self.consequent);
        labels
    }

    pub fn is_atomic(&self) -> bool {
        self.antecedent.is_empty()
    }
}

/// A minimal occurrence of a rule's full episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleInstance {
    pub rule_id: RuleId,
    pub dim: Dimension,
    /// Timestamp of the occurrence's last event; equals `span_end`.
    pub anchor: f64,
    pub span_start: f64,
    pub span_end: f64,
    /// Node of the occurrence's last event.
    pub node: String,
}

/// Splits a globally sorted stream into per-dimension streams, each still sorted.
pub fn split_by_dimension(events: &[CanonicalEvent]) -> BTreeMap<Dimension, Vec<CanonicalEvent>> {
    let mut out: BTreeMap<Dimension, Vec<CanonicalEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.dim).or_default().push(e.clone());
    }
    out
}

/// For every event that completes an occurrence of `labels`, the
/// occurrence ending there with the latest possible start, as
/// `(start_index, end_index)` in increasing end order.
fn tightest_occurrences(labels: &[TemplateId], events: &[CanonicalEvent]) -> Vec<(usize, usize)> {
    let k = labels.len();
    let mut latest: Vec<Option<usize>> = vec![None; k];
    let mut out = Vec::new();
    for (j, e) in events.iter().enumerate() {
        for i in (0..k).rev() {
            if labels[i] != e.template {
                continue;
            }
            let start = if i == 0 { Some(j) } else { latest[i - 1] };
            if let Some(s) = start {
                latest[i] = Some(s);
                if i == k - 1 {
                    out.push((s, j));
                }
            }
        }
    }
    out
}

pub fn count_window_support(labels: &[TemplateId], events: &[CanonicalEvent], window: &WindowSpec) -> Result<f64, EpisodeError> {
    let (first, last) = match (events.first(), events.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(EpisodeError::EmptyDimension),
    };
    let w = window.units();
    let total = window.quantize(last.ts) - window.quantize(first.ts) + w;
    if labels.is_empty() {
        return Ok(1.0);
    }

    // Window start t contains occurrence [s, e] iff q(e) - w + 1 <= t <= q(s).
    // Starts and ends of the tightest occurrences are both non-decreasing,
    // so a single sweep merges the intervals.
    let mut covered: i64 = 0;
    let mut current: Option<(i64, i64)> = None;
    for (s, e) in tightest_occurrences(labels, events) {
        let lo = window.quantize(events[e].ts) - w + 1;
        let hi = window.quantize(events[s].ts);
        if lo > hi {
            continue;
        }
        current = match current {
            Some((cl, ch)) if lo <= ch + 1 => Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                covered += ch - cl + 1;
                Some((lo, hi))
            }
            None => Some((lo, hi)),
        };
    }
    if let Some((cl, ch)) = current {
        covered += ch - cl + 1;
    }
    Ok(covered as f64 / total as f64)
}

/// Level-wise (Apriori-style) enumeration of every serial episode of
/// length `<= k_max` whose window support is at least `min_sup`.
pub fn mine_episodes(events: &[CanonicalEvent], window: &WindowSpec, min_sup: f64, k_max: usize) -> Result<Vec<Episode>, EpisodeError> {
    if !(min_sup > 0.0 && min_sup <= 1.0) {
        return Err(EpisodeError::BadMinSupport(min_sup));
    }
    let dim = events.first().ok_or(EpisodeError::EmptyDimension)?.dim;
    debug_assert!(events.iter().all(|e| e.dim == dim));

    let mut alphabet: Vec<TemplateId> = events.iter().map(|e| e.template).collect();
    alphabet.sort();
    alphabet.dedup();

    let count = |candidates: Vec<Vec<TemplateId>>| -> Result<Vec<Episode>, EpisodeError> {
        let supports: Vec<f64> = candidates
            .par_iter()
            .map(|c| count_window_support(c, events, window))
            .collect::<Result<_, _>>()?;
        Ok(candidates
            .into_iter()
            .zip(supports)
            .filter(|(_, s)| *s >= min_sup)
            .map(|(labels, support)| Episode { dim, labels, support })
            .collect())
    };

    let mut out = Vec::new();
    if k_max == 0 {
        return Ok(out);
    }
    let mut level = count(alphabet.iter().map(|&l| vec![l]).collect())?;
    let singles: Vec<TemplateId> = level.iter().map(|e| e.labels[0]).collect();
    for _ in 1..k_max {
        if level.is_empty() {
            break;
        }
        let frequent: HashSet<&[TemplateId]> = level.iter().map(|e| e.labels.as_slice()).collect();
        let mut candidates = Vec::new();
        for ep in &level {
            for &b in &singles {
                let mut cand = ep.labels.clone();
                cand.push(b);
                // every one-shorter sub-episode must itself be frequent
                let all_frequent = (0..cand.len()).all(|skip| {
                    let sub: Vec<TemplateId> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != skip)
                        .map(|(_, &l)| l)
                        .collect();
                    frequent.contains(sub.as_slice())
                });
                if all_frequent {
                    candidates.push(cand);
                }
            }
        }
        let next = count(candidates)?;
        out.append(&mut level);
        level = next;
    }
    out.append(&mut level);
    out.sort_by(|a, b| (a.labels.len(), &a.labels).cmp(&(b.labels.len(), &b.labels)));
    Ok(out)
}

/// Turns episodes (from any number of dimensions) into rules. Rules are
/// sorted by `(dim, length, labels)` and numbered in that order.
pub fn derive_rules(episodes: &[Episode], min_conf: f64) -> Result<Vec<SequenceRule>, EpisodeError> {
    let support: HashMap<(Dimension, &[TemplateId]), f64> =
        episodes.iter().map(|e| ((e.dim, e.labels.as_slice()), e.support)).collect();
    let mut sorted: Vec<&Episode> = episodes.iter().filter(|e| !e.labels.is_empty()).collect();
    sorted.sort_by(|a, b| (a.dim, a.labels.len(), &a.labels).cmp(&(b.dim, b.labels.len(), &b.labels)));

    let mut rules = Vec::new();
    for ep in sorted {
        let (consequent, antecedent) = ep.labels.split_last().expect("non-empty");
        let confidence = if antecedent.is_empty() {
            1.0
        } else {
            let prefix = support
                .get(&(ep.dim, antecedent))
                .ok_or_else(|| EpisodeError::MissingPrefix {
                    dim: ep.dim,
                    labels: ep.labels.clone(),
                })?;
            if *prefix > 0.0 {
                ep.support / prefix
            } else {
                0.0
            }
        };
        if confidence < min_conf {
            continue;
        }
        rules.push(SequenceRule {
            rule_id: RuleId(rules.len() as u32),
            dim: ep.dim,
            antecedent: antecedent.to_vec(),
            consequent: *consequent,
            support: ep.support,
            confidence,
        });
    }
    Ok(rules)
}

/// Second pass over the data: every minimal occurrence of the rule's full
/// episode whose span is at most `max_span` seconds.
pub fn find_instances(rule: &SequenceRule, events: &[CanonicalEvent], max_span: f64) -> Vec<RuleInstance> {
    let labels = rule.labels();
    // (start ts, end ts, end index), strictly increasing in both times
    let mut kept: Vec<(f64, f64, usize)> = Vec::new();
    for (s, e) in tightest_occurrences(&labels, events) {
        let (ts_s, ts_e) = (events[s].ts, events[e].ts);
        match kept.last_mut() {
            Some(last) if ts_s == last.0 => {}
            Some(last) if ts_e == last.1 => *last = (ts_s, ts_e, e),
            _ => kept.push((ts_s, ts_e, e)),
        }
    }
    kept.into_iter()
        .filter(|(s, e, _)| e - s <= max_span)
        .map(|(s, e, idx)| RuleInstance {
            rule_id: rule.rule_id,
            dim: rule.dim,
            anchor: e,
            span_start: s,
            span_end: e,
            node: events[idx].node.clone(),
        })
        .collect()
}

/// Instances of every rule, ordered by `(anchor, dim, rule_id, node)`.
pub fn find_all_instances(rules: &[SequenceRule], by_dim: &BTreeMap<Dimension, Vec<CanonicalEvent>>, max_span: f64) -> Vec<RuleInstance> {
    let mut out: Vec<RuleInstance> = rules
        .par_iter()
        .flat_map_iter(|rule| {
            by_dim
                .get(&rule.dim)
                .map(|events| find_instances(rule, events, max_span))
                .unwrap_or_default()
        })
        .collect();
    out.sort_by(|a, b| {
        a.anchor
            .total_cmp(&b.anchor)
            .then_with(|| a.dim.cmp(&b.dim))
            .then_with(|| a.rule_id.cmp(&b.rule_id))
            .then_with(|| a.node.cmp(&b.node))
    });
    out
}
