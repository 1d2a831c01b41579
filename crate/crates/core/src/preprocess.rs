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

//! Repeated-event coalescing ("tupling") and noise removal.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::ingest::{CanonicalEvent, Dimension, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoalescePolicy {
    /// Seconds; a same-stream event within `gap` of the last kept one is merged into it.
    pub gap: f64,
}

impl Default for CoalescePolicy {
    fn default() -> Self {
        CoalescePolicy { gap: 5.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoisePolicy {
    pub blacklist: BTreeSet<TemplateId>,
    /// Events per hour per `(node, template)` above which the pair is dropped entirely.
    pub max_rate: Option<f64>,
    /// Trace duration the rate is measured against. Measured from the
    /// input when absent; pin it to keep repeated filtering stable.
    pub trace_hours: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChattyStream {
    pub node: String,
    pub template: TemplateId,
    pub events: u64,
    pub rate_per_hour: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub input_events: usize,
    pub coalesced_away: usize,
    pub blacklisted: usize,
    pub rate_dropped: usize,
    pub output_events: usize,
    pub trace_hours: f64,
    pub rate_check_skipped: bool,
    pub chatty: Vec<ChattyStream>,
}

/// Keeps the first event of every `(node, dim, template)` burst; later
/// events within `gap` seconds of the kept one add to its `count`.
pub fn coalesce(events: &[CanonicalEvent], policy: &CoalescePolicy) -> Vec<CanonicalEvent> {
    let mut out: Vec<CanonicalEvent> = Vec::with_capacity(events.len());
    let mut last_kept: HashMap<(&str, Dimension, TemplateId), usize> = HashMap::new();
    for e in events {
        let key = (e.node.as_str(), e.dim, e.template);
        if let Some(&i) = last_kept.get(&key) {
            if e.ts - out[i].ts <= policy.gap {
                out[i].count += e.count;
                continue;
            }
        }
        last_kept.insert(key, out.len());
        out.push(e.clone());
    }
    out
}

/// Duration between first and last event, in hours.
pub fn trace_hours(events: &[CanonicalEvent]) -> f64 {
    match (events.first(), events.last()) {
        (Some(first), Some(last)) => (last.ts - first.ts) / 3600.0,
        _ => 0.0,
    }
}

pub fn filter_noise(events: &[CanonicalEvent], policy: &NoisePolicy) -> (Vec<CanonicalEvent>, PreprocessReport) {
    let mut report = PreprocessReport {
        input_events: events.len(),
        ..Default::default()
    };
    let kept: Vec<&CanonicalEvent> = events
        .iter()
        .filter(|e| !policy.blacklist.contains(&e.template))
        .collect();
    report.blacklisted = events.len() - kept.len();

    let hours = policy.trace_hours.unwrap_or_else(|| trace_hours(events));
    report.trace_hours = hours;
    let mut chatty_keys: BTreeSet<(&str, TemplateId)> = BTreeSet::new();
    if let Some(max_rate) = policy.max_rate {
        if hours > 0.0 {
            let mut totals: BTreeMap<(&str, TemplateId), u64> = BTreeMap::new();
            for e in &kept {
                *totals.entry((e.node.as_str(), e.template)).or_default() += u64::from(e.count);
            }
            for ((node, template), n) in totals {
                let rate = n as f64 / hours;
                if rate > max_rate {
                    chatty_keys.insert((node, template));
                    report.chatty.push(ChattyStream {
                        node: node.to_string(),
                        template,
                        events: n,
                        rate_per_hour: rate,
                    });
                }
            }
        } else {
            report.rate_check_skipped = true;
        }
    }

    let out: Vec<CanonicalEvent> = kept
        .into_iter()
        .filter(|e| !chatty_keys.contains(&(e.node.as_str(), e.template)))
        .cloned()
        .collect();
    report.rate_dropped = events.len() - report.blacklisted - out.len();
    report.output_events = out.len();
    (out, report)
}

/// Coalesce, then filter. `trace_hours` in the noise policy is pinned to
/// the raw input's duration when not already set.
pub fn preprocess(events: &[CanonicalEvent], coalesce_policy: &CoalescePolicy, noise: &NoisePolicy) -> (Vec<CanonicalEvent>, PreprocessReport) {
    let mut noise = noise.clone();
    if noise.trace_hours.is_none() {
        noise.trace_hours = Some(trace_hours(events));
    }
    let coalesced = coalesce(events, coalesce_policy);
    let (out, mut report) = filter_noise(&coalesced, &noise);
    report.input_events = events.len();
    report.coalesced_away = events.len() - coalesced.len();
    (out, report)
}

/// One template id per line; blank lines and `#` comments are skipped.
pub fn read_blacklist<R: BufRead>(r: R) -> Result<BTreeSet<TemplateId>, String> {
    let mut out = BTreeSet::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let id: u32 = line
            .parse()
            .map_err(|_| format!("blacklist line {}: `{line}` is not a template id", i + 1))?;
        out.insert(TemplateId(id));
    }
    Ok(out)
}
