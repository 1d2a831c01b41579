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

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::config::{Combiner, WeightMode};
use crate::episode::SequenceRule;
use crate::graph::{label_weights, Digraph, Label, LabeledGraph};

use super::matcher::HostIndex;
use super::miner::support_count;
use super::{FailurePattern, MinedPattern, PatternError};

/// The sink (no outgoing arcs) with the greatest label; ties go to the
/// highest node index.
pub fn consequent_node(graph: &Digraph) -> Option<usize> {
    (0..graph.node_count())
        .filter(|&v| graph.out_degree(v) == 0)
        .max_by_key(|&v| (graph.labels[v], v))
}

fn structural(pattern: &Digraph, hosts: &[HostIndex], rule_confidence: &BTreeMap<Label, f64>) -> Result<f64, PatternError> {
    match pattern.node_count() {
        0 => return Err(PatternError::EmptyGraph),
        1 => {
            let label = pattern.labels[0];
            return rule_confidence.get(&label).copied().ok_or(PatternError::UnknownLabel(label));
        }
        _ => {}
    }
    let consequent = consequent_node(pattern).ok_or(PatternError::NoSink)?;
    let full = support_count(pattern, hosts);
    if full == 0 {
        return Err(PatternError::ZeroSupport);
    }
    let antecedent = pattern.without_node(consequent);
    if antecedent.is_empty() {
        return Err(PatternError::EmptyAntecedent);
    }
    // a disconnected antecedent counts only where all parts co-occur
    let reduced = support_count(&antecedent, hosts);
    Ok(full as f64 / reduced as f64)
}

/// support(pattern) / support(pattern without its consequent). A lone
/// node inherits its rule's confidence.
pub fn pattern_confidence<G: LabeledGraph>(pattern: &Digraph, graphs: &[G], rule_confidence: &BTreeMap<Label, f64>) -> Result<f64, PatternError> {
    let hosts: Vec<HostIndex> = graphs.iter().map(HostIndex::new).collect();
    structural(pattern, &hosts, rule_confidence)
}

pub fn knowledge_confidence(structural_confidence: f64, labels: &[Label], rule_confidence: &BTreeMap<Label, f64>, combiner: Combiner) -> Result<f64, PatternError> {
    let confidences: Vec<f64> = labels
        .iter()
        .map(|l| rule_confidence.get(l).copied().ok_or(PatternError::UnknownLabel(*l)))
        .collect::<Result<_, _>>()?;
    Ok(structural_confidence * combiner.combine(&confidences))
}

/// Attaches confidences and node weights to mined patterns.
pub fn score_patterns<G: LabeledGraph + Sync>(
    mined: Vec<MinedPattern>,
    graphs: &[G],
    rules: &[SequenceRule],
    weight_mode: WeightMode,
    combiner: Combiner,
) -> Result<Vec<FailurePattern>, PatternError> {
    let hosts: Vec<HostIndex> = graphs.iter().map(HostIndex::new).collect();
    let weights = label_weights(rules, weight_mode);
    let confidence: BTreeMap<Label, f64> = label_weights(rules, WeightMode::Confidence);
    mined
        .into_par_iter()
        .map(|m| {
            let structural_confidence = structural(&m.graph, &hosts, &confidence)?;
            let knowledge = knowledge_confidence(structural_confidence, &m.graph.labels, &confidence, combiner)?;
            let node_weights = m
                .graph
                .labels
                .iter()
                .map(|l| weights.get(l).copied().ok_or(PatternError::UnknownLabel(*l)))
                .collect::<Result<_, _>>()?;
            Ok(FailurePattern {
                code: m.code,
                graph: m.graph,
                weights: node_weights,
                support: m.support,
                weighted_support: m.weighted_support,
                structural_confidence,
                knowledge_confidence: knowledge,
                provenance: BTreeSet::from(["mined".to_string()]),
            })
        })
        .collect()
}
