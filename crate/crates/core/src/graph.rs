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

//! Correlation-window graphs over rule instances.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::WeightMode;
use crate::episode::{RuleId, RuleInstance, SequenceRule};
use crate::ingest::Dimension;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("edge {from}->{to} references a node outside 0..{nodes}")]
    NodeOutOfRange { from: usize, to: usize, nodes: usize },
    #[error("self loop on node {0}")]
    SelfLoop(usize),
    #[error("more than one edge between nodes {0} and {1}")]
    ParallelEdge(usize, usize),
    #[error("instance references unknown rule {dim}:{rule}")]
    UnknownRule { dim: Dimension, rule: RuleId },
}

/// Node label: the rule an instance belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Label {
    pub dim: Dimension,
    pub rule: RuleId,
}

impl Label {
    pub fn new(dim: Dimension, rule: RuleId) -> Self {
        Label { dim, rule }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.dim, self.rule)
    }
}

/// Whether the two instances an edge joins ran on the same host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeLabel {
    Same,
    Cross,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::Same => "same",
            EdgeLabel::Cross => "cross",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiEdge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

impl DiEdge {
    pub fn new(from: usize, to: usize, label: EdgeLabel) -> Self {
        DiEdge { from, to, label }
    }
}

/// A node-labeled, edge-labeled oriented graph: no self loops and at most
/// one arc between any two nodes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Digraph {
    pub labels: Vec<Label>,
    pub edges: Vec<DiEdge>,
}

impl Digraph {
    pub fn new(labels: Vec<Label>, edges: Vec<DiEdge>) -> Result<Self, GraphError> {
        let n = labels.len();
        let mut pairs = HashSet::new();
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(GraphError::NodeOutOfRange { from: e.from, to: e.to, nodes: n });
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e.from));
            }
            if !pairs.insert((e.from.min(e.to), e.from.max(e.to))) {
                return Err(GraphError::ParallelEdge(e.from, e.to));
            }
        }
        Ok(Digraph { labels, edges })
    }

    pub fn single(label: Label) -> Self {
        Digraph { labels: vec![label], edges: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Weakly connected components as sorted node lists, ordered by first node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.labels.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let root = find(&mut parent, v);
            groups.entry(root).or_default().push(v);
        }
        let mut out: Vec<Vec<usize>> = groups.into_values().collect();
        out.sort_by_key(|c| c[0]);
        out
    }

    pub fn is_connected(&self) -> bool {
        !self.labels.is_empty() && self.components().len() == 1
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.from == v).count()
    }

    /// The subgraph induced by keeping `keep` (in that order).
    pub fn induced(&self, keep: &[usize]) -> Digraph {
        let mut index = vec![usize::MAX; self.labels.len()];
        for (new, &old) in keep.iter().enumerate() {
            index[old] = new;
        }
        let labels = keep.iter().map(|&v| self.labels[v]).collect();
        let edges = self
            .edges
            .iter()
            .filter(|e| index[e.from] != usize::MAX && index[e.to] != usize::MAX)
            .map(|e| DiEdge::new(index[e.from], index[e.to], e.label))
            .collect();
        Digraph { labels, edges }
    }

    /// Copy without node `v` and its incident edges.
    pub fn without_node(&self, v: usize) -> Digraph {
        let keep: Vec<usize> = (0..self.labels.len()).filter(|&u| u != v).collect();
        self.induced(&keep)
    }

    /// Copy without edge `i`; node set unchanged.
    pub fn without_edge(&self, i: usize) -> Digraph {
        let mut g = self.clone();
        g.edges.remove(i);
        g
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Digraph {
        let mut labels = self.labels.clone();
        for (v, &p) in perm.iter().enumerate() {
            labels[p] = self.labels[v];
        }
        let edges = self
            .edges
            .iter()
            .map(|e| DiEdge::new(perm[e.from], perm[e.to], e.label))
            .collect();
        Digraph { labels, edges }
    }
}

/// Anything the subgraph matcher can search in.
pub trait LabeledGraph {
    fn node_count(&self) -> usize;
    fn label(&self, v: usize) -> Label;
    fn edge_list(&self) -> &[DiEdge];
}

impl LabeledGraph for Digraph {
    fn node_count(&self) -> usize {
        self.labels.len()
    }
    fn label(&self, v: usize) -> Label {
        self.labels[v]
    }
    fn edge_list(&self) -> &[DiEdge] {
        &self.edges
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowNode {
    pub label: Label,
    pub weight: f64,
    pub anchor: f64,
    pub host: String,
}

/// The DAG of rule instances inside one correlation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowGraph {
    pub window_index: u64,
    pub nodes: Vec<WindowNode>,
    pub edges: Vec<DiEdge>,
}

impl WindowGraph {
    pub fn digraph(&self) -> Digraph {
        Digraph {
            labels: self.nodes.iter().map(|n| n.label).collect(),
            edges: self.edges.clone(),
        }
    }
}

impl LabeledGraph for WindowGraph {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }
    fn label(&self, v: usize) -> Label {
        self.nodes[v].label
    }
    fn edge_list(&self) -> &[DiEdge] {
        &self.edges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphConfig {
    /// Tumbling correlation window width, seconds.
    pub corr_window: f64,
    /// Maximum anchor lag for an edge, seconds.
    pub max_lag: f64,
    pub weight_mode: WeightMode,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            corr_window: 300.0,
            max_lag: 120.0,
            weight_mode: WeightMode::Confidence,
        }
    }
}

pub fn rule_weight(rule: &SequenceRule, mode: WeightMode) -> f64 {
    match mode {
        WeightMode::Confidence => rule.confidence,
        WeightMode::Support => rule.support,
        WeightMode::Product => rule.confidence * rule.support,
    }
}

pub fn label_weights(rules: &[SequenceRule], mode: WeightMode) -> BTreeMap<Label, f64> {
    rules
        .iter()
        .map(|r| (Label::new(r.dim, r.rule_id), rule_weight(r, mode)))
        .collect()
}

/// Partitions instances into tumbling windows `[t0 + iC, t0 + (i+1)C)`
/// anchored at the earliest instance and builds one graph per non-empty
/// window. Duplicate labels within a window collapse onto the earliest
/// instance; `u -> v` whenever `0 < anchor(v) - anchor(u) <= max_lag`.
pub fn build_window_graphs(instances: &[RuleInstance], rules: &[SequenceRule], config: &GraphConfig) -> Result<Vec<WindowGraph>, GraphError> {
    let weights = label_weights(rules, config.weight_mode);
    let mut sorted: Vec<&RuleInstance> = instances.iter().collect();
    sorted.sort_by(|a, b| {
        a.anchor
            .total_cmp(&b.anchor)
            .then_with(|| a.dim.cmp(&b.dim))
            .then_with(|| a.rule_id.cmp(&b.rule_id))
            .then_with(|| a.node.cmp(&b.node))
    });
    let Some(first) = sorted.first() else {
        return Ok(Vec::new());
    };
    let t0 = first.anchor;

    let mut windows: BTreeMap<u64, Vec<WindowNode>> = BTreeMap::new();
    for inst in sorted {
        let label = Label::new(inst.dim, inst.rule_id);
        let weight = *weights.get(&label).ok_or(GraphError::UnknownRule { dim: inst.dim, rule: inst.rule_id })?;
        let index = ((inst.anchor - t0) / config.corr_window).floor() as u64;
        let nodes = windows.entry(index).or_default();
        if nodes.iter().any(|n| n.label == label) {
            continue;
        }
        nodes.push(WindowNode {
            label,
            weight,
            anchor: inst.anchor,
            host: inst.node.clone(),
        });
    }

    Ok(windows
        .into_iter()
        .map(|(window_index, nodes)| {
            let mut edges = Vec::new();
            for (u, a) in nodes.iter().enumerate() {
                for (v, b) in nodes.iter().enumerate().skip(u + 1) {
                    let lag = b.anchor - a.anchor;
                    if lag > 0.0 && lag <= config.max_lag {
                        let label = if a.host == b.host { EdgeLabel::Same } else { EdgeLabel::Cross };
                        edges.push(DiEdge::new(u, v, label));
                    }
                }
            }
            WindowGraph { window_index, nodes, edges }
        })
        .collect())
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// DOT for one labeled graph. `weights`, when given, become node tooltips.
pub fn to_dot(name: &str, graph: &Digraph, weights: Option<&[f64]>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(name));
    for (v, label) in graph.labels.iter().enumerate() {
        match weights.and_then(|w| w.get(v)) {
            Some(w) => {
                let _ = writeln!(out, "  n{v} [label=\"{label}\", tooltip=\"weight={w}\"];");
            }
            None => {
                let _ = writeln!(out, "  n{v} [label=\"{label}\"];");
            }
        }
    }
    for e in &graph.edges {
        let _ = writeln!(out, "  n{} -> n{} [label=\"{}\"];", e.from, e.to, e.label);
    }
    out.push_str("}\n");
    out
}

pub fn window_graph_to_dot(g: &WindowGraph) -> String {
    let weights: Vec<f64> = g.nodes.iter().map(|n| n.weight).collect();
    to_dot(&format!("window_{}", g.window_index), &g.digraph(), Some(&weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rule(id: u32, support: f64, confidence: f64) -> SequenceRule {
        SequenceRule {
            rule_id: RuleId(id),
            dim: Dimension::Event,
            antecedent: vec![],
            consequent: crate::ingest::TemplateId(id),
            support,
            confidence,
        }
    }

    fn inst(id: u32, anchor: f64, node: &str) -> RuleInstance {
        RuleInstance {
            rule_id: RuleId(id),
            dim: Dimension::Event,
            anchor,
            span_start: anchor,
            span_end: anchor,
            node: node.into(),
        }
    }

    fn cfg(c: f64, l: f64) -> GraphConfig {
        GraphConfig { corr_window: c, max_lag: l, weight_mode: WeightMode::Confidence }
    }

    #[test]
    fn two_nodes_cross_edge() {
        let rules = [rule(1, 0.5, 0.9), rule(2, 0.4, 0.8)];
        let graphs = build_window_graphs(&[inst(1, 2.0, "n1"), inst(2, 4.0, "n2")], &rules, &cfg(10.0, 5.0)).unwrap();
        assert_eq!(graphs.len(), 1);
        assert_eq!(graphs[0].nodes.len(), 2);
        assert_eq!(graphs[0].edges, vec![DiEdge::new(0, 1, EdgeLabel::Cross)]);
        assert_eq!(graphs[0].nodes[0].weight, 0.9);

        let graphs = build_window_graphs(&[inst(1, 2.0, "n1"), inst(2, 4.0, "n2")], &rules, &cfg(10.0, 1.0)).unwrap();
        assert_eq!(graphs[0].nodes.len(), 2);
        assert!(graphs[0].edges.is_empty());
    }

    #[test]
    fn duplicates_collapse_to_earliest() {
        let graphs = build_window_graphs(&[inst(1, 7.0, "b"), inst(1, 2.0, "a")], &[rule(1, 0.5, 1.0)], &cfg(10.0, 5.0)).unwrap();
        assert_eq!(graphs[0].nodes.len(), 1);
        assert_eq!((graphs[0].nodes[0].anchor, graphs[0].nodes[0].host.as_str()), (2.0, "a"));
    }

    #[test]
    fn empty_windows_are_skipped_and_equal_anchors_unlinked() {
        let rules = [rule(1, 0.5, 1.0), rule(2, 0.5, 1.0)];
        let graphs = build_window_graphs(&[inst(1, 0.0, "a"), inst(2, 0.0, "a"), inst(1, 35.0, "a")], &rules, &cfg(10.0, 5.0)).unwrap();
        assert_eq!(graphs.iter().map(|g| g.window_index).collect::<Vec<_>>(), vec![0, 3]);
        assert!(graphs[0].edges.is_empty());
    }

    #[test]
    fn unknown_rule_is_an_error() {
        assert!(build_window_graphs(&[inst(9, 0.0, "a")], &[rule(1, 0.5, 1.0)], &cfg(10.0, 5.0)).is_err());
    }

    #[test]
    fn digraph_validation() {
        let l = Label::new(Dimension::Event, RuleId(0));
        assert!(Digraph::new(vec![l, l], vec![DiEdge::new(0, 1, EdgeLabel::Same), DiEdge::new(1, 0, EdgeLabel::Same)]).is_err());
        assert!(Digraph::new(vec![l], vec![DiEdge::new(0, 0, EdgeLabel::Same)]).is_err());
        assert!(Digraph::new(vec![l], vec![DiEdge::new(0, 3, EdgeLabel::Same)]).is_err());
    }

    #[test]
    fn dot_output() {
        let l = |r| Label::new(Dimension::Status, RuleId(r));
        let g = Digraph::new(vec![l(0), l(1)], vec![DiEdge::new(0, 1, EdgeLabel::Cross)]).unwrap();
        let dot = to_dot("p", &g, Some(&[0.5, 1.0]));
        assert!(dot.contains("n0 [label=\"status:0\", tooltip=\"weight=0.5\"]"));
        assert!(dot.contains("n0 -> n1 [label=\"cross\"]"));
    }

    fn arb_instances() -> impl Strategy<Value = Vec<RuleInstance>> {
        proptest::collection::vec((0u32..4, 0u32..2000, 0usize..3), 0..40).prop_map(|raw| {
            raw.into_iter()
                .map(|(r, t, n)| inst(r, t as f64 * 0.5, ["a", "b", "c"][n]))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn window_graph_invariants(instances in arb_instances(), c in 5u32..200, lag in 1u32..200) {
            let c = c as f64;
            let l = (lag as f64).min(c);
            let rules: Vec<_> = (0..4).map(|i| rule(i, 0.1 * (i + 1) as f64, 1.0 - 0.1 * i as f64)).collect();
            let graphs = build_window_graphs(&instances, &rules, &cfg(c, l)).unwrap();
            let t0 = instances.iter().map(|i| i.anchor).fold(f64::INFINITY, f64::min);
            for g in &graphs {
                prop_assert!(!g.nodes.is_empty());
                let labels: HashSet<_> = g.nodes.iter().map(|n| n.label).collect();
                prop_assert_eq!(labels.len(), g.nodes.len());
                for e in &g.edges {
                    prop_assert!(g.nodes[e.from].anchor < g.nodes[e.to].anchor);
                }
                for n in &g.nodes {
                    prop_assert_eq!(((n.anchor - t0) / c).floor() as u64, g.window_index);
                }
                prop_assert!(Digraph::new(g.digraph().labels, g.edges.clone()).is_ok());
            }
            // partition: every instance's label shows up in its window's graph
            for i in &instances {
                let w = ((i.anchor - t0) / c).floor() as u64;
                let g = graphs.iter().find(|g| g.window_index == w).unwrap();
                prop_assert!(g.nodes.iter().any(|n| n.label == Label::new(i.dim, i.rule_id)));
            }
            // weight mode touches weights only
            let mut alt = cfg(c, l);
            alt.weight_mode = WeightMode::Product;
            let other = build_window_graphs(&instances, &rules, &alt).unwrap();
            prop_assert_eq!(graphs.len(), other.len());
            for (a, b) in graphs.iter().zip(&other) {
                prop_assert_eq!(&a.edges, &b.edges);
                prop_assert_eq!(a.digraph().labels, b.digraph().labels);
            }
        }
    }
}
