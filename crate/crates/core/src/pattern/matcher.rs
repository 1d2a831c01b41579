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

//! Non-induced labeled subgraph monomorphism by backtracking.

use std::collections::HashMap;

use crate::graph::{Digraph, EdgeLabel, Label, LabeledGraph};

/// Host-side lookup tables, built once and reused across many patterns.
pub struct HostIndex {
    labels: Vec<Label>,
    arcs: HashMap<(usize, usize), EdgeLabel>,
    neighbors: Vec<Vec<usize>>,
    out_degree: Vec<usize>,
    in_degree: Vec<usize>,
}

impl HostIndex {
    pub fn new<G: LabeledGraph + ?Sized>(host: &G) -> Self {
        let n = host.node_count();
        let mut arcs = HashMap::new();
        let mut neighbors = vec![Vec::new(); n];
        let mut out_degree = vec![0; n];
        let mut in_degree = vec![0; n];
        for e in host.edge_list() {
            arcs.insert((e.from, e.to), e.label);
            neighbors[e.from].push(e.to);
            neighbors[e.to].push(e.from);
            out_degree[e.from] += 1;
            in_degree[e.to] += 1;
        }
        HostIndex {
            labels: (0..n).map(|v| host.label(v)).collect(),
            arcs,
            neighbors,
            out_degree,
            in_degree,
        }
    }

    /// True iff some injective map of pattern nodes onto host nodes keeps
    /// labels, arcs, arc directions and arc labels.
    pub fn contains(&self, pattern: &Digraph) -> bool {
        let n = pattern.node_count();
        if n == 0 {
            return true;
        }
        if n > self.labels.len() || pattern.edge_count() > self.arcs.len() {
            return false;
        }
        let order = match_order(pattern);
        let mut p_out = vec![0; n];
        let mut p_in = vec![0; n];
        // constraints against earlier nodes in the match order
        let position: Vec<usize> = {
            let mut pos = vec![0; n];
            for (k, &v) in order.iter().enumerate() {
                pos[v] = k;
            }
            pos
        };
        let mut back: Vec<Vec<(usize, bool, EdgeLabel)>> = vec![Vec::new(); n];
        for e in &pattern.edges {
            p_out[e.from] += 1;
            p_in[e.to] += 1;
            if position[e.from] < position[e.to] {
                back[e.to].push((e.from, false, e.label));
            } else {
                back[e.from].push((e.to, true, e.label));
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut used = vec![false; self.labels.len()];
        self.extend(pattern, &order, 0, &back, &p_out, &p_in, &mut map, &mut used)
    }

    #[allow(clippy::too_many_arguments)]
    fn extend(
        &self,
        pattern: &Digraph,
        order: &[usize],
        depth: usize,
        back: &[Vec<(usize, bool, EdgeLabel)>],
        p_out: &[usize],
        p_in: &[usize],
        map: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        let Some(&p) = order.get(depth) else {
            return true;
        };
        let fits = |h: usize, map: &[usize], used: &[bool]| -> bool {
            if used[h] || self.labels[h] != pattern.labels[p] || self.out_degree[h] < p_out[p] || self.in_degree[h] < p_in[p] {
                return false;
            }
            // (q, p_is_source, label): the arc between p and an already-mapped q
            back[p].iter().all(|&(q, p_is_source, label)| {
                let key = if p_is_source { (h, map[q]) } else { (map[q], h) };
                self.arcs.get(&key) == Some(&label)
            })
        };
        let candidates: Vec<usize> = match back[p].first() {
            Some(&(q, ..)) => self.neighbors[map[q]].clone(),
            None => (0..self.labels.len()).collect(),
        };
        for h in candidates {
            if !fits(h, map, used) {
                continue;
            }
            map[p] = h;
            used[h] = true;
            if self.extend(pattern, order, depth + 1, back, p_out, p_in, map, used) {
                return true;
            }
            used[h] = false;
            map[p] = usize::MAX;
        }
        false
    }
}

/// Breadth-first within each weak component so most nodes have an
/// already-placed neighbor to draw candidates from.
fn match_order(pattern: &Digraph) -> Vec<usize> {
    let n = pattern.node_count();
    let mut adj = vec![Vec::new(); n];
    for e in &pattern.edges {
        adj[e.from].push(e.to);
        adj[e.to].push(e.from);
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    order
}

pub fn subgraph_contains<G: LabeledGraph + ?Sized>(host: &G, pattern: &Digraph) -> bool {
    HostIndex::new(host).contains(pattern)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::RuleId;
    use crate::graph::DiEdge;
    use crate::ingest::Dimension;
    use EdgeLabel::*;

    fn g(labels: &[u32], edges: &[(usize, usize, EdgeLabel)]) -> Digraph {
        Digraph::new(
            labels.iter().map(|&r| Label::new(Dimension::Event, RuleId(r))).collect(),
            edges.iter().map(|&(a, b, e)| DiEdge::new(a, b, e)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_node_pattern() {
        assert!(subgraph_contains(&g(&[0, 1], &[]), &g(&[1], &[])));
        assert!(!subgraph_contains(&g(&[0, 2], &[]), &g(&[1], &[])));
    }

    #[test]
    fn edge_label_must_match() {
        assert!(!subgraph_contains(&g(&[1, 2], &[(0, 1, Same)]), &g(&[1, 2], &[(0, 1, Cross)])));
        assert!(subgraph_contains(&g(&[1, 2], &[(0, 1, Cross)]), &g(&[1, 2], &[(0, 1, Cross)])));
    }

    #[test]
    fn direction_must_match() {
        assert!(!subgraph_contains(&g(&[1, 2], &[(1, 0, Cross)]), &g(&[1, 2], &[(0, 1, Cross)])));
    }

    #[test]
    fn non_induced() {
        let host = g(&[1, 2, 3], &[(0, 1, Cross), (1, 2, Cross), (0, 2, Same)]);
        assert!(subgraph_contains(&host, &g(&[1, 2], &[(0, 1, Cross)])));
        assert!(subgraph_contains(&host, &g(&[1, 3], &[])));
    }

    #[test]
    fn injective() {
        assert!(!subgraph_contains(&g(&[1], &[]), &g(&[1, 1], &[])));
        assert!(subgraph_contains(&g(&[1, 1], &[]), &g(&[1, 1], &[])));
    }

    #[test]
    fn disconnected_pattern_needs_both_parts_at_once() {
        let host = g(&[1, 2, 3], &[(0, 1, Same)]);
        assert!(subgraph_contains(&host, &g(&[1, 2, 3], &[(0, 1, Same)])));
        assert!(!subgraph_contains(&host, &g(&[1, 2, 1], &[(0, 1, Same)])));
    }
}
