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

//! Minimum DFS codes for oriented, labeled graphs.
//!
//! This is the gSpan canonical form with one change: each code tuple
//! carries the arc direction relative to the traversal, so `a -> b` and
//! `b -> a` get different codes.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{DiEdge, Digraph, EdgeLabel, Label};

use super::PatternError;

/// Arc direction relative to the DFS traversal `i -> j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arrow {
    /// The arc runs from `i` to `j`.
    Out,
    /// The arc runs from `j` to `i`.
    In,
}

impl Arrow {
    pub fn flip(self) -> Arrow {
        match self {
            Arrow::Out => Arrow::In,
            Arrow::In => Arrow::Out,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DfsEdge {
    pub i: usize,
    pub j: usize,
    pub label_i: Label,
    pub arrow: Arrow,
    pub edge: EdgeLabel,
    pub label_j: Label,
}

impl DfsEdge {
    pub fn is_forward(&self) -> bool {
        self.i < self.j
    }

    fn label_tuple(&self) -> (Label, Arrow, EdgeLabel, Label) {
        (self.label_i, self.arrow, self.edge, self.label_j)
    }
}

/// The gSpan DFS-lexicographic order on code tuples.
pub fn gspan_cmp(a: &DfsEdge, b: &DfsEdge) -> Ordering {
    let by_index = match (a.is_forward(), b.is_forward()) {
        (true, true) => a.j.cmp(&b.j).then_with(|| b.i.cmp(&a.i)),
        (false, false) => a.i.cmp(&b.i).then_with(|| a.j.cmp(&b.j)),
        (false, true) => {
            if a.i < b.j {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
        (true, false) => {
            if a.j <= b.i {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
    };
    by_index.then_with(|| a.label_tuple().cmp(&b.label_tuple()))
}

/// A DFS code. `root` is the label of DFS index 0, which is all a
/// single-node graph has.
///
/// The derived `Ord` is a plain total order used for sorting output; the
/// canonical minimum is chosen with [`gspan_cmp`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DfsCode {
    pub root: Label,
    pub edges: Vec<DfsEdge>,
}

impl DfsCode {
    pub fn node_count(&self) -> usize {
        1 + self.edges.iter().filter(|e| e.is_forward()).count()
    }

    /// The graph this code describes, nodes numbered by DFS index.
    pub fn to_digraph(&self) -> Digraph {
        let mut labels = vec![self.root];
        let mut edges = Vec::with_capacity(self.edges.len());
        for e in &self.edges {
            if e.is_forward() {
                debug_assert_eq!(e.j, labels.len());
                labels.push(e.label_j);
            }
            edges.push(match e.arrow {
                Arrow::Out => DiEdge::new(e.i, e.j, e.edge),
                Arrow::In => DiEdge::new(e.j, e.i, e.edge),
            });
        }
        Digraph { labels, edges }
    }

    /// DFS indices from the root to the rightmost vertex.
    pub fn rightmost_path(&self) -> Vec<usize> {
        let mut path = vec![0];
        for e in self.edges.iter().filter(|e| e.is_forward()) {
            let keep = path.iter().position(|&v| v == e.i).expect("forward edge leaves the rightmost path");
            path.truncate(keep + 1);
            path.push(e.j);
        }
        path
    }
}

impl fmt::Display for DfsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.root)?;
        for e in &self.edges {
            match e.arrow {
                Arrow::Out => write!(f, " ({},{} {} -{}-> {})", e.i, e.j, e.label_i, e.edge, e.label_j)?,
                Arrow::In => write!(f, " ({},{} {} <-{}- {})", e.i, e.j, e.label_i, e.edge, e.label_j)?,
            }
        }
        Ok(())
    }
}

/// Undirected view with the arrow and label seen from each endpoint.
pub(crate) struct Adjacency {
    pub(crate) neighbors: Vec<Vec<(usize, Arrow, EdgeLabel, usize)>>,
}

impl Adjacency {
    pub(crate) fn new(node_count: usize, edges: &[DiEdge]) -> Self {
        let mut neighbors = vec![Vec::new(); node_count];
        for (k, e) in edges.iter().enumerate() {
            neighbors[e.from].push((e.to, Arrow::Out, e.label, k));
            neighbors[e.to].push((e.from, Arrow::In, e.label, k));
        }
        Adjacency { neighbors }
    }

    pub(crate) fn between(&self, u: usize, v: usize) -> Option<(Arrow, EdgeLabel, usize)> {
        self.neighbors[u]
            .iter()
            .find(|(w, ..)| *w == v)
            .map(|&(_, a, l, k)| (a, l, k))
    }
}

#[derive(Clone)]
struct Embedding {
    map: Vec<usize>,
    used: Vec<bool>,
}

/// The canonical (minimum) DFS code of a non-empty, weakly connected graph.
pub fn min_dfs_code(graph: &Digraph) -> Result<DfsCode, PatternError> {
    canonical_form(graph).map(|(code, _)| code)
}

/// The minimum DFS code together with one node map realizing it:
/// `map[k]` is the node of `graph` that gets DFS index `k`.
pub fn canonical_form(graph: &Digraph) -> Result<(DfsCode, Vec<usize>), PatternError> {
    if graph.is_empty() {
        return Err(PatternError::EmptyGraph);
    }
    if !graph.is_connected() {
        return Err(PatternError::Disconnected);
    }
    let labels = &graph.labels;
    if graph.edges.is_empty() {
        return Ok((DfsCode { root: labels[0], edges: Vec::new() }, vec![0]));
    }
    let adj = Adjacency::new(labels.len(), &graph.edges);

    // first edge: smallest label tuple over both traversal directions
    let mut best: Option<DfsEdge> = None;
    let mut embeddings: Vec<Embedding> = Vec::new();
    for (u, nbrs) in adj.neighbors.iter().enumerate() {
        for &(v, arrow, edge, k) in nbrs {
            let cand = DfsEdge { i: 0, j: 1, label_i: labels[u], arrow, edge, label_j: labels[v] };
            let ord = best.map_or(Ordering::Less, |b| gspan_cmp(&cand, &b));
            if ord == Ordering::Greater {
                continue;
            }
            if ord == Ordering::Less {
                best = Some(cand);
                embeddings.clear();
            }
            let mut used = vec![false; graph.edges.len()];
            used[k] = true;
            embeddings.push(Embedding { map: vec![u, v], used });
        }
    }
    let first = best.expect("graph has an edge");
    let mut code = DfsCode { root: first.label_i, edges: vec![first] };
    let mut path = vec![0, 1];

    while code.edges.len() < graph.edges.len() {
        let mut best: Option<DfsEdge> = None;
        let mut next: Vec<Embedding> = Vec::new();
        let rightmost = *path.last().unwrap();
        let new_index = code.node_count();
        for emb in &embeddings {
            let mut consider = |cand: DfsEdge, grown: Embedding| {
                let ord = best.map_or(Ordering::Less, |b| gspan_cmp(&cand, &b));
                if ord == Ordering::Greater {
                    return;
                }
                if ord == Ordering::Less {
                    best = Some(cand);
                    next.clear();
                }
                next.push(grown);
            };
            let r = emb.map[rightmost];
            for &j in &path[..path.len() - 1] {
                if let Some((arrow, edge, k)) = adj.between(r, emb.map[j]) {
                    if !emb.used[k] {
                        let cand = DfsEdge { i: rightmost, j, label_i: labels[r], arrow, edge, label_j: labels[emb.map[j]] };
                        let mut grown = emb.clone();
                        grown.used[k] = true;
                        consider(cand, grown);
                    }
                }
            }
            for &i in path.iter().rev() {
                let u = emb.map[i];
                for &(v, arrow, edge, k) in &adj.neighbors[u] {
                    if emb.map.contains(&v) {
                        continue;
                    }
                    let cand = DfsEdge { i, j: new_index, label_i: labels[u], arrow, edge, label_j: labels[v] };
                    let mut grown = emb.clone();
                    grown.map.push(v);
                    grown.used[k] = true;
                    consider(cand, grown);
                }
            }
        }
        let ext = best.expect("connected graph always has a rightmost extension until every edge is coded");
        if ext.is_forward() {
            let keep = path.iter().position(|&v| v == ext.i).unwrap();
            path.truncate(keep + 1);
            path.push(ext.j);
        }
        code.edges.push(ext);
        embeddings = next;
    }
    let map = embeddings.swap_remove(0).map;
    Ok((code, map))
}

/// True when `code` is the canonical code of the graph it describes.
pub fn is_min(code: &DfsCode) -> bool {
    min_dfs_code(&code.to_digraph()).is_ok_and(|m| m == *code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::RuleId;
    use crate::ingest::Dimension;

    fn l(r: u32) -> Label {
        Label::new(Dimension::Event, RuleId(r))
    }

    fn g(labels: &[u32], edges: &[(usize, usize, EdgeLabel)]) -> Digraph {
        Digraph::new(
            labels.iter().map(|&r| l(r)).collect(),
            edges.iter().map(|&(a, b, e)| DiEdge::new(a, b, e)).collect(),
        )
        .unwrap()
    }

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for pos in 0..n {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn single_node() {
        let code = min_dfs_code(&g(&[7], &[])).unwrap();
        assert_eq!(code, DfsCode { root: l(7), edges: vec![] });
        assert_eq!(code.node_count(), 1);
    }

    #[test]
    fn empty_and_disconnected_rejected() {
        assert_eq!(min_dfs_code(&g(&[], &[])), Err(PatternError::EmptyGraph));
        assert_eq!(min_dfs_code(&g(&[1, 2], &[])), Err(PatternError::Disconnected));
    }

    #[test]
    fn path_codes_agree_over_all_orderings() {
        use EdgeLabel::*;
        let path = g(&[0, 1, 2], &[(0, 1, Same), (1, 2, Cross)]);
        let reference = min_dfs_code(&path).unwrap();
        let perms = all_perms(3);
        assert_eq!(perms.len(), 6);
        for p in perms {
            assert_eq!(min_dfs_code(&path.permuted(&p)).unwrap(), reference, "{p:?}");
        }
        assert_eq!(reference.edges.len(), 2);
    }

    #[test]
    fn direction_matters() {
        use EdgeLabel::*;
        let ab = min_dfs_code(&g(&[0, 0], &[(0, 1, Same)])).unwrap();
        let ba = min_dfs_code(&g(&[0, 0], &[(1, 0, Same)])).unwrap();
        assert_eq!(ab, ba); // same labels, isomorphic
        let ab = min_dfs_code(&g(&[0, 1], &[(0, 1, Same)])).unwrap();
        let ba = min_dfs_code(&g(&[0, 1], &[(1, 0, Same)])).unwrap();
        assert_ne!(ab, ba);
    }

    #[test]
    fn code_round_trips_to_graph() {
        use EdgeLabel::*;
        let tri = g(&[2, 0, 1], &[(0, 1, Same), (1, 2, Cross), (2, 0, Same)]);
        let code = min_dfs_code(&tri).unwrap();
        assert!(is_min(&code));
        assert_eq!(min_dfs_code(&code.to_digraph()).unwrap(), code);
        assert_eq!(code.to_digraph().edge_count(), 3);
    }

    #[test]
    fn canonical_map_relabels_onto_code_graph() {
        use EdgeLabel::*;
        let g0 = g(&[3, 1, 2, 1], &[(0, 1, Same), (2, 1, Cross), (3, 0, Cross)]);
        let (code, map) = canonical_form(&g0).unwrap();
        // map[k] = original node with DFS index k; invert it for permuted()
        let mut perm = vec![0; map.len()];
        for (k, &v) in map.iter().enumerate() {
            perm[v] = k;
        }
        let mut relabeled = g0.permuted(&perm);
        let mut expected = code.to_digraph();
        relabeled.edges.sort();
        expected.edges.sort();
        assert_eq!(relabeled, expected);
    }

    #[test]
    fn non_minimal_code_detected() {
        // a valid but non-minimal traversal of b <- a (start from the larger label)
        let code = DfsCode {
            root: l(1),
            edges: vec![DfsEdge { i: 0, j: 1, label_i: l(1), arrow: Arrow::In, edge: EdgeLabel::Same, label_j: l(0) }],
        };
        assert!(!is_min(&code));
    }
}
