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

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use crate::graph::{Digraph, Label, LabeledGraph};

use super::dfs_code::{is_min, Adjacency, DfsCode, DfsEdge};
use super::matcher::HostIndex;
use super::{MinedPattern, PatternError};

/// Mean of the node label weights. Weights are summed in ascending order
/// so the result depends only on the multiset of labels.
pub fn mean_weight(labels: &[Label], weights: &BTreeMap<Label, f64>) -> Result<f64, PatternError> {
    let mut w: Vec<f64> = labels
        .iter()
        .map(|l| weights.get(l).copied().ok_or(PatternError::UnknownLabel(*l)))
        .collect::<Result<_, _>>()?;
    if w.is_empty() {
        return Ok(0.0);
    }
    w.sort_by(f64::total_cmp);
    Ok(w.iter().sum::<f64>() / w.len() as f64)
}

pub fn support_count(pattern: &Digraph, hosts: &[HostIndex]) -> usize {
    hosts.iter().filter(|h| h.contains(pattern)).count()
}

/// `(support, weighted_support)` of one pattern over a graph database.
pub fn weighted_support<G: LabeledGraph>(pattern: &Digraph, graphs: &[G], weights: &BTreeMap<Label, f64>) -> Result<(f64, f64), PatternError> {
    let mean = mean_weight(&pattern.labels, weights)?;
    if graphs.is_empty() {
        return Ok((0.0, 0.0));
    }
    let hits = graphs.iter().filter(|g| HostIndex::new(*g).contains(pattern)).count();
    let support = hits as f64 / graphs.len() as f64;
    Ok((support, support * mean))
}

struct Host {
    labels: Vec<Label>,
    adj: Adjacency,
}

#[derive(Clone)]
struct Projection {
    gid: usize,
    map: Vec<usize>,
}

struct Miner<'a> {
    hosts: Vec<Host>,
    weights: &'a BTreeMap<Label, f64>,
    ws_min: f64,
    p_max: usize,
    support_prune: bool,
}

impl Miner<'_> {
    fn keep_growing(&self, count: usize) -> bool {
        if self.support_prune {
            count as f64 / self.hosts.len() as f64 >= self.ws_min
        } else {
            count > 0
        }
    }

    fn grow(&self, code: &DfsCode, projections: &[Projection], out: &mut Vec<MinedPattern>) -> Result<(), PatternError> {
        let count = distinct_graphs(projections);
        if !self.keep_growing(count) {
            return Ok(());
        }
        let graph = code.to_digraph();
        let support = count as f64 / self.hosts.len() as f64;
        let weighted = support * mean_weight(&graph.labels, self.weights)?;
        if weighted >= self.ws_min {
            out.push(MinedPattern {
                code: code.clone(),
                graph,
                graph_count: count,
                support,
                weighted_support: weighted,
            });
        }

        let path = code.rightmost_path();
        let rightmost = *path.last().unwrap();
        let nodes = code.node_count();
        let coded: HashSet<(usize, usize)> = code.edges.iter().map(|e| (e.i.min(e.j), e.i.max(e.j))).collect();

        let mut children: BTreeMap<DfsEdge, Vec<Projection>> = BTreeMap::new();
        for proj in projections {
            let host = &self.hosts[proj.gid];
            let r = proj.map[rightmost];
            for &j in &path[..path.len() - 1] {
                if coded.contains(&(j.min(rightmost), j.max(rightmost))) {
                    continue;
                }
                if let Some((arrow, edge, _)) = host.adj.between(r, proj.map[j]) {
                    let ext = DfsEdge { i: rightmost, j, label_i: host.labels[r], arrow, edge, label_j: host.labels[proj.map[j]] };
                    children.entry(ext).or_default().push(proj.clone());
                }
            }
            if nodes >= self.p_max {
                continue;
            }
            for &i in path.iter().rev() {
                let u = proj.map[i];
                for &(v, arrow, edge, _) in &host.adj.neighbors[u] {
                    if proj.map.contains(&v) {
                        continue;
                    }
                    let ext = DfsEdge { i, j: nodes, label_i: host.labels[u], arrow, edge, label_j: host.labels[v] };
                    let mut map = proj.map.clone();
                    map.push(v);
                    children.entry(ext).or_default().push(Projection { gid: proj.gid, map });
                }
            }
        }

        for (ext, child_projections) in children {
            if !self.keep_growing(distinct_graphs(&child_projections)) {
                continue;
            }
            let mut child = code.clone();
            child.edges.push(ext);
            if !is_min(&child) {
                continue;
            }
            self.grow(&child, &child_projections, out)?;
        }
        Ok(())
    }
}

/// Projections are kept in non-decreasing graph order.
fn distinct_graphs(projections: &[Projection]) -> usize {
    let mut count = 0;
    let mut last = None;
    for p in projections {
        if last != Some(p.gid) {
            count += 1;
            last = Some(p.gid);
        }
    }
    count
}

fn mine<G: LabeledGraph + Sync>(graphs: &[G], weights: &BTreeMap<Label, f64>, ws_min: f64, p_max: usize, support_prune: bool) -> Result<Vec<MinedPattern>, PatternError> {
    if graphs.is_empty() || p_max == 0 {
        return Ok(Vec::new());
    }
    let hosts: Vec<Host> = graphs
        .iter()
        .map(|g| Host {
            labels: (0..g.node_count()).map(|v| g.label(v)).collect(),
            adj: Adjacency::new(g.node_count(), g.edge_list()),
        })
        .collect();
    let mut roots: BTreeMap<Label, Vec<Projection>> = BTreeMap::new();
    for (gid, host) in hosts.iter().enumerate() {
        for (v, label) in host.labels.iter().enumerate() {
            roots.entry(*label).or_default().push(Projection { gid, map: vec![v] });
        }
    }
    let miner = Miner { hosts, weights, ws_min, p_max, support_prune };
    let roots: Vec<(Label, Vec<Projection>)> = roots.into_iter().collect();
    let per_root: Vec<Vec<MinedPattern>> = roots
        .par_iter()
        .map(|(label, projections)| {
            let mut out = Vec::new();
            let code = DfsCode { root: *label, edges: Vec::new() };
            miner.grow(&code, projections, &mut out).map(|_| out)
        })
        .collect::<Result<_, _>>()?;
    let mut out: Vec<MinedPattern> = per_root.into_iter().flatten().collect();
    out.sort_by(|a, b| a.code.cmp(&b.code));
    Ok(out)
}

/// Every connected pattern with at most `p_max` nodes whose weighted
/// support reaches `ws_min`, sorted by canonical code.
///
/// Subtrees of the DFS-code tree are cut as soon as raw support drops
/// below `ws_min`: weights are at most 1, so weighted support never
/// exceeds support, and support only shrinks as a pattern grows.
pub fn mine_patterns<G: LabeledGraph + Sync>(graphs: &[G], weights: &BTreeMap<Label, f64>, ws_min: f64, p_max: usize) -> Result<Vec<MinedPattern>, PatternError> {
    mine(graphs, weights, ws_min, p_max, true)
}

/// [`mine_patterns`] without the support cut: explores every pattern that
/// occurs at all. Same result, more work.
pub fn mine_patterns_unpruned<G: LabeledGraph + Sync>(graphs: &[G], weights: &BTreeMap<Label, f64>, ws_min: f64, p_max: usize) -> Result<Vec<MinedPattern>, PatternError> {
    mine(graphs, weights, ws_min, p_max, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::RuleId;
    use crate::graph::{DiEdge, EdgeLabel};
    use crate::ingest::Dimension;
    use crate::pattern::min_dfs_code;

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

    fn weights(pairs: &[(u32, f64)]) -> BTreeMap<Label, f64> {
        pairs.iter().map(|&(r, w)| (l(r), w)).collect()
    }

    #[test]
    fn weighted_support_examples() {
        use EdgeLabel::*;
        let pattern = g(&[1, 2], &[(0, 1, Cross)]);
        let db = vec![
            g(&[1, 2], &[(0, 1, Cross)]),
            g(&[1, 2, 3], &[(0, 1, Cross)]),
            g(&[1, 2], &[(0, 1, Same)]),
            g(&[3], &[]),
        ];
        let w = weights(&[(1, 0.8), (2, 0.6), (3, 1.0)]);
        let (s, ws) = weighted_support(&pattern, &db, &w).unwrap();
        assert_eq!(s, 0.5);
        assert!((ws - 0.35).abs() < 1e-12);

        let (s, ws) = weighted_support(&g(&[9], &[]), &db, &weights(&[(9, 0.5)])).unwrap();
        assert_eq!((s, ws), (0.0, 0.0));

        let ones = weights(&[(1, 1.0), (2, 1.0)]);
        let (s, ws) = weighted_support(&pattern, &db, &ones).unwrap();
        assert_eq!(s, ws);

        assert_eq!(weighted_support(&pattern, &db, &weights(&[(1, 1.0)])), Err(PatternError::UnknownLabel(l(2))));
    }

    #[test]
    fn single_node_database() {
        let db: Vec<Digraph> = (0..4).map(|_| g(&[1], &[])).collect();
        let found = mine_patterns(&db, &weights(&[(1, 1.0)]), 0.5, 6).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].support, 1.0);
        assert_eq!(found[0].code, min_dfs_code(&g(&[1], &[])).unwrap());
    }

    #[test]
    fn threshold_above_best_single_node_gives_nothing() {
        use EdgeLabel::*;
        let db = vec![
            g(&[1, 2], &[(0, 1, Cross)]),
            g(&[1, 3], &[(1, 0, Same)]),
            g(&[2], &[]),
        ];
        let w = weights(&[(1, 0.9), (2, 0.7), (3, 0.4)]);
        // brute force over single nodes
        let best = [1u32, 2, 3]
            .iter()
            .map(|&r| weighted_support(&g(&[r], &[]), &db, &w).unwrap().1)
            .fold(0.0, f64::max);
        let found = mine_patterns(&db, &w, best + 1e-9, 6).unwrap();
        assert!(found.is_empty());
        let found = mine_patterns(&db, &w, best, 6).unwrap();
        assert!(!found.is_empty());
    }

    #[test]
    fn grows_multi_edge_patterns() {
        use EdgeLabel::*;
        let tri = g(&[1, 2, 3], &[(0, 1, Cross), (1, 2, Same), (0, 2, Cross)]);
        let db = vec![tri.clone(), tri.clone(), g(&[1, 2], &[(0, 1, Cross)])];
        let w = weights(&[(1, 1.0), (2, 1.0), (3, 1.0)]);
        let found = mine_patterns(&db, &w, 0.6, 6).unwrap();
        // the full triangle appears in 2/3 graphs
        let tri_code = min_dfs_code(&tri).unwrap();
        assert!(found.iter().any(|p| p.code == tri_code && p.graph_count == 2));
        // 3 nodes + 3 single edges + 3 two-edge paths + triangle
        assert_eq!(found.len(), 10);
        assert_eq!(found, mine_patterns_unpruned(&db, &w, 0.6, 6).unwrap());
        // node cap
        assert!(mine_patterns(&db, &w, 0.6, 2).unwrap().iter().all(|p| p.graph.node_count() <= 2));
    }
}
