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

//! Weighted frequent subgraph mining over window graphs and pattern scoring.

mod dfs_code;
mod matcher;
mod miner;
mod score;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Digraph, Label};

pub use dfs_code::{canonical_form, gspan_cmp, is_min, min_dfs_code, Arrow, DfsCode, DfsEdge};
pub use matcher::{subgraph_contains, HostIndex};
pub use miner::{mean_weight, mine_patterns, mine_patterns_unpruned, support_count, weighted_support};
pub use score::{consequent_node, knowledge_confidence, pattern_confidence, score_patterns};

#[derive(Debug, Error, PartialEq)]
pub enum PatternError {
    #[error("pattern graph is empty")]
    EmptyGraph,
    #[error("pattern graph is not connected")]
    Disconnected,
    #[error("no weight or rule known for label {0}")]
    UnknownLabel(Label),
    #[error("pattern has no sink node to act as consequent")]
    NoSink,
    #[error("pattern does not occur in any graph")]
    ZeroSupport,
    #[error("pattern reduced to nothing after removing its consequent")]
    EmptyAntecedent,
}

/// A frequent connected pattern straight out of the miner.
#[derive(Debug, Clone, PartialEq)]
pub struct MinedPattern {
    pub code: DfsCode,
    /// Nodes numbered by DFS index of `code`.
    pub graph: Digraph,
    pub graph_count: usize,
    pub support: f64,
    pub weighted_support: f64,
}

/// One unit of failure knowledge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailurePattern {
    pub code: DfsCode,
    /// Nodes numbered by DFS index of `code`.
    pub graph: Digraph,
    /// Rule weight of each node, aligned with `graph.labels`.
    pub weights: Vec<f64>,
    pub support: f64,
    pub weighted_support: f64,
    pub structural_confidence: f64,
    pub knowledge_confidence: f64,
    pub provenance: BTreeSet<String>,
}

impl FailurePattern {
    pub fn labels(&self) -> &[Label] {
        &self.graph.labels
    }
}
