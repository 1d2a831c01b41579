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

//! Mining cross-dimension failure knowledge from multi-source cluster logs.
//!
//! The crate follows the analysis chain end to end:
//!
//! 1. [`ingest`] parses JSON Lines / CSV logs into canonical events and
//!    masks each message into a template.
//! 2. [`preprocess`] coalesces repeated events and drops noisy templates.
//! 3. [`episode`] mines frequent serial episodes per dimension, derives
//!    rules with support and confidence, and locates rule instances.
//! 4. [`graph`] slices the instance timeline into correlation windows and
//!    builds one labeled directed graph per window.
//! 5. [`pattern`] runs weighted frequent subgraph mining over those graphs
//!    and scores every pattern.
//! 6. [`knowledge`] stores patterns, integrates expert knowledge and
//!    answers root-cause queries.
//!
//! [`synth`] generates labelled synthetic logs and [`pipeline`] wires
//! every stage together behind a single [`PipelineConfig`].

pub mod config;
pub mod episode;
pub mod graph;
pub mod ingest;
pub mod knowledge;
pub mod pattern;
pub mod pipeline;
pub mod preprocess;
pub mod synth;

pub use config::{Combiner, ConfigError, PipelineConfig, WeightMode};
pub use episode::{Episode, EpisodeError, RuleId, RuleInstance, SequenceRule};
pub use graph::{Digraph, DiEdge, EdgeLabel, GraphConfig, Label, WindowGraph, WindowNode};
pub use ingest::{CanonicalEvent, Dimension, IngestError, LogRecord, TemplateId, TemplateTable};
pub use knowledge::{KnowledgeBase, KnowledgeError, NodeScope, RootCause, Target};
pub use pattern::{DfsCode, FailurePattern, MinedPattern, PatternError};
pub use preprocess::{CoalescePolicy, NoisePolicy};
pub use synth::{ScenarioSpec, SynthError};
