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

//! Shared fixtures for the benchmarks.

use logdim_core::synth::{generate, write_log_jsonl, ScenarioSpec};
use logdim_core::PipelineConfig;

/// Config-change scenario rendered as a JSONL log.
pub fn scenario_log(nodes: usize, hours: f64, seed: u64) -> String {
    let generated = generate(&ScenarioSpec::config_degradation(nodes, hours, seed)).expect("preset is valid");
    let mut buf = Vec::new();
    write_log_jsonl(&generated.events, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8 log")
}

/// Knobs that recover the planted chain from the scenario.
pub fn scenario_config() -> PipelineConfig {
    PipelineConfig {
        window: 120.0,
        min_sup: 0.05,
        corr_window: 300.0,
        max_lag: 120.0,
        ws_min: 0.1,
        max_rate: Some(30.0),
        ..PipelineConfig::default()
    }
}
