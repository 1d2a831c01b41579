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

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use logdim_bench::{scenario_config, scenario_log};
use logdim_core::episode::{mine_episodes, split_by_dimension, WindowSpec};
use logdim_core::pattern::mine_patterns;
use logdim_core::pipeline::{analyze, build_graphs, ingest_log, mine_rules, preprocess_events};
use logdim_core::graph::label_weights;

fn episodes(c: &mut Criterion) {
    let cfg = scenario_config();
    let ingested = ingest_log(&scenario_log(8, 8.0, 3), "jsonl".parse().unwrap(), None).unwrap();
    let (clean, _) = preprocess_events(&ingested.events, &cfg);
    let by_dim = split_by_dimension(&clean);
    let window = WindowSpec::new(cfg.window, cfg.granularity).unwrap();
    c.bench_function("mine_episodes/8 nodes", |b| {
        b.iter(|| by_dim.values().map(|evs| mine_episodes(evs, &window, cfg.min_sup, cfg.k_max).unwrap().len()).sum::<usize>())
    });
}

fn patterns(c: &mut Criterion) {
    let cfg = scenario_config();
    let ingested = ingest_log(&scenario_log(8, 8.0, 3), "jsonl".parse().unwrap(), None).unwrap();
    let (clean, _) = preprocess_events(&ingested.events, &cfg);
    let (rules, instances) = mine_rules(&clean, &cfg).unwrap();
    let graphs = build_graphs(&instances, &rules, &cfg).unwrap();
    let weights = label_weights(&rules, cfg.weight_mode);
    c.bench_function("mine_patterns/8 nodes", |b| b.iter(|| mine_patterns(&graphs, &weights, cfg.ws_min, cfg.p_max).unwrap().len()));
}

fn end_to_end(c: &mut Criterion) {
    let cfg = scenario_config();
    let mut group = c.benchmark_group("analyze");
    group.sample_size(10);
    for nodes in [2, 26] {
        let log = scenario_log(nodes, 8.0, 3);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &log, |b, log| b.iter(|| analyze(log, &cfg).unwrap().0.patterns.len()));
    }
    group.finish();
}

criterion_group!(benches, episodes, patterns, end_to_end);
criterion_main!(benches);
