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

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const KNOBS: [&str; 12] = [
    "--window", "120", "--min-sup", "0.05", "--corr-window", "300", "--max-lag", "120", "--ws-min", "0.1", "--max-rate", "30",
];

fn logdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logdim")).args(args).output().expect("spawn logdim")
}

fn ok(args: &[&str]) -> Output {
    let out = logdim(args);
    assert!(out.status.success(), "logdim {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    ok(&["synth", "--preset", "config-degradation", "--seed", "5", "--out", p(dir)]);
    dir.join("log.jsonl")
}

fn with_knobs<'a>(head: &[&'a str]) -> Vec<&'a str> {
    let mut v = head.to_vec();
    v.extend_from_slice(&KNOBS);
    v
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(logdim(&["--help"]).status.code(), Some(0));
    assert_eq!(logdim(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(logdim(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(logdim(&["pipeline", "--out", "/tmp/x"]).status.code(), Some(1));
    assert_eq!(logdim(&["--threads", "0", "synth", "--preset", "config-degradation", "--out", "/tmp/x"]).status.code(), Some(1));
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    std::fs::write(&log, "garbage\nmore garbage\n{\"ts\": 1}\n").unwrap();
    let out = logdim(&["pipeline", "--input", p(&log), "--out", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let missing = logdim(&["pipeline", "--input", p(&dir.path().join("absent.jsonl")), "--out", p(&dir.path().join("o"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_three_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "window = 60.0\nwindw_size = 3\n").unwrap();
    let out = logdim(&["pipeline", "--config", p(&cfg), "--input", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("windw_size"));
}

#[test]
fn invalid_knob_exits_three() {
    let out = logdim(&["pipeline", "--input", "x", "--out", "y", "--min-sup", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_log_yields_empty_knowledge() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("empty.jsonl");
    std::fs::write(&log, "").unwrap();
    let out_dir = dir.path().join("o");
    ok(&["pipeline", "--input", p(&log), "--out", p(&out_dir)]);
    let kb: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("knowledge.json")).unwrap()).unwrap();
    assert_eq!(kb["patterns"].as_array().unwrap().len(), 0);
}

#[test]
fn stages_compose_to_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let whole = dir.path().join("whole");
    let staged = dir.path().join("staged");
    ok(&with_knobs(&["pipeline", "--input", p(&log), "--out", p(&whole)]));
    ok(&with_knobs(&["ingest", "--input", p(&log), "--out", p(&staged)]));
    for stage in ["preprocess", "mine-rules", "build-graphs", "mine-patterns"] {
        ok(&with_knobs(&[stage, "--out", p(&staged)]));
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(&staged).unwrap() {
        let name = entry.unwrap().file_name();
        let a = std::fs::read(staged.join(&name)).unwrap();
        let b = std::fs::read(whole.join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between staged and whole runs");
        compared += 1;
    }
    assert!(compared >= 8, "only {compared} files");

    // merging the staged patterns into an empty base gives the pipeline's knowledge
    ok(&["merge", "--base", p(&staged.join("patterns.json")), "--out", p(&staged)]);
    assert_eq!(std::fs::read(staged.join("knowledge.json")).unwrap(), std::fs::read(whole.join("knowledge.json")).unwrap());
}

#[test]
fn query_ranks_config_change_first() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let out_dir = dir.path().join("o");
    ok(&with_knobs(&["pipeline", "--input", p(&log), "--out", p(&out_dir)]));
    let kb = out_dir.join("knowledge.json");
    let out = ok(&["query", "--kb", p(&kb), "--target", "status:msg=perf degraded latency 812 ms"]);
    let table = String::from_utf8(out.stdout).unwrap();
    let first = table.lines().nth(1).expect("at least one root cause");
    assert!(first.contains("config changed by admin"), "{table}");

    let unknown = logdim(&["query", "--kb", p(&kb), "--target", "status:rule:999"]);
    assert_eq!(unknown.status.code(), Some(1));
    let malformed = logdim(&["query", "--kb", p(&kb), "--target", "nowhere"]);
    assert_eq!(malformed.status.code(), Some(1));
}

#[test]
fn dot_export_of_single_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("kb.json");
    std::fs::write(
        &kb,
        r#"{
  "version": 1,
  "metadata": {"name": "one"},
  "templates": [{"id": 0, "masked": "cfg change"}, {"id": 1, "masked": "slow <NUM> ms"}],
  "rules": [
    {"rule_id": 0, "dim": "event", "antecedent": [], "consequent": 0, "support": 0.5, "confidence": 1.0},
    {"rule_id": 1, "dim": "status", "antecedent": [], "consequent": 1, "support": 0.5, "confidence": 1.0}
  ],
  "patterns": [{
    "nodes": [{"index": 0, "dim": "event", "rule_id": 0, "weight": 1.0}, {"index": 1, "dim": "status", "rule_id": 1, "weight": 1.0}],
    "edges": [{"from": 0, "to": 1, "label": "cross"}],
    "support": 0.5, "weighted_support": 0.5, "structural_confidence": 1.0, "knowledge_confidence": 1.0,
    "provenance": ["mined"]
  }]
}
"#,
    )
    .unwrap();
    let out = ok(&["export", "--kb", p(&kb), "--dot"]);
    let dot = String::from_utf8(out.stdout).unwrap();
    assert_eq!(dot.matches("digraph").count(), 1, "{dot}");
    assert_eq!(dot.matches("->").count(), 1, "{dot}");
    let nodes = dot.lines().filter(|l| l.contains("[label=") && !l.contains("->")).count();
    assert_eq!(nodes, 2, "{dot}");
}

#[test]
fn expert_merge_records_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let log = synth(dir.path());
    let expert = dir.path().join("expert.json");
    std::fs::write(
        &expert,
        r#"{
  "version": 1,
  "metadata": {"name": "ops-team"},
  "templates": [{"id": 0, "masked": "disk <HEX> failing"}, {"id": 1, "masked": "io stall <NUM> ms"}],
  "rules": [
    {"rule_id": 0, "dim": "ras", "antecedent": [], "consequent": 0, "confidence": 0.9},
    {"rule_id": 1, "dim": "status", "antecedent": [], "consequent": 1, "confidence": 0.8}
  ],
  "patterns": [{
    "nodes": [{"index": 0, "dim": "ras", "rule_id": 0}, {"index": 1, "dim": "status", "rule_id": 1}],
    "edges": [{"from": 0, "to": 1, "label": "same"}],
    "support": 0.4, "confidence": 0.7, "provenance": []
  }]
}
"#,
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    ok(&with_knobs(&["pipeline", "--input", p(&log), "--out", p(&out_dir), "--expert", p(&expert)]));
    let kb: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("knowledge.json")).unwrap()).unwrap();
    let provs: Vec<String> = kb["patterns"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|p| p["provenance"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()))
        .collect();
    assert!(provs.contains(&"expert:ops-team".to_string()), "{provs:?}");
    assert!(provs.contains(&"mined".to_string()));
}
