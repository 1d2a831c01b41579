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

//! Stage functions and the interchange files that connect them.
//!
//! Each stage reads the previous stage's files from the output directory
//! and writes its own, so stages can be run one at a time and diffed
//! against a full run.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::episode::{self, EpisodeError, RuleInstance, SequenceRule, WindowSpec};
use crate::graph::{self, GraphConfig, GraphError, WindowGraph};
use crate::ingest::{self, CanonicalEvent, Dimension, IngestError, LogFormat, Reject, TemplateTable};
use crate::knowledge::{KnowledgeBase, KnowledgeError, MergeReport, Metadata};
use crate::pattern::{self, FailurePattern, PatternError};
use crate::preprocess::{self, CoalescePolicy, NoisePolicy, PreprocessReport};

pub const EVENTS: &str = "events.jsonl";
pub const TEMPLATES: &str = "templates.tsv";
pub const REJECTS: &str = "rejects.jsonl";
pub const CLEAN_EVENTS: &str = "events.clean.jsonl";
pub const PREPROCESS_REPORT: &str = "preprocess_report.json";
pub const RULES: &str = "rules.json";
pub const INSTANCES: &str = "instances.jsonl";
pub const GRAPHS: &str = "graphs.json";
pub const PATTERNS: &str = "patterns.json";
pub const KNOWLEDGE: &str = "knowledge.json";
pub const REPORT: &str = "report.json";
pub const TIMINGS: &str = "timings.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {reason}")]
    BadFile { path: PathBuf, reason: String },
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error("could not start thread pool: {0}")]
    Threads(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

fn bad_file(path: &Path, reason: impl ToString) -> PipelineError {
    PipelineError::BadFile { path: path.to_path_buf(), reason: reason.to_string() }
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_err(path))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), PipelineError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("stage output serializes");
    text.push('\n');
    write_text(path, &text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| bad_file(path, e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), PipelineError> {
    write_with(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| bad_file(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Runs `f` on a pool of `threads` workers, or the global pool when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, PipelineError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| PipelineError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub events: Vec<CanonicalEvent>,
    pub templates: TemplateTable,
    pub rejects: Vec<Reject>,
}

/// Parse, template and order a raw log. Fails when more than half of the
/// lines are unusable, whether malformed or lacking a dimension.
pub fn ingest_log(text: &str, format: LogFormat, dim_default: Option<Dimension>) -> Result<Ingested, IngestError> {
    let parsed = ingest::parse_lines(text.as_bytes(), format, dim_default)?;
    let mut templates = TemplateTable::new();
    let (events, dimless) = ingest::canonicalize(&parsed.records, &mut templates);
    let mut rejects = parsed.rejects;
    rejects.extend(dimless);
    rejects.sort_by_key(|r| r.line);
    let total = events.len() + rejects.len();
    if rejects.len() * 2 > total {
        let first = &rejects[0];
        return Err(IngestError::TooManyRejects {
            rejected: rejects.len(),
            total,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok(Ingested { events, templates, rejects })
}

pub fn noise_policy(cfg: &PipelineConfig) -> NoisePolicy {
    NoisePolicy { blacklist: cfg.blacklist.clone(), max_rate: cfg.max_rate, trace_hours: None }
}

pub fn preprocess_events(events: &[CanonicalEvent], cfg: &PipelineConfig) -> (Vec<CanonicalEvent>, PreprocessReport) {
    preprocess::preprocess(events, &CoalescePolicy { gap: cfg.gap }, &noise_policy(cfg))
}

/// Episodes and rules for every dimension, then the instance pass.
pub fn mine_rules(events: &[CanonicalEvent], cfg: &PipelineConfig) -> Result<(Vec<SequenceRule>, Vec<RuleInstance>), EpisodeError> {
    let window = WindowSpec::new(cfg.window, cfg.granularity)?;
    let by_dim = episode::split_by_dimension(events);
    let mut episodes = Vec::new();
    for dim_events in by_dim.values() {
        episodes.extend(episode::mine_episodes(dim_events, &window, cfg.min_sup, cfg.k_max)?);
    }
    let rules = episode::derive_rules(&episodes, cfg.min_conf)?;
    let instances = episode::find_all_instances(&rules, &by_dim, cfg.window);
    Ok((rules, instances))
}

pub fn graph_config(cfg: &PipelineConfig) -> GraphConfig {
    GraphConfig { corr_window: cfg.corr_window, max_lag: cfg.max_lag, weight_mode: cfg.weight_mode }
}

pub fn build_graphs(instances: &[RuleInstance], rules: &[SequenceRule], cfg: &PipelineConfig) -> Result<Vec<WindowGraph>, GraphError> {
    graph::build_window_graphs(instances, rules, &graph_config(cfg))
}

pub fn mine_patterns(graphs: &[WindowGraph], rules: &[SequenceRule], cfg: &PipelineConfig) -> Result<Vec<FailurePattern>, PatternError> {
    let weights = graph::label_weights(rules, cfg.weight_mode);
    let mined = pattern::mine_patterns(graphs, &weights, cfg.ws_min, cfg.p_max)?;
    pattern::score_patterns(mined, graphs, rules, cfg.weight_mode, cfg.combiner)
}

/// Creation time comes from `SOURCE_DATE_EPOCH` only, so that repeated
/// runs produce identical documents.
pub fn metadata(cfg: &PipelineConfig) -> Metadata {
    Metadata {
        name: None,
        config_digest: Some(cfg.digest()),
        created: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        extra: BTreeMap::new(),
    }
}

pub fn build_knowledge(templates: TemplateTable, rules: Vec<SequenceRule>, patterns: Vec<FailurePattern>, cfg: &PipelineConfig) -> KnowledgeBase {
    let mut kb = KnowledgeBase::new(templates, rules, metadata(cfg));
    kb.merge(patterns);
    kb
}

/// Folds the blacklist file, if any, into the inline blacklist.
pub fn resolve_config(mut cfg: PipelineConfig) -> Result<PipelineConfig, PipelineError> {
    cfg.validate()?;
    if let Some(path) = cfg.blacklist_file.take() {
        let file = fs::File::open(&path).map_err(io_err(&path))?;
        let ids = preprocess::read_blacklist(BufReader::new(file)).map_err(|e| bad_file(&path, e))?;
        cfg.blacklist.extend(ids);
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RulesFile {
    rules: Vec<SequenceRule>,
}

pub fn write_rules(path: &Path, rules: &[SequenceRule]) -> Result<(), PipelineError> {
    write_json(path, &RulesFile { rules: rules.to_vec() })
}

pub fn read_rules(path: &Path) -> Result<Vec<SequenceRule>, PipelineError> {
    Ok(read_json::<RulesFile>(path)?.rules)
}

pub fn read_events(path: &Path) -> Result<Vec<CanonicalEvent>, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(ingest::read_events_jsonl(BufReader::new(file))?)
}

pub fn write_events(path: &Path, events: &[CanonicalEvent]) -> Result<(), PipelineError> {
    write_with(path, |w| ingest::write_events_jsonl(events, w))
}

pub fn read_templates(path: &Path) -> Result<TemplateTable, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(TemplateTable::read_tsv(BufReader::new(file))?)
}

pub fn read_graphs(path: &Path) -> Result<Vec<WindowGraph>, PipelineError> {
    read_json(path)
}

pub fn read_knowledge(path: &Path) -> Result<KnowledgeBase, PipelineError> {
    Ok(KnowledgeBase::load(&read_text(path)?)?)
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

// Stage drivers over an output directory.

pub fn run_ingest(input: &Path, cfg: &PipelineConfig, out: &Path) -> Result<Ingested, PipelineError> {
    let format: LogFormat = cfg.format.parse().map_err(|e: String| ConfigError::Range { key: "format", reason: e })?;
    let text = read_text(input)?;
    let ingested = ingest_log(&text, format, cfg.dim_default)?;
    ensure_dir(out)?;
    write_events(&out.join(EVENTS), &ingested.events)?;
    let tpath = out.join(TEMPLATES);
    write_with(&tpath, |w| ingested.templates.write_tsv(w))?;
    write_jsonl(&out.join(REJECTS), &ingested.rejects)?;
    Ok(ingested)
}

pub fn run_preprocess(cfg: &PipelineConfig, out: &Path) -> Result<PreprocessReport, PipelineError> {
    let events = read_events(&out.join(EVENTS))?;
    let (clean, report) = preprocess_events(&events, cfg);
    write_events(&out.join(CLEAN_EVENTS), &clean)?;
    write_json(&out.join(PREPROCESS_REPORT), &report)?;
    Ok(report)
}

pub fn run_mine_rules(cfg: &PipelineConfig, out: &Path) -> Result<(Vec<SequenceRule>, Vec<RuleInstance>), PipelineError> {
    let events = read_events(&out.join(CLEAN_EVENTS))?;
    let (rules, instances) = mine_rules(&events, cfg)?;
    write_rules(&out.join(RULES), &rules)?;
    write_jsonl(&out.join(INSTANCES), &instances)?;
    Ok((rules, instances))
}

pub fn run_build_graphs(cfg: &PipelineConfig, out: &Path) -> Result<Vec<WindowGraph>, PipelineError> {
    let rules = read_rules(&out.join(RULES))?;
    let instances: Vec<RuleInstance> = read_jsonl(&out.join(INSTANCES))?;
    let graphs = build_graphs(&instances, &rules, cfg)?;
    write_json(&out.join(GRAPHS), &graphs)?;
    Ok(graphs)
}

/// Mines and scores patterns and writes them as a knowledge document.
pub fn run_mine_patterns(cfg: &PipelineConfig, out: &Path) -> Result<KnowledgeBase, PipelineError> {
    let templates = read_templates(&out.join(TEMPLATES))?;
    let rules = read_rules(&out.join(RULES))?;
    let graphs = read_graphs(&out.join(GRAPHS))?;
    let patterns = mine_patterns(&graphs, &rules, cfg)?;
    let kb = build_knowledge(templates, rules, patterns, cfg);
    write_text(&out.join(PATTERNS), &kb.export())?;
    Ok(kb)
}

/// Extra documents to fold into a knowledge base.
#[derive(Debug, Clone, Default)]
pub struct MergeInputs {
    /// Exports of other runs; their provenance is kept.
    pub documents: Vec<PathBuf>,
    /// Expert documents, with an optional provenance name override.
    pub experts: Vec<PathBuf>,
    pub expert_name: Option<String>,
}

/// Starts from `base` and merges every input into it.
pub fn merge_into(mut kb: KnowledgeBase, inputs: &MergeInputs) -> Result<(KnowledgeBase, MergeReport), PipelineError> {
    let mut report = MergeReport::default();
    let mut absorb = |r: MergeReport| {
        report.inserted += r.inserted;
        report.updated += r.updated;
        report.rejected.extend(r.rejected);
    };
    for path in &inputs.documents {
        let patterns = kb.import_document(&read_text(path)?)?;
        absorb(kb.merge(patterns));
    }
    for path in &inputs.experts {
        let patterns = kb.import_expert(&read_text(path)?, inputs.expert_name.as_deref())?;
        absorb(kb.merge(patterns));
    }
    Ok((kb, report))
}

pub fn run_merge(base: &Path, inputs: &MergeInputs, out: &Path) -> Result<(KnowledgeBase, MergeReport), PipelineError> {
    let (kb, report) = merge_into(read_knowledge(base)?, inputs)?;
    ensure_dir(out)?;
    write_text(&out.join(KNOWLEDGE), &kb.export())?;
    Ok((kb, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopRule {
    pub dim: Dimension,
    pub rule_id: u32,
    pub templates: Vec<String>,
    pub support: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopPattern {
    pub code: String,
    pub nodes: usize,
    pub support: f64,
    pub knowledge_confidence: f64,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_digest: String,
    pub input_events: usize,
    pub rejected_lines: usize,
    pub templates: usize,
    pub clean_events: usize,
    pub rules: BTreeMap<Dimension, usize>,
    pub instances: usize,
    pub window_graphs: usize,
    pub patterns: usize,
    pub multi_node_patterns: usize,
    pub top_rules: Vec<TopRule>,
    pub top_patterns: Vec<TopPattern>,
}

const TOP: usize = 10;

fn report(cfg: &PipelineConfig, ingested: &Ingested, clean: usize, instances: usize, graphs: usize, kb: &KnowledgeBase) -> Report {
    let mut rules: BTreeMap<Dimension, usize> = BTreeMap::new();
    for r in &kb.rules {
        *rules.entry(r.dim).or_default() += 1;
    }
    let mut top_rules: Vec<&SequenceRule> = kb.rules.iter().collect();
    top_rules.sort_by(|a, b| b.support.total_cmp(&a.support).then_with(|| b.confidence.total_cmp(&a.confidence)).then_with(|| a.rule_id.cmp(&b.rule_id)));
    let mut top_patterns: Vec<&FailurePattern> = kb.patterns.values().filter(|p| p.graph.node_count() > 1).collect();
    top_patterns.sort_by(|a, b| {
        (b.knowledge_confidence * b.support)
            .total_cmp(&(a.knowledge_confidence * a.support))
            .then_with(|| a.code.cmp(&b.code))
    });
    Report {
        config_digest: cfg.digest(),
        input_events: ingested.events.len(),
        rejected_lines: ingested.rejects.len(),
        templates: ingested.templates.len(),
        clean_events: clean,
        rules,
        instances,
        window_graphs: graphs,
        patterns: kb.patterns.len(),
        multi_node_patterns: kb.patterns.values().filter(|p| p.graph.node_count() > 1).count(),
        top_rules: top_rules
            .into_iter()
            .take(TOP)
            .map(|r| TopRule {
                dim: r.dim,
                rule_id: r.rule_id.0,
                templates: r.labels().iter().map(|&t| kb.templates.masked(t).unwrap_or("?").to_string()).collect(),
                support: r.support,
                confidence: r.confidence,
            })
            .collect(),
        top_patterns: top_patterns
            .iter()
            .take(TOP)
            .map(|p| TopPattern {
                code: p.code.to_string(),
                nodes: p.graph.node_count(),
                support: p.support,
                knowledge_confidence: p.knowledge_confidence,
                provenance: p.provenance.iter().cloned().collect(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub knowledge: KnowledgeBase,
    pub report: Report,
    /// Seconds per stage, in run order.
    pub timings: Vec<(String, f64)>,
}

/// Every stage in order, through the same files the single-stage drivers
/// use. `merge` inputs are folded in after mining.
pub fn run_pipeline(cfg: &PipelineConfig, input: &Path, out: &Path, merge: &MergeInputs) -> Result<PipelineOutput, PipelineError> {
    let cfg = resolve_config(cfg.clone())?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut Vec<(String, f64)>| {
        timings.push((name.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let ingested = run_ingest(input, &cfg, out)?;
    lap("ingest", &mut timings);
    let pre = run_preprocess(&cfg, out)?;
    lap("preprocess", &mut timings);
    let (_, instances) = run_mine_rules(&cfg, out)?;
    lap("mine-rules", &mut timings);
    let graphs = run_build_graphs(&cfg, out)?;
    lap("build-graphs", &mut timings);
    run_mine_patterns(&cfg, out)?;
    lap("mine-patterns", &mut timings);
    let (kb, _) = run_merge(&out.join(PATTERNS), merge, out)?;
    lap("merge", &mut timings);

    let report = report(&cfg, &ingested, pre.output_events, instances.len(), graphs.len(), &kb);
    write_json(&out.join(REPORT), &report)?;
    let timing_map: BTreeMap<&str, f64> = timings.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    write_json(&out.join(TIMINGS), &timing_map)?;
    Ok(PipelineOutput { knowledge: kb, report, timings })
}

/// The whole analysis in memory, no files. Same results as [`run_pipeline`].
pub fn analyze(text: &str, cfg: &PipelineConfig) -> Result<(KnowledgeBase, Vec<WindowGraph>), PipelineError> {
    let cfg = resolve_config(cfg.clone())?;
    let format: LogFormat = cfg.format.parse().map_err(|e: String| ConfigError::Range { key: "format", reason: e })?;
    let ingested = ingest_log(text, format, cfg.dim_default)?;
    let (clean, _) = preprocess_events(&ingested.events, &cfg);
    let (rules, instances) = mine_rules(&clean, &cfg)?;
    let graphs = build_graphs(&instances, &rules, &cfg)?;
    let patterns = mine_patterns(&graphs, &rules, &cfg)?;
    Ok((build_knowledge(ingested.templates, rules, patterns, &cfg), graphs))
}
