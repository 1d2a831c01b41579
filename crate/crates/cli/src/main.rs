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

//! `logdim`: command-line driver for the mining pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable or unparseable
//! input, 3 invalid configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use logdim_core::graph::{to_dot, window_graph_to_dot};
use logdim_core::ingest::mask_message;
use logdim_core::knowledge::{KnowledgeBase, NodeScope, Target};
use logdim_core::pipeline::{self, MergeInputs, PipelineError};
use logdim_core::synth::{self, ScenarioSpec, SynthError};
use logdim_core::{Combiner, ConfigError, Dimension, IngestError, KnowledgeError, PipelineConfig, RuleId, TemplateId, WeightMode};

#[derive(Parser)]
#[command(name = "logdim", version, about = "Mine cross-dimension failure knowledge from cluster logs")]
struct Cli {
    /// Worker threads for mining; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic log and its ground-truth manifest.
    Synth(SynthArgs),
    /// Parse and template a raw log into events.jsonl / templates.tsv / rejects.jsonl.
    Ingest(StageArgs),
    /// Coalesce repeats and drop noise: events.clean.jsonl.
    Preprocess(StageArgs),
    /// Mine per-dimension episode rules and their instances: rules.json, instances.jsonl.
    MineRules(StageArgs),
    /// Build correlation-window graphs: graphs.json.
    BuildGraphs(StageArgs),
    /// Mine and score failure patterns: patterns.json.
    MinePatterns(StageArgs),
    /// Fold other runs' exports and expert documents into a knowledge base.
    Merge(MergeArgs),
    /// Rank root causes for a target rule or template.
    Query(QueryArgs),
    /// Re-emit a knowledge document, or render it as DOT.
    Export(ExportArgs),
    /// Every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args, Default)]
struct Knobs {
    /// TOML file with pipeline settings; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    granularity: Option<f64>,
    #[arg(long)]
    min_sup: Option<f64>,
    #[arg(long)]
    min_conf: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    gap: Option<f64>,
    /// Template id to drop; repeatable.
    #[arg(long = "blacklist")]
    blacklist: Vec<u32>,
    #[arg(long)]
    blacklist_file: Option<PathBuf>,
    #[arg(long)]
    max_rate: Option<f64>,
    #[arg(long)]
    corr_window: Option<f64>,
    #[arg(long)]
    max_lag: Option<f64>,
    /// confidence, support or product.
    #[arg(long)]
    weight_mode: Option<String>,
    #[arg(long)]
    ws_min: Option<f64>,
    #[arg(long)]
    p_max: Option<usize>,
    /// geomean, min or product.
    #[arg(long)]
    combiner: Option<String>,
    /// jsonl or csv.
    #[arg(long)]
    format: Option<String>,
    /// Dimension for records that carry none.
    #[arg(long)]
    dim_default: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct StageArgs {
    /// Raw log (ingest only).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Directory holding the interchange files.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Expert knowledge document to merge; repeatable.
    #[arg(long)]
    expert: Vec<PathBuf>,
    /// Provenance name for expert documents.
    #[arg(long)]
    name: Option<String>,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct MergeArgs {
    /// Knowledge document to start from.
    #[arg(long)]
    base: PathBuf,
    /// Another run's export; repeatable.
    #[arg(long)]
    document: Vec<PathBuf>,
    /// Expert document; repeatable.
    #[arg(long)]
    expert: Vec<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    kb: PathBuf,
    /// `dim:N` or `dim:rule:N` for a rule, `dim:template:N` for a template,
    /// `dim:msg=<text>` for the template of a raw message.
    #[arg(long)]
    target: String,
    /// same, cross or any.
    #[arg(long, default_value = "any")]
    scope: String,
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Window graphs (graphs.json) to render instead of a knowledge base.
    #[arg(long, conflicts_with = "kb")]
    graphs: Option<PathBuf>,
    #[arg(long)]
    dot: bool,
    /// Only patterns with at least this many nodes (DOT only).
    #[arg(long, default_value_t = 1)]
    min_nodes: usize,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario TOML.
    #[arg(long, conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: config-degradation.
    #[arg(long)]
    preset: Option<String>,
    /// Node count for the preset.
    #[arg(long, default_value_t = 2)]
    nodes: usize,
    /// Duration in hours for the preset.
    #[arg(long, default_value_t = 8.0)]
    hours: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

/// Error classes that pick the exit code.
#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Usage(_) => 1,
                Failure::Config(_) => 3,
            };
        }
        if cause.is::<ConfigError>() || cause.is::<SynthError>() {
            return 3;
        }
        if let Some(p) = cause.downcast_ref::<PipelineError>() {
            return match p {
                PipelineError::Config(_) => 3,
                PipelineError::Ingest(_) | PipelineError::Io { .. } | PipelineError::BadFile { .. } | PipelineError::Knowledge(_) => 2,
                _ => 1,
            };
        }
        if let Some(k) = cause.downcast_ref::<KnowledgeError>() {
            return match k {
                KnowledgeError::UnknownTarget(_) => 1,
                _ => 2,
            };
        }
        if cause.is::<IngestError>() || cause.is::<std::io::Error>() {
            return 2;
        }
    }
    1
}

fn parse_choice<T>(key: &'static str, value: &str, choices: &[(&str, T)]) -> Result<T>
where
    T: Copy,
{
    choices
        .iter()
        .find(|(name, _)| *name == value)
        .map(|(_, v)| *v)
        .ok_or_else(|| {
            let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
            Failure::Config(format!("invalid value `{value}` for {key}: expected one of {}", names.join(", "))).into()
        })
}

/// Config file first, then any flags, then validation.
fn load_config(knobs: &Knobs) -> Result<PipelineConfig> {
    let mut cfg = match &knobs.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            PipelineConfig::from_toml(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = knobs.$field.clone() {
                cfg.$field = v;
            }
        )*};
    }
    set!(window, granularity, min_sup, min_conf, k_max, gap, corr_window, max_lag, ws_min, p_max, format);
    if knobs.max_rate.is_some() {
        cfg.max_rate = knobs.max_rate;
    }
    if knobs.blacklist_file.is_some() {
        cfg.blacklist_file = knobs.blacklist_file.clone();
    }
    if knobs.seed.is_some() {
        cfg.seed = knobs.seed;
    }
    cfg.blacklist.extend(knobs.blacklist.iter().map(|&t| TemplateId(t)));
    if let Some(m) = &knobs.weight_mode {
        cfg.weight_mode = parse_choice(
            "weight_mode",
            m,
            &[("confidence", WeightMode::Confidence), ("support", WeightMode::Support), ("product", WeightMode::Product)],
        )?;
    }
    if let Some(c) = &knobs.combiner {
        cfg.combiner = parse_choice("combiner", c, &[("geomean", Combiner::Geomean), ("min", Combiner::Min), ("product", Combiner::Product)])?;
    }
    if let Some(d) = &knobs.dim_default {
        cfg.dim_default = Some(d.parse().map_err(|e| Failure::Config(format!("dim_default: {e}")))?);
    }
    cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    Ok(cfg)
}

fn stage_config(knobs: &Knobs) -> Result<PipelineConfig> {
    Ok(pipeline::resolve_config(load_config(knobs)?)?)
}

fn parse_target(spec: &str, kb: &KnowledgeBase) -> Result<Target> {
    let usage = || Failure::Usage(format!("bad target `{spec}`: expected dim:N, dim:rule:N, dim:template:N or dim:msg=<text>"));
    let (dim, rest) = spec.split_once(':').ok_or_else(usage)?;
    let dim: Dimension = dim.parse().map_err(|_| usage())?;
    if let Some(msg) = rest.strip_prefix("msg=") {
        let masked = mask_message(msg);
        let id = kb
            .templates
            .get(&masked)
            .ok_or_else(|| anyhow!(KnowledgeError::UnknownTarget(format!("{dim}:msg={msg} (template `{masked}`)"))))?;
        return Ok(Target::template(dim, id));
    }
    let number = |s: &str| s.parse::<u32>().map_err(|_| usage());
    Ok(match rest.split_once(':') {
        None => Target::rule(dim, RuleId(number(rest)?)),
        Some(("rule", n)) => Target::rule(dim, RuleId(number(n)?)),
        Some(("template", n)) => Target::template(dim, TemplateId(number(n)?)),
        Some(_) => return Err(usage().into()),
    })
}

fn describe_label(kb: &KnowledgeBase, label: logdim_core::Label) -> String {
    match kb.rule(label) {
        Some(rule) => {
            let texts: Vec<&str> = rule.labels().iter().map(|&t| kb.templates.masked(t).unwrap_or("?")).collect();
            format!("{label} [{}]", texts.join(" => "))
        }
        None => label.to_string(),
    }
}

fn query(args: &QueryArgs) -> Result<()> {
    let kb = pipeline::read_knowledge(&args.kb)?;
    let target = parse_target(&args.target, &kb)?;
    let scope = match args.scope.as_str() {
        "same" => NodeScope::Same,
        "cross" => NodeScope::Cross,
        "any" => NodeScope::Any,
        other => bail!(Failure::Usage(format!("bad scope `{other}`: expected same, cross or any"))),
    };
    let hits = kb.query_root_causes(&target, scope)?;
    let mut out = String::new();
    let _ = writeln!(out, "rank\tscore\tsupport\tconfidence\tantecedent\tconsequent");
    for (rank, hit) in hits.iter().take(args.top).enumerate() {
        let nodes: Vec<String> = hit.antecedent.labels.iter().map(|&l| describe_label(&kb, l)).collect();
        let _ = writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.4}\t{}\t{}",
            rank + 1,
            hit.score,
            hit.support,
            hit.knowledge_confidence,
            nodes.join(" + "),
            describe_label(&kb, hit.consequent)
        );
    }
    print!("{out}");
    if hits.is_empty() {
        eprintln!("no pattern has {target} as its consequent");
    }
    Ok(())
}

fn export(args: &ExportArgs) -> Result<()> {
    let text = match (&args.kb, &args.graphs) {
        (Some(kb), _) => {
            let kb = pipeline::read_knowledge(kb)?;
            if args.dot {
                let mut out = String::new();
                for (k, p) in kb.patterns.values().filter(|p| p.graph.node_count() >= args.min_nodes).enumerate() {
                    out.push_str(&to_dot(&format!("pattern_{k}"), &p.graph, Some(&p.weights)));
                }
                out
            } else {
                kb.export()
            }
        }
        (None, Some(graphs)) => {
            if !args.dot {
                bail!(Failure::Usage("--graphs only renders DOT; add --dot".into()));
            }
            pipeline::read_graphs(graphs)?.iter().map(window_graph_to_dot).collect()
        }
        (None, None) => bail!(Failure::Usage("export needs --kb or --graphs".into())),
    };
    match &args.output {
        Some(path) => pipeline::write_text(path, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let mut spec = match (&args.scenario, args.preset.as_deref()) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading scenario {}", path.display()))?;
            ScenarioSpec::from_toml(&text)?
        }
        (None, Some("config-degradation")) => ScenarioSpec::config_degradation(args.nodes, args.hours, 0),
        (None, Some(other)) => bail!(Failure::Usage(format!("unknown preset `{other}`"))),
        (None, None) => bail!(Failure::Usage("synth needs --scenario or --preset".into())),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let generated = synth::generate(&spec)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut log = Vec::new();
    synth::write_log_jsonl(&generated.events, &mut log)?;
    let mut manifest = Vec::new();
    synth::write_manifest_jsonl(&generated.pairs, &mut manifest)?;
    std::fs::write(args.out.join("log.jsonl"), log)?;
    std::fs::write(args.out.join("manifest.jsonl"), manifest)?;
    eprintln!(
        "wrote {} events and {} planted pairs ({} triggers) to {}",
        generated.events.len(),
        generated.pairs.len(),
        generated.triggers.iter().sum::<usize>(),
        args.out.display()
    );
    Ok(())
}

fn need_input(input: &Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    input
        .clone()
        .or_else(|| cfg.input.clone())
        .ok_or_else(|| Failure::Usage("no input log: pass --input or set `input` in the config".into()).into())
}

fn need_out(out: &Option<PathBuf>, cfg: &PipelineConfig) -> Result<PathBuf> {
    out.clone()
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Failure::Usage("no output directory: pass --out or set `out` in the config".into()).into())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => synth_cmd(&args),
        Command::Ingest(args) => {
            let cfg = stage_config(&args.knobs)?;
            let input = need_input(&args.input, &cfg)?;
            let ingested = pipeline::run_ingest(&input, &cfg, &args.out)?;
            eprintln!("{} events, {} templates, {} rejected lines", ingested.events.len(), ingested.templates.len(), ingested.rejects.len());
            Ok(())
        }
        Command::Preprocess(args) => {
            let report = pipeline::run_preprocess(&stage_config(&args.knobs)?, &args.out)?;
            eprintln!("{} -> {} events", report.input_events, report.output_events);
            Ok(())
        }
        Command::MineRules(args) => {
            let (rules, instances) = pipeline::run_mine_rules(&stage_config(&args.knobs)?, &args.out)?;
            eprintln!("{} rules, {} instances", rules.len(), instances.len());
            Ok(())
        }
        Command::BuildGraphs(args) => {
            let graphs = pipeline::run_build_graphs(&stage_config(&args.knobs)?, &args.out)?;
            eprintln!("{} window graphs", graphs.len());
            Ok(())
        }
        Command::MinePatterns(args) => {
            let kb = pipeline::run_mine_patterns(&stage_config(&args.knobs)?, &args.out)?;
            eprintln!("{} patterns", kb.patterns.len());
            Ok(())
        }
        Command::Merge(args) => {
            let inputs = MergeInputs { documents: args.document, experts: args.expert, expert_name: args.name };
            let (kb, report) = pipeline::run_merge(&args.base, &inputs, &args.out)?;
            for r in &report.rejected {
                eprintln!("rejected {}: {}", r.pattern, r.reason);
            }
            eprintln!("{} inserted, {} updated, {} patterns total", report.inserted, report.updated, kb.patterns.len());
            Ok(())
        }
        Command::Query(args) => query(&args),
        Command::Export(args) => export(&args),
        Command::Pipeline(args) => {
            let cfg = load_config(&args.knobs)?;
            let input = need_input(&args.input, &cfg)?;
            let out = need_out(&args.out, &cfg)?;
            let merge = MergeInputs { documents: Vec::new(), experts: args.expert, expert_name: args.name };
            let result = pipeline::run_pipeline(&cfg, &input, &out, &merge)?;
            let r = &result.report;
            eprintln!(
                "{} events ({} clean), {} rules, {} instances, {} window graphs, {} patterns ({} multi-node)",
                r.input_events,
                r.clean_events,
                r.rules.values().sum::<usize>(),
                r.instances,
                r.window_graphs,
                r.patterns,
                r.multi_node_patterns
            );
            for (stage, secs) in &result.timings {
                eprintln!("  {stage:<14} {secs:.3}s");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let threads = cli.threads;
    let outcome = match threads {
        Some(0) => Err(Failure::Usage("--threads must be at least 1".into()).into()),
        _ => pipeline::with_threads(threads, || run(cli)).map_err(anyhow::Error::from).and_then(|r| r),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
