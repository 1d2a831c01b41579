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

//! The knowledge base: mined and expert failure patterns, the rule catalog
//! they refer to, export/import and root-cause queries.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::episode::{RuleId, SequenceRule};
use crate::graph::{DiEdge, Digraph, EdgeLabel, Label};
use crate::ingest::{Dimension, TemplateId, TemplateTable};
use crate::pattern::{canonical_form, consequent_node, DfsCode, FailurePattern};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("malformed knowledge document at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported knowledge document version {0}")]
    Version(u32),
    #[error("{path}: value {value} outside [0, 1]")]
    OutOfRange { path: String, value: f64 },
    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("unknown query target {0}")]
    UnknownTarget(String),
}

fn invalid(path: impl Into<String>, reason: impl Into<String>) -> KnowledgeError {
    KnowledgeError::Invalid { path: path.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    /// Seconds since the Unix epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<u64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub inserted: usize,
    pub updated: usize,
    pub rejected: Vec<Rejected>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejected {
    pub pattern: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeBase {
    pub patterns: BTreeMap<DfsCode, FailurePattern>,
    /// Sorted by rule id.
    pub rules: Vec<SequenceRule>,
    pub templates: TemplateTable,
    pub metadata: Metadata,
}

impl KnowledgeBase {
    pub fn new(templates: TemplateTable, mut rules: Vec<SequenceRule>, metadata: Metadata) -> Self {
        rules.sort_by_key(|r| (r.rule_id, r.dim));
        KnowledgeBase { patterns: BTreeMap::new(), rules, templates, metadata }
    }

    pub fn rule(&self, label: Label) -> Option<&SequenceRule> {
        self.rules.iter().find(|r| r.rule_id == label.rule && r.dim == label.dim)
    }

    /// Inserts or reconciles each pattern. Scores take the maximum and
    /// provenance the union, so the result does not depend on order.
    pub fn merge(&mut self, incoming: impl IntoIterator<Item = FailurePattern>) -> MergeReport {
        let known: BTreeSet<Label> = self.rules.iter().map(|r| Label::new(r.dim, r.rule_id)).collect();
        let mut report = MergeReport::default();
        for pattern in incoming {
            let name = pattern.code.to_string();
            let pattern = match normalize(pattern, &known) {
                Ok(p) => p,
                Err(reason) => {
                    report.rejected.push(Rejected { pattern: name, reason });
                    continue;
                }
            };
            match self.patterns.get_mut(&pattern.code) {
                None => {
                    report.inserted += 1;
                    self.patterns.insert(pattern.code.clone(), pattern);
                }
                Some(existing) => {
                    report.updated += 1;
                    existing.support = existing.support.max(pattern.support);
                    existing.weighted_support = existing.weighted_support.max(pattern.weighted_support);
                    existing.structural_confidence = existing.structural_confidence.max(pattern.structural_confidence);
                    existing.knowledge_confidence = existing.knowledge_confidence.max(pattern.knowledge_confidence);
                    for (w, v) in existing.weights.iter_mut().zip(&pattern.weights) {
                        *w = w.max(*v);
                    }
                    existing.provenance.extend(pattern.provenance);
                }
            }
        }
        report
    }

    pub fn to_document(&self) -> Document {
        Document {
            version: FORMAT_VERSION,
            metadata: self.metadata.clone(),
            templates: self
                .templates
                .iter()
                .map(|(id, masked)| DocTemplate { id, masked: masked.to_string() })
                .collect(),
            rules: self.rules.iter().map(DocRule::from).collect(),
            patterns: self.patterns.values().map(DocPattern::from).collect(),
        }
    }

    /// Pretty JSON with every object's keys in sorted order.
    pub fn export(&self) -> String {
        let value = serde_json::to_value(self.to_document()).expect("knowledge document serializes");
        let mut out = serde_json::to_string_pretty(&sort_keys(value)).expect("json value serializes");
        out.push('\n');
        out
    }

    /// Loads an exported document as-is: ids, scores and provenance are kept.
    pub fn load(text: &str) -> Result<Self, KnowledgeError> {
        let doc = parse_document(text)?;
        let templates = TemplateTable::from_entries(doc.templates.iter().map(|t| (t.id, t.masked.clone())))
            .map_err(|e| invalid("templates", e))?;
        let mut rules = Vec::with_capacity(doc.rules.len());
        let mut seen = BTreeSet::new();
        for (k, r) in doc.rules.iter().enumerate() {
            let rule = r.to_rule(&format!("rules[{k}]"))?;
            for t in rule.labels() {
                if templates.masked(t).is_none() {
                    return Err(invalid(format!("rules[{k}]"), format!("unknown template {t}")));
                }
            }
            if !seen.insert(rule.rule_id) {
                return Err(invalid(format!("rules[{k}].rule_id"), format!("duplicate rule id {}", rule.rule_id)));
            }
            rules.push(rule);
        }
        let mut kb = KnowledgeBase::new(templates, rules, doc.metadata);
        let mut patterns = Vec::with_capacity(doc.patterns.len());
        for (k, p) in doc.patterns.iter().enumerate() {
            patterns.push(p.to_pattern(&format!("patterns[{k}]"), &|l| Some(l), None)?);
        }
        let report = kb.merge(patterns);
        if let Some(r) = report.rejected.first() {
            return Err(invalid("patterns", format!("{}: {}", r.pattern, r.reason)));
        }
        Ok(kb)
    }

    /// Reads an expert document. Its templates and rules are folded into
    /// this catalog by content (new ones get fresh ids), and the returned
    /// patterns refer to catalog ids, ready for [`KnowledgeBase::merge`].
    /// Provenance becomes `expert:<name>`, taken from `name` or else the
    /// document's `metadata.name`.
    pub fn import_expert(&mut self, text: &str, name: Option<&str>) -> Result<Vec<FailurePattern>, KnowledgeError> {
        let doc = parse_document(text)?;
        let name = name
            .map(str::to_string)
            .or_else(|| doc.metadata.name.clone())
            .unwrap_or_else(|| "anonymous".to_string());
        self.import_remapped(doc, Some(format!("expert:{name}")))
    }

    /// Like [`KnowledgeBase::import_expert`] but keeps each pattern's own
    /// provenance. Used to fold another run's export into this one.
    pub fn import_document(&mut self, text: &str) -> Result<Vec<FailurePattern>, KnowledgeError> {
        let doc = parse_document(text)?;
        self.import_remapped(doc, None)
    }

    fn import_remapped(&mut self, doc: Document, provenance: Option<String>) -> Result<Vec<FailurePattern>, KnowledgeError> {

        let mut template_map = BTreeMap::new();
        for t in &doc.templates {
            if template_map.insert(t.id, self.templates.intern(&t.masked)).is_some() {
                return Err(invalid("templates", format!("duplicate template id {}", t.id)));
            }
        }
        let remap_template = |t: TemplateId, path: &str| {
            template_map.get(&t).copied().ok_or_else(|| invalid(path, format!("unknown template {t}")))
        };

        let mut rule_map: BTreeMap<Label, Label> = BTreeMap::new();
        for (k, r) in doc.rules.iter().enumerate() {
            let path = format!("rules[{k}]");
            let mut rule = r.to_rule(&path)?;
            rule.antecedent = rule
                .antecedent
                .iter()
                .map(|&t| remap_template(t, &format!("{path}.antecedent")))
                .collect::<Result<_, _>>()?;
            rule.consequent = remap_template(rule.consequent, &format!("{path}.consequent"))?;
            let from = Label::new(rule.dim, rule.rule_id);
            let existing = self
                .rules
                .iter()
                .find(|c| c.dim == rule.dim && c.antecedent == rule.antecedent && c.consequent == rule.consequent);
            let to = match existing {
                Some(c) => Label::new(c.dim, c.rule_id),
                None => {
                    rule.rule_id = RuleId(self.rules.iter().map(|c| c.rule_id.0 + 1).max().unwrap_or(0));
                    let label = Label::new(rule.dim, rule.rule_id);
                    self.rules.push(rule);
                    label
                }
            };
            if rule_map.insert(from, to).is_some() {
                return Err(invalid(format!("{path}.rule_id"), format!("duplicate rule {from}")));
            }
        }

        // nodes may also cite rules already in the catalog by id
        let resolve = |l: Label| match rule_map.get(&l) {
            Some(&to) => Some(to),
            None => self.rule(l).map(|_| l),
        };
        let mut out = Vec::with_capacity(doc.patterns.len());
        for (k, p) in doc.patterns.iter().enumerate() {
            let mut pattern = p.to_pattern(&format!("patterns[{k}]"), &resolve, Some(&self.rules))?;
            if let Some(prov) = &provenance {
                pattern.provenance = BTreeSet::from([prov.clone()]);
            }
            out.push(pattern);
        }
        Ok(out)
    }

    /// Labels of every rule `target` names.
    fn resolve_target(&self, target: &Target) -> Result<BTreeSet<Label>, KnowledgeError> {
        let labels: BTreeSet<Label> = self
            .rules
            .iter()
            .filter(|r| {
                r.dim == target.dim
                    && match target.what {
                        TargetRef::Rule(id) => r.rule_id == id,
                        TargetRef::Template(t) => r.consequent == t,
                    }
            })
            .map(|r| Label::new(r.dim, r.rule_id))
            .collect();
        if labels.is_empty() {
            return Err(KnowledgeError::UnknownTarget(target.to_string()));
        }
        Ok(labels)
    }

    /// Patterns whose consequent matches `target`, best first. Score is
    /// knowledge confidence times support; ties prefer larger patterns,
    /// then the smaller canonical code.
    pub fn query_root_causes(&self, target: &Target, scope: NodeScope) -> Result<Vec<RootCause>, KnowledgeError> {
        let wanted = self.resolve_target(target)?;
        let mut out = Vec::new();
        for p in self.patterns.values() {
            if p.graph.node_count() < 2 {
                continue;
            }
            let Some(c) = consequent_node(&p.graph) else { continue };
            if !wanted.contains(&p.graph.labels[c]) {
                continue;
            }
            let incident = p.graph.edges.iter().filter(|e| e.from == c || e.to == c);
            let in_scope = match scope {
                NodeScope::Any => true,
                NodeScope::Same => incident.into_iter().all(|e| e.label == EdgeLabel::Same),
                NodeScope::Cross => incident.into_iter().all(|e| e.label == EdgeLabel::Cross),
            };
            if !in_scope {
                continue;
            }
            out.push(RootCause {
                pattern: p.code.clone(),
                antecedent: p.graph.without_node(c),
                consequent: p.graph.labels[c],
                score: p.knowledge_confidence * p.support,
                support: p.support,
                knowledge_confidence: p.knowledge_confidence,
            });
        }
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| b.antecedent.node_count().cmp(&a.antecedent.node_count()))
                .then_with(|| a.pattern.cmp(&b.pattern))
        });
        Ok(out)
    }
}

/// Renumbers a pattern onto its canonical code and checks it against the
/// catalog and score ranges.
fn normalize(p: FailurePattern, known: &BTreeSet<Label>) -> Result<FailurePattern, String> {
    if p.weights.len() != p.graph.node_count() {
        return Err(format!("{} weights for {} nodes", p.weights.len(), p.graph.node_count()));
    }
    Digraph::new(p.graph.labels.clone(), p.graph.edges.clone()).map_err(|e| e.to_string())?;
    if let Some(l) = p.graph.labels.iter().find(|l| !known.contains(l)) {
        return Err(format!("label {l} has no rule in the catalog"));
    }
    for (what, v) in [
        ("support", p.support),
        ("weighted_support", p.weighted_support),
        ("structural_confidence", p.structural_confidence),
        ("knowledge_confidence", p.knowledge_confidence),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{what} {v} outside [0, 1]"));
        }
    }
    let (code, map) = canonical_form(&p.graph).map_err(|e| e.to_string())?;
    Ok(FailurePattern {
        graph: code.to_digraph(),
        code,
        weights: map.iter().map(|&v| p.weights[v]).collect(),
        ..p
    })
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> = map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

fn parse_document(text: &str) -> Result<Document, KnowledgeError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: Document = serde_path_to_error::deserialize(de).map_err(|e| KnowledgeError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(KnowledgeError::Version(doc.version));
    }
    Ok(doc)
}

fn check_unit(path: String, value: f64) -> Result<f64, KnowledgeError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(KnowledgeError::OutOfRange { path, value })
    }
}

/// The knowledge-exchange document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub version: u32,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default)]
    pub templates: Vec<DocTemplate>,
    #[serde(default)]
    pub rules: Vec<DocRule>,
    #[serde(default)]
    pub patterns: Vec<DocPattern>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocTemplate {
    pub id: TemplateId,
    pub masked: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRule {
    pub rule_id: RuleId,
    pub dim: Dimension,
    #[serde(default)]
    pub antecedent: Vec<TemplateId>,
    pub consequent: TemplateId,
    #[serde(default)]
    pub support: f64,
    pub confidence: f64,
}

impl From<&SequenceRule> for DocRule {
    fn from(r: &SequenceRule) -> Self {
        DocRule {
            rule_id: r.rule_id,
            dim: r.dim,
            antecedent: r.antecedent.clone(),
            consequent: r.consequent,
            support: r.support,
            confidence: r.confidence,
        }
    }
}

impl DocRule {
    fn to_rule(&self, path: &str) -> Result<SequenceRule, KnowledgeError> {
        Ok(SequenceRule {
            rule_id: self.rule_id,
            dim: self.dim,
            antecedent: self.antecedent.clone(),
            consequent: self.consequent,
            support: check_unit(format!("{path}.support"), self.support)?,
            confidence: check_unit(format!("{path}.confidence"), self.confidence)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocNode {
    pub index: usize,
    pub dim: Dimension,
    pub rule_id: RuleId,
    /// Defaults to the rule's confidence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocEdge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

/// A pattern as written in a document. Expert documents may give a single
/// `confidence`, which then stands for both confidence fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocPattern {
    pub nodes: Vec<DocNode>,
    #[serde(default)]
    pub edges: Vec<DocEdge>,
    #[serde(default)]
    pub support: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_support: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural_confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knowledge_confidence: Option<f64>,
    #[serde(default)]
    pub provenance: BTreeSet<String>,
}

impl From<&FailurePattern> for DocPattern {
    fn from(p: &FailurePattern) -> Self {
        DocPattern {
            nodes: p
                .graph
                .labels
                .iter()
                .zip(&p.weights)
                .enumerate()
                .map(|(index, (l, &w))| DocNode { index, dim: l.dim, rule_id: l.rule, weight: Some(w) })
                .collect(),
            edges: p
                .graph
                .edges
                .iter()
                .map(|e| DocEdge { from: e.from, to: e.to, label: e.label })
                .collect(),
            support: p.support,
            weighted_support: Some(p.weighted_support),
            confidence: None,
            structural_confidence: Some(p.structural_confidence),
            knowledge_confidence: Some(p.knowledge_confidence),
            provenance: p.provenance.clone(),
        }
    }
}

impl DocPattern {
    /// `resolve` maps document labels to catalog labels. With `catalog`
    /// given, missing weights fall back to rule confidence and weighted
    /// support is recomputed from the weights.
    fn to_pattern(&self, path: &str, resolve: &dyn Fn(Label) -> Option<Label>, catalog: Option<&[SequenceRule]>) -> Result<FailurePattern, KnowledgeError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(invalid(format!("{path}.nodes"), "pattern has no nodes"));
        }
        let mut labels = vec![None; n];
        let mut weights = vec![0.0; n];
        for (k, node) in self.nodes.iter().enumerate() {
            let npath = format!("{path}.nodes[{k}]");
            if node.index >= n || labels[node.index].is_some() {
                return Err(invalid(format!("{npath}.index"), "indices must be 0..n without repeats"));
            }
            let label = resolve(Label::new(node.dim, node.rule_id))
                .ok_or_else(|| invalid(format!("{npath}.rule_id"), format!("unknown rule {}:{}", node.dim, node.rule_id)))?;
            let weight = match (node.weight, catalog) {
                (Some(w), _) => w,
                (None, Some(rules)) => rules
                    .iter()
                    .find(|r| r.dim == label.dim && r.rule_id == label.rule)
                    .map_or(1.0, |r| r.confidence),
                (None, None) => return Err(invalid(format!("{npath}.weight"), "missing weight")),
            };
            labels[node.index] = Some(label);
            weights[node.index] = check_unit(format!("{npath}.weight"), weight)?;
        }
        let labels: Vec<Label> = labels.into_iter().map(|l| l.expect("every index filled")).collect();
        let edges = self.edges.iter().map(|e| DiEdge::new(e.from, e.to, e.label)).collect();
        let graph = Digraph::new(labels, edges).map_err(|e| invalid(format!("{path}.edges"), e.to_string()))?;
        let code = canonical_form(&graph).map_err(|e| invalid(path, e.to_string()))?.0;

        let support = check_unit(format!("{path}.support"), self.support)?;
        let structural = self.structural_confidence.or(self.confidence);
        let knowledge = self.knowledge_confidence.or(self.confidence);
        let (Some(structural), Some(knowledge)) = (structural, knowledge) else {
            return Err(invalid(path, "needs confidence or both structural_confidence and knowledge_confidence"));
        };
        let structural = check_unit(format!("{path}.structural_confidence"), structural)?;
        let knowledge = check_unit(format!("{path}.knowledge_confidence"), knowledge)?;
        if let Some(c) = self.confidence {
            check_unit(format!("{path}.confidence"), c)?;
        }
        let weighted_support = match (catalog, self.weighted_support) {
            (None, Some(ws)) => check_unit(format!("{path}.weighted_support"), ws)?,
            _ => {
                let mut w = weights.clone();
                w.sort_by(f64::total_cmp);
                support * (w.iter().sum::<f64>() / n as f64)
            }
        };
        Ok(FailurePattern {
            code,
            graph,
            weights,
            support,
            weighted_support,
            structural_confidence: structural,
            knowledge_confidence: knowledge,
            provenance: self.provenance.clone(),
        })
    }
}

/// Which of a target's neighbours count: edges into the consequent must
/// all be same-host, all cross-host, or anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeScope {
    Same,
    Cross,
    #[default]
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetRef {
    Rule(RuleId),
    /// Any rule of the dimension ending in this template.
    Template(TemplateId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Target {
    pub dim: Dimension,
    pub what: TargetRef,
}

impl Target {
    pub fn rule(dim: Dimension, rule: RuleId) -> Self {
        Target { dim, what: TargetRef::Rule(rule) }
    }

    pub fn template(dim: Dimension, template: TemplateId) -> Self {
        Target { dim, what: TargetRef::Template(template) }
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.what {
            TargetRef::Rule(r) => write!(f, "{}:rule:{}", self.dim, r),
            TargetRef::Template(t) => write!(f, "{}:template:{}", self.dim, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootCause {
    pub pattern: DfsCode,
    /// The pattern minus its consequent; may be disconnected.
    pub antecedent: Digraph,
    pub consequent: Label,
    pub score: f64,
    pub support: f64,
    pub knowledge_confidence: f64,
}
