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

//! Log collection and templating.
//!
//! Raw lines become [`LogRecord`]s, each message is masked into a template
//! string that is interned in a [`TemplateTable`], and the result is a
//! totally ordered stream of [`CanonicalEvent`]s.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv header is missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{rejected} of {total} lines rejected (more than half); first: line {first_line}: {first_reason}")]
    TooManyRejects {
        rejected: usize,
        total: usize,
        first_line: usize,
        first_reason: String,
    },
    #[error("line {line}: {reason}")]
    BadLine { line: usize, reason: String },
}

/// One of the four perspectives logs are summed up into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Event,
    Status,
    Comm,
    Ras,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [Dimension::Event, Dimension::Status, Dimension::Comm, Dimension::Ras];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Event => "event",
            Dimension::Status => "status",
            Dimension::Comm => "comm",
            Dimension::Ras => "ras",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown dimension `{0}` (expected event, status, comm or ras)")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "event" => Ok(Dimension::Event),
            "status" => Ok(Dimension::Status),
            "comm" => Ok(Dimension::Comm),
            "ras" => Ok(Dimension::Ras),
            other => Err(UnknownDimension(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateId(pub u32);

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A parsed, not yet templated, log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub ts: f64,
    pub node: String,
    pub dim: Option<Dimension>,
    pub msg: String,
    /// 1-based source line, 0 when built in code.
    pub line: usize,
}

impl LogRecord {
    pub fn new(ts: f64, node: impl Into<String>, dim: Dimension, msg: impl Into<String>) -> Self {
        LogRecord {
            ts,
            node: node.into(),
            dim: Some(dim),
            msg: msg.into(),
            line: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(format!("unknown log format `{other}` (expected jsonl or csv)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedLog {
    pub records: Vec<LogRecord>,
    pub rejects: Vec<Reject>,
}

/// Parses a log stream. Malformed lines land in `rejects`; the call fails
/// only when more than half of the non-blank lines are rejected.
pub fn parse_lines<R: BufRead>(
    reader: R,
    format: LogFormat,
    dim_default: Option<Dimension>,
) -> Result<ParsedLog, IngestError> {
    let (parsed, total) = match format {
        LogFormat::Jsonl => parse_jsonl(reader, dim_default)?,
        LogFormat::Csv => parse_csv(reader, dim_default)?,
    };
    if parsed.rejects.len() * 2 > total {
        let first = &parsed.rejects[0];
        return Err(IngestError::TooManyRejects {
            rejected: parsed.rejects.len(),
            total,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }
    Ok(parsed)
}

fn parse_jsonl<R: BufRead>(mut reader: R, dim_default: Option<Dimension>) -> Result<(ParsedLog, usize), IngestError> {
    let mut out = ParsedLog::default();
    let mut total = 0;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = match std::str::from_utf8(&buf) {
            Ok(t) => t,
            Err(_) => {
                total += 1;
                out.rejects.push(Reject { line: line_no, reason: "invalid UTF-8".into() });
                continue;
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        total += 1;
        match json_record(text, dim_default) {
            Ok(mut rec) => {
                rec.line = line_no;
                out.records.push(rec);
            }
            Err(reason) => out.rejects.push(Reject { line: line_no, reason }),
        }
    }
    Ok((out, total))
}

fn json_record(text: &str, dim_default: Option<Dimension>) -> Result<LogRecord, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| format!("invalid json: {e}"))?;
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    let ts = match obj.get("ts") {
        Some(Value::Number(n)) => n.as_f64().ok_or("ts is not representable")?,
        Some(Value::String(s)) => parse_ts(s)?,
        Some(_) => return Err("ts must be a number".into()),
        None => return Err("missing field `ts`".into()),
    };
    let node = match obj.get("node") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("node must be a string".into()),
        None => return Err("missing field `node`".into()),
    };
    let dim = match obj.get("dim") {
        Some(Value::String(s)) => Some(s.parse::<Dimension>().map_err(|e| e.to_string())?),
        Some(Value::Null) | None => dim_default,
        Some(_) => return Err("dim must be a string".into()),
    };
    let msg = match obj.get("msg") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Null) | None => String::new(),
        Some(_) => return Err("msg must be a string".into()),
    };
    validated(ts, node, dim, msg)
}

fn parse_ts(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|_| format!("ts `{s}` is not numeric"))
}

fn validated(ts: f64, node: String, dim: Option<Dimension>, msg: String) -> Result<LogRecord, String> {
    if !ts.is_finite() || ts < 0.0 {
        return Err(format!("ts {ts} must be a finite non-negative number"));
    }
    if node.is_empty() {
        return Err("node must be non-empty".into());
    }
    Ok(LogRecord { ts, node, dim, msg, line: 0 })
}

fn parse_csv<R: BufRead>(reader: R, dim_default: Option<Dimension>) -> Result<(ParsedLog, usize), IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    // an empty stream has no header and no records
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok((ParsedLog::default(), 0));
    }
    let col = |name: &'static str| headers.iter().position(|h| h.trim() == name);
    let ts_col = col("ts").ok_or(IngestError::MissingColumn("ts"))?;
    let node_col = col("node").ok_or(IngestError::MissingColumn("node"))?;
    let msg_col = col("msg").ok_or(IngestError::MissingColumn("msg"))?;
    let dim_col = col("dim");

    let mut out = ParsedLog::default();
    let mut total = 0;
    for result in rdr.records() {
        total += 1;
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                out.rejects.push(Reject { line, reason: e.to_string() });
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| record.get(i).ok_or_else(|| format!("row has only {} columns", record.len()));
        let parsed = (|| {
            let ts = parse_ts(field(ts_col)?)?;
            let node = field(node_col)?.to_string();
            let msg = field(msg_col)?.to_string();
            let dim = match dim_col.and_then(|i| record.get(i)).map(str::trim) {
                Some(s) if !s.is_empty() => Some(s.parse::<Dimension>().map_err(|e| e.to_string())?),
                _ => dim_default,
            };
            validated(ts, node, dim, msg)
        })();
        match parsed {
            Ok(mut rec) => {
                rec.line = line;
                out.records.push(rec);
            }
            Err(reason) => out.rejects.push(Reject { line, reason }),
        }
    }
    Ok((out, total))
}

/// Bijective masked-string ↔ id table; ids are handed out in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateTable {
    masked: Vec<String>,
    index: HashMap<String, TemplateId>,
}

impl TemplateTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }

    pub fn intern(&mut self, masked: &str) -> TemplateId {
        if let Some(&id) = self.index.get(masked) {
            return id;
        }
        let id = TemplateId(self.masked.len() as u32);
        self.masked.push(masked.to_string());
        self.index.insert(masked.to_string(), id);
        id
    }

    pub fn get(&self, masked: &str) -> Option<TemplateId> {
        self.index.get(masked).copied()
    }

    pub fn masked(&self, id: TemplateId) -> Option<&str> {
        self.masked.get(id.0 as usize).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TemplateId, &str)> {
        self.masked
            .iter()
            .enumerate()
            .map(|(i, s)| (TemplateId(i as u32), s.as_str()))
    }

    /// Rebuilds a table from `(id, masked)` pairs; ids must be exactly 0..n.
    pub fn from_entries<I>(entries: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (TemplateId, String)>,
    {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by_key(|(id, _)| *id);
        let mut table = TemplateTable::new();
        for (expected, (id, masked)) in entries.into_iter().enumerate() {
            if id.0 as usize != expected {
                return Err(format!("template ids must be contiguous from 0; found {id} at position {expected}"));
            }
            if table.index.contains_key(&masked) {
                return Err(format!("duplicate masked template `{masked}`"));
            }
            table.intern(&masked);
        }
        Ok(table)
    }

    /// Two-column `id<TAB>masked` text; tabs, newlines and backslashes in
    /// the masked string are backslash-escaped.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, masked) in self.iter() {
            writeln!(w, "{}\t{}", id, escape_field(masked))?;
        }
        Ok(())
    }

    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self, IngestError> {
        let mut entries = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = |reason: String| IngestError::BadLine { line: i + 1, reason };
            let (id, masked) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>template".into()))?;
            let id: u32 = id.parse().map_err(|_| bad(format!("bad template id `{id}`")))?;
            entries.push((TemplateId(id), unescape_field(masked)));
        }
        TemplateTable::from_entries(entries).map_err(|reason| IngestError::BadLine { line: 0, reason })
    }
}

fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

static IPV4: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(?:\d{1,3}\.){3}\d{1,3}\b").unwrap());
static HEX: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(0[xX])?[0-9a-fA-F]{4,}\b").unwrap());
static PATH: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(^|\s)/\S*").unwrap());
static DIGITS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+").unwrap());

/// Masks the variable parts of a message: IPv4 quads, hex tokens, absolute
/// paths, then digit runs, in that order.
///
/// A hex token without a `0x` prefix must mix decimal digits and letters;
/// pure digit runs are numbers and pure-letter runs (`dead`, `added`) are
/// words.
pub fn mask_message(msg: &str) -> String {
    if msg.is_empty() {
        return "<EMPTY>".to_string();
    }
    let s = IPV4.replace_all(msg, "<IP>");
    let s = HEX.replace_all(&s, |caps: &Captures<'_>| {
        let whole = &caps[0];
        let prefixed = caps.get(1).is_some();
        let has_digit = whole.bytes().any(|b| b.is_ascii_digit());
        let has_alpha = whole.bytes().any(|b| b.is_ascii_alphabetic());
        if prefixed || (has_digit && has_alpha) {
            "<HEX>".to_string()
        } else {
            whole.to_string()
        }
    });
    let s = PATH.replace_all(&s, "${1}<PATH>");
    DIGITS.replace_all(&s, "<NUM>").into_owned()
}

pub fn extract_template(msg: &str, table: &mut TemplateTable) -> TemplateId {
    table.intern(&mask_message(msg))
}

/// One normalized log occurrence. `count` is the number of raw events it
/// stands for after coalescing (1 straight out of ingest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalEvent {
    pub ts: f64,
    pub node: String,
    pub dim: Dimension,
    pub template: TemplateId,
    #[serde(default = "one")]
    pub count: u32,
}

fn one() -> u32 {
    1
}

impl CanonicalEvent {
    pub fn new(ts: f64, node: impl Into<String>, dim: Dimension, template: TemplateId) -> Self {
        CanonicalEvent {
            ts,
            node: node.into(),
            dim,
            template,
            count: 1,
        }
    }

    /// The global `(ts, node, dim, template)` order every stage relies on.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        self.ts
            .total_cmp(&other.ts)
            .then_with(|| self.node.cmp(&other.node))
            .then_with(|| self.dim.cmp(&other.dim))
            .then_with(|| self.template.cmp(&other.template))
    }
}

pub fn sort_events(events: &mut [CanonicalEvent]) {
    events.sort_by(CanonicalEvent::total_cmp);
}

pub fn is_sorted(events: &[CanonicalEvent]) -> bool {
    events.windows(2).all(|w| w[0].total_cmp(&w[1]) != Ordering::Greater)
}

/// Templates every record (first-seen order follows input order) and
/// returns events in the global total order.
pub fn canonicalize(records: &[LogRecord], table: &mut TemplateTable) -> (Vec<CanonicalEvent>, Vec<Reject>) {
    let mut events = Vec::with_capacity(records.len());
    let mut rejects = Vec::new();
    for rec in records {
        let Some(dim) = rec.dim else {
            rejects.push(Reject {
                line: rec.line,
                reason: "record has no dimension and no default was given".into(),
            });
            continue;
        };
        let template = extract_template(&rec.msg, table);
        events.push(CanonicalEvent::new(rec.ts, rec.node.clone(), dim, template));
    }
    sort_events(&mut events);
    (events, rejects)
}

pub fn write_events_jsonl<W: Write>(events: &[CanonicalEvent], mut w: W) -> std::io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_events_jsonl<R: BufRead>(r: R) -> Result<Vec<CanonicalEvent>, IngestError> {
    let mut events = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: CanonicalEvent = serde_json::from_str(&line).map_err(|e| IngestError::BadLine {
            line: i + 1,
            reason: e.to_string(),
        })?;
        events.push(e);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, format: LogFormat) -> Result<ParsedLog, IngestError> {
        parse_lines(text.as_bytes(), format, None)
    }

    #[test]
    fn json_line_maps_fields() {
        let p = parse(r#"{"ts":10,"node":"n1","dim":"event","msg":"disk fail"}"#, LogFormat::Jsonl).unwrap();
        assert_eq!(p.records.len(), 1);
        let r = &p.records[0];
        assert_eq!((r.ts, r.node.as_str(), r.dim, r.msg.as_str()), (10.0, "n1", Some(Dimension::Event), "disk fail"));
        assert_eq!(r.line, 1);
    }

    #[test]
    fn empty_stream_is_empty() {
        assert!(parse("", LogFormat::Jsonl).unwrap().records.is_empty());
        assert!(parse("", LogFormat::Csv).unwrap().records.is_empty());
        assert!(parse("\n\n  \n", LogFormat::Jsonl).unwrap().records.is_empty());
    }

    #[test]
    fn bad_line_is_rejected_not_fatal() {
        let text = "{\"ts\":1,\"node\":\"a\",\"dim\":\"event\",\"msg\":\"x\"}\nnot json\n\
                    {\"ts\":2,\"node\":\"a\",\"dim\":\"ras\",\"msg\":\"y\"}\n\
                    {\"ts\":3,\"node\":\"b\",\"dim\":\"comm\",\"msg\":\"z\"}\n";
        let p = parse(text, LogFormat::Jsonl).unwrap();
        assert_eq!(p.records.len(), 3);
        assert_eq!(p.rejects.len(), 1);
        assert_eq!(p.rejects[0].line, 2);
    }

    #[test]
    fn majority_rejects_is_fatal() {
        let text = "garbage\n{\"ts\":1,\"node\":\"a\",\"msg\":\"x\"}\nmore garbage\n";
        assert!(matches!(parse(text, LogFormat::Jsonl), Err(IngestError::TooManyRejects { rejected: 2, total: 3, .. })));
        // exactly half is still fine
        let text = "garbage\n{\"ts\":1,\"node\":\"a\",\"msg\":\"x\"}\n";
        assert!(parse(text, LogFormat::Jsonl).is_ok());
    }

    #[test]
    fn field_validation() {
        for bad in [
            r#"{"ts":-1,"node":"a","msg":"x"}"#,
            r#"{"ts":1,"node":"","msg":"x"}"#,
            r#"{"ts":1,"node":"a","dim":"disk","msg":"x"}"#,
            r#"{"node":"a","msg":"x"}"#,
            r#"[1,2]"#,
        ] {
            assert!(json_record(bad, None).is_err(), "{bad}");
        }
    }

    #[test]
    fn dim_default_applies() {
        let p = parse_lines(r#"{"ts":1,"node":"a","msg":"x"}"#.as_bytes(), LogFormat::Jsonl, Some(Dimension::Ras)).unwrap();
        assert_eq!(p.records[0].dim, Some(Dimension::Ras));
    }

    #[test]
    fn csv_with_optional_dim() {
        let text = "ts,node,msg\n1.5,a,cpu temp 88\n\n2,b,\"disk, full\"\n";
        let p = parse_lines(text.as_bytes(), LogFormat::Csv, Some(Dimension::Status)).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.records[1].msg, "disk, full");
        assert_eq!(p.records[1].dim, Some(Dimension::Status));

        let text = "ts,node,dim,msg\n1,a,comm,x\nzz,a,comm,y\n3,b,ras,z\n";
        let p = parse(text, LogFormat::Csv).unwrap();
        assert_eq!(p.records.len(), 2);
        assert_eq!(p.rejects.len(), 1);
        assert_eq!(p.rejects[0].line, 3);
    }

    #[test]
    fn csv_requires_columns() {
        assert!(matches!(parse("ts,msg\n1,x\n", LogFormat::Csv), Err(IngestError::MissingColumn("node"))));
    }

    #[test]
    fn masking_rules() {
        assert_eq!(mask_message("cpu temp 88"), "cpu temp <NUM>");
        assert_eq!(mask_message("error node5 code 0x1A4F"), "error node<NUM> code <HEX>");
        assert_eq!(mask_message(""), "<EMPTY>");
        assert_eq!(mask_message("from 10.0.0.12:8080 ok"), "from <IP>:<NUM> ok");
        assert_eq!(mask_message("open /var/log/messages failed"), "open <PATH> failed");
        assert_eq!(mask_message("page deadbeef fault"), "page deadbeef fault");
        assert_eq!(mask_message("addr 7ffe12ab port 2049"), "addr <HEX> port <NUM>");
    }

    #[test]
    fn same_mask_same_id() {
        let mut t = TemplateTable::new();
        let a = extract_template("cpu temp 88", &mut t);
        let b = extract_template("cpu temp 91", &mut t);
        let c = extract_template("", &mut t);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(t.masked(c), Some("<EMPTY>"));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn canonicalize_orders_and_templates() {
        let records = vec![
            LogRecord::new(5.0, "b", Dimension::Event, "x 1"),
            LogRecord::new(5.0, "a", Dimension::Event, "y"),
            LogRecord::new(1.0, "c", Dimension::Ras, "x 2"),
        ];
        let mut t = TemplateTable::new();
        let (events, rejects) = canonicalize(&records, &mut t);
        assert!(rejects.is_empty());
        let order: Vec<_> = events.iter().map(|e| (e.ts, e.node.as_str(), e.template.0)).collect();
        assert_eq!(order, vec![(1.0, "c", 0), (5.0, "a", 1), (5.0, "b", 0)]);
    }

    #[test]
    fn single_record_gets_template_zero() {
        let mut t = TemplateTable::new();
        let (events, _) = canonicalize(&[LogRecord::new(3.0, "n", Dimension::Comm, "link up")], &mut t);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].template, TemplateId(0));
    }

    #[test]
    fn missing_dim_is_rejected() {
        let mut rec = LogRecord::new(1.0, "a", Dimension::Event, "x");
        rec.dim = None;
        rec.line = 7;
        let (events, rejects) = canonicalize(&[rec], &mut TemplateTable::new());
        assert!(events.is_empty());
        assert_eq!(rejects[0].line, 7);
    }

    #[test]
    fn tsv_round_trip_with_escapes() {
        let mut t = TemplateTable::new();
        for s in ["plain", "tab\there", "new\nline", "back\\slash"] {
            t.intern(s);
        }
        let mut buf = Vec::new();
        t.write_tsv(&mut buf).unwrap();
        assert_eq!(TemplateTable::read_tsv(&buf[..]).unwrap(), t);
    }

    proptest! {
        #[test]
        fn masking_is_idempotent(msg in "[a-f0-9xX ./:<>_-]{0,30}") {
            let once = mask_message(&msg);
            prop_assert_eq!(mask_message(&once), once.clone());
        }

        #[test]
        fn ids_are_contiguous_first_seen(msgs in proptest::collection::vec("[ab0-9 ]{0,6}", 0..40)) {
            let mut t = TemplateTable::new();
            let mut seen: Vec<String> = Vec::new();
            for m in &msgs {
                let id = extract_template(m, &mut t);
                let masked = mask_message(m);
                match seen.iter().position(|s| *s == masked) {
                    Some(i) => prop_assert_eq!(id.0 as usize, i),
                    None => { prop_assert_eq!(id.0 as usize, seen.len()); seen.push(masked); }
                }
            }
            prop_assert_eq!(t.len(), seen.len());
        }
    }
}
