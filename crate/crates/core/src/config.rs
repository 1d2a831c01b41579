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

//! Every pipeline threshold in one place.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{Dimension, TemplateId};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config value for `{key}`: {reason}")]
    Range { key: &'static str, reason: String },
}

/// What a window-graph node weight means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    #[default]
    Confidence,
    Support,
    Product,
}

/// How the constituent rule confidences of a pattern are folded together.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    #[default]
    Geomean,
    Min,
    Product,
}

impl Combiner {
    pub fn combine(self, values: &[f64]) -> f64 {
        if values.is_empty() {
            return 1.0;
        }
        match self {
            Combiner::Geomean => {
                let product: f64 = values.iter().product();
                if product <= 0.0 {
                    0.0
                } else {
                    product.powf(1.0 / values.len() as f64).min(1.0)
                }
            }
            Combiner::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Combiner::Product => values.iter().product(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Episode window width, seconds.
    pub window: f64,
    /// Timestamp quantum for window enumeration, seconds.
    pub granularity: f64,
    pub min_sup: f64,
    pub min_conf: f64,
    pub k_max: usize,
    /// Coalescing gap, seconds.
    pub gap: f64,
    pub blacklist: BTreeSet<TemplateId>,
    pub blacklist_file: Option<PathBuf>,
    /// Events per hour per (node, template); absent disables rate filtering.
    pub max_rate: Option<f64>,
    /// Correlation window, seconds.
    pub corr_window: f64,
    /// Largest anchor lag that still yields an edge, seconds.
    pub max_lag: f64,
    pub weight_mode: WeightMode,
    pub ws_min: f64,
    pub p_max: usize,
    pub combiner: Combiner,
    pub input: Option<PathBuf>,
    pub format: String,
    pub dim_default: Option<Dimension>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: 120.0,
            granularity: 1.0,
            min_sup: 0.1,
            min_conf: 0.0,
            k_max: 4,
            gap: 5.0,
            blacklist: BTreeSet::new(),
            blacklist_file: None,
            max_rate: None,
            corr_window: 300.0,
            max_lag: 120.0,
            weight_mode: WeightMode::Confidence,
            ws_min: 0.1,
            p_max: 6,
            combiner: Combiner::Geomean,
            input: None,
            format: "jsonl".into(),
            dim_default: None,
            out: None,
            seed: None,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn check(ok: bool, key: &'static str, reason: impl Into<String>) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Range { key, reason: reason.into() })
            }
        }
        check(self.granularity > 0.0, "granularity", "must be > 0")?;
        check(self.window.is_finite() && (self.window / self.granularity).round() >= 1.0, "window", "must be at least one granularity unit")?;
        check(self.min_sup > 0.0 && self.min_sup <= 1.0, "min_sup", "must lie in (0, 1]")?;
        check((0.0..=1.0).contains(&self.min_conf), "min_conf", "must lie in [0, 1]")?;
        check(self.k_max >= 1, "k_max", "must be >= 1")?;
        check(self.gap > 0.0, "gap", "must be > 0")?;
        if let Some(rate) = self.max_rate {
            check(rate > 0.0, "max_rate", "must be > 0")?;
        }
        check(self.corr_window > 0.0, "corr_window", "must be > 0")?;
        check(self.max_lag > 0.0 && self.max_lag <= self.corr_window, "max_lag", "must satisfy 0 < max_lag <= corr_window")?;
        check(self.ws_min > 0.0 && self.ws_min <= 1.0, "ws_min", "must lie in (0, 1]")?;
        check(self.p_max >= 1, "p_max", "must be >= 1")?;
        check(matches!(self.format.as_str(), "jsonl" | "json" | "csv"), "format", "must be jsonl or csv")?;
        if let Some(t) = self.threads {
            check(t >= 1, "threads", "must be >= 1")?;
        }
        Ok(())
    }

    /// SHA-256 over the analysis knobs. Paths, seed and thread count do not
    /// affect mining results and are left out.
    pub fn digest(&self) -> String {
        let mut knobs = self.clone();
        knobs.blacklist_file = None;
        knobs.input = None;
        knobs.out = None;
        knobs.seed = None;
        knobs.threads = None;
        let json = serde_json::to_string(&knobs).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_names_the_key() {
        let err = PipelineConfig::from_toml("min_sup = 0.2\nbogus_knob = 3\n").unwrap_err();
        assert!(err.to_string().contains("bogus_knob"), "{err}");
    }

    #[test]
    fn ranges_are_checked() {
        assert!(PipelineConfig::from_toml("min_sup = 0.0").is_err());
        assert!(PipelineConfig::from_toml("max_lag = 400.0").is_err());
        assert!(PipelineConfig::from_toml("window = 0.2").is_err());
        let cfg = PipelineConfig::from_toml("weight_mode = \"product\"\ncombiner = \"min\"\nblacklist = [3, 1]").unwrap();
        assert_eq!(cfg.weight_mode, WeightMode::Product);
        assert_eq!(cfg.blacklist.len(), 2);
    }

    #[test]
    fn digest_ignores_threads() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { threads: Some(8), ..PipelineConfig::default() };
        let c = PipelineConfig { min_sup: 0.3, ..PipelineConfig::default() };
        assert_eq!(a.digest(), b.digest());
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn combiners() {
        assert_eq!(Combiner::Geomean.combine(&[1.0, 1.0]), 1.0);
        assert_eq!(Combiner::Geomean.combine(&[0.25, 1.0]), 0.5);
        assert_eq!(Combiner::Min.combine(&[0.25, 1.0]), 0.25);
        assert_eq!(Combiner::Product.combine(&[0.5, 0.5]), 0.25);
        assert_eq!(Combiner::Geomean.combine(&[0.0, 1.0]), 0.0);
    }
}
