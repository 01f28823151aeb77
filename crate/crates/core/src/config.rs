//! Pipeline configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::checks::ReleasePolicy;
use crate::risk::{KeySpec, RiskClass};
use crate::sdc::{CodingMode, PrecisionUnit, DEFAULT_POOLED_LABEL, DEFAULT_POOL_THRESHOLD};
use crate::synthesis::{Method, SynthesisConfig};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_metadata: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Stem for output files; "synthetic" is added when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_stem: Option<String>,
    /// Existing synthetic artifacts to check instead of the pipeline's own
    /// outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_documentation: Option<PathBuf>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_pool_threshold() -> usize {
    DEFAULT_POOL_THRESHOLD
}

fn default_pooled_label() -> String {
    DEFAULT_POOLED_LABEL.to_string()
}

/// A mitigation as declared in the config. Columns are named as in the
/// original; the affix is added when the step is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MitigationStep {
    ReducePrecision {
        column: String,
        unit: PrecisionUnit,
    },
    TopBottomCode {
        column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        percentiles: Option<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        count_threshold: Option<usize>,
    },
    PoolCategories {
        column: String,
        #[serde(default = "default_pool_threshold")]
        threshold: usize,
        #[serde(default = "default_pooled_label")]
        pooled_label: String,
    },
    /// Removes risky records, re-classifying until none of the class remain
    /// (bounded). Defaults to the policy's gating class.
    RemoveRecords {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<RiskClass>,
    },
    CoarsenKey {
        column: String,
        mapping: BTreeMap<String, String>,
    },
}

impl MitigationStep {
    pub fn coding_mode(&self) -> Option<CodingMode> {
        match self {
            MitigationStep::TopBottomCode {
                percentiles: Some([low, high]),
                count_threshold: None,
                ..
            } => Some(CodingMode::Percentile { low: *low, high: *high }),
            MitigationStep::TopBottomCode {
                percentiles: None,
                count_threshold: Some(t),
                ..
            } => Some(CodingMode::CountThreshold { threshold: *t }),
            _ => None,
        }
    }

    fn problems(&self, index: usize, has_original: bool) -> Vec<String> {
        let at = format!("mitigations[{index}]");
        let mut out = Vec::new();
        match self {
            MitigationStep::ReducePrecision { unit, .. } => {
                if let PrecisionUnit::Numeric(u) = unit {
                    if !(u.is_finite() && *u > 0.0) {
                        out.push(format!("{at}: unit must be positive"));
                    }
                }
            }
            MitigationStep::TopBottomCode {
                percentiles,
                count_threshold,
                ..
            } => match (percentiles, count_threshold) {
                (Some([low, high]), None) => {
                    if !(*low >= 0.0 && *high <= 100.0 && low < high) {
                        out.push(format!("{at}: percentiles need 0 <= low < high <= 100"));
                    }
                }
                (None, Some(0)) => out.push(format!("{at}: count_threshold must be at least 1")),
                (None, Some(_)) => {}
                _ => out.push(format!("{at}: give exactly one of percentiles or count_threshold")),
            },
            MitigationStep::PoolCategories { threshold, pooled_label, .. } => {
                if *threshold == 0 {
                    out.push(format!("{at}: threshold must be at least 1"));
                }
                if pooled_label.is_empty() {
                    out.push(format!("{at}: pooled_label must not be empty"));
                }
                if !has_original {
                    out.push(format!("{at}: pooling needs original_data for category counts"));
                }
            }
            MitigationStep::RemoveRecords { .. } => {
                if !has_original {
                    out.push(format!("{at}: removing risky records needs original_data"));
                }
            }
            MitigationStep::CoarsenKey { mapping, .. } => {
                if mapping.is_empty() {
                    out.push(format!("{at}: mapping must not be empty"));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Structured,
    Human,
    #[default]
    Both,
}

impl ReportFormat {
    pub fn structured(self) -> bool {
        matches!(self, ReportFormat::Structured | ReportFormat::Both)
    }

    pub fn human(self) -> bool {
        matches!(self, ReportFormat::Human | ReportFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    #[serde(default)]
    pub format: ReportFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Sentinel read as missing in input CSVs, besides the empty field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_token: Option<String>,
    #[serde(default)]
    pub paths: Paths,
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub keys: KeySpec,
    #[serde(default)]
    pub policy: ReleasePolicy,
    #[serde(default)]
    pub mitigations: Vec<MitigationStep>,
    #[serde(default)]
    pub report: ReportOptions,
}

impl PipelineConfig {
    /// A config with no inputs, to be completed from command-line flags.
    pub fn empty(method: Method, n_synth: usize) -> PipelineConfig {
        PipelineConfig {
            missing_token: None,
            paths: Paths {
                output_dir: default_output_dir(),
                ..Paths::default()
            },
            synthesis: SynthesisConfig::new(method, n_synth, 0),
            keys: KeySpec::default(),
            policy: ReleasePolicy::default(),
            mitigations: Vec::new(),
            report: ReportOptions::default(),
        }
    }

    pub fn parse(text: &str) -> Result<PipelineConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, Vec<String>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        let mut config = PipelineConfig::parse(&text).map_err(|e| vec![format!("{}: {e}", path.display())])?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        for p in [
            &mut paths.original_data,
            &mut paths.original_metadata,
            &mut paths.synthetic_data,
            &mut paths.synthetic_schema,
            &mut paths.synthetic_documentation,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut paths.output_dir);
    }

    /// Every problem with the config, in one list.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let has_original = self.paths.original_data.is_some();
        if !has_original && self.paths.original_metadata.is_none() {
            out.push("paths: give original_data, original_metadata, or both".to_string());
        }
        if self.synthesis.method == Method::FromMargins && !has_original {
            out.push("synthesis: from_margins needs paths.original_data".to_string());
        }
        out.extend(self.synthesis.problems().into_iter().map(|p| format!("synthesis: {p}")));
        if self.synthesis.seed > i64::MAX as u64 {
            out.push(format!("synthesis: seed must be at most {}", i64::MAX));
        }
        out.extend(self.policy.problems());
        if self.synthesis.affix != self.policy.required_affix {
            out.push(format!(
                "synthesis affix ({}) differs from the policy's required affix ({})",
                self.synthesis.affix, self.policy.required_affix
            ));
        }
        if has_original && self.keys.columns.is_empty() {
            out.push("keys: list at least one key column".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for k in &self.keys.columns {
            if !seen.insert(k) {
                out.push(format!("keys: '{k}' listed twice"));
            }
        }
        if matches!(&self.missing_token, Some(t) if t.is_empty()) {
            out.push("missing_token must not be empty".to_string());
        }
        if let Some(stem) = &self.paths.output_stem {
            if stem.is_empty() || stem.contains(['/', '\\']) {
                out.push("paths.output_stem must be a plain, non-empty file stem".to_string());
            }
        }
        for (i, step) in self.mitigations.iter().enumerate() {
            out.extend(step.problems(i, has_original));
        }
        out
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }
}
