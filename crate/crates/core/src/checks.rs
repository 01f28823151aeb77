//! The four pre-release checks (labelling, disclosure, structure,
//! documentation) and the documentation bundle.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::dataset::{Cell, Dataset};
use crate::risk::{
    classify_risky_records, detect_singleton_values, KeySpec, RangeEndpoint, RiskClass, RiskError, RiskReport,
    SingletonValue, DEFAULT_RARITY_THRESHOLD, DEFAULT_SYNTH_COUNT_THRESHOLD,
};
use crate::schema::{
    diff_schemas, validate, ColumnKind, SchemaDiff, TableSchema, Violation, SYNTHETIC_BANNER,
};
use crate::sdc::{self, AuditTrail, Mitigation, SdcError};
use crate::synthesis::Method;

pub const DEFAULT_FILENAME_TOKEN: &str = "synthetic";

/// Finding codes.
pub mod codes {
    pub const LABEL_HEADER: &str = "LABEL_HEADER";
    pub const LABEL_FILENAME: &str = "LABEL_FILENAME";
    pub const LABEL_AFFIX: &str = "LABEL_AFFIX";
    pub const RISK_REPLICATED_UNIQUE: &str = "RISK_REPLICATED_UNIQUE";
    pub const RISK_UNIQUE_IN_ORIGINAL: &str = "RISK_UNIQUE_IN_ORIGINAL";
    pub const RISK_SINGLETON_VALUE: &str = "RISK_SINGLETON_VALUE";
    pub const RISK_RANGE_ENDPOINT: &str = "RISK_RANGE_ENDPOINT";
    pub const RISK_KEYS_NOT_EVALUATED: &str = "RISK_KEYS_NOT_EVALUATED";
    pub const RISK_MITIGATION_EXHAUSTED: &str = "RISK_MITIGATION_EXHAUSTED";
    pub const RISK_SUMMARY: &str = "RISK_SUMMARY";
    pub const STRUCT_NAME: &str = "STRUCT_NAME";
    pub const STRUCT_KIND: &str = "STRUCT_KIND";
    pub const STRUCT_CATEGORY: &str = "STRUCT_CATEGORY";
    pub const STRUCT_PRECISION: &str = "STRUCT_PRECISION";
    pub const STRUCT_RANGE: &str = "STRUCT_RANGE";
    pub const STRUCT_DOCUMENTED: &str = "STRUCT_DOCUMENTED";
    pub const MISSINGNESS_DISAGREE: &str = "MISSINGNESS_DISAGREE";
    pub const DOC_REFERENCE: &str = "DOC_REFERENCE";
    pub const DOC_EXPECTATION: &str = "DOC_EXPECTATION";
    pub const DOC_DIFF: &str = "DOC_DIFF";
    pub const DOC_TRAIL: &str = "DOC_TRAIL";
    pub const DOC_SCHEMA_REFERENCE: &str = "DOC_SCHEMA_REFERENCE";
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("documentation needs a pointer to the original metadata")]
    MissingOriginalReference,
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Sdc(#[from] SdcError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    Labelling,
    Disclosure,
    Structure,
    Documentation,
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckId::Labelling => "labelling",
            CheckId::Disclosure => "disclosure",
            CheckId::Structure => "structure",
            CheckId::Documentation => "documentation",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warn,
    Fail,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Info => "info",
            Severity::Warn => "warn",
            Severity::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

impl Finding {
    pub fn new(severity: Severity, code: &str, message: impl Into<String>) -> Finding {
        Finding {
            severity,
            code: code.to_string(),
            message: message.into(),
            location: None,
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Finding {
        self.location = Some(location.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check_id: CheckId,
    pub verdict: Verdict,
    #[serde(default)]
    pub findings: Vec<Finding>,
}

impl CheckOutcome {
    /// Builds an outcome whose verdict follows from the findings.
    pub fn from_findings(check_id: CheckId, findings: Vec<Finding>) -> CheckOutcome {
        let verdict = if findings.iter().any(|f| f.severity == Severity::Fail) {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
        CheckOutcome {
            check_id,
            verdict,
            findings,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn failing_codes(&self) -> Vec<&str> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Fail)
            .map(|f| f.code.as_str())
            .collect()
    }
}

/// Release thresholds. The numeric defaults are a starting point that a
/// data controller is expected to review, not fixed rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReleasePolicy {
    pub max_replicated_unique_proportion: f64,
    pub max_unique_in_original_proportion: f64,
    /// With `unique_in_original` both bounds apply; with
    /// `replicated_unique` only the replicated bound does.
    pub gating_class: RiskClass,
    pub synth_count_threshold: usize,
    pub rarity_threshold: usize,
    pub required_affix: AffixRule,
    pub filename_token: String,
    /// Columns whose rare values are reported as warnings only.
    pub singleton_exempt_columns: Vec<String>,
}

impl Default for ReleasePolicy {
    fn default() -> Self {
        ReleasePolicy {
            max_replicated_unique_proportion: 0.0,
            max_unique_in_original_proportion: 0.01,
            gating_class: RiskClass::UniqueInOriginal,
            synth_count_threshold: DEFAULT_SYNTH_COUNT_THRESHOLD,
            rarity_threshold: DEFAULT_RARITY_THRESHOLD,
            required_affix: AffixRule::default(),
            filename_token: DEFAULT_FILENAME_TOKEN.to_string(),
            singleton_exempt_columns: Vec::new(),
        }
    }
}

impl ReleasePolicy {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = 0.0..=1.0;
        if !unit.contains(&self.max_replicated_unique_proportion) {
            out.push("policy.max_replicated_unique_proportion must lie in [0, 1]".to_string());
        }
        if !unit.contains(&self.max_unique_in_original_proportion) {
            out.push("policy.max_unique_in_original_proportion must lie in [0, 1]".to_string());
        }
        if self.max_replicated_unique_proportion > self.max_unique_in_original_proportion {
            out.push("policy: the replicated-unique bound must not exceed the unique-in-original bound".to_string());
        }
        if self.synth_count_threshold == 0 {
            out.push("policy.synth_count_threshold must be at least 1".to_string());
        }
        if self.rarity_threshold == 0 {
            out.push("policy.rarity_threshold must be at least 1".to_string());
        }
        if self.required_affix.token().is_empty() {
            out.push("policy.required_affix must not be empty".to_string());
        }
        if self.filename_token.trim().is_empty() {
            out.push("policy.filename_token must not be empty".to_string());
        }
        out
    }

    /// Human-readable list of fields that differ from the defaults.
    pub fn overrides(&self) -> Vec<String> {
        let d = ReleasePolicy::default();
        let mut out = Vec::new();
        let mut note = |name: &str, default: String, actual: String| {
            if default != actual {
                out.push(format!("{name}: {actual} (default {default})"));
            }
        };
        note(
            "max_replicated_unique_proportion",
            d.max_replicated_unique_proportion.to_string(),
            self.max_replicated_unique_proportion.to_string(),
        );
        note(
            "max_unique_in_original_proportion",
            d.max_unique_in_original_proportion.to_string(),
            self.max_unique_in_original_proportion.to_string(),
        );
        note("gating_class", d.gating_class.to_string(), self.gating_class.to_string());
        note(
            "synth_count_threshold",
            d.synth_count_threshold.to_string(),
            self.synth_count_threshold.to_string(),
        );
        note("rarity_threshold", d.rarity_threshold.to_string(), self.rarity_threshold.to_string());
        note("required_affix", d.required_affix.to_string(), self.required_affix.to_string());
        note("filename_token", d.filename_token.clone(), self.filename_token.clone());
        note(
            "singleton_exempt_columns",
            "[]".to_string(),
            format!("[{}]", self.singleton_exempt_columns.join(", ")),
        );
        out
    }

    /// Bounds that apply to a report under this policy, as (class, bound).
    pub fn gated_bounds(&self) -> Vec<(RiskClass, f64)> {
        let mut out = vec![(RiskClass::ReplicatedUnique, self.max_replicated_unique_proportion)];
        if self.gating_class == RiskClass::UniqueInOriginal {
            out.push((RiskClass::UniqueInOriginal, self.max_unique_in_original_proportion));
        }
        out
    }

    /// True when the report is within every gated bound.
    pub fn within_bounds(&self, report: &RiskReport) -> bool {
        self.gated_bounds().iter().all(|(class, bound)| report.proportion(*class) <= *bound)
    }
}

/// Check 1: the file, its schema and its columns all say "synthetic".
pub fn check_labelling(
    file_name: &str,
    synth_schema: &TableSchema,
    schema_has_banner: bool,
    column_names: &[String],
    policy: &ReleasePolicy,
) -> CheckOutcome {
    let mut findings = Vec::new();
    if !synth_schema.header.is_synthetic {
        findings.push(Finding::new(
            Severity::Fail,
            codes::LABEL_HEADER,
            "schema header does not declare is_synthetic = true",
        ));
    }
    if !schema_has_banner {
        findings.push(Finding::new(
            Severity::Fail,
            codes::LABEL_HEADER,
            format!("schema does not begin with the banner line \"{SYNTHETIC_BANNER}\""),
        ));
    }
    let base = std::path::Path::new(file_name)
        .file_name()
        .map_or_else(|| file_name.to_string(), |n| n.to_string_lossy().into_owned());
    if !base.to_lowercase().contains(&policy.filename_token.to_lowercase()) {
        findings.push(
            Finding::new(
                Severity::Fail,
                codes::LABEL_FILENAME,
                format!("file name '{base}' does not contain '{}'", policy.filename_token),
            )
            .at(base.clone()),
        );
    }
    let mut seen = HashSet::new();
    let unlabelled: Vec<&str> = column_names
        .iter()
        .chain(synth_schema.columns.iter().map(|c| &c.name))
        .filter(|n| !policy.required_affix.has(n))
        .filter(|n| seen.insert(n.as_str()))
        .map(String::as_str)
        .collect();
    if !unlabelled.is_empty() {
        findings.push(
            Finding::new(
                Severity::Fail,
                codes::LABEL_AFFIX,
                format!(
                    "column(s) without the required {}: {}",
                    policy.required_affix,
                    unlabelled.join(", ")
                ),
            )
            .at(unlabelled.join(", ")),
        );
    }
    CheckOutcome::from_findings(CheckId::Labelling, findings)
}

/// Everything the disclosure check looks at.
pub struct DisclosureInputs<'a> {
    pub synth: &'a Dataset,
    pub synth_schema: &'a TableSchema,
    pub original: Option<&'a Dataset>,
    pub original_schema: &'a TableSchema,
    pub keys: &'a KeySpec,
    pub trail: &'a AuditTrail,
    pub affix: &'a AffixRule,
    /// How the synthetic values were produced; `None` for an externally
    /// supplied file, which is treated as derived from the data.
    pub method: Option<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonFinding {
    #[serde(flatten)]
    pub value: SingletonValue,
    pub released: bool,
    pub exempt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisclosureResult {
    pub outcome: CheckOutcome,
    pub risk: Option<RiskReport>,
    pub singletons: Vec<SingletonFinding>,
}

fn rows_text(rows: &[usize]) -> String {
    let list: Vec<String> = rows.iter().map(usize::to_string).collect();
    format!("rows {}", list.join(", "))
}

/// The original coded the way the released data was, so that key matching
/// and rarity are judged at released precision. Record removal is not
/// replayed.
pub fn released_view_of_original(original: &Dataset, trail: &AuditTrail, affix: &AffixRule) -> Result<Dataset, SdcError> {
    sdc::replay(original, trail, |name| affix.strip(name).unwrap_or(name).to_string(), false)
}

fn endpoint_exposed(single: &SingletonValue, released: Option<(f64, f64)>, cell: Option<f64>) -> bool {
    let (Some((lo, hi)), Some(v)) = (released, cell) else {
        return false;
    };
    match single.endpoint {
        Some(RangeEndpoint::Min) => v == lo,
        Some(RangeEndpoint::Max) => v == hi,
        Some(RangeEndpoint::Both) => v == lo || v == hi,
        None => false,
    }
}

/// Check 2: rare values and risky key combinations.
pub fn check_disclosure(inputs: &DisclosureInputs<'_>, policy: &ReleasePolicy) -> Result<DisclosureResult, CheckError> {
    let mut findings = Vec::new();
    let Some(original) = inputs.original else {
        return Ok(metadata_only_disclosure(inputs, policy));
    };
    let released = released_view_of_original(original, inputs.trail, inputs.affix)?;
    let report = classify_risky_records(
        inputs.synth,
        &released,
        inputs.keys,
        inputs.affix,
        policy.synth_count_threshold,
    )?;
    findings.push(Finding::new(
        Severity::Info,
        codes::RISK_SUMMARY,
        format!(
            "keys [{}]: {} synthetic unique(s), {} unique in original ({:.4}), {} replicated unique ({:.4}) of {} rows; gating class {}",
            report.keys.join(", "),
            report.n_synth_unique,
            report.n_unique_in_original,
            report.proportion_unique_in_original,
            report.n_replicated_unique,
            report.proportion_replicated_unique,
            report.n_synth,
            policy.gating_class,
        ),
    ));
    for (class, bound) in policy.gated_bounds() {
        let proportion = report.proportion(class);
        if proportion > bound {
            let code = match class {
                RiskClass::ReplicatedUnique => codes::RISK_REPLICATED_UNIQUE,
                RiskClass::UniqueInOriginal => codes::RISK_UNIQUE_IN_ORIGINAL,
            };
            findings.push(
                Finding::new(
                    Severity::Fail,
                    code,
                    format!(
                        "{} record(s) are {class}: proportion {proportion:.4} exceeds bound {bound}",
                        report.rows(class).len()
                    ),
                )
                .at(rows_text(report.rows(class))),
            );
        }
    }

    let data_derived = inputs.method != Some(Method::FromMetadata);
    let mut singletons = Vec::new();
    for single in detect_singleton_values(&released, inputs.original_schema, policy.rarity_threshold) {
        let synth_name = inputs.affix.apply(&single.column);
        let Some(synth_col) = inputs.synth.column(&synth_name) else {
            continue;
        };
        let present = data_derived && synth_col.cells.iter().any(|c| c.canonical() == single.key);
        let range = inputs
            .synth_schema
            .column(&synth_name)
            .and_then(|s| s.numeric_range)
            .map(|r| r.bounds());
        let value = released
            .column(&single.column)
            .and_then(|c| c.cells.iter().find(|cell| cell.canonical() == single.key))
            .and_then(Cell::as_f64);
        let exposed = present || endpoint_exposed(&single, range, value);
        let exempt = policy.singleton_exempt_columns.iter().any(|c| c == &single.column || *c == synth_name);
        if exposed {
            let severity = if exempt { Severity::Warn } else { Severity::Fail };
            let how = if present {
                "appears in the synthetic data"
            } else {
                "is published as a range endpoint"
            };
            findings.push(
                Finding::new(
                    severity,
                    codes::RISK_SINGLETON_VALUE,
                    format!(
                        "value {} held by {} original record(s) {how}",
                        single.value, single.count
                    ),
                )
                .at(format!("{synth_name}={}", single.value)),
            );
        }
        singletons.push(SingletonFinding {
            value: single,
            released: exposed,
            exempt,
        });
    }
    Ok(DisclosureResult {
        outcome: CheckOutcome::from_findings(CheckId::Disclosure, findings),
        risk: Some(report),
        singletons,
    })
}

fn metadata_only_disclosure(inputs: &DisclosureInputs<'_>, policy: &ReleasePolicy) -> DisclosureResult {
    let mut findings = vec![Finding::new(
        Severity::Info,
        codes::RISK_KEYS_NOT_EVALUATED,
        "no original data available: key matching was not evaluated",
    )];
    for spec in &inputs.synth_schema.columns {
        if !matches!(spec.kind, ColumnKind::Numeric | ColumnKind::Date) {
            continue;
        }
        let Some(range) = spec.numeric_range else {
            continue;
        };
        let exempt = policy.singleton_exempt_columns.iter().any(|c| {
            c == &spec.name || inputs.affix.strip(&spec.name) == Some(c.as_str())
        });
        let severity = if exempt { Severity::Info } else { Severity::Warn };
        findings.push(
            Finding::new(
                severity,
                codes::RISK_RANGE_ENDPOINT,
                format!("published range {range} cannot be checked for rare extreme values without the original"),
            )
            .at(spec.name.clone()),
        );
    }
    DisclosureResult {
        outcome: CheckOutcome::from_findings(CheckId::Disclosure, findings),
        risk: None,
        singletons: Vec::new(),
    }
}

fn column_actions<'a>(trail: &'a AuditTrail, column: &'a str) -> impl Iterator<Item = &'a Mitigation> + 'a {
    trail.iter().filter(move |m| m.column() == Some(column))
}

/// Original categories as they should look after the trail's pooling and
/// coarsening.
fn expected_categories(original: &[String], trail: &AuditTrail, synth_column: &str) -> Vec<String> {
    let mut cats: Vec<String> = original.to_vec();
    for action in column_actions(trail, synth_column) {
        let mapped: Vec<String> = match action {
            Mitigation::PoolCategories { pooled_label, pooled, .. } => cats
                .iter()
                .map(|c| if pooled.contains(c) { pooled_label.clone() } else { c.clone() })
                .collect(),
            Mitigation::CoarsenKey { mapping, .. } => {
                cats.iter().map(|c| mapping.get(c).unwrap_or(c).clone()).collect()
            }
            _ => continue,
        };
        cats.clear();
        for c in mapped {
            if !cats.contains(&c) {
                cats.push(c);
            }
        }
    }
    cats
}

/// Check 3: names, categories, missingness and precision agree with the
/// original up to documented mitigations.
pub fn check_structure(
    original_schema: &TableSchema,
    synth_schema: &TableSchema,
    synth_data: &Dataset,
    trail: &AuditTrail,
    policy: &ReleasePolicy,
) -> CheckOutcome {
    let affix = &policy.required_affix;
    let mut findings = Vec::new();
    let mut names: Vec<&str> = synth_data.columns().iter().map(|c| c.name.as_str()).collect();
    for spec in &synth_schema.columns {
        if !names.contains(&spec.name.as_str()) {
            names.push(&spec.name);
        }
    }
    for name in names {
        let Some(bare) = affix.strip(name) else {
            findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_NAME,
                    format!("'{name}' lacks the {affix}, so it cannot be matched to an original column"),
                )
                .at(name),
            );
            continue;
        };
        let Some(orig) = original_schema.column(bare) else {
            findings.push(
                Finding::new(Severity::Fail, codes::STRUCT_NAME, format!("'{bare}' is not a column of the original"))
                    .at(name),
            );
            continue;
        };
        let syn_spec = synth_schema.column(name);
        let data_col = synth_data.column(name);
        if syn_spec.is_none() || data_col.is_none() {
            findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_NAME,
                    format!("'{name}' is present in only one of the synthetic schema and data"),
                )
                .at(name),
            );
            continue;
        }
        let (syn, col) = (syn_spec.expect("checked"), data_col.expect("checked"));
        if syn.kind != orig.kind {
            findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_KIND,
                    format!("kind {} in original but {} in synthetic", orig.kind, syn.kind),
                )
                .at(name),
            );
            continue;
        }

        if orig.kind == ColumnKind::Categorical {
            let expected = expected_categories(&orig.categories, trail, name);
            let exp_set: BTreeSet<&String> = expected.iter().collect();
            let syn_set: BTreeSet<&String> = syn.categories.iter().collect();
            if exp_set != syn_set {
                let extra: Vec<&str> = syn_set.difference(&exp_set).map(|s| s.as_str()).collect();
                let lost: Vec<&str> = exp_set.difference(&syn_set).map(|s| s.as_str()).collect();
                findings.push(
                    Finding::new(
                        Severity::Fail,
                        codes::STRUCT_CATEGORY,
                        format!(
                            "categories differ from the original beyond recorded pooling/coarsening: unexpected [{}], absent [{}]",
                            extra.join(", "),
                            lost.join(", ")
                        ),
                    )
                    .at(name),
                );
            } else if expected != orig.categories {
                findings.push(
                    Finding::new(
                        Severity::Info,
                        codes::STRUCT_DOCUMENTED,
                        "category changes are explained by recorded pooling/coarsening",
                    )
                    .at(name),
                );
            }
        }

        let synth_missing = col.has_missing();
        if orig.missing_allowed != synth_missing {
            findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::MISSINGNESS_DISAGREE,
                    format!(
                        "missing values are {} in the original but {} in the synthetic data",
                        if orig.missing_allowed { "present" } else { "absent" },
                        if synth_missing { "present" } else { "absent" }
                    ),
                )
                .at(name),
            );
        }

        if orig.kind != ColumnKind::Categorical {
            let reduced = column_actions(trail, name).any(|m| matches!(m, Mitigation::ReducePrecision { .. }));
            let same = orig.precision == syn.precision && orig.unit == syn.unit;
            if !same {
                if reduced {
                    findings.push(
                        Finding::new(
                            Severity::Info,
                            codes::STRUCT_DOCUMENTED,
                            "precision change is explained by a recorded precision reduction",
                        )
                        .at(name),
                    );
                } else {
                    findings.push(
                        Finding::new(
                            Severity::Fail,
                            codes::STRUCT_PRECISION,
                            format!(
                                "precision {} in original but {} in synthetic, with no recorded precision reduction",
                                crate::schema::precision_text(orig),
                                crate::schema::precision_text(syn)
                            ),
                        )
                        .at(name),
                    );
                }
            }
        }
    }

    for v in validate(synth_data, synth_schema) {
        match v {
            Violation::ExcessPrecision { column, row, value } => findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_PRECISION,
                    format!("value {value} is finer than the synthetic schema's precision"),
                )
                .at(format!("{column} row {row}")),
            ),
            Violation::UnknownCategory { column, row, value } => findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_CATEGORY,
                    format!("label '{value}' is not a category of the synthetic schema"),
                )
                .at(format!("{column} row {row}")),
            ),
            Violation::OutOfRange { column, row, value } => findings.push(
                Finding::new(
                    Severity::Warn,
                    codes::STRUCT_RANGE,
                    format!("value {value} lies outside the synthetic schema's range"),
                )
                .at(format!("{column} row {row}")),
            ),
            Violation::KindMismatch { column, row, value } => findings.push(
                Finding::new(
                    Severity::Fail,
                    codes::STRUCT_KIND,
                    format!("value {value} does not match the column kind"),
                )
                .at(format!("{column} row {row}")),
            ),
            // Name, presence and missingness problems are reported above.
            Violation::MissingColumn { .. } | Violation::UnexpectedColumn { .. } | Violation::UnexpectedMissing { .. } => {}
        }
    }
    CheckOutcome::from_findings(CheckId::Structure, findings)
}

/// What the synthetic data can be expected to reproduce.
pub fn expectation_statement(method: Method) -> &'static str {
    match method {
        Method::FromMargins => {
            "Each variable was resampled on its own from the original values, one variable at a time. \
             Frequency tables and summaries of a single variable should resemble those of the original data. \
             Relationships between variables were deliberately not kept: cross-tabulations, correlations and \
             model results computed from this file will not resemble those from the original data."
        }
        Method::FromMetadata => {
            "Values were drawn from the metadata alone (names, categories, ranges and precision), without \
             reading any original record. No table or statistic computed from this file, including \
             single-variable tables, should be expected to resemble those from the original data."
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocStatus {
    Final,
    Draft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSummary {
    pub method: Method,
    pub n_synth: usize,
    pub seed: u64,
    pub affix: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata_missing_rate: Option<f64>,
    #[serde(default)]
    pub transforms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocBundle {
    pub status: DocStatus,
    pub original_metadata: String,
    pub expectation: String,
    pub synthesis: SynthesisSummary,
    #[serde(default)]
    pub policy_overrides: Vec<String>,
    pub schema_diff: SchemaDiff,
    #[serde(default)]
    pub trail: AuditTrail,
}

pub fn generate_documentation(
    original_reference: Option<&str>,
    synthesis: SynthesisSummary,
    schema_diff: SchemaDiff,
    trail: AuditTrail,
    policy: &ReleasePolicy,
) -> Result<DocBundle, CheckError> {
    let original_metadata = original_reference
        .filter(|r| !r.trim().is_empty())
        .ok_or(CheckError::MissingOriginalReference)?
        .to_string();
    Ok(DocBundle {
        status: DocStatus::Final,
        original_metadata,
        expectation: expectation_statement(synthesis.method).to_string(),
        synthesis,
        policy_overrides: policy.overrides(),
        schema_diff,
        trail,
    })
}

impl DocBundle {
    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        Ok(format!("{SYNTHETIC_BANNER}\n{}", toml::to_string(self)?))
    }

    /// Parses [`DocBundle::to_toml`] output; the banner line is optional.
    pub fn from_toml(text: &str) -> Result<DocBundle, toml::de::Error> {
        let body = text
            .strip_prefix(SYNTHETIC_BANNER)
            .map(|rest| rest.trim_start_matches(['\r', '\n']))
            .unwrap_or(text);
        toml::from_str(body)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let title = match self.status {
            DocStatus::Final => "Synthetic data documentation",
            DocStatus::Draft => "DRAFT — Synthetic data documentation",
        };
        out.push_str(&format!("# {title}\n\n**{SYNTHETIC_BANNER}**\n\n"));
        if self.status == DocStatus::Draft {
            out.push_str("One or more release checks failed; this document is not final.\n\n");
        }
        out.push_str(&format!("Original metadata: `{}`\n\n", self.original_metadata));
        out.push_str("## What to expect\n\n");
        out.push_str(&self.expectation);
        out.push_str("\n\n## Generation\n\n");
        let s = &self.synthesis;
        out.push_str(&format!(
            "- method: {}\n- rows: {}\n- seed: {}\n- column affix: {}\n",
            s.method, s.n_synth, s.seed, s.affix
        ));
        if let Some(rate) = s.metadata_missing_rate {
            out.push_str(&format!("- missing-value rate for columns allowing missing values: {rate}\n"));
        }
        for t in &s.transforms {
            out.push_str(&format!("- transform: {t}\n"));
        }
        out.push_str("\n## Differences from the original\n\n");
        if self.schema_diff.differences.is_empty() {
            out.push_str("None beyond column renaming.\n");
        }
        for d in &self.schema_diff.differences {
            out.push_str(&format!("- {d}\n"));
        }
        if !self.schema_diff.affix_mapping.is_empty() {
            out.push_str("\nColumn names:\n\n");
            for m in &self.schema_diff.affix_mapping {
                out.push_str(&format!("- `{}` ← `{}`\n", m.synthetic, m.original));
            }
        }
        out.push_str("\n## Disclosure control applied\n\n");
        if self.trail.is_empty() {
            out.push_str("None.\n");
        }
        for a in self.trail.actions() {
            out.push_str(&format!("{}. {}\n", a.applied_at + 1, a.action));
        }
        if !self.policy_overrides.is_empty() {
            out.push_str("\n## Policy overrides\n\n");
            for o in &self.policy_overrides {
                out.push_str(&format!("- {o}\n"));
            }
        }
        out
    }
}

/// Check 4: the bundle points at the original metadata, states what to
/// expect for its method, and lists every difference and mitigation.
pub fn check_documentation(
    bundle: &DocBundle,
    original_schema: &TableSchema,
    synth_schema: &TableSchema,
    trail: &AuditTrail,
    affix: &AffixRule,
) -> CheckOutcome {
    let mut findings = Vec::new();
    if bundle.original_metadata.trim().is_empty() {
        findings.push(Finding::new(
            Severity::Fail,
            codes::DOC_REFERENCE,
            "documentation lacks a pointer to the original metadata",
        ));
    }
    if synth_schema
        .header
        .source_metadata_reference
        .as_deref()
        .is_none_or(|r| r.trim().is_empty())
    {
        findings.push(Finding::new(
            Severity::Fail,
            codes::DOC_SCHEMA_REFERENCE,
            "synthetic schema header lacks source_metadata_reference",
        ));
    }
    if bundle.expectation.trim().is_empty() || bundle.expectation != expectation_statement(bundle.synthesis.method) {
        findings.push(Finding::new(
            Severity::Fail,
            codes::DOC_EXPECTATION,
            format!("expectation statement is missing or does not match method {}", bundle.synthesis.method),
        ));
    }
    match diff_schemas(original_schema, synth_schema, affix) {
        Ok(diff) => {
            for d in &diff.differences {
                if !bundle.schema_diff.differences.contains(d) {
                    findings.push(
                        Finding::new(Severity::Fail, codes::DOC_DIFF, format!("undocumented difference: {d}"))
                            .at(d.column().to_string()),
                    );
                }
            }
        }
        Err(e) => findings.push(Finding::new(
            Severity::Fail,
            codes::DOC_DIFF,
            format!("schemas cannot be compared: {e}"),
        )),
    }
    if &bundle.trail != trail {
        findings.push(Finding::new(
            Severity::Fail,
            codes::DOC_TRAIL,
            "documented mitigation trail does not match the applied trail",
        ));
    }
    CheckOutcome::from_findings(CheckId::Documentation, findings)
}
