//! Typed table descriptions: inference from data, validation of data
//! against a description, structural diffs, and the schema file format.
//!
//! A schema file is a TOML document with a `[header]` table and one
//! `[[columns]]` table per column. Schemas describing synthetic data are
//! preceded by the literal banner line [`SYNTHETIC_BANNER`], which
//! [`parse_schema`] strips and reports back.

use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::dataset::{Cell, CellKind, Dataset, Day, Granularity};
use crate::numeric;

pub const SYNTHETIC_BANNER: &str = "SYNTHETIC DATA — NOT REAL RECORDS";

/// Inferred decimal places are capped here; columns hitting the cap are
/// flagged with `precision_capped` for manual review.
pub const MAX_INFERRED_DECIMALS: u32 = 10;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("dataset has no columns or no rows")]
    EmptyDataset,
    #[error("column '{column}' mixes {first:?} and {second:?} cells")]
    MixedKindColumn {
        column: String,
        first: CellKind,
        second: CellKind,
    },
    #[error("column '{0}' has no non-missing cells, so its kind cannot be inferred")]
    UntypedColumn(String),
    #[error("synthetic column '{synthetic}' has no original counterpart '{original}'")]
    SynthColumnNotInOriginal { synthetic: String, original: String },
    #[error("invalid schema: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("schema file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Date,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
            ColumnKind::Date => "date",
        })
    }
}

/// Decimal places for numeric columns, calendar granularity for dates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Precision {
    Decimals(u32),
    Granularity(Granularity),
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Decimals(d) => write!(f, "{d} decimal places"),
            Precision::Granularity(g) => write!(f, "{g} granularity"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueRange {
    Numeric { min: f64, max: f64 },
    Date { min: NaiveDate, max: NaiveDate },
}

impl ValueRange {
    pub fn dates(min: Day, max: Day) -> ValueRange {
        ValueRange::Date {
            min: min.to_date(),
            max: max.to_date(),
        }
    }

    /// Bounds as plain numbers; dates are day counts.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ValueRange::Numeric { min, max } => (min, max),
            ValueRange::Date { min, max } => (
                Day::from_date(min).0 as f64,
                Day::from_date(max).0 as f64,
            ),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        let (lo, hi) = self.bounds();
        value >= lo && value <= hi
    }
}

impl fmt::Display for ValueRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueRange::Numeric { min, max } => write!(f, "[{min}, {max}]"),
            ValueRange::Date { min, max } => write!(f, "[{min}, {max}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric_range: Option<ValueRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    /// Rounding unit coarser than one decimal step, e.g. `1000` for incomes
    /// given in thousands.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<f64>,
    #[serde(default)]
    pub missing_allowed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub precision_capped: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl ColumnSpec {
    pub fn categorical(name: impl Into<String>, categories: &[&str]) -> ColumnSpec {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical,
            categories: categories.iter().map(|s| s.to_string()).collect(),
            numeric_range: None,
            precision: None,
            unit: None,
            missing_allowed: false,
            missing_rate: None,
            precision_capped: false,
        }
    }

    pub fn numeric(name: impl Into<String>, min: f64, max: f64, decimals: u32) -> ColumnSpec {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Numeric,
            categories: Vec::new(),
            numeric_range: Some(ValueRange::Numeric { min, max }),
            precision: Some(Precision::Decimals(decimals)),
            unit: None,
            missing_allowed: false,
            missing_rate: None,
            precision_capped: false,
        }
    }

    pub fn date(name: impl Into<String>, min: Day, max: Day, granularity: Granularity) -> ColumnSpec {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Date,
            categories: Vec::new(),
            numeric_range: Some(ValueRange::dates(min, max)),
            precision: Some(Precision::Granularity(granularity)),
            unit: None,
            missing_allowed: false,
            missing_rate: None,
            precision_capped: false,
        }
    }

    pub fn with_missing(mut self, allowed: bool) -> ColumnSpec {
        self.missing_allowed = allowed;
        self
    }

    pub fn with_unit(mut self, unit: f64) -> ColumnSpec {
        self.unit = Some(unit);
        self
    }

    pub fn decimals(&self) -> u32 {
        match self.precision {
            Some(Precision::Decimals(d)) => d,
            _ => 0,
        }
    }

    pub fn granularity(&self) -> Granularity {
        match self.precision {
            Some(Precision::Granularity(g)) => g,
            _ => Granularity::Day,
        }
    }

    /// Spacing of admissible numeric values.
    pub fn grid_unit(&self) -> f64 {
        self.unit
            .unwrap_or_else(|| numeric::unit_for_places(self.decimals()))
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let name = &self.name;
        if name.is_empty() {
            out.push("column with empty name".to_string());
        }
        match self.kind {
            ColumnKind::Categorical => {
                if self.categories.is_empty() {
                    out.push(format!("categorical column '{name}' has no categories"));
                }
                let mut seen = HashSet::new();
                for c in &self.categories {
                    if !seen.insert(c) {
                        out.push(format!("column '{name}' repeats category '{c}'"));
                    }
                }
            }
            ColumnKind::Numeric | ColumnKind::Date => {
                if let Some(range) = &self.numeric_range {
                    let (lo, hi) = range.bounds();
                    if lo > hi {
                        out.push(format!("column '{name}' has min > max"));
                    }
                    let date_range = matches!(range, ValueRange::Date { .. });
                    if date_range != (self.kind == ColumnKind::Date) {
                        out.push(format!("column '{name}' range does not match its kind"));
                    }
                }
                match (self.kind, self.precision) {
                    (ColumnKind::Numeric, Some(Precision::Granularity(_)))
                    | (ColumnKind::Date, Some(Precision::Decimals(_))) => {
                        out.push(format!("column '{name}' precision does not match its kind"))
                    }
                    _ => {}
                }
                if let Some(unit) = self.unit {
                    if !(unit.is_finite() && unit > 0.0) {
                        out.push(format!("column '{name}' unit must be positive"));
                    }
                }
            }
        }
        if let Some(rate) = self.missing_rate {
            if !(0.0..=1.0).contains(&rate) {
                out.push(format!("column '{name}' missing_rate outside [0, 1]"));
            } else if rate > 0.0 && !self.missing_allowed {
                out.push(format!("column '{name}' has missing_rate > 0 but missing not allowed"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InferredFromData,
    AuthoredMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaHeader {
    pub is_synthetic: bool,
    pub provenance: Provenance,
    pub row_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_metadata_reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub header: SchemaHeader,
    pub columns: Vec<ColumnSpec>,
}

impl TableSchema {
    pub fn authored(columns: Vec<ColumnSpec>, row_count: usize) -> TableSchema {
        TableSchema {
            header: SchemaHeader {
                is_synthetic: false,
                provenance: Provenance::AuthoredMetadata,
                row_count,
                source_metadata_reference: None,
            },
            columns,
        }
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut ColumnSpec> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    /// Checks the structural invariants of every column and the header.
    pub fn check(&self) -> Result<(), SchemaError> {
        let mut problems = Vec::new();
        let mut names = HashSet::new();
        for column in &self.columns {
            if !names.insert(column.name.as_str()) {
                problems.push(format!("duplicate column name '{}'", column.name));
            }
            problems.extend(column.problems());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::Invalid(problems))
        }
    }

    /// Renders the schema file, banner first for synthetic schemas.
    pub fn to_text(&self) -> Result<String, SchemaError> {
        let body = toml::to_string(self).map_err(|e| SchemaError::Parse(e.to_string()))?;
        Ok(if self.header.is_synthetic {
            format!("{SYNTHETIC_BANNER}\n{body}")
        } else {
            body
        })
    }
}

/// A schema read from a file, with whether the synthetic banner was present.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSchema {
    pub schema: TableSchema,
    pub has_banner: bool,
}

pub fn parse_schema(text: &str) -> Result<ParsedSchema, SchemaError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let (has_banner, body) = match text.split_once('\n') {
        Some((first, rest)) if first.trim_end() == SYNTHETIC_BANNER => (true, rest),
        None if text.trim_end() == SYNTHETIC_BANNER => (true, ""),
        _ => (false, text),
    };
    let schema: TableSchema = toml::from_str(body).map_err(|e| SchemaError::Parse(e.to_string()))?;
    schema.check()?;
    Ok(ParsedSchema { schema, has_banner })
}

/// Describes a dataset from its contents.
pub fn infer_schema(data: &Dataset) -> Result<TableSchema, SchemaError> {
    if data.is_empty() {
        return Err(SchemaError::EmptyDataset);
    }
    let n = data.n_rows();
    let mut columns = Vec::with_capacity(data.n_columns());
    for column in data.columns() {
        let mut kind: Option<CellKind> = None;
        for cell in &column.cells {
            if let Some(k) = cell.kind() {
                match kind {
                    None => kind = Some(k),
                    Some(first) if first != k => {
                        return Err(SchemaError::MixedKindColumn {
                            column: column.name.clone(),
                            first,
                            second: k,
                        })
                    }
                    _ => {}
                }
            }
        }
        let missing = column.missing_count();
        let mut spec = match kind.ok_or_else(|| SchemaError::UntypedColumn(column.name.clone()))? {
            CellKind::Label => {
                let mut labels: IndexMap<&str, ()> = IndexMap::new();
                for cell in &column.cells {
                    if let Cell::Label(s) = cell {
                        labels.insert(s.as_str(), ());
                    }
                }
                let labels: Vec<&str> = labels.keys().copied().collect();
                ColumnSpec::categorical(column.name.clone(), &labels)
            }
            CellKind::Number => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut decimals = 0;
                for cell in &column.cells {
                    if let Cell::Number(num) = cell {
                        lo = lo.min(num.value);
                        hi = hi.max(num.value);
                        decimals = decimals.max(num.decimals);
                    }
                }
                let mut spec =
                    ColumnSpec::numeric(column.name.clone(), lo, hi, decimals.min(MAX_INFERRED_DECIMALS));
                spec.precision_capped = decimals > MAX_INFERRED_DECIMALS;
                spec
            }
            CellKind::Date => {
                let mut lo = Day(i64::MAX);
                let mut hi = Day(i64::MIN);
                let mut granularity = Granularity::Year;
                for cell in &column.cells {
                    if let Cell::Date(d) = cell {
                        lo = lo.min(*d);
                        hi = hi.max(*d);
                        granularity = granularity.finer(d.granularity());
                    }
                }
                ColumnSpec::date(column.name.clone(), lo, hi, granularity)
            }
        };
        spec.missing_allowed = missing > 0;
        spec.missing_rate = Some(missing as f64 / n as f64);
        columns.push(spec);
    }
    Ok(TableSchema {
        header: SchemaHeader {
            is_synthetic: false,
            provenance: Provenance::InferredFromData,
            row_count: n,
            source_metadata_reference: None,
        },
        columns,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    MissingColumn { column: String },
    UnexpectedColumn { column: String },
    KindMismatch { column: String, row: usize, value: String },
    UnknownCategory { column: String, row: usize, value: String },
    OutOfRange { column: String, row: usize, value: String },
    ExcessPrecision { column: String, row: usize, value: String },
    UnexpectedMissing { column: String, row: usize },
}

/// Every cell or column of `data` that does not conform to `schema`.
pub fn validate(data: &Dataset, schema: &TableSchema) -> Vec<Violation> {
    let mut out = Vec::new();
    for spec in &schema.columns {
        if data.column(&spec.name).is_none() {
            out.push(Violation::MissingColumn {
                column: spec.name.clone(),
            });
        }
    }
    for column in data.columns() {
        let Some(spec) = schema.column(&column.name) else {
            out.push(Violation::UnexpectedColumn {
                column: column.name.clone(),
            });
            continue;
        };
        let categories: HashSet<&str> = spec.categories.iter().map(String::as_str).collect();
        for (row, cell) in column.cells.iter().enumerate() {
            if let Some(v) = cell_violation(spec, &categories, row, cell) {
                out.push(v);
            }
        }
    }
    out
}

fn cell_violation(
    spec: &ColumnSpec,
    categories: &HashSet<&str>,
    row: usize,
    cell: &Cell,
) -> Option<Violation> {
    let column = spec.name.clone();
    let value = cell.to_string();
    match (spec.kind, cell) {
        (_, Cell::Missing) => (!spec.missing_allowed).then_some(Violation::UnexpectedMissing { column, row }),
        (ColumnKind::Categorical, Cell::Label(s)) => {
            (!categories.contains(s.as_str())).then_some(Violation::UnknownCategory { column, row, value })
        }
        (ColumnKind::Numeric, Cell::Number(n)) => {
            if spec.numeric_range.is_some_and(|r| !r.contains(n.value)) {
                Some(Violation::OutOfRange { column, row, value })
            } else if !numeric::on_grid(n.value, spec.grid_unit()) {
                Some(Violation::ExcessPrecision { column, row, value })
            } else {
                None
            }
        }
        (ColumnKind::Date, Cell::Date(d)) => {
            if spec.numeric_range.is_some_and(|r| !r.contains(d.0 as f64)) {
                Some(Violation::OutOfRange { column, row, value })
            } else if d.truncate(spec.granularity()) != *d {
                Some(Violation::ExcessPrecision { column, row, value })
            } else {
                None
            }
        }
        _ => Some(Violation::KindMismatch { column, row, value }),
    }
}

/// One structural difference between an original column and its synthetic
/// counterpart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum ColumnDifference {
    MissingInSynth {
        column: String,
    },
    KindChanged {
        column: String,
        original: ColumnKind,
        synthetic: ColumnKind,
    },
    PooledCategories {
        column: String,
        pooled_label: String,
        original_labels: Vec<String>,
    },
    CategoriesChanged {
        column: String,
        removed: Vec<String>,
        added: Vec<String>,
    },
    PrecisionChange {
        column: String,
        original: String,
        synthetic: String,
    },
    RangeChange {
        column: String,
        original: String,
        synthetic: String,
    },
    MissingnessMismatch {
        column: String,
        original_has_missing: bool,
        synthetic_has_missing: bool,
    },
}

impl ColumnDifference {
    pub fn column(&self) -> &str {
        match self {
            ColumnDifference::MissingInSynth { column }
            | ColumnDifference::KindChanged { column, .. }
            | ColumnDifference::PooledCategories { column, .. }
            | ColumnDifference::CategoriesChanged { column, .. }
            | ColumnDifference::PrecisionChange { column, .. }
            | ColumnDifference::RangeChange { column, .. }
            | ColumnDifference::MissingnessMismatch { column, .. } => column,
        }
    }
}

impl fmt::Display for ColumnDifference {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnDifference::MissingInSynth { column } => {
                write!(f, "{column}: not included in the synthetic data")
            }
            ColumnDifference::KindChanged { column, original, synthetic } => {
                write!(f, "{column}: kind {original} in original, {synthetic} in synthetic")
            }
            ColumnDifference::PooledCategories { column, pooled_label, original_labels } => write!(
                f,
                "{column}: categories {} pooled into '{pooled_label}'",
                original_labels.join(", ")
            ),
            ColumnDifference::CategoriesChanged { column, removed, added } => write!(
                f,
                "{column}: categories removed [{}], added [{}]",
                removed.join(", "),
                added.join(", ")
            ),
            ColumnDifference::PrecisionChange { column, original, synthetic } => {
                write!(f, "{column}: precision {original} in original, {synthetic} in synthetic")
            }
            ColumnDifference::RangeChange { column, original, synthetic } => {
                write!(f, "{column}: range {original} in original, {synthetic} in synthetic")
            }
            ColumnDifference::MissingnessMismatch {
                column,
                original_has_missing,
                synthetic_has_missing,
            } => write!(
                f,
                "{column}: missing values {} in original but {} in synthetic",
                if *original_has_missing { "present" } else { "absent" },
                if *synthetic_has_missing { "present" } else { "absent" }
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffixMapping {
    pub original: String,
    pub synthetic: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SchemaDiff {
    #[serde(default)]
    pub affix_mapping: Vec<AffixMapping>,
    #[serde(default)]
    pub differences: Vec<ColumnDifference>,
}

impl SchemaDiff {
    /// True when the two schemas agree up to affixing.
    pub fn is_empty(&self) -> bool {
        self.differences.is_empty()
    }
}

pub fn precision_text(spec: &ColumnSpec) -> String {
    match (spec.precision, spec.unit) {
        (_, Some(unit)) => format!("units of {unit}"),
        (Some(p), None) => p.to_string(),
        (None, None) => "unspecified".to_string(),
    }
}

/// Compares an original schema with a synthetic one, matching synthetic
/// columns to original columns by stripping `affix`.
pub fn diff_schemas(
    original: &TableSchema,
    synth: &TableSchema,
    affix: &AffixRule,
) -> Result<SchemaDiff, SchemaError> {
    let mut diff = SchemaDiff::default();
    let mut matched = HashSet::new();
    let mut pairs = Vec::new();
    for column in &synth.columns {
        let bare = affix.strip(&column.name).unwrap_or(&column.name);
        let orig = original
            .column(bare)
            .ok_or_else(|| SchemaError::SynthColumnNotInOriginal {
                synthetic: column.name.clone(),
                original: bare.to_string(),
            })?;
        if bare != column.name {
            diff.affix_mapping.push(AffixMapping {
                original: bare.to_string(),
                synthetic: column.name.clone(),
            });
        }
        matched.insert(bare.to_string());
        pairs.push((orig, column));
    }
    for orig in &original.columns {
        if !matched.contains(&orig.name) {
            diff.differences.push(ColumnDifference::MissingInSynth {
                column: orig.name.clone(),
            });
        }
    }
    for (orig, syn) in pairs {
        diff.differences.extend(column_differences(orig, syn));
    }
    Ok(diff)
}

fn column_differences(orig: &ColumnSpec, syn: &ColumnSpec) -> Vec<ColumnDifference> {
    let column = orig.name.clone();
    let mut out = Vec::new();
    if orig.kind != syn.kind {
        out.push(ColumnDifference::KindChanged {
            column,
            original: orig.kind,
            synthetic: syn.kind,
        });
        return out;
    }
    let syn_set: HashSet<&String> = syn.categories.iter().collect();
    let orig_set: HashSet<&String> = orig.categories.iter().collect();
    let removed: Vec<String> = orig.categories.iter().filter(|c| !syn_set.contains(c)).cloned().collect();
    let added: Vec<String> = syn.categories.iter().filter(|c| !orig_set.contains(c)).cloned().collect();
    if added.len() == 1 && !removed.is_empty() {
        out.push(ColumnDifference::PooledCategories {
            column: column.clone(),
            pooled_label: added[0].clone(),
            original_labels: removed,
        });
    } else if !added.is_empty() || !removed.is_empty() {
        out.push(ColumnDifference::CategoriesChanged {
            column: column.clone(),
            removed,
            added,
        });
    }
    if orig.precision != syn.precision || orig.unit != syn.unit {
        out.push(ColumnDifference::PrecisionChange {
            column: column.clone(),
            original: precision_text(orig),
            synthetic: precision_text(syn),
        });
    }
    if orig.numeric_range != syn.numeric_range {
        let show = |r: &Option<ValueRange>| r.map_or("unspecified".to_string(), |r| r.to_string());
        out.push(ColumnDifference::RangeChange {
            column: column.clone(),
            original: show(&orig.numeric_range),
            synthetic: show(&syn.numeric_range),
        });
    }
    if orig.missing_allowed != syn.missing_allowed {
        out.push(ColumnDifference::MissingnessMismatch {
            column,
            original_has_missing: orig.missing_allowed,
            synthetic_has_missing: syn.missing_allowed,
        });
    }
    out
}
