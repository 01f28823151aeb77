//! Statistical disclosure control mitigations.
//!
//! Each operation returns the modified table together with a [`Mitigation`]
//! describing exactly what was done. Recorded mitigations are complete: the
//! trail alone replays the pipeline ([`replay`]) and updates a schema to
//! match ([`apply_to_schema`]).

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, Column, Dataset, Day, Granularity, Number};
use crate::numeric;
use crate::risk::{RiskClass, RiskReport};
use crate::schema::{ColumnKind, Precision, TableSchema, ValueRange};

pub const DEFAULT_POOLED_LABEL: &str = "OTHER_POOLED";
pub const DEFAULT_POOL_THRESHOLD: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum SdcError {
    #[error("column '{0}' not found")]
    UnknownColumn(String),
    #[error("column '{0}' is not numeric or date")]
    NotNumericOrDate(String),
    #[error("column '{0}' is not categorical")]
    NotCategorical(String),
    #[error("invalid percentiles ({low}, {high}): need 0 <= low < high <= 100")]
    InvalidPercentiles { low: f64, high: f64 },
    #[error("pooled label '{label}' is already a category of '{column}'")]
    PooledLabelCollision { column: String, label: String },
    #[error("risk report covers {report_rows} rows but the dataset has {data_rows}")]
    StaleReport { report_rows: usize, data_rows: usize },
    #[error("label '{label}' in column '{column}' is not covered by the mapping")]
    PartialMapping { column: String, label: String },
    #[error("mapping for '{column}' chains '{label}' through another label")]
    ChainedMapping { column: String, label: String },
    #[error("{0}")]
    InvalidParameter(String),
}

/// Rounding target: a numeric unit (e.g. 1000) or a date granularity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrecisionUnit {
    Numeric(f64),
    Date(Granularity),
}

impl fmt::Display for PrecisionUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrecisionUnit::Numeric(u) => write!(f, "units of {u}"),
            PrecisionUnit::Date(g) => write!(f, "{g}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum CodingMode {
    /// Nearest-rank percentiles, e.g. (1, 99).
    Percentile { low: f64, high: f64 },
    /// Tails are collapsed inward until each collapsed tail holds at least
    /// `threshold` values.
    CountThreshold { threshold: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mitigation {
    ReducePrecision {
        column: String,
        unit: PrecisionUnit,
    },
    TopBottomCode {
        column: String,
        mode: CodingMode,
        /// Cuts as numbers; day counts for date columns.
        lower_cut: f64,
        upper_cut: f64,
        lower_label: String,
        upper_label: String,
    },
    PoolCategories {
        column: String,
        threshold: usize,
        pooled_label: String,
        pooled: Vec<String>,
    },
    RemoveRecords {
        class: RiskClass,
        rows: Vec<usize>,
    },
    CoarsenKey {
        column: String,
        mapping: BTreeMap<String, String>,
    },
}

impl Mitigation {
    pub fn column(&self) -> Option<&str> {
        match self {
            Mitigation::ReducePrecision { column, .. }
            | Mitigation::TopBottomCode { column, .. }
            | Mitigation::PoolCategories { column, .. }
            | Mitigation::CoarsenKey { column, .. } => Some(column),
            Mitigation::RemoveRecords { .. } => None,
        }
    }

    /// True when recording the action changed nothing.
    pub fn is_noop(&self) -> bool {
        match self {
            Mitigation::PoolCategories { pooled, .. } => pooled.is_empty(),
            Mitigation::RemoveRecords { rows, .. } => rows.is_empty(),
            Mitigation::CoarsenKey { mapping, .. } => mapping.iter().all(|(k, v)| k == v),
            _ => false,
        }
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mitigation::ReducePrecision { column, unit } => write!(f, "{column}: precision reduced to {unit}"),
            Mitigation::TopBottomCode { column, mode, lower_label, upper_label, .. } => {
                let how = match mode {
                    CodingMode::Percentile { low, high } => format!("percentiles {low}/{high}"),
                    CodingMode::CountThreshold { threshold } => format!("tail count threshold {threshold}"),
                };
                write!(f, "{column}: top/bottom coded at [{lower_label}, {upper_label}] ({how})")
            }
            Mitigation::PoolCategories { column, threshold, pooled_label, pooled } => {
                if pooled.is_empty() {
                    write!(f, "{column}: no category below {threshold} original records; nothing pooled")
                } else {
                    write!(
                        f,
                        "{column}: categories with fewer than {threshold} original records ({}) pooled into '{pooled_label}'",
                        pooled.join(", ")
                    )
                }
            }
            Mitigation::RemoveRecords { class, rows } => write!(f, "removed {} synthetic record(s) classed as {class}", rows.len()),
            Mitigation::CoarsenKey { column, mapping } => {
                let targets: HashSet<&String> = mapping.values().collect();
                write!(f, "{column}: {} labels coarsened into {} groups", mapping.len(), targets.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationAction {
    pub applied_at: usize,
    pub action: Mitigation,
}

/// Append-only record of applied mitigations, in pipeline order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuditTrail {
    actions: Vec<MitigationAction>,
}

impl AuditTrail {
    pub fn new() -> AuditTrail {
        AuditTrail::default()
    }

    pub fn record(&mut self, action: Mitigation) -> &MitigationAction {
        let applied_at = self.actions.len();
        self.actions.push(MitigationAction { applied_at, action });
        self.actions.last().expect("just pushed")
    }

    pub fn actions(&self) -> &[MitigationAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mitigation> {
        self.actions.iter().map(|a| &a.action)
    }
}

fn column<'a>(data: &'a Dataset, name: &str) -> Result<&'a Column, SdcError> {
    data.column(name).ok_or_else(|| SdcError::UnknownColumn(name.to_string()))
}

fn ensure_ordered(col: &Column) -> Result<(), SdcError> {
    if col.cells.iter().all(|c| matches!(c, Cell::Missing | Cell::Number(_) | Cell::Date(_))) {
        Ok(())
    } else {
        Err(SdcError::NotNumericOrDate(col.name.clone()))
    }
}

fn ensure_labels(col: &Column) -> Result<(), SdcError> {
    if col.cells.iter().all(|c| matches!(c, Cell::Missing | Cell::Label(_))) {
        Ok(())
    } else {
        Err(SdcError::NotCategorical(col.name.clone()))
    }
}

fn map_cells(data: &Dataset, name: &str, f: impl Fn(&Cell) -> Cell) -> Dataset {
    let mut out = data.clone();
    if let Some(col) = out.column_mut(name) {
        for cell in &mut col.cells {
            *cell = f(cell);
        }
    }
    out
}

fn round_number(n: &Number, unit: f64) -> Number {
    let value = numeric::round_to_unit(n.value, unit);
    let unit_decimals = numeric::power_of_ten_places(unit)
        .map_or_else(|| numeric::decimals_of(unit), |p| p.max(0) as u32);
    let shown = n.decimals.min(unit_decimals).max(numeric::decimals_of(value).min(unit_decimals));
    Number::new(value, shown)
}

fn reduce_cell(cell: &Cell, unit: PrecisionUnit) -> Cell {
    match (cell, unit) {
        (Cell::Number(n), PrecisionUnit::Numeric(u)) => Cell::Number(round_number(n, u)),
        (Cell::Date(d), PrecisionUnit::Date(g)) => Cell::Date(d.truncate(g)),
        _ => cell.clone(),
    }
}

/// Rounds a numeric column to the nearest multiple of `unit`
/// (half-away-from-zero), or truncates a date column to a granularity.
pub fn reduce_precision(data: &Dataset, column_name: &str, unit: PrecisionUnit) -> Result<(Dataset, Mitigation), SdcError> {
    let col = column(data, column_name)?;
    ensure_ordered(col)?;
    let has_numbers = col.cells.iter().any(|c| matches!(c, Cell::Number(_)));
    let has_dates = col.cells.iter().any(|c| matches!(c, Cell::Date(_)));
    match unit {
        PrecisionUnit::Numeric(u) => {
            if !(u.is_finite() && u > 0.0) {
                return Err(SdcError::InvalidParameter(format!("unit must be positive, got {u}")));
            }
            if has_dates {
                return Err(SdcError::InvalidParameter(format!("'{column_name}' holds dates; use a granularity")));
            }
        }
        PrecisionUnit::Date(_) if has_numbers => {
            return Err(SdcError::InvalidParameter(format!("'{column_name}' holds numbers; use a numeric unit")));
        }
        PrecisionUnit::Date(_) => {}
    }
    let out = map_cells(data, column_name, |c| reduce_cell(c, unit));
    Ok((
        out,
        Mitigation::ReducePrecision {
            column: column_name.to_string(),
            unit,
        },
    ))
}

/// Nearest-rank percentile of sorted values: the value at rank
/// `ceil(p/100 * n)`, clamped to `1..=n`.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Lower and upper cut for a set of values.
pub fn coding_cuts(values: &[f64], mode: CodingMode) -> Result<Option<(f64, f64)>, SdcError> {
    if let CodingMode::Percentile { low, high } = mode {
        if !(low >= 0.0 && high <= 100.0 && low < high) {
            return Err(SdcError::InvalidPercentiles { low, high });
        }
    }
    if let CodingMode::CountThreshold { threshold: 0 } = mode {
        return Err(SdcError::InvalidParameter("count threshold must be at least 1".into()));
    }
    if values.is_empty() {
        return Ok(None);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts = match mode {
        CodingMode::Percentile { low, high } => (nearest_rank(&sorted, low), nearest_rank(&sorted, high)),
        CodingMode::CountThreshold { threshold } => {
            let median = nearest_rank(&sorted, 50.0);
            if threshold > n {
                (median, median)
            } else {
                let lo = sorted[threshold - 1];
                let hi = sorted[n - threshold];
                if lo > hi {
                    (median, median)
                } else {
                    (lo, hi)
                }
            }
        }
    };
    Ok(Some(cuts))
}

fn clamp_cell(cell: &Cell, lo: f64, hi: f64) -> Cell {
    match cell {
        Cell::Number(n) => {
            let v = n.value.clamp(lo, hi);
            if v == n.value {
                cell.clone()
            } else {
                Cell::Number(Number::new(v, n.decimals.max(numeric::decimals_of(v))))
            }
        }
        Cell::Date(d) => Cell::Date(Day((d.0 as f64).clamp(lo, hi) as i64)),
        _ => cell.clone(),
    }
}

fn cut_label(col: &Column, value: f64) -> String {
    if col.cells.iter().any(|c| matches!(c, Cell::Date(_))) {
        Day(value as i64).to_string()
    } else {
        format!("{value}")
    }
}

/// Top/bottom codes a column using cuts computed from the column itself.
pub fn top_bottom_code(data: &Dataset, column_name: &str, mode: CodingMode) -> Result<(Dataset, Mitigation), SdcError> {
    let col = column(data, column_name)?;
    top_bottom_code_with_reference(data, column_name, mode, &col.cells.clone())
}

/// Top/bottom codes a column using cuts computed from `reference` cells,
/// typically the original column, so tail counts refer to real units.
pub fn top_bottom_code_with_reference(
    data: &Dataset,
    column_name: &str,
    mode: CodingMode,
    reference: &[Cell],
) -> Result<(Dataset, Mitigation), SdcError> {
    let col = column(data, column_name)?;
    ensure_ordered(col)?;
    let values: Vec<f64> = reference.iter().filter_map(Cell::as_f64).collect();
    let Some((lo, hi)) = coding_cuts(&values, mode)? else {
        return Ok((
            data.clone(),
            Mitigation::TopBottomCode {
                column: column_name.to_string(),
                mode,
                lower_cut: f64::NEG_INFINITY,
                upper_cut: f64::INFINITY,
                lower_label: "-inf".into(),
                upper_label: "inf".into(),
            },
        ));
    };
    let out = map_cells(data, column_name, |c| clamp_cell(c, lo, hi));
    let (lower_label, upper_label) = (cut_label(col, lo), cut_label(col, hi));
    Ok((
        out,
        Mitigation::TopBottomCode {
            column: column_name.to_string(),
            mode,
            lower_cut: lo,
            upper_cut: hi,
            lower_label,
            upper_label,
        },
    ))
}

/// Label counts in first-appearance order.
pub fn category_counts(column: &Column) -> IndexMap<String, usize> {
    let mut counts = IndexMap::new();
    for cell in &column.cells {
        if let Cell::Label(s) = cell {
            *counts.entry(s.clone()).or_insert(0) += 1;
        }
    }
    counts
}

/// Relabels every category whose count in the original is below
/// `threshold` as `pooled_label`.
pub fn pool_categories(
    data: &Dataset,
    column_name: &str,
    original_counts: &IndexMap<String, usize>,
    threshold: usize,
    pooled_label: &str,
) -> Result<(Dataset, Mitigation), SdcError> {
    let col = column(data, column_name)?;
    ensure_labels(col)?;
    if threshold == 0 {
        return Err(SdcError::InvalidParameter("pooling threshold must be at least 1".into()));
    }
    if original_counts.contains_key(pooled_label) {
        return Err(SdcError::PooledLabelCollision {
            column: column_name.to_string(),
            label: pooled_label.to_string(),
        });
    }
    let pooled: Vec<String> = original_counts
        .iter()
        .filter(|(_, &count)| count < threshold)
        .map(|(label, _)| label.clone())
        .collect();
    let action = Mitigation::PoolCategories {
        column: column_name.to_string(),
        threshold,
        pooled_label: pooled_label.to_string(),
        pooled,
    };
    Ok((apply_action(data, &action)?, action))
}

/// Deletes the rows a risk report flags for `class`.
pub fn remove_records(synth: &Dataset, report: &RiskReport, class: RiskClass) -> Result<(Dataset, Mitigation), SdcError> {
    if report.n_synth != synth.n_rows() {
        return Err(SdcError::StaleReport {
            report_rows: report.n_synth,
            data_rows: synth.n_rows(),
        });
    }
    let rows = report.rows(class).to_vec();
    Ok((synth.without_rows(&rows), Mitigation::RemoveRecords { class, rows }))
}

fn check_mapping(column_name: &str, mapping: &BTreeMap<String, String>) -> Result<(), SdcError> {
    for target in mapping.values() {
        if let Some(next) = mapping.get(target) {
            if next != target {
                return Err(SdcError::ChainedMapping {
                    column: column_name.to_string(),
                    label: target.clone(),
                });
            }
        }
    }
    Ok(())
}

/// Replaces labels per `mapping`. Labels that are already mapping targets
/// pass through, so applying the same mapping twice is harmless.
pub fn coarsen_key(data: &Dataset, column_name: &str, mapping: &BTreeMap<String, String>) -> Result<(Dataset, Mitigation), SdcError> {
    let col = column(data, column_name)?;
    ensure_labels(col)?;
    check_mapping(column_name, mapping)?;
    let action = Mitigation::CoarsenKey {
        column: column_name.to_string(),
        mapping: mapping.clone(),
    };
    Ok((apply_action(data, &action)?, action))
}

/// Re-applies one recorded mitigation.
pub fn apply_action(data: &Dataset, action: &Mitigation) -> Result<Dataset, SdcError> {
    match action {
        Mitigation::ReducePrecision { column: name, unit } => {
            column(data, name)?;
            Ok(map_cells(data, name, |c| reduce_cell(c, *unit)))
        }
        Mitigation::TopBottomCode { column: name, lower_cut, upper_cut, .. } => {
            column(data, name)?;
            Ok(map_cells(data, name, |c| clamp_cell(c, *lower_cut, *upper_cut)))
        }
        Mitigation::PoolCategories { column: name, pooled_label, pooled, .. } => {
            column(data, name)?;
            let rare: HashSet<&str> = pooled.iter().map(String::as_str).collect();
            Ok(map_cells(data, name, |c| match c {
                Cell::Label(s) if rare.contains(s.as_str()) => Cell::Label(pooled_label.clone()),
                _ => c.clone(),
            }))
        }
        Mitigation::RemoveRecords { rows, .. } => Ok(data.without_rows(rows)),
        Mitigation::CoarsenKey { column: name, mapping } => {
            let col = column(data, name)?;
            let targets: HashSet<&String> = mapping.values().collect();
            for cell in &col.cells {
                if let Cell::Label(s) = cell {
                    if !mapping.contains_key(s) && !targets.contains(s) {
                        return Err(SdcError::PartialMapping {
                            column: name.clone(),
                            label: s.clone(),
                        });
                    }
                }
            }
            Ok(map_cells(data, name, |c| match c {
                Cell::Label(s) => Cell::Label(mapping.get(s).unwrap_or(s).clone()),
                _ => c.clone(),
            }))
        }
    }
}

/// Replays a trail onto `data`. `rename` maps the column names recorded in
/// the trail to names in `data`; with `include_removals` false, record
/// removals are skipped (used when coding the original at released
/// precision).
pub fn replay(
    data: &Dataset,
    trail: &AuditTrail,
    rename: impl Fn(&str) -> String,
    include_removals: bool,
) -> Result<Dataset, SdcError> {
    let mut out = data.clone();
    for action in trail.iter() {
        if matches!(action, Mitigation::RemoveRecords { .. }) {
            if include_removals {
                out = apply_action(&out, action)?;
            }
            continue;
        }
        let mut renamed = action.clone();
        match &mut renamed {
            Mitigation::ReducePrecision { column, .. }
            | Mitigation::TopBottomCode { column, .. }
            | Mitigation::PoolCategories { column, .. }
            | Mitigation::CoarsenKey { column, .. } => *column = rename(column),
            Mitigation::RemoveRecords { .. } => {}
        }
        if out.column(renamed.column().unwrap_or_default()).is_none() {
            continue;
        }
        out = apply_action(&out, &renamed)?;
    }
    Ok(out)
}

/// Updates a schema to describe data after `action`.
pub fn apply_to_schema(schema: &mut TableSchema, action: &Mitigation) {
    if let Mitigation::RemoveRecords { rows, .. } = action {
        schema.header.row_count = schema.header.row_count.saturating_sub(rows.len());
        return;
    }
    let Some(spec) = action.column().and_then(|c| schema.column_mut(c)) else {
        return;
    };
    match action {
        Mitigation::ReducePrecision { unit: PrecisionUnit::Numeric(u), .. } if spec.kind == ColumnKind::Numeric => {
            let u = *u;
            if u <= spec.grid_unit() {
                return;
            }
            match numeric::power_of_ten_places(u) {
                Some(places) if places >= 0 => {
                    spec.precision = Some(Precision::Decimals(places as u32));
                    spec.unit = None;
                }
                _ => {
                    spec.precision = Some(Precision::Decimals(numeric::decimals_of(u)));
                    spec.unit = Some(u);
                }
            }
            if let Some(ValueRange::Numeric { min, max }) = spec.numeric_range {
                spec.numeric_range = Some(ValueRange::Numeric {
                    min: numeric::round_to_unit(min, u),
                    max: numeric::round_to_unit(max, u),
                });
            }
        }
        Mitigation::ReducePrecision { unit: PrecisionUnit::Date(g), .. } if spec.kind == ColumnKind::Date => {
            let coarser = spec.granularity().min(*g);
            spec.precision = Some(Precision::Granularity(coarser));
            if let Some(range) = spec.numeric_range {
                let (lo, hi) = range.bounds();
                spec.numeric_range = Some(ValueRange::dates(
                    Day(lo as i64).truncate(coarser),
                    Day(hi as i64).truncate(coarser),
                ));
            }
        }
        Mitigation::TopBottomCode { lower_cut, upper_cut, .. } if lower_cut.is_finite() => {
            spec.numeric_range = Some(match spec.kind {
                ColumnKind::Date => ValueRange::dates(Day(*lower_cut as i64), Day(*upper_cut as i64)),
                _ => ValueRange::Numeric {
                    min: *lower_cut,
                    max: *upper_cut,
                },
            });
        }
        Mitigation::PoolCategories { pooled_label, pooled, .. } if !pooled.is_empty() => {
            let rare: HashSet<&String> = pooled.iter().collect();
            let mut categories = Vec::with_capacity(spec.categories.len());
            for c in &spec.categories {
                let label = if rare.contains(c) { pooled_label } else { c };
                if !categories.contains(label) {
                    categories.push(label.clone());
                }
            }
            spec.categories = categories;
        }
        Mitigation::CoarsenKey { mapping, .. } => {
            let mut categories: Vec<String> = Vec::new();
            for c in &spec.categories {
                let label = mapping.get(c).unwrap_or(c);
                if !categories.contains(label) {
                    categories.push(label.clone());
                }
            }
            spec.categories = categories;
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affix::AffixRule;
    use crate::risk::{classify_risky_records, KeySpec};
    use crate::schema::{infer_schema, ColumnSpec};

    fn numbers(name: &str, values: &[f64]) -> Dataset {
        Dataset::new(vec![Column::new(name, values.iter().map(|v| Cell::number(*v)).collect())]).unwrap()
    }

    fn labels(name: &str, values: &[&str]) -> Dataset {
        Dataset::new(vec![Column::new(name, values.iter().map(|v| Cell::label(*v)).collect())]).unwrap()
    }

    fn values(data: &Dataset) -> Vec<f64> {
        data.columns()[0].cells.iter().filter_map(Cell::as_f64).collect()
    }

    #[test]
    fn income_in_thousands() {
        let data = numbers("income", &[12345.0, 987.0]);
        let (out, action) = reduce_precision(&data, "income", PrecisionUnit::Numeric(1000.0)).unwrap();
        assert_eq!(values(&out), vec![12000.0, 1000.0]);
        assert_eq!(out.columns()[0].cells[0].to_string(), "12000");
        assert!(matches!(action, Mitigation::ReducePrecision { .. }));
    }

    #[test]
    fn unit_one_on_integers_is_identity() {
        let data = numbers("n", &[1.0, -4.0, 17.0]);
        let (out, _) = reduce_precision(&data, "n", PrecisionUnit::Numeric(1.0)).unwrap();
        assert_eq!(out, data);
    }

    #[test]
    fn dates_to_year() {
        let cells = ["2019-07-14", "2020-01-01", "2021-12-31"]
            .iter()
            .map(|s| Cell::Date(Day::parse(s).unwrap()))
            .collect();
        let data = Dataset::new(vec![Column::new("d", cells)]).unwrap();
        let (out, _) = reduce_precision(&data, "d", PrecisionUnit::Date(Granularity::Year)).unwrap();
        let rendered: Vec<String> = out.columns()[0].cells.iter().map(|c| c.to_string()).collect();
        assert_eq!(rendered, vec!["2019-01-01", "2020-01-01", "2021-01-01"]);
    }

    #[test]
    fn precision_on_labels_errors() {
        let data = labels("c", &["a"]);
        assert_eq!(
            reduce_precision(&data, "c", PrecisionUnit::Numeric(10.0)).unwrap_err(),
            SdcError::NotNumericOrDate("c".into())
        );
    }

    #[test]
    fn percentile_coding_one_to_hundred() {
        let data = numbers("v", &(1..=100).map(f64::from).collect::<Vec<_>>());
        let (out, action) = top_bottom_code(&data, "v", CodingMode::Percentile { low: 1.0, high: 99.0 }).unwrap();
        let v = values(&out);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[99], 99.0);
        assert_eq!(v.iter().filter(|&&x| x == 99.0).count(), 2);
        match action {
            Mitigation::TopBottomCode { lower_cut, upper_cut, .. } => assert_eq!((lower_cut, upper_cut), (1.0, 99.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn count_threshold_leaves_heavy_top_alone() {
        let mut vals: Vec<f64> = (1..=20).map(f64::from).collect();
        vals.extend([50.0; 7]);
        let data = numbers("v", &vals);
        let (out, _) = top_bottom_code(&data, "v", CodingMode::CountThreshold { threshold: 5 }).unwrap();
        let v = values(&out);
        assert_eq!(v.iter().filter(|&&x| x == 50.0).count(), 7);
        assert_eq!(v.iter().cloned().fold(f64::INFINITY, f64::min), 5.0);
    }

    #[test]
    fn constant_column_unchanged_by_coding() {
        let data = numbers("v", &[3.0; 9]);
        for mode in [
            CodingMode::Percentile { low: 1.0, high: 99.0 },
            CodingMode::CountThreshold { threshold: 5 },
            CodingMode::CountThreshold { threshold: 50 },
        ] {
            let (out, _) = top_bottom_code(&data, "v", mode).unwrap();
            assert_eq!(out, data);
        }
    }

    #[test]
    fn invalid_percentiles() {
        let data = numbers("v", &[1.0]);
        assert!(matches!(
            top_bottom_code(&data, "v", CodingMode::Percentile { low: 99.0, high: 1.0 }),
            Err(SdcError::InvalidPercentiles { .. })
        ));
    }

    #[test]
    fn pools_rare_counties() {
        let mut original = vec!["A"; 100];
        original.extend(["B"; 4]);
        original.extend(["C"; 3]);
        let counts = category_counts(&labels("county", &original).columns()[0]);
        let synth = labels("synth_county", &["A", "B", "C", "A"]);
        let (out, action) = pool_categories(&synth, "synth_county", &counts, 5, DEFAULT_POOLED_LABEL).unwrap();
        let got: Vec<String> = out.columns()[0].cells.iter().map(|c| c.to_string()).collect();
        assert_eq!(got, vec!["A", "OTHER_POOLED", "OTHER_POOLED", "A"]);
        match action {
            Mitigation::PoolCategories { pooled, .. } => assert_eq!(pooled, vec!["B", "C"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pooling_nothing_rare_is_identity() {
        let original = labels("c", &["x"; 6].iter().chain(&["y"; 5]).copied().collect::<Vec<_>>());
        let counts = category_counts(&original.columns()[0]);
        let (out, action) = pool_categories(&original, "c", &counts, 5, DEFAULT_POOLED_LABEL).unwrap();
        assert_eq!(out, original);
        assert!(action.is_noop());
    }

    #[test]
    fn pooled_label_collision() {
        let original = labels("c", &["OTHER_POOLED", "x"]);
        let counts = category_counts(&original.columns()[0]);
        assert!(matches!(
            pool_categories(&original, "c", &counts, 5, DEFAULT_POOLED_LABEL),
            Err(SdcError::PooledLabelCollision { .. })
        ));
    }

    #[test]
    fn removes_flagged_rows() {
        let synth = numbers("synth_k", &(0..20).map(f64::from).collect::<Vec<_>>());
        let report = RiskReport {
            keys: vec!["k".into()],
            synth_count_threshold: 1,
            n_synth: 20,
            n_synth_unique: 2,
            n_unique_in_original: 2,
            n_replicated_unique: 2,
            proportion_synth_unique: 0.1,
            proportion_unique_in_original: 0.1,
            proportion_replicated_unique: 0.1,
            synth_unique_rows: vec![3, 17],
            unique_in_original_rows: vec![3, 17],
            replicated_unique_rows: vec![3, 17],
        };
        let (out, _) = remove_records(&synth, &report, RiskClass::ReplicatedUnique).unwrap();
        assert_eq!(out.n_rows(), 18);
        assert!(!values(&out).contains(&3.0));
        assert!(!values(&out).contains(&17.0));
        let shorter = synth.without_rows(&[0]);
        assert!(matches!(
            remove_records(&shorter, &report, RiskClass::ReplicatedUnique),
            Err(SdcError::StaleReport { .. })
        ));
    }

    #[test]
    fn empty_flag_set_is_identity() {
        let synth = labels("synth_k", &["a", "a"]);
        let original = labels("k", &["b"]);
        let report = classify_risky_records(&synth, &original, &KeySpec::new(&["k"]), &AffixRule::default(), 1).unwrap();
        let (out, action) = remove_records(&synth, &report, RiskClass::UniqueInOriginal).unwrap();
        assert_eq!(out, synth);
        assert!(action.is_noop());
    }

    #[test]
    fn postcodes_to_areas() {
        let data = labels("pc", &["EH1", "EH2", "G1", "EH1"]);
        let mapping: BTreeMap<String, String> = [("EH1", "Edinburgh"), ("EH2", "Edinburgh"), ("G1", "Glasgow")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let (out, action) = coarsen_key(&data, "pc", &mapping).unwrap();
        let counts = category_counts(&out.columns()[0]);
        assert_eq!(counts.len(), 2);
        let mut schema = infer_schema(&data).unwrap();
        apply_to_schema(&mut schema, &action);
        assert_eq!(schema.columns[0].categories, vec!["Edinburgh", "Glasgow"]);
        let (twice, _) = coarsen_key(&out, "pc", &mapping).unwrap();
        assert_eq!(twice, out);
    }

    #[test]
    fn partial_and_chained_mappings() {
        let data = labels("pc", &["EH1", "ZZ9"]);
        let mut mapping = BTreeMap::new();
        mapping.insert("EH1".to_string(), "Edinburgh".to_string());
        assert!(matches!(coarsen_key(&data, "pc", &mapping), Err(SdcError::PartialMapping { .. })));
        mapping.insert("ZZ9".to_string(), "EH1".to_string());
        assert!(matches!(coarsen_key(&data, "pc", &mapping), Err(SdcError::ChainedMapping { .. })));
    }

    #[test]
    fn schema_follows_precision_and_coding() {
        let data = numbers("income", &[987.0, 12345.0, 40000.0]);
        let mut schema = infer_schema(&data).unwrap();
        let (_, action) = reduce_precision(&data, "income", PrecisionUnit::Numeric(1000.0)).unwrap();
        apply_to_schema(&mut schema, &action);
        assert_eq!(schema.columns[0].unit, Some(1000.0));
        assert_eq!(schema.columns[0].numeric_range, Some(ValueRange::Numeric { min: 1000.0, max: 40000.0 }));
        let mut schema2 = TableSchema::authored(vec![ColumnSpec::numeric("income", 0.0, 5.0, 0)], 3);
        let (_, coded) = top_bottom_code(&data, "income", CodingMode::Percentile { low: 10.0, high: 90.0 }).unwrap();
        apply_to_schema(&mut schema2, &coded);
        assert_eq!(schema2.columns[0].numeric_range, Some(ValueRange::Numeric { min: 987.0, max: 40000.0 }));
    }

    #[test]
    fn trail_replay_matches_direct_application() {
        let data = numbers("synth_x", &[1.0, 2.5, 1000.0, 7.25]);
        let mut trail = AuditTrail::new();
        let (a, m1) = reduce_precision(&data, "synth_x", PrecisionUnit::Numeric(1.0)).unwrap();
        trail.record(m1);
        let (b, m2) = top_bottom_code(&a, "synth_x", CodingMode::CountThreshold { threshold: 2 }).unwrap();
        trail.record(m2);
        let replayed = replay(&data, &trail, str::to_string, true).unwrap();
        assert_eq!(replayed, b);
        assert_eq!(trail.actions()[1].applied_at, 1);
        let original = numbers("x", &[1.0, 2.5, 1000.0, 7.25]);
        let strip = |n: &str| AffixRule::default().strip(n).unwrap_or(n).to_string();
        let coded = replay(&original, &trail, strip, false).unwrap();
        assert_eq!(values(&coded), values(&b));
    }
}
