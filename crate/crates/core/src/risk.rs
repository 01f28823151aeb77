//! Identity-disclosure metrics.
//!
//! A synthetic record whose key combination occurs at most
//! `synth_count_threshold` times in the synthetic data is a candidate. A
//! candidate whose combination occurs exactly once in the original is a
//! replicated unique; one whose combination occurs at least once in the
//! original is a unique in the original. The second class contains the
//! first.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::dataset::{Cell, Column, Dataset};
use crate::schema::{ColumnKind, TableSchema};

pub const DEFAULT_SYNTH_COUNT_THRESHOLD: usize = 1;
pub const DEFAULT_RARITY_THRESHOLD: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("key column '{0}' not found")]
    UnknownKeyColumn(String),
    #[error("key column '{bare}' appears without the synthetic affix (expected '{expected}')")]
    KeyAfterAffixMismatch { bare: String, expected: String },
    #[error("key specification is empty")]
    NoKeys,
    #[error("synth_count_threshold must be at least 1")]
    InvalidThreshold,
}

/// Quasi-identifiers an attacker is assumed to know, in original naming.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeySpec {
    pub columns: Vec<String>,
    /// Free-text notes per key, e.g. how a key was coarsened.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl KeySpec {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> KeySpec {
        KeySpec {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            notes: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskClass {
    ReplicatedUnique,
    UniqueInOriginal,
}

impl std::fmt::Display for RiskClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RiskClass::ReplicatedUnique => "replicated uniques",
            RiskClass::UniqueInOriginal => "uniques in the original",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub keys: Vec<String>,
    pub synth_count_threshold: usize,
    pub n_synth: usize,
    pub n_synth_unique: usize,
    pub n_unique_in_original: usize,
    pub n_replicated_unique: usize,
    pub proportion_synth_unique: f64,
    pub proportion_unique_in_original: f64,
    pub proportion_replicated_unique: f64,
    /// 0-based synthetic row positions.
    pub synth_unique_rows: Vec<usize>,
    pub unique_in_original_rows: Vec<usize>,
    pub replicated_unique_rows: Vec<usize>,
}

impl RiskReport {
    pub fn rows(&self, class: RiskClass) -> &[usize] {
        match class {
            RiskClass::ReplicatedUnique => &self.replicated_unique_rows,
            RiskClass::UniqueInOriginal => &self.unique_in_original_rows,
        }
    }

    pub fn proportion(&self, class: RiskClass) -> f64 {
        match class {
            RiskClass::ReplicatedUnique => self.proportion_replicated_unique,
            RiskClass::UniqueInOriginal => self.proportion_unique_in_original,
        }
    }
}

pub type KeyTuple = Vec<String>;

fn resolve_original<'a>(data: &'a Dataset, keys: &KeySpec) -> Result<Vec<&'a Column>, RiskError> {
    if keys.columns.is_empty() {
        return Err(RiskError::NoKeys);
    }
    keys.columns
        .iter()
        .map(|k| data.column(k).ok_or_else(|| RiskError::UnknownKeyColumn(k.clone())))
        .collect()
}

fn resolve_synth<'a>(data: &'a Dataset, keys: &KeySpec, affix: &AffixRule) -> Result<Vec<&'a Column>, RiskError> {
    if keys.columns.is_empty() {
        return Err(RiskError::NoKeys);
    }
    keys.columns
        .iter()
        .map(|k| {
            let expected = affix.apply(k);
            match (data.column(&expected), data.column(k)) {
                (Some(c), _) => Ok(c),
                (None, Some(_)) => Err(RiskError::KeyAfterAffixMismatch {
                    bare: k.clone(),
                    expected,
                }),
                (None, None) => Err(RiskError::UnknownKeyColumn(k.clone())),
            }
        })
        .collect()
}

fn row_tuples(columns: &[&Column], n_rows: usize) -> Vec<KeyTuple> {
    (0..n_rows)
        .map(|r| columns.iter().map(|c| c.cells[r].canonical()).collect())
        .collect()
}

fn tally(tuples: &[KeyTuple]) -> HashMap<&KeyTuple, usize> {
    let mut counts = HashMap::with_capacity(tuples.len());
    for t in tuples {
        *counts.entry(t).or_insert(0) += 1;
    }
    counts
}

/// Counts each key combination. Cells are compared by their canonical
/// rendering, and missing is a key value like any other.
pub fn count_key_combos(data: &Dataset, keys: &KeySpec) -> Result<BTreeMap<KeyTuple, usize>, RiskError> {
    let columns = resolve_original(data, keys)?;
    let mut counts = BTreeMap::new();
    for t in row_tuples(&columns, data.n_rows()) {
        *counts.entry(t).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Classifies synthetic rows against the original. Synthetic key columns
/// are looked up by their affixed names, original ones by bare names.
pub fn classify_risky_records(
    synth: &Dataset,
    original: &Dataset,
    keys: &KeySpec,
    affix: &AffixRule,
    synth_count_threshold: usize,
) -> Result<RiskReport, RiskError> {
    if synth_count_threshold == 0 {
        return Err(RiskError::InvalidThreshold);
    }
    let synth_cols = resolve_synth(synth, keys, affix)?;
    let orig_cols = resolve_original(original, keys)?;
    let synth_tuples = row_tuples(&synth_cols, synth.n_rows());
    let orig_tuples = row_tuples(&orig_cols, original.n_rows());
    let synth_counts = tally(&synth_tuples);
    let orig_counts = tally(&orig_tuples);

    let mut synth_unique_rows = Vec::new();
    let mut unique_in_original_rows = Vec::new();
    let mut replicated_unique_rows = Vec::new();
    for (row, tuple) in synth_tuples.iter().enumerate() {
        if synth_counts[tuple] > synth_count_threshold {
            continue;
        }
        synth_unique_rows.push(row);
        match orig_counts.get(tuple).copied().unwrap_or(0) {
            0 => {}
            1 => {
                unique_in_original_rows.push(row);
                replicated_unique_rows.push(row);
            }
            _ => unique_in_original_rows.push(row),
        }
    }
    let n_synth = synth.n_rows();
    let proportion = |count: usize| if n_synth == 0 { 0.0 } else { count as f64 / n_synth as f64 };
    Ok(RiskReport {
        keys: keys.columns.clone(),
        synth_count_threshold,
        n_synth,
        n_synth_unique: synth_unique_rows.len(),
        n_unique_in_original: unique_in_original_rows.len(),
        n_replicated_unique: replicated_unique_rows.len(),
        proportion_synth_unique: proportion(synth_unique_rows.len()),
        proportion_unique_in_original: proportion(unique_in_original_rows.len()),
        proportion_replicated_unique: proportion(replicated_unique_rows.len()),
        synth_unique_rows,
        unique_in_original_rows,
        replicated_unique_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeEndpoint {
    Min,
    Max,
    Both,
}

/// A value rare enough in the original to identify the few units holding it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingletonValue {
    pub column: String,
    pub value: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<RangeEndpoint>,
    /// Canonical key of the value, for matching against released data.
    #[serde(skip)]
    pub key: String,
}

/// Lists, column by column, every non-missing value whose count in the
/// original is below `rarity_threshold`. Minimum and maximum of numeric and
/// date columns are tagged since a published range exposes them.
pub fn detect_singleton_values(original: &Dataset, schema: &TableSchema, rarity_threshold: usize) -> Vec<SingletonValue> {
    let mut out = Vec::new();
    for spec in &schema.columns {
        let Some(column) = original.column(&spec.name) else {
            continue;
        };
        let mut counts: IndexMap<String, (usize, &Cell)> = IndexMap::new();
        for cell in column.cells.iter().filter(|c| !c.is_missing()) {
            counts.entry(cell.canonical()).or_insert((0, cell)).0 += 1;
        }
        let ordered = matches!(spec.kind, ColumnKind::Numeric | ColumnKind::Date);
        let mut min_key = None;
        let mut max_key = None;
        if ordered {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (key, (_, cell)) in &counts {
                if let Some(v) = cell.as_f64() {
                    if v < lo {
                        lo = v;
                        min_key = Some(key.clone());
                    }
                    if v > hi {
                        hi = v;
                        max_key = Some(key.clone());
                    }
                }
            }
        }
        for (key, (count, cell)) in &counts {
            if *count >= rarity_threshold {
                continue;
            }
            let is_min = min_key.as_ref() == Some(key);
            let is_max = max_key.as_ref() == Some(key);
            let endpoint = match (is_min, is_max) {
                (true, true) => Some(RangeEndpoint::Both),
                (true, false) => Some(RangeEndpoint::Min),
                (false, true) => Some(RangeEndpoint::Max),
                _ => None,
            };
            out.push(SingletonValue {
                column: spec.name.clone(),
                value: cell.to_string(),
                count: *count,
                endpoint,
                key: key.clone(),
            });
        }
    }
    out
}
