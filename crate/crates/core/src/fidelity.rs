//! Univariate margin agreement and pairwise association, both measured as
//! total variation distance (TVD).

use std::collections::BTreeMap;


use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::dataset::{Cell, Column, Dataset};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("column '{0}' not found")]
    UnknownColumn(String),
    #[error("invalid bins: {0}")]
    InvalidBins(String),
}

/// How numeric and date columns are discretised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpec {
    /// Equal-width bins over the reference column's range.
    EqualWidth(usize),
    /// Interior cut points, ascending; values at a cut fall in the upper bin.
    Cuts(Vec<f64>),
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::EqualWidth(DEFAULT_BINS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    TvdCategorical,
    TvdBinnedNumeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginComparison {
    pub column: String,
    pub statistic: StatisticKind,
    pub value: f64,
    /// Interior cut points used for numeric and date columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cuts: Option<Vec<f64>>,
    pub n_original: usize,
    pub n_synth: usize,
}

/// Discretised cell: missing is its own cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Bucket {
    Missing,
    Label(String),
    Bin(usize),
}

fn is_ordered(col: &Column) -> bool {
    col.cells.iter().any(|c| matches!(c, Cell::Number(_) | Cell::Date(_)))
}

/// Interior cut points for a reference column.
fn resolve_cuts(reference: &Column, bins: &BinSpec) -> Result<Vec<f64>, FidelityError> {
    match bins {
        BinSpec::Cuts(cuts) => {
            if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(FidelityError::InvalidBins("cut points must be finite and strictly ascending".into()));
            }
            Ok(cuts.clone())
        }
        BinSpec::EqualWidth(0) => Err(FidelityError::InvalidBins("need at least one bin".into())),
        BinSpec::EqualWidth(k) => {
            let values: Vec<f64> = reference.cells.iter().filter_map(Cell::as_f64).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if values.is_empty() || lo == hi {
                return Ok(Vec::new());
            }
            let width = (hi - lo) / *k as f64;
            Ok((1..*k).map(|i| lo + width * i as f64).collect())
        }
    }
}

fn bucket(cell: &Cell, cuts: Option<&[f64]>) -> Bucket {
    match (cell, cuts) {
        (Cell::Missing, _) => Bucket::Missing,
        (_, Some(cuts)) => match cell.as_f64() {
            Some(v) => Bucket::Bin(cuts.partition_point(|c| *c <= v)),
            None => Bucket::Label(cell.canonical()),
        },
        (_, None) => Bucket::Label(cell.canonical()),
    }
}

fn distribution<K: Ord>(keys: impl Iterator<Item = K>) -> (BTreeMap<K, f64>, usize) {
    let mut counts: BTreeMap<K, f64> = BTreeMap::new();
    let mut n = 0;
    for k in keys {
        *counts.entry(k).or_insert(0.0) += 1.0;
        n += 1;
    }
    if n > 0 {
        for v in counts.values_mut() {
            *v /= n as f64;
        }
    }
    (counts, n)
}

/// ½ Σ |p − q| over the union of supports.
pub fn tvd<K: Ord>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let mut total = 0.0;
    for (k, pv) in p {
        total += (pv - q.get(k).copied().unwrap_or(0.0)).abs();
    }
    for (k, qv) in q {
        if !p.contains_key(k) {
            total += qv;
        }
    }
    (total / 2.0).clamp(0.0, 1.0)
}

fn lookup<'a>(data: &'a Dataset, column: &str, affix: &AffixRule) -> Result<&'a Column, FidelityError> {
    data.column(column)
        .or_else(|| data.column(&affix.apply(column)))
        .or_else(|| affix.strip(column).and_then(|bare| data.column(bare)))
        .ok_or_else(|| FidelityError::UnknownColumn(column.to_string()))
}

/// TVD between one column's empirical distribution in the original and in
/// the synthetic data. `column` may be given bare or affixed. Numeric and
/// date columns are binned, by default into equal-width bins over the
/// original's range.
pub fn compare_margin(
    original: &Dataset,
    synth: &Dataset,
    column: &str,
    bins: Option<&BinSpec>,
    affix: &AffixRule,
) -> Result<MarginComparison, FidelityError> {
    let orig = lookup(original, column, affix)?;
    let syn = lookup(synth, column, affix)?;
    let ordered = is_ordered(orig) || is_ordered(syn);
    let cuts = if ordered {
        Some(resolve_cuts(orig, bins.unwrap_or(&BinSpec::default()))?)
    } else {
        None
    };
    let (p, n_original) = distribution(orig.cells.iter().map(|c| bucket(c, cuts.as_deref())));
    let (q, n_synth) = distribution(syn.cells.iter().map(|c| bucket(c, cuts.as_deref())));
    Ok(MarginComparison {
        column: orig.name.clone(),
        statistic: if ordered {
            StatisticKind::TvdBinnedNumeric
        } else {
            StatisticKind::TvdCategorical
        },
        value: tvd(&p, &q),
        cuts,
        n_original,
        n_synth,
    })
}

/// TVD between the empirical joint distribution of two columns and the
/// product of their empirical margins; 0 means exact empirical
/// independence.
pub fn pairwise_association(data: &Dataset, column_a: &str, column_b: &str, bins: Option<&BinSpec>) -> Result<f64, FidelityError> {
    let a = data.column(column_a).ok_or_else(|| FidelityError::UnknownColumn(column_a.to_string()))?;
    let b = data.column(column_b).ok_or_else(|| FidelityError::UnknownColumn(column_b.to_string()))?;
    let spec = bins.cloned().unwrap_or_default();
    let cuts_a = if is_ordered(a) { Some(resolve_cuts(a, &spec)?) } else { None };
    let cuts_b = if is_ordered(b) { Some(resolve_cuts(b, &spec)?) } else { None };
    let ka: Vec<Bucket> = a.cells.iter().map(|c| bucket(c, cuts_a.as_deref())).collect();
    let kb: Vec<Bucket> = b.cells.iter().map(|c| bucket(c, cuts_b.as_deref())).collect();
    let (pa, n) = distribution(ka.iter().cloned());
    if n == 0 {
        return Ok(0.0);
    }
    let (pb, _) = distribution(kb.iter().cloned());
    let (joint, _) = distribution(ka.into_iter().zip(kb));
    let mut total = 0.0;
    for (x, px) in &pa {
        for (y, py) in &pb {
            let pj = joint.get(&(x.clone(), y.clone())).copied().unwrap_or(0.0);
            total += (pj - px * py).abs();
        }
    }
    Ok((total / 2.0).clamp(0.0, 1.0))
}

/// Margin comparison for every synthetic column that maps to an original
/// column, in synthetic column order.
pub fn fidelity_table(original: &Dataset, synth: &Dataset, affix: &AffixRule) -> Vec<MarginComparison> {
    synth
        .columns()
        .iter()
        .filter_map(|c| {
            let bare = affix.strip(&c.name)?;
            original.column(bare)?;
            compare_margin(original, synth, bare, None, affix).ok()
        })
        .collect()
}
