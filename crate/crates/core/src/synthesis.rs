//! The two LFSD generators: from metadata alone, and from the original's
//! univariate margins.
//!
//! Every column draws from its own ChaCha stream keyed by (seed, column
//! index), so adding or removing a column leaves the other columns' draws
//! unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::dataset::{Cell, Column, Dataset, DatasetError, Day, Granularity, Number};
use crate::numeric;
use crate::schema::{ColumnKind, ColumnSpec, TableSchema};
use crate::transform::{self, TransformError, TransformSpec};

pub const DEFAULT_METADATA_MISSING_RATE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("configured method is {configured}, but {called} was requested")]
    MethodMismatch { configured: Method, called: Method },
    #[error("column '{0}': min > max")]
    DegenerateRange(String),
    #[error("column '{0}': no value in the range is representable at the declared precision")]
    EmptyGrid(String),
    #[error("column '{0}': no range declared")]
    MissingRange(String),
    #[error("column '{0}': no categories declared")]
    NoCategories(String),
    #[error("original dataset is empty")]
    EmptyOriginal,
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("transform {0} needs a duration_range when synthesizing from metadata")]
    TransformNeedsDurationRange(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    FromMetadata,
    FromMargins,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::FromMetadata => "from_metadata",
            Method::FromMargins => "from_margins",
        })
    }
}

fn default_missing_rate() -> f64 {
    DEFAULT_METADATA_MISSING_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub method: Method,
    pub n_synth: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub affix: AffixRule,
    #[serde(default)]
    pub transforms: Vec<TransformSpec>,
    #[serde(default = "default_missing_rate")]
    pub metadata_missing_rate: f64,
}

impl SynthesisConfig {
    pub fn new(method: Method, n_synth: usize, seed: u64) -> SynthesisConfig {
        SynthesisConfig {
            method,
            n_synth,
            seed,
            affix: AffixRule::default(),
            transforms: Vec::new(),
            metadata_missing_rate: DEFAULT_METADATA_MISSING_RATE,
        }
    }

    pub fn with_transforms(mut self, transforms: Vec<TransformSpec>) -> SynthesisConfig {
        self.transforms = transforms;
        self
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_synth == 0 {
            out.push("n_synth must be at least 1".to_string());
        }
        if self.affix.token().is_empty() {
            out.push("affix must not be empty".to_string());
        }
        if !(0.0..=1.0).contains(&self.metadata_missing_rate) {
            out.push("metadata_missing_rate must lie in [0, 1]".to_string());
        }
        out
    }

    fn check(&self, called: Method) -> Result<(), SynthesisError> {
        if self.method != called {
            return Err(SynthesisError::MethodMismatch {
                configured: self.method,
                called,
            });
        }
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SynthesisError::InvalidConfig(problems.join("; ")))
        }
    }
}

/// The RNG stream for one column.
pub fn column_rng(seed: u64, column_index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(column_index as u64);
    rng
}

/// A column's sampling pool: its original cells, missing included.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDistribution<'a> {
    pub column: &'a str,
    pub pool: &'a [Cell],
}

impl<'a> MarginalDistribution<'a> {
    pub fn of(column: &'a Column) -> MarginalDistribution<'a> {
        MarginalDistribution {
            column: &column.name,
            pool: &column.cells,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<Cell> {
        (0..n)
            .map(|_| self.pool[rng.gen_range(0..self.pool.len())].clone())
            .collect()
    }
}

/// Value grid for a numeric column: admissible values are `k * unit` for
/// `k` in `lo..=hi`.
fn numeric_grid(spec: &ColumnSpec) -> Result<(i64, i64, f64, u32), SynthesisError> {
    let range = spec
        .numeric_range
        .ok_or_else(|| SynthesisError::MissingRange(spec.name.clone()))?;
    let (min, max) = range.bounds();
    if min > max {
        return Err(SynthesisError::DegenerateRange(spec.name.clone()));
    }
    let unit = spec.grid_unit();
    let lo = numeric::round_decimal(min / unit, 9).ceil() as i64;
    let hi = numeric::round_decimal(max / unit, 9).floor() as i64;
    if lo > hi {
        return Err(SynthesisError::EmptyGrid(spec.name.clone()));
    }
    let decimals = match spec.unit {
        Some(u) => spec.decimals().max(numeric::decimals_of(u)),
        None => spec.decimals(),
    };
    Ok((lo, hi, unit, decimals))
}

/// Candidate dates for a date column at its granularity.
enum DateGrid {
    Days(i64, i64),
    Months(i64, i64),
    Years(i32, i32),
}

fn date_grid(spec: &ColumnSpec) -> Result<DateGrid, SynthesisError> {
    let range = spec
        .numeric_range
        .ok_or_else(|| SynthesisError::MissingRange(spec.name.clone()))?;
    let (min, max) = range.bounds();
    if min > max {
        return Err(SynthesisError::DegenerateRange(spec.name.clone()));
    }
    let (min, max) = (Day(min as i64), Day(max as i64));
    let empty = || SynthesisError::EmptyGrid(spec.name.clone());
    match spec.granularity() {
        Granularity::Day => Ok(DateGrid::Days(min.0, max.0)),
        Granularity::Month => {
            let mut lo = min.month_index();
            if min.truncate(Granularity::Month) != min {
                lo += 1;
            }
            let hi = max.month_index();
            (lo <= hi).then_some(DateGrid::Months(lo, hi)).ok_or_else(empty)
        }
        Granularity::Year => {
            let year = |d: Day| chrono::Datelike::year(&d.to_date());
            let mut lo = year(min);
            if min.truncate(Granularity::Year) != min {
                lo += 1;
            }
            let hi = year(max);
            (lo <= hi).then_some(DateGrid::Years(lo, hi)).ok_or_else(empty)
        }
    }
}

fn generate_column<R: Rng>(spec: &ColumnSpec, n: usize, missing_rate: f64, rng: &mut R) -> Result<Vec<Cell>, SynthesisError> {
    let mut draw: Box<dyn FnMut(&mut R) -> Cell> = match spec.kind {
        ColumnKind::Categorical => {
            if spec.categories.is_empty() {
                return Err(SynthesisError::NoCategories(spec.name.clone()));
            }
            let cats = spec.categories.clone();
            Box::new(move |rng: &mut R| Cell::Label(cats[rng.gen_range(0..cats.len())].clone()))
        }
        ColumnKind::Numeric => {
            let (lo, hi, unit, decimals) = numeric_grid(spec)?;
            Box::new(move |rng: &mut R| {
                let k = rng.gen_range(lo..=hi);
                let value = numeric::round_decimal(k as f64 * unit, decimals as i32);
                Cell::Number(Number::new(value, decimals))
            })
        }
        ColumnKind::Date => match date_grid(spec)? {
            DateGrid::Days(lo, hi) => Box::new(move |rng: &mut R| Cell::Date(Day(rng.gen_range(lo..=hi)))),
            DateGrid::Months(lo, hi) => Box::new(move |rng: &mut R| {
                Cell::Date(Day::from_month_index(rng.gen_range(lo..=hi)).expect("month in range"))
            }),
            DateGrid::Years(lo, hi) => Box::new(move |rng: &mut R| {
                Cell::Date(Day::from_ymd(rng.gen_range(lo..=hi), 1, 1).expect("year in range"))
            }),
        },
    };
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let cell = draw(rng);
        let missing = spec.missing_allowed && rng.gen_bool(missing_rate);
        cells.push(if missing { Cell::Missing } else { cell });
    }
    Ok(cells)
}

/// Generates `n_synth` rows using only the declared metadata: categories
/// uniformly, numbers and dates uniformly over the range at the declared
/// precision, missing cells at `metadata_missing_rate` where allowed.
pub fn synth_from_metadata(schema: &TableSchema, config: &SynthesisConfig) -> Result<Dataset, SynthesisError> {
    config.check(Method::FromMetadata)?;
    let mut columns = Vec::with_capacity(schema.columns.len());
    for (index, spec) in schema.columns.iter().enumerate() {
        let mut rng = column_rng(config.seed, index);
        let cells = generate_column(spec, config.n_synth, config.metadata_missing_rate, &mut rng)?;
        columns.push(Column::new(spec.name.clone(), cells));
    }
    let mut data = Dataset::new(columns)?;
    for spec in &config.transforms {
        data = apply_metadata_transform(data, schema, spec, config.seed)?;
    }
    Ok(data.with_affix(&config.affix))
}

fn apply_metadata_transform(
    mut data: Dataset,
    schema: &TableSchema,
    spec: &TransformSpec,
    seed: u64,
) -> Result<Dataset, SynthesisError> {
    match spec {
        TransformSpec::DatePairToOriginPlusDuration {
            origin,
            end,
            duration_range,
            ..
        } => {
            let (lo, hi) = duration_range.ok_or_else(|| SynthesisError::TransformNeedsDurationRange(spec.label()))?;
            if lo > hi || lo < 0 {
                return Err(SynthesisError::InvalidConfig(format!(
                    "{}: duration_range must satisfy 0 <= min <= max",
                    spec.label()
                )));
            }
            let missing = |name: &str| TransformError::MissingColumn {
                transform: spec.label(),
                column: name.to_string(),
            };
            let end_index = data.column_index(end).ok_or_else(|| missing(end))?;
            let granularity = schema.column(end).map_or(Granularity::Day, ColumnSpec::granularity);
            let origins = data.column(origin).ok_or_else(|| missing(origin))?.cells.clone();
            let mut rng = column_rng(seed, end_index);
            let ends = data.column_mut(end).expect("checked above");
            for (cell, origin_cell) in ends.cells.iter_mut().zip(&origins) {
                let duration = rng.gen_range(lo..=hi);
                if cell.is_missing() {
                    continue;
                }
                *cell = match origin_cell {
                    Cell::Date(a) => {
                        let end_day = Day(a.0 + duration);
                        let truncated = end_day.truncate(granularity);
                        Cell::Date(if truncated < *a { end_day } else { truncated })
                    }
                    _ => Cell::Missing,
                };
            }
            Ok(data)
        }
        TransformSpec::TotalToComponents { total, .. } => {
            let cells = transform::recomputed_total(&data, spec)?;
            match data.column_mut(total) {
                Some(column) => column.cells = cells,
                None => data.push_column(Column::new(total.clone(), cells))?,
            }
            Ok(data)
        }
    }
}

/// Resamples each column independently, with replacement, from the
/// original's cells (missing included), after applying any transforms.
pub fn synth_from_margins(original: &Dataset, config: &SynthesisConfig) -> Result<Dataset, SynthesisError> {
    config.check(Method::FromMargins)?;
    if original.is_empty() {
        return Err(SynthesisError::EmptyOriginal);
    }
    let transformed = transform::apply_transform_pipeline(original, &config.transforms)?;
    let columns = transformed
        .columns()
        .iter()
        .enumerate()
        .map(|(index, column)| {
            let mut rng = column_rng(config.seed, index);
            let cells = MarginalDistribution::of(column).sample(&mut rng, config.n_synth);
            Column::new(column.name.clone(), cells)
        })
        .collect();
    let sampled = Dataset::new(columns)?;
    let mut restored = transform::invert_transform_pipeline(&sampled, &config.transforms)?;
    restored.reorder(&original.column_names());
    Ok(restored.with_affix(&config.affix))
}

/// Dispatches on `config.method`.
pub fn synthesize(
    schema: &TableSchema,
    original: Option<&Dataset>,
    config: &SynthesisConfig,
) -> Result<Dataset, SynthesisError> {
    match (config.method, original) {
        (Method::FromMetadata, _) => synth_from_metadata(schema, config),
        (Method::FromMargins, Some(original)) => synth_from_margins(original, config),
        (Method::FromMargins, None) => Err(SynthesisError::EmptyOriginal),
    }
}
