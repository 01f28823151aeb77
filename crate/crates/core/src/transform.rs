//! Reversible column transforms that let independent per-column synthesis
//! keep simple logical constraints.
//!
//! `DatePairToOriginPlusDuration` replaces an end date with a day count
//! after the origin date, so a synthetic end date can never precede its
//! origin. `TotalToComponents` drops a total column and recomputes it from
//! its components on the way back.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, Column, Dataset, DatasetError, Day, Number};
use crate::numeric;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("transform {transform}: column '{column}' not found")]
    MissingColumn { transform: String, column: String },
    #[error("transform {transform}: column '{column}' has a non-{expected} cell at row {row}")]
    WrongKind {
        transform: String,
        column: String,
        expected: &'static str,
        row: usize,
    },
    #[error("transform {transform} precondition violated on {} original row(s): {rows:?}", rows.len())]
    TransformPreconditionViolated { transform: String, rows: Vec<usize> },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformSpec {
    DatePairToOriginPlusDuration {
        origin: String,
        end: String,
        /// Name of the derived day-count column.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_column: Option<String>,
        /// Inclusive duration bounds in days, used when synthesizing from
        /// metadata alone.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_range: Option<(i64, i64)>,
    },
    TotalToComponents {
        total: String,
        components: Vec<String>,
    },
}

impl TransformSpec {
    pub fn date_pair(origin: &str, end: &str) -> TransformSpec {
        TransformSpec::DatePairToOriginPlusDuration {
            origin: origin.to_string(),
            end: end.to_string(),
            duration_column: None,
            duration_range: None,
        }
    }

    pub fn total(total: &str, components: &[&str]) -> TransformSpec {
        TransformSpec::TotalToComponents {
            total: total.to_string(),
            components: components.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            TransformSpec::DatePairToOriginPlusDuration { origin, end, .. } => {
                format!("date_pair({origin} -> {end})")
            }
            TransformSpec::TotalToComponents { total, components } => {
                format!("total({total} = {})", components.join(" + "))
            }
        }
    }

    /// Name of the derived duration column for date-pair transforms.
    pub fn duration_name(&self) -> Option<String> {
        match self {
            TransformSpec::DatePairToOriginPlusDuration {
                origin,
                end,
                duration_column,
                ..
            } => Some(
                duration_column
                    .clone()
                    .unwrap_or_else(|| format!("{end}__days_after_{origin}")),
            ),
            TransformSpec::TotalToComponents { .. } => None,
        }
    }
}

fn column<'a>(data: &'a Dataset, spec: &TransformSpec, name: &str) -> Result<&'a Column, TransformError> {
    data.column(name).ok_or_else(|| TransformError::MissingColumn {
        transform: spec.label(),
        column: name.to_string(),
    })
}

fn dates(spec: &TransformSpec, column: &Column) -> Result<Vec<Option<Day>>, TransformError> {
    column
        .cells
        .iter()
        .enumerate()
        .map(|(row, cell)| match cell {
            Cell::Missing => Ok(None),
            Cell::Date(d) => Ok(Some(*d)),
            _ => Err(TransformError::WrongKind {
                transform: spec.label(),
                column: column.name.clone(),
                expected: "date",
                row,
            }),
        })
        .collect()
}

fn numbers(spec: &TransformSpec, column: &Column) -> Result<Vec<Option<Number>>, TransformError> {
    column
        .cells
        .iter()
        .enumerate()
        .map(|(row, cell)| match cell {
            Cell::Missing => Ok(None),
            Cell::Number(n) => Ok(Some(*n)),
            _ => Err(TransformError::WrongKind {
                transform: spec.label(),
                column: column.name.clone(),
                expected: "numeric",
                row,
            }),
        })
        .collect()
}

/// Sum of a row's components at the finest component precision; `None` if
/// any component is missing.
fn component_sum(parts: &[Option<Number>]) -> Option<Number> {
    let mut total = 0.0;
    let mut decimals = 0;
    for part in parts {
        let n = (*part)?;
        total += n.value;
        decimals = decimals.max(n.decimals);
    }
    Some(Number::new(numeric::round_decimal(total, decimals as i32), decimals))
}

fn apply_one(data: &Dataset, spec: &TransformSpec) -> Result<Dataset, TransformError> {
    match spec {
        TransformSpec::DatePairToOriginPlusDuration { origin, end, .. } => {
            let origins = dates(spec, column(data, spec, origin)?)?;
            let ends = dates(spec, column(data, spec, end)?)?;
            let bad: Vec<usize> = origins
                .iter()
                .zip(&ends)
                .enumerate()
                .filter_map(|(row, pair)| match pair {
                    (Some(a), Some(b)) if b < a => Some(row),
                    _ => None,
                })
                .collect();
            if !bad.is_empty() {
                return Err(TransformError::TransformPreconditionViolated {
                    transform: spec.label(),
                    rows: bad,
                });
            }
            let cells = origins
                .iter()
                .zip(&ends)
                .map(|pair| match pair {
                    (Some(a), Some(b)) => Cell::Number(Number::new((b.0 - a.0) as f64, 0)),
                    _ => Cell::Missing,
                })
                .collect();
            let position = data.column_index(end).expect("checked above");
            let mut out = data.clone();
            out.remove_column(end);
            let name = spec.duration_name().expect("date pair has a duration name");
            out.insert_column(position, Column::new(name, cells))?;
            Ok(out)
        }
        TransformSpec::TotalToComponents { total, components } => {
            let totals = numbers(spec, column(data, spec, total)?)?;
            let parts = components
                .iter()
                .map(|c| numbers(spec, column(data, spec, c)?))
                .collect::<Result<Vec<_>, _>>()?;
            let bad: Vec<usize> = (0..data.n_rows())
                .filter(|&row| {
                    let row_parts: Vec<Option<Number>> = parts.iter().map(|p| p[row]).collect();
                    match (totals[row], component_sum(&row_parts)) {
                        (Some(t), Some(sum)) => {
                            let tolerance = 0.5 * numeric::unit_for_places(t.decimals.max(sum.decimals));
                            (t.value - sum.value).abs() > tolerance
                        }
                        _ => false,
                    }
                })
                .collect();
            if !bad.is_empty() {
                return Err(TransformError::TransformPreconditionViolated {
                    transform: spec.label(),
                    rows: bad,
                });
            }
            let mut out = data.clone();
            out.remove_column(total);
            Ok(out)
        }
    }
}

fn invert_one(data: &Dataset, spec: &TransformSpec) -> Result<Dataset, TransformError> {
    match spec {
        TransformSpec::DatePairToOriginPlusDuration { origin, end, .. } => {
            let duration_name = spec.duration_name().expect("date pair has a duration name");
            let origins = dates(spec, column(data, spec, origin)?)?;
            let durations = numbers(spec, column(data, spec, &duration_name)?)?;
            let cells = origins
                .iter()
                .zip(&durations)
                .map(|pair| match pair {
                    (Some(a), Some(d)) => Cell::Date(Day(a.0 + d.value.round() as i64)),
                    _ => Cell::Missing,
                })
                .collect();
            let position = data.column_index(&duration_name).expect("checked above");
            let mut out = data.clone();
            out.remove_column(&duration_name);
            out.insert_column(position, Column::new(end.clone(), cells))?;
            Ok(out)
        }
        TransformSpec::TotalToComponents { total, .. } => {
            let cells = recomputed_total(data, spec)?;
            let mut out = data.clone();
            out.remove_column(total);
            out.push_column(Column::new(total.clone(), cells))?;
            Ok(out)
        }
    }
}

/// Row-wise sum of a total transform's components; missing where any
/// component is missing.
pub fn recomputed_total(data: &Dataset, spec: &TransformSpec) -> Result<Vec<Cell>, TransformError> {
    let TransformSpec::TotalToComponents { components, .. } = spec else {
        return Ok(Vec::new());
    };
    let parts = components
        .iter()
        .map(|c| numbers(spec, column(data, spec, c)?))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..data.n_rows())
        .map(|row| {
            let row_parts: Vec<Option<Number>> = parts.iter().map(|p| p[row]).collect();
            component_sum(&row_parts).map_or(Cell::Missing, Cell::Number)
        })
        .collect())
}

/// Applies `specs` in order, checking each transform's precondition on the
/// input rather than repairing violating rows.
pub fn apply_transform_pipeline(original: &Dataset, specs: &[TransformSpec]) -> Result<Dataset, TransformError> {
    let mut data = original.clone();
    for spec in specs {
        data = apply_one(&data, spec)?;
    }
    Ok(data)
}

/// Undoes `specs` in reverse order. Recomputed totals are appended as the
/// last column.
pub fn invert_transform_pipeline(synth: &Dataset, specs: &[TransformSpec]) -> Result<Dataset, TransformError> {
    let mut data = synth.clone();
    for spec in specs.iter().rev() {
        data = invert_one(&data, spec)?;
    }
    Ok(data)
}
