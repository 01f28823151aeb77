//! In-memory columnar tables of typed cells, plus CSV ingestion and output.
//!
//! CSV dialect: comma separated, first row is the header, RFC-4180 quoting,
//! UTF-8. An empty field (or the configured missing token) is a missing cell.
//! Dates are written as `YYYY-MM-DD` and held internally as days since
//! 1970-01-01.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::affix::AffixRule;
use crate::numeric;
use crate::schema::{ColumnKind, TableSchema};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("column '{column}' has {found} cells, expected {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate column name '{0}'")]
    DuplicateColumn(String),
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("CSV row {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: u64,
        expected: u64,
        found: u64,
    },
    #[error("CSV parse error at line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("dataset has no columns or no rows")]
    EmptyDataset,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Calendar granularity of a date column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Year,
    Month,
    Day,
}

impl Granularity {
    pub fn finer(self, other: Granularity) -> Granularity {
        self.max(other)
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Year => "year",
            Granularity::Month => "month",
            Granularity::Day => "day",
        })
    }
}

const EPOCH_DAYS_FROM_CE: i64 = 719_163;

/// A calendar date as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i64);

impl Day {
    pub fn from_date(date: NaiveDate) -> Day {
        Day(i64::from(date.num_days_from_ce()) - EPOCH_DAYS_FROM_CE)
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Day> {
        NaiveDate::from_ymd_opt(year, month, day).map(Day::from_date)
    }

    pub fn to_date(self) -> NaiveDate {
        let ce = i32::try_from(self.0 + EPOCH_DAYS_FROM_CE).unwrap_or(i32::MAX);
        NaiveDate::from_num_days_from_ce_opt(ce).unwrap_or(NaiveDate::MAX)
    }

    pub fn parse(text: &str) -> Option<Day> {
        let bytes = text.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return None;
        }
        NaiveDate::parse_from_str(text, "%Y-%m-%d")
            .ok()
            .map(Day::from_date)
    }

    /// Coarsest granularity at which this date is representable exactly.
    pub fn granularity(self) -> Granularity {
        let date = self.to_date();
        if date.day() != 1 {
            Granularity::Day
        } else if date.month() != 1 {
            Granularity::Month
        } else {
            Granularity::Year
        }
    }

    /// Truncates to the start of the month or year.
    pub fn truncate(self, granularity: Granularity) -> Day {
        let date = self.to_date();
        match granularity {
            Granularity::Day => self,
            Granularity::Month => Day::from_ymd(date.year(), date.month(), 1).unwrap_or(self),
            Granularity::Year => Day::from_ymd(date.year(), 1, 1).unwrap_or(self),
        }
    }

    /// Index of the month since year 0, used for month-grid sampling.
    pub fn month_index(self) -> i64 {
        let date = self.to_date();
        i64::from(date.year()) * 12 + i64::from(date.month0())
    }

    pub fn from_month_index(index: i64) -> Option<Day> {
        let year = i32::try_from(index.div_euclid(12)).ok()?;
        let month = (index.rem_euclid(12) + 1) as u32;
        Day::from_ymd(year, month, 1)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_date().format("%Y-%m-%d"))
    }
}

/// A numeric value together with the number of decimals it is written with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Number {
    pub value: f64,
    pub decimals: u32,
}

impl Number {
    pub fn new(value: f64, decimals: u32) -> Number {
        Number { value, decimals }
    }

    /// Uses the shortest decimal rendering of `value` to set `decimals`.
    pub fn from_f64(value: f64) -> Number {
        Number {
            value,
            decimals: numeric::decimals_of(value),
        }
    }

    pub fn parse(text: &str) -> Option<Number> {
        let value = numeric::parse_plain_number(text)?;
        Some(Number {
            value,
            decimals: numeric::text_decimals(text),
        })
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.*}", self.decimals as usize, self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Label(String),
    Number(Number),
    Date(Day),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Label,
    Number,
    Date,
}

impl Cell {
    pub fn label(text: impl Into<String>) -> Cell {
        Cell::Label(text.into())
    }

    pub fn number(value: f64) -> Cell {
        Cell::Number(Number::from_f64(value))
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn kind(&self) -> Option<CellKind> {
        match self {
            Cell::Missing => None,
            Cell::Label(_) => Some(CellKind::Label),
            Cell::Number(_) => Some(CellKind::Number),
            Cell::Date(_) => Some(CellKind::Date),
        }
    }

    /// Numeric view of numbers and dates (dates as day counts).
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(n) => Some(n.value),
            Cell::Date(d) => Some(d.0 as f64),
            _ => None,
        }
    }

    /// Canonical rendering used wherever cells are compared as keys. Equal
    /// values render equally regardless of trailing zeros, and missing is a
    /// value of its own that no label can collide with.
    pub fn canonical(&self) -> String {
        match self {
            Cell::Missing => "\u{0}NA".to_string(),
            Cell::Label(s) => format!("L:{s}"),
            Cell::Number(n) => {
                let v = if n.value == 0.0 { 0.0 } else { n.value };
                format!("N:{v}")
            }
            Cell::Date(d) => format!("D:{d}"),
        }
    }

    /// Guesses the type of a raw CSV field.
    pub fn detect(text: &str) -> Cell {
        if let Some(n) = Number::parse(text) {
            Cell::Number(n)
        } else if let Some(d) = Day::parse(text) {
            Cell::Date(d)
        } else {
            Cell::Label(text.to_string())
        }
    }

    fn typed(text: &str, kind: ColumnKind) -> Cell {
        match kind {
            ColumnKind::Categorical => Cell::Label(text.to_string()),
            ColumnKind::Numeric => Number::parse(text)
                .map(Cell::Number)
                .unwrap_or_else(|| Cell::Label(text.to_string())),
            ColumnKind::Date => Day::parse(text)
                .map(Cell::Date)
                .unwrap_or_else(|| Cell::Label(text.to_string())),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Missing => Ok(()),
            Cell::Label(s) => f.write_str(s),
            Cell::Number(n) => n.fmt(f),
            Cell::Date(d) => d.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub cells: Vec<Cell>,
}

impl Column {
    pub fn new(name: impl Into<String>, cells: Vec<Cell>) -> Column {
        Column {
            name: name.into(),
            cells,
        }
    }

    pub fn missing_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_missing()).count()
    }

    pub fn has_missing(&self) -> bool {
        self.cells.iter().any(Cell::is_missing)
    }
}

/// A rectangular table stored column by column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Dataset, DatasetError> {
        let mut seen = HashSet::new();
        let expected = columns.first().map_or(0, |c| c.cells.len());
        for column in &columns {
            if !seen.insert(column.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(column.name.clone()));
            }
            if column.cells.len() != expected {
                return Err(DatasetError::LengthMismatch {
                    column: column.name.clone(),
                    expected,
                    found: column.cells.len(),
                });
            }
        }
        Ok(Dataset { columns })
    }

    /// Builds a table from row-major cells. Used heavily by tests.
    pub fn from_rows(headers: &[&str], rows: Vec<Vec<Cell>>) -> Result<Dataset, DatasetError> {
        let mut columns: Vec<Column> = headers
            .iter()
            .map(|h| Column::new(*h, Vec::with_capacity(rows.len())))
            .collect();
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != columns.len() {
                return Err(DatasetError::RaggedRow {
                    line: i as u64 + 2,
                    expected: columns.len() as u64,
                    found: row.len() as u64,
                });
            }
            for (column, cell) in columns.iter_mut().zip(row) {
                column.cells.push(cell);
            }
        }
        Dataset::new(columns)
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.cells.len())
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() || self.n_rows() == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_mut(&mut self, name: &str) -> Option<&mut Column> {
        self.columns.iter_mut().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&Column, DatasetError> {
        self.column(name)
            .ok_or_else(|| DatasetError::UnknownColumn(name.to_string()))
    }

    /// Looks a column up by its bare name or its affixed name.
    pub fn column_affixed(&self, name: &str, affix: &AffixRule) -> Option<&Column> {
        self.column(name).or_else(|| self.column(&affix.apply(name)))
    }

    pub fn row(&self, index: usize) -> Vec<&Cell> {
        self.columns.iter().map(|c| &c.cells[index]).collect()
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column::new(c.name.clone(), rows.iter().map(|&r| c.cells[r].clone()).collect()))
                .collect(),
        }
    }

    /// Drops the listed rows; out-of-range indices are ignored.
    pub fn without_rows(&self, rows: &[usize]) -> Dataset {
        let drop: HashSet<usize> = rows.iter().copied().collect();
        let keep: Vec<usize> = (0..self.n_rows()).filter(|r| !drop.contains(r)).collect();
        self.select_rows(&keep)
    }

    pub fn push_column(&mut self, column: Column) -> Result<(), DatasetError> {
        let mut columns = std::mem::take(&mut self.columns);
        columns.push(column);
        *self = Dataset::new(columns)?;
        Ok(())
    }

    pub fn insert_column(&mut self, index: usize, column: Column) -> Result<(), DatasetError> {
        let mut columns = std::mem::take(&mut self.columns);
        columns.insert(index.min(columns.len()), column);
        *self = Dataset::new(columns)?;
        Ok(())
    }

    pub fn remove_column(&mut self, name: &str) -> Option<Column> {
        let idx = self.column_index(name)?;
        Some(self.columns.remove(idx))
    }

    /// Reorders columns to follow `order`; names not listed keep their
    /// relative order at the end.
    pub fn reorder(&mut self, order: &[String]) {
        let mut columns = std::mem::take(&mut self.columns);
        let mut ordered = Vec::with_capacity(columns.len());
        for name in order {
            if let Some(pos) = columns.iter().position(|c| &c.name == name) {
                ordered.push(columns.remove(pos));
            }
        }
        ordered.extend(columns);
        self.columns = ordered;
    }

    pub fn with_affix(mut self, affix: &AffixRule) -> Dataset {
        for c in &mut self.columns {
            c.name = affix.apply(&c.name);
        }
        self
    }

    /// Strips the affix from every column carrying it.
    pub fn without_affix(mut self, affix: &AffixRule) -> Dataset {
        for c in &mut self.columns {
            if let Some(bare) = affix.strip(&c.name) {
                c.name = bare.to_string();
            }
        }
        self
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut out = csv::WriterBuilder::new().from_writer(writer);
        let map_err = |e: csv::Error| DatasetError::Csv {
            line: 0,
            message: e.to_string(),
        };
        out.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .map_err(map_err)?;
        for r in 0..self.n_rows() {
            out.write_record(self.columns.iter().map(|c| c.cells[r].to_string()))
                .map_err(map_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, DatasetError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Options controlling CSV ingestion.
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Extra sentinel string treated as missing, e.g. `NA`.
    pub missing_token: Option<String>,
}

/// Reads a CSV table. When `schema` is given, columns it names are typed
/// by the declared kind; every other column is typed cell by cell.
pub fn read_csv<R: Read>(
    reader: R,
    options: &CsvOptions,
    schema: Option<&TableSchema>,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::EmptyDataset);
    }
    let kinds: Vec<Option<ColumnKind>> = headers
        .iter()
        .map(|h| schema.and_then(|s| s.column(h)).map(|c| c.kind))
        .collect();
    let mut columns: Vec<Column> = headers.iter().map(|h| Column::new(h.clone(), Vec::new())).collect();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        for ((field, column), kind) in record.iter().zip(columns.iter_mut()).zip(&kinds) {
            let is_missing =
                field.is_empty() || options.missing_token.as_deref() == Some(field);
            let cell = if is_missing {
                Cell::Missing
            } else {
                match kind {
                    Some(k) => Cell::typed(field, *k),
                    None => Cell::detect(field),
                }
            };
            column.cells.push(cell);
        }
    }
    Dataset::new(columns)
}

pub fn read_csv_path(
    path: &Path,
    options: &CsvOptions,
    schema: Option<&TableSchema>,
) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(file), options, schema)
}

fn csv_error(err: csv::Error) -> DatasetError {
    let line = err.position().map_or(0, |p| p.line());
    match err.kind() {
        csv::ErrorKind::UnequalLengths {
            pos,
            expected_len,
            len,
        } => DatasetError::RaggedRow {
            line: pos.as_ref().map_or(line, |p| p.line()),
            expected: *expected_len,
            found: *len,
        },
        csv::ErrorKind::Io(_) => DatasetError::Csv {
            line,
            message: err.to_string(),
        },
        _ => DatasetError::Csv {
            line,
            message: err.to_string(),
        },
    }
}
