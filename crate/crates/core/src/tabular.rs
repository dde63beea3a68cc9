//! Column-oriented tables: loading, kind inference and the preprocessing tools.
//!
//! Tables are immutable values. Every operation here returns a new [`Table`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats;

/// Fraction of non-missing cells that must parse as finite reals before a
/// column is considered numerical.
pub const NUMERIC_PARSE_THRESHOLD: f64 = 0.95;

/// Integer-valued columns with at most this many distinct values are treated
/// as coded categories (e.g. `sex ∈ {0, 1}`).
pub const CODED_CATEGORY_MAX_DISTINCT: usize = 10;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("file has no header row: {0}")]
    EmptyFile(PathBuf),
    #[error("duplicate column name in header: {0:?}")]
    DuplicateHeader(String),
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("unknown column: {0:?}")]
    UnknownColumn(String),
    #[error("expected 1 or 2 column names, got {0}")]
    ColumnArity(usize),
    #[error("column {column:?} has {found} cells, table has {expected} rows")]
    LengthMismatch {
        column: String,
        expected: usize,
        found: usize,
    },
    #[error("all rows were dropped while cleaning")]
    AllRowsDropped,
    #[error("column {0:?} is not numerical")]
    NotNumerical(String),
    #[error("aggregation target {0:?} is not numerical")]
    NonNumericalTarget(String),
    #[error("column {0:?} is constant")]
    ConstantColumn(String),
    #[error("column {0:?} has no non-missing values")]
    EmptyColumn(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = TabularError> = std::result::Result<T, E>;

/// A single table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Real(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Cell::Real(x) => Some(*x),
            _ => None,
        }
    }

    /// Text form used for category labels and serialization. Missing is `None`.
    pub fn label(&self) -> Option<String> {
        match self {
            Cell::Real(x) => Some(format_real(*x)),
            Cell::Text(s) => Some(s.clone()),
            Cell::Missing => None,
        }
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn format_real(x: f64) -> String {
    format!("{x}")
}

fn parse_finite(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    // Rust accepts "inf"/"nan" spellings; those are never finite anyway.
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Categorical,
    Numerical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnKind::Categorical => f.write_str("categorical"),
            ColumnKind::Numerical => f.write_str("numerical"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Cell>,
}

impl Column {
    pub fn categorical<I, S>(name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Categorical,
            values: values.into_iter().map(|v| Cell::Text(v.into())).collect(),
        }
    }

    pub fn numerical<I>(name: &str, values: I) -> Self
    where
        I: IntoIterator<Item = f64>,
    {
        Column {
            name: name.to_string(),
            kind: ColumnKind::Numerical,
            values: values
                .into_iter()
                .map(|v| if v.is_finite() { Cell::Real(v) } else { Cell::Missing })
                .collect(),
        }
    }

    /// Builds a column from raw text cells, inferring its kind. Cells of a
    /// numerical column that fail to parse become missing.
    pub fn from_raw(name: &str, raw: Vec<Cell>) -> Self {
        let kind = infer_kind(&raw);
        let values = match kind {
            ColumnKind::Categorical => raw
                .into_iter()
                .map(|c| match c {
                    Cell::Real(x) => Cell::Text(format_real(x)),
                    other => other,
                })
                .collect(),
            ColumnKind::Numerical => raw
                .into_iter()
                .map(|c| match c {
                    Cell::Text(s) => parse_finite(&s).map_or(Cell::Missing, Cell::Real),
                    other => other,
                })
                .collect(),
        };
        Column {
            name: name.to_string(),
            kind,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|c| c.is_missing()).count()
    }

    /// Per-row numeric value; `None` for missing or non-numeric cells.
    pub fn reals(&self) -> Vec<Option<f64>> {
        self.values.iter().map(Cell::as_real).collect()
    }

    /// Per-row category label; `None` for missing cells.
    pub fn labels(&self) -> Vec<Option<String>> {
        self.values.iter().map(Cell::label).collect()
    }

    /// Distinct non-missing labels in ascending order.
    pub fn distinct_labels(&self) -> BTreeSet<String> {
        self.values.iter().filter_map(Cell::label).collect()
    }

    fn take_rows(&self, keep: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            kind: self.kind,
            values: keep.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

/// Infers whether a list of cells is numerical or categorical.
///
/// Numerical iff at least 95% of the non-missing cells parse as finite reals
/// and the parsed values either have more than 10 distinct values or include
/// a non-integer. Empty input is categorical.
pub fn infer_kind(values: &[Cell]) -> ColumnKind {
    let mut present = 0usize;
    let mut parsed = Vec::new();
    for cell in values {
        match cell {
            Cell::Missing => {}
            Cell::Real(x) => {
                present += 1;
                parsed.push(*x);
            }
            Cell::Text(s) => {
                present += 1;
                if let Some(x) = parse_finite(s) {
                    parsed.push(x);
                }
            }
        }
    }
    if present == 0 || (parsed.len() as f64) < NUMERIC_PARSE_THRESHOLD * present as f64 {
        return ColumnKind::Categorical;
    }
    let any_fractional = parsed.iter().any(|x| x.fract() != 0.0);
    let distinct: BTreeSet<u64> = parsed.iter().map(|x| x.to_bits()).collect();
    if any_fractional || distinct.len() > CODED_CATEGORY_MAX_DISTINCT {
        ColumnKind::Numerical
    } else {
        ColumnKind::Categorical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    columns: Vec<Column>,
    row_count: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = BTreeSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TabularError::DuplicateHeader(c.name.clone()));
            }
            if c.len() != row_count {
                return Err(TabularError::LengthMismatch {
                    column: c.name.clone(),
                    expected: row_count,
                    found: c.len(),
                });
            }
        }
        Ok(Table {
            name: name.into(),
            columns,
            row_count,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| TabularError::UnknownColumn(name.to_string()))
    }

    fn take_rows(&self, keep: &[usize]) -> Table {
        Table {
            name: self.name.clone(),
            columns: self.columns.iter().map(|c| c.take_rows(keep)).collect(),
            row_count: keep.len(),
            metadata: self.metadata.clone(),
        }
    }

    fn replace_column(&self, column: Column) -> Table {
        let mut out = self.clone();
        if let Some(slot) = out.columns.iter_mut().find(|c| c.name == column.name) {
            *slot = column;
        }
        out
    }

    /// Serializes to delimiter-separated text with a header row.
    pub fn to_delimited(&self, delimiter: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in 0..self.row_count {
            w.write_record(self.columns.iter().map(|c| c.values[row].label().unwrap_or_default()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }

    pub fn write_delimited(&self, path: &Path, delimiter: u8) -> Result<()> {
        std::fs::write(path, self.to_delimited(delimiter))?;
        Ok(())
    }
}

/// Options for reading delimiter-separated files.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    pub na_tokens: BTreeSet<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            na_tokens: default_na_tokens(),
        }
    }
}

pub fn default_na_tokens() -> BTreeSet<String> {
    ["", "NA", "N/A", "?", "null"].into_iter().map(String::from).collect()
}

fn open_reader(path: &Path, opts: &LoadOptions) -> Result<csv::Reader<std::fs::File>> {
    if !path.exists() {
        return Err(TabularError::FileNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(e: csv::Error, row: usize) -> TabularError {
    let (row, column) = match e.position() {
        Some(p) => (p.record() as usize, 0),
        None => (row, 0),
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => TabularError::Io(io),
        csv::ErrorKind::Utf8 { pos, err } => TabularError::Parse {
            row: pos.map_or(row, |p| p.record() as usize),
            column: err.field() + 1,
            message: err.to_string(),
        },
        other => TabularError::Parse {
            row,
            column,
            message: format!("{other:?}"),
        },
    }
}

fn read_header(records: &mut csv::StringRecordsIter<'_, std::fs::File>, path: &Path) -> Result<Vec<String>> {
    let header = match records.next() {
        None => return Err(TabularError::EmptyFile(path.to_path_buf())),
        Some(rec) => rec.map_err(|e| csv_error(e, 0))?,
    };
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    if names.iter().all(String::is_empty) {
        return Err(TabularError::EmptyFile(path.to_path_buf()));
    }
    let mut seen = BTreeSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(TabularError::DuplicateHeader(n.clone()));
        }
    }
    Ok(names)
}

/// Feature names from the header row, in file order.
pub fn list_features(path: &Path, opts: &LoadOptions) -> Result<Vec<String>> {
    let mut reader = open_reader(path, opts)?;
    let mut records = reader.records();
    read_header(&mut records, path)
}

/// Loads a delimiter-separated file with a mandatory header row.
pub fn load_table(path: &Path, opts: &LoadOptions) -> Result<Table> {
    let mut reader = open_reader(path, opts)?;
    let mut records = reader.records();
    let names = read_header(&mut records, path)?;
    let mut raw: Vec<Vec<Cell>> = vec![Vec::new(); names.len()];
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| csv_error(e, row))?;
        // A blank trailing line is reported by csv as a single empty field.
        if rec.len() == 1 && rec.get(0).is_some_and(str::is_empty) && names.len() > 1 {
            continue;
        }
        if rec.len() != names.len() {
            return Err(TabularError::RaggedRow {
                row,
                expected: names.len(),
                found: rec.len(),
            });
        }
        for (col, field) in rec.iter().enumerate() {
            let t = field.trim();
            raw[col].push(if opts.na_tokens.contains(t) {
                Cell::Missing
            } else {
                Cell::Text(t.to_string())
            });
        }
    }
    let columns = names
        .iter()
        .zip(raw)
        .map(|(n, cells)| Column::from_raw(n, cells))
        .collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".to_string());
    Table::new(name, columns)
}

/// Sub-table holding the named columns (one or two), in the requested order.
pub fn extract_columns(table: &Table, names: &[&str]) -> Result<Table> {
    if names.is_empty() || names.len() > 2 {
        return Err(TabularError::ColumnArity(names.len()));
    }
    let columns = names
        .iter()
        .map(|n| table.column(n).cloned())
        .collect::<Result<Vec<_>>>()?;
    let mut out = Table::new(table.name.clone(), columns)?;
    out.metadata = table.metadata.clone();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningMode {
    DropRow,
    FillMode,
    FillMedian,
}

#[derive(Debug, Clone)]
pub struct CleaningPolicy {
    pub mode: CleaningMode,
    pub invalid_tokens: BTreeSet<String>,
}

impl CleaningPolicy {
    pub fn new(mode: CleaningMode) -> Self {
        CleaningPolicy {
            mode,
            invalid_tokens: default_na_tokens(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cleaned {
    pub table: Table,
    pub rows_dropped: usize,
    pub cells_filled: usize,
}

impl Cleaned {
    /// Cells removed or rewritten by the cleaning pass.
    pub fn cells_changed(&self, cleaned_columns: usize) -> usize {
        self.rows_dropped * cleaned_columns + self.cells_filled
    }
}

fn is_invalid(cell: &Cell, tokens: &BTreeSet<String>) -> bool {
    match cell {
        Cell::Missing => true,
        Cell::Text(s) => tokens.contains(s.trim()),
        Cell::Real(x) => !x.is_finite(),
    }
}

/// Cleans missing or invalid cells in `columns` according to `policy`.
pub fn clean_missing(table: &Table, columns: &[&str], policy: &CleaningPolicy) -> Result<Cleaned> {
    for name in columns {
        table.column(name)?;
    }
    match policy.mode {
        CleaningMode::DropRow => {
            let targets: Vec<&Column> = columns.iter().map(|n| table.column(n)).collect::<Result<_>>()?;
            let keep: Vec<usize> = (0..table.row_count())
                .filter(|&r| {
                    targets
                        .iter()
                        .all(|c| !is_invalid(&c.values[r], &policy.invalid_tokens))
                })
                .collect();
            if keep.is_empty() && table.row_count() > 0 {
                return Err(TabularError::AllRowsDropped);
            }
            Ok(Cleaned {
                rows_dropped: table.row_count() - keep.len(),
                table: table.take_rows(&keep),
                cells_filled: 0,
            })
        }
        CleaningMode::FillMode | CleaningMode::FillMedian => {
            let mut out = table.clone();
            let mut filled = 0;
            for name in columns {
                let col = table.column(name)?;
                let fill = match policy.mode {
                    CleaningMode::FillMedian => {
                        if col.kind != ColumnKind::Numerical {
                            return Err(TabularError::NotNumerical(col.name.clone()));
                        }
                        let xs: Vec<f64> = col.reals().into_iter().flatten().collect();
                        if xs.is_empty() {
                            return Err(TabularError::EmptyColumn(col.name.clone()));
                        }
                        Cell::Real(stats::median(&xs))
                    }
                    _ => mode_cell(col, &policy.invalid_tokens)
                        .ok_or_else(|| TabularError::EmptyColumn(col.name.clone()))?,
                };
                let mut new_col = col.clone();
                for cell in &mut new_col.values {
                    if is_invalid(cell, &policy.invalid_tokens) {
                        *cell = fill.clone();
                        filled += 1;
                    }
                }
                out = out.replace_column(new_col);
            }
            Ok(Cleaned {
                table: out,
                rows_dropped: 0,
                cells_filled: filled,
            })
        }
    }
}

/// Most frequent valid cell; ties resolve to the smallest value.
fn mode_cell(col: &Column, tokens: &BTreeSet<String>) -> Option<Cell> {
    match col.kind {
        ColumnKind::Numerical => {
            let mut counts: BTreeMap<OrderedReal, usize> = BTreeMap::new();
            for x in col.reals().into_iter().flatten() {
                *counts.entry(OrderedReal(x)).or_default() += 1;
            }
            let best = counts.values().copied().max()?;
            counts
                .into_iter()
                .find(|(_, c)| *c == best)
                .map(|(k, _)| Cell::Real(k.0))
        }
        ColumnKind::Categorical => {
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for cell in &col.values {
                if !is_invalid(cell, tokens) {
                    if let Some(l) = cell.label() {
                        *counts.entry(l).or_default() += 1;
                    }
                }
            }
            let best = counts.values().copied().max()?;
            counts.into_iter().find(|(_, c)| *c == best).map(|(k, _)| Cell::Text(k))
        }
    }
}

/// Total order over finite reals, used for deterministic grouping.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedReal(f64);

impl Eq for OrderedReal {}

impl PartialOrd for OrderedReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedReal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    Normalize,
    Standardize,
}

/// Min-max normalization or z-scoring (population sd) of one numerical column.
pub fn normalize_or_standardize(table: &Table, column: &str, mode: ScaleMode) -> Result<Table> {
    let col = table.column(column)?;
    if col.kind != ColumnKind::Numerical {
        return Err(TabularError::NotNumerical(column.to_string()));
    }
    let xs: Vec<f64> = col.reals().into_iter().flatten().collect();
    if xs.is_empty() {
        return Err(TabularError::EmptyColumn(column.to_string()));
    }
    let transform: Box<dyn Fn(f64) -> f64> = match mode {
        ScaleMode::Normalize => {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi <= lo {
                return Err(TabularError::ConstantColumn(column.to_string()));
            }
            Box::new(move |x| (x - lo) / (hi - lo))
        }
        ScaleMode::Standardize => {
            let m = stats::mean(&xs);
            let sd = stats::population_sd(&xs);
            if sd <= 0.0 {
                return Err(TabularError::ConstantColumn(column.to_string()));
            }
            Box::new(move |x| (x - m) / sd)
        }
    };
    let mut new_col = col.clone();
    for cell in &mut new_col.values {
        if let Cell::Real(x) = cell {
            *x = transform(*x);
        }
    }
    Ok(table.replace_column(new_col))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Mean,
    Count,
    Sum,
    Median,
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregate::Mean => "mean",
            Aggregate::Count => "count",
            Aggregate::Sum => "sum",
            Aggregate::Median => "median",
        })
    }
}

/// One output row per group of `by`, in ascending group order.
pub fn group_and_aggregate(table: &Table, by: &str, target: &str, agg: Aggregate) -> Result<Table> {
    let key_col = table.column(by)?;
    let target_col = table.column(target)?;
    if agg != Aggregate::Count && target_col.kind != ColumnKind::Numerical {
        return Err(TabularError::NonNumericalTarget(target.to_string()));
    }

    // Numerical keys sort numerically, text keys lexicographically.
    let mut groups: BTreeMap<GroupKey, (usize, Vec<f64>)> = BTreeMap::new();
    for (key, value) in key_col.values.iter().zip(&target_col.values) {
        let key = match key {
            Cell::Missing => continue,
            Cell::Real(x) => GroupKey::Real(OrderedReal(*x)),
            Cell::Text(s) => GroupKey::Text(s.clone()),
        };
        let entry = groups.entry(key).or_default();
        entry.0 += 1;
        if let Some(v) = value.as_real() {
            entry.1.push(v);
        }
    }

    let mut keys = Vec::with_capacity(groups.len());
    let mut out = Vec::with_capacity(groups.len());
    for (key, (size, xs)) in groups {
        keys.push(key.label());
        out.push(match agg {
            Aggregate::Count => Some(size as f64),
            _ if xs.is_empty() => None,
            Aggregate::Mean => Some(stats::mean(&xs)),
            Aggregate::Sum => Some(xs.iter().sum()),
            Aggregate::Median => Some(stats::median(&xs)),
        });
    }
    let value_col = Column {
        name: format!("{agg}_{target}"),
        kind: ColumnKind::Numerical,
        values: out.into_iter().map(|v| v.map_or(Cell::Missing, Cell::Real)).collect(),
    };
    let mut key_out = Column::categorical(by, keys);
    key_out.kind = ColumnKind::Categorical;
    Table::new(format!("{}_by_{by}", table.name), vec![key_out, value_col])
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Real(OrderedReal),
    Text(String),
}

impl GroupKey {
    fn label(&self) -> String {
        match self {
            GroupKey::Real(x) => format_real(x.0),
            GroupKey::Text(s) => s.clone(),
        }
    }
}

/// Category counts of a column in ascending label order.
pub fn category_counts(col: &Column) -> Vec<(String, u64)> {
    let mut counts: HashMap<String, u64> = HashMap::new();
    for l in col.values.iter().filter_map(Cell::label) {
        *counts.entry(l).or_default() += 1;
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn texts(vals: &[&str]) -> Vec<Cell> {
        vals.iter().map(|s| Cell::Text(s.to_string())).collect()
    }

    #[test]
    fn header_echo() {
        let f = write_tmp("a,b,c\n1,2,3\n");
        let names = list_features(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn mimic_header() {
        let header = "admission_type,hospital_expire_flag,admission_location,discharge_location,\
patient_insurance,patient_lang,patient_marital,patient_race,patient_gender,patient_age\n";
        let f = write_tmp(header);
        let names = list_features(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(names.len(), 10);
        assert_eq!(names.first().unwrap(), "admission_type");
        assert_eq!(names.last().unwrap(), "patient_age");
    }

    #[test]
    fn duplicate_header_rejected() {
        let f = write_tmp("a,a\n1,2\n");
        assert!(matches!(
            list_features(f.path(), &LoadOptions::default()),
            Err(TabularError::DuplicateHeader(n)) if n == "a"
        ));
    }

    #[test]
    fn missing_and_empty_files() {
        let err = list_features(Path::new("/nonexistent/x.csv"), &LoadOptions::default());
        assert!(matches!(err, Err(TabularError::FileNotFound(_))));
        let f = write_tmp("");
        assert!(matches!(
            load_table(f.path(), &LoadOptions::default()),
            Err(TabularError::EmptyFile(_))
        ));
    }

    #[test]
    fn ragged_row_reports_position() {
        let f = write_tmp("a,b\n1,2\n3\n");
        match load_table(f.path(), &LoadOptions::default()) {
            Err(TabularError::RaggedRow { row, expected, found }) => {
                assert_eq!((row, expected, found), (2, 2, 1));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn header_only_file() {
        let f = write_tmp("x,y\n");
        let t = load_table(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(t.row_count(), 0);
        assert!(t.columns().iter().all(|c| c.kind == ColumnKind::Categorical));
    }

    #[test]
    fn custom_delimiter_and_tokens() {
        let f = write_tmp("a;b\nx;-\ny;1\n");
        let opts = LoadOptions {
            delimiter: b';',
            na_tokens: ["-"].into_iter().map(String::from).collect(),
        };
        let t = load_table(f.path(), &opts).unwrap();
        assert_eq!(t.column("b").unwrap().missing_count(), 1);
    }

    #[test]
    fn kind_inference_rules() {
        assert_eq!(infer_kind(&texts(&["1", "2", "x"])), ColumnKind::Categorical);
        assert_eq!(infer_kind(&texts(&["1.5", "2.5"])), ColumnKind::Numerical);
        assert_eq!(infer_kind(&[]), ColumnKind::Categorical);

        let binary: Vec<Cell> = (0..200).map(|i| Cell::Text((i % 2).to_string())).collect();
        assert_eq!(infer_kind(&binary), ColumnKind::Categorical);

        let reals: Vec<Cell> = (0..100).map(|i| Cell::Text(format!("{}", i as f64 * 0.37))).collect();
        assert_eq!(infer_kind(&reals), ColumnKind::Numerical);

        // 11 distinct integers crosses the coded-category limit.
        let ints: Vec<Cell> = (0..11).map(|i| Cell::Text(i.to_string())).collect();
        assert_eq!(infer_kind(&ints), ColumnKind::Numerical);
    }

    #[test]
    fn junk_cells_become_missing() {
        let mut raw: Vec<Cell> = (0..96).map(|i| Cell::Text(format!("{}.5", i))).collect();
        raw.extend(texts(&["junk", "x", "??", "n/a"]));
        let col = Column::from_raw("v", raw);
        assert_eq!(col.kind, ColumnKind::Numerical);
        assert_eq!(col.missing_count(), 4);
    }

    fn sample() -> Table {
        Table::new(
            "t",
            vec![
                Column::categorical("g", ["a", "a", "b", "b"]),
                Column {
                    name: "x".into(),
                    kind: ColumnKind::Numerical,
                    values: vec![Cell::Real(1.0), Cell::Real(2.0), Cell::Missing, Cell::Real(4.0)],
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn extract_and_unknown() {
        let t = sample();
        let one = extract_columns(&t, &["x"]).unwrap();
        assert_eq!(one.columns().len(), 1);
        assert_eq!(one.row_count(), 4);
        assert!(matches!(
            extract_columns(&t, &["nope"]),
            Err(TabularError::UnknownColumn(_))
        ));
        assert!(matches!(
            extract_columns(&t, &["g", "x", "g"]),
            Err(TabularError::ColumnArity(3))
        ));
    }

    #[test]
    fn fill_median_and_drop() {
        let t = sample();
        let c = clean_missing(&t, &["x"], &CleaningPolicy::new(CleaningMode::FillMedian)).unwrap();
        assert_eq!(
            c.table.column("x").unwrap().reals(),
            vec![Some(1.0), Some(2.0), Some(2.0), Some(4.0)]
        );
        assert_eq!(c.cells_filled, 1);

        let d = clean_missing(&t, &["x"], &CleaningPolicy::new(CleaningMode::DropRow)).unwrap();
        assert_eq!(d.table.row_count(), 3);
        assert_eq!(d.rows_dropped, 1);

        let none = clean_missing(&t, &["g"], &CleaningPolicy::new(CleaningMode::DropRow)).unwrap();
        assert_eq!(none.table, t);
        assert_eq!(none.cells_changed(1), 0);

        let err = clean_missing(&t, &["g"], &CleaningPolicy::new(CleaningMode::FillMedian));
        assert!(matches!(err, Err(TabularError::NotNumerical(_))));
    }

    #[test]
    fn all_missing_drop_fails() {
        let t = Table::new(
            "t",
            vec![Column {
                name: "x".into(),
                kind: ColumnKind::Numerical,
                values: vec![Cell::Missing; 3],
            }],
        )
        .unwrap();
        assert!(matches!(
            clean_missing(&t, &["x"], &CleaningPolicy::new(CleaningMode::DropRow)),
            Err(TabularError::AllRowsDropped)
        ));
    }

    #[test]
    fn fill_mode_categorical() {
        let t = Table::new(
            "t",
            vec![Column {
                name: "c".into(),
                kind: ColumnKind::Categorical,
                values: vec![
                    Cell::Text("b".into()),
                    Cell::Text("?".into()),
                    Cell::Text("a".into()),
                    Cell::Text("b".into()),
                ],
            }],
        )
        .unwrap();
        let c = clean_missing(&t, &["c"], &CleaningPolicy::new(CleaningMode::FillMode)).unwrap();
        assert_eq!(c.table.column("c").unwrap().values[1], Cell::Text("b".into()));
    }

    #[test]
    fn scaling() {
        let t = Table::new("t", vec![Column::numerical("x", [0.0, 5.0, 10.0])]).unwrap();
        let n = normalize_or_standardize(&t, "x", ScaleMode::Normalize).unwrap();
        assert_eq!(n.column("x").unwrap().reals(), vec![Some(0.0), Some(0.5), Some(1.0)]);

        let t = Table::new("t", vec![Column::numerical("x", [2.0, 4.0, 6.0])]).unwrap();
        let s = normalize_or_standardize(&t, "x", ScaleMode::Standardize).unwrap();
        let v: Vec<f64> = s.column("x").unwrap().reals().into_iter().flatten().collect();
        let expected = 2.0 / (8.0f64 / 3.0).sqrt();
        assert!((v[0] + expected).abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);

        let c = Table::new("t", vec![Column::numerical("x", [3.0, 3.0])]).unwrap();
        assert!(matches!(
            normalize_or_standardize(&c, "x", ScaleMode::Normalize),
            Err(TabularError::ConstantColumn(_))
        ));
        assert!(matches!(
            normalize_or_standardize(&c, "x", ScaleMode::Standardize),
            Err(TabularError::ConstantColumn(_))
        ));
    }

    #[test]
    fn grouping() {
        let t = Table::new(
            "t",
            vec![
                Column::categorical("g", ["b", "a", "a"]),
                Column::numerical("y", [5.0, 1.0, 3.0]),
            ],
        )
        .unwrap();
        let m = group_and_aggregate(&t, "g", "y", Aggregate::Mean).unwrap();
        assert_eq!(
            m.column("g").unwrap().labels(),
            vec![Some("a".into()), Some("b".into())]
        );
        assert_eq!(m.column("mean_y").unwrap().reals(), vec![Some(2.0), Some(5.0)]);

        let c = group_and_aggregate(&t, "y", "g", Aggregate::Count).unwrap();
        assert_eq!(c.row_count(), 3);
        assert!(matches!(
            group_and_aggregate(&t, "y", "g", Aggregate::Sum),
            Err(TabularError::NonNumericalTarget(_))
        ));

        let one = Table::new(
            "t",
            vec![Column::categorical("g", ["a", "a"]), Column::numerical("y", [1.0, 2.0])],
        )
        .unwrap();
        assert_eq!(
            group_and_aggregate(&one, "g", "y", Aggregate::Median)
                .unwrap()
                .row_count(),
            1
        );
    }

    #[test]
    fn numeric_keys_sort_numerically() {
        let t = Table::new(
            "t",
            vec![
                Column::numerical("k", [10.0, 9.0, 100.0]),
                Column::numerical("y", [1.0, 1.0, 1.0]),
            ],
        )
        .unwrap();
        let c = group_and_aggregate(&t, "k", "y", Aggregate::Count).unwrap();
        assert_eq!(
            c.column("k").unwrap().labels(),
            vec![Some("9".into()), Some("10".into()), Some("100".into())]
        );
    }
}
