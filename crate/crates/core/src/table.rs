//! Dataset ingestion, schema inference, value ranges and train/test splits.
//!
//! Cells are kept as the exact lexemes read from disk. Typed views (numeric
//! values, ordinal codes) are derived on demand so that a table can be encoded
//! to text and parsed back without any reformatting drift.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separator between encoded entries; may not occur inside a cell.
pub const ENTRY_SEPARATOR: &str = ", ";
/// Qualifier between a descriptor and its value; may not occur inside a cell.
pub const QUALIFIER: &str = " is ";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("ingest error{}: {reason}", record.map(|r| format!(" at record {r}")).unwrap_or_default())]
    Ingest { record: Option<usize>, reason: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("split error: {0}")]
    Split(String),
}

impl TableError {
    fn ingest(record: usize, reason: impl Into<String>) -> Self {
        TableError::Ingest { record: Some(record), reason: reason.into() }
    }
}

/// Parses a lexeme as a finite decimal number.
pub fn parse_finite(lexeme: &str) -> Option<f64> {
    lexeme.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Checks a cell lexeme against the encoding grammar. Returns the violation, if any.
pub fn cell_violation(cell: &str) -> Option<&'static str> {
    if cell.is_empty() {
        Some("empty cell (missing values are not supported)")
    } else if cell.contains(ENTRY_SEPARATOR) {
        Some("cell contains the entry separator \", \"")
    } else if cell.contains(QUALIFIER) {
        Some("cell contains the qualifier \" is \"")
    } else if cell.contains(['\n', '\r']) {
        Some("cell contains a line break")
    } else {
        None
    }
}

/// An ordered set of named columns and rows of cell lexemes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    /// Builds a table, checking column names, row arity and cell lexemes.
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for name in &columns {
            if name.is_empty() {
                return Err(TableError::ingest(1, "empty column name"));
            }
            if !seen.insert(name.as_str()) {
                return Err(TableError::ingest(1, format!("duplicate column name {name:?}")));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            // record numbers are 1-based and count the header line
            let record = i + 2;
            if row.len() != columns.len() {
                return Err(TableError::ingest(
                    record,
                    format!("expected {} fields, found {}", columns.len(), row.len()),
                ));
            }
            for (cell, name) in row.iter().zip(&columns) {
                if let Some(why) = cell_violation(cell) {
                    return Err(TableError::ingest(record, format!("column {name:?}: {why}")));
                }
            }
        }
        Ok(Table { columns, rows })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Cells of column `index`, top to bottom.
    pub fn column(&self, index: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[index].as_str())
    }

    /// A table with the same columns holding the selected rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Reads CSV from any reader. With `has_header = false` columns are named `col1..coln`.
    pub fn from_csv_reader<R: Read>(reader: R, has_header: bool) -> Result<Self, TableError> {
        let mut csv = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut records = Vec::new();
        for (i, rec) in csv.records().enumerate() {
            let rec = rec.map_err(|e| TableError::ingest(i + 1, e.to_string()))?;
            records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
        }
        if records.is_empty() {
            return Err(TableError::Ingest { record: None, reason: "empty file".into() });
        }
        let width = records[0].len();
        if let Some(pos) = records.iter().position(|r| r.len() != width) {
            return Err(TableError::ingest(
                pos + 1,
                format!("expected {width} fields, found {}", records[pos].len()),
            ));
        }
        if has_header {
            let columns = records.remove(0);
            Table::new(columns, records)
        } else {
            let columns = (1..=width).map(|i| format!("col{i}")).collect();
            // no header line: shift record numbers back by one
            Table::new(columns, records).map_err(|e| match e {
                TableError::Ingest { record: Some(r), reason } => {
                    TableError::Ingest { record: Some(r - 1), reason }
                }
                other => other,
            })
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(std::io::Error::other)
    }
}

/// Reads a CSV file into a [`Table`], preserving every cell lexeme verbatim.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Table, TableError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| TableError::Ingest {
        record: None,
        reason: format!("{}: {e}", path.display()),
    })?;
    Table::from_csv_reader(std::io::BufReader::new(file), has_header)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Regression,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric { min: f64, max: f64 },
    Categorical { levels: BTreeSet<String> },
}

impl ColumnKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnKind::Numeric { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    pub is_target: bool,
}

impl ColumnSpec {
    /// Sorted levels of a categorical column; empty for numeric columns.
    pub fn levels(&self) -> Vec<&str> {
        match &self.kind {
            ColumnKind::Categorical { levels } => levels.iter().map(String::as_str).collect(),
            ColumnKind::Numeric { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub specs: Vec<ColumnSpec>,
    pub task: Task,
}

impl TableSchema {
    pub fn column_names(&self) -> Vec<&str> {
        self.specs.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn target_index(&self) -> usize {
        self.specs.iter().position(|s| s.is_target).expect("schema has a target column")
    }

    pub fn target(&self) -> &ColumnSpec {
        &self.specs[self.target_index()]
    }

    pub fn spec(&self, name: &str) -> Option<&ColumnSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Fails unless `table` has exactly this schema's columns, in order.
    pub fn check_matches(&self, table: &Table) -> Result<(), TableError> {
        let names = self.column_names();
        if names.len() != table.n_cols() || names.iter().zip(table.columns()).any(|(a, b)| a != b) {
            return Err(TableError::Schema(format!(
                "table columns {:?} do not match schema columns {:?}",
                table.columns(),
                names
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindOverride {
    Numeric,
    Categorical,
}

/// Per-column overrides read before inference defaults apply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SchemaOverrides {
    entries: Vec<(String, KindOverride, bool)>,
}

impl SchemaOverrides {
    /// Parses `name,kind,is_target` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            // the column name may itself contain commas; kind and flag are the last two fields
            let mut parts = line.rsplitn(3, ',');
            let (flag, kind, name) = match (parts.next(), parts.next(), parts.next()) {
                (Some(f), Some(k), Some(n)) => (f.trim(), k.trim(), n.trim()),
                _ => {
                    return Err(TableError::Schema(format!(
                        "override line {}: expected name,kind,is_target",
                        lineno + 1
                    )))
                }
            };
            let kind = match kind {
                "numeric" => KindOverride::Numeric,
                "categorical" => KindOverride::Categorical,
                other => {
                    return Err(TableError::Schema(format!(
                        "override line {}: unknown kind {other:?}",
                        lineno + 1
                    )))
                }
            };
            let is_target = match flag {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => {
                    return Err(TableError::Schema(format!(
                        "override line {}: bad is_target flag {other:?}",
                        lineno + 1
                    )))
                }
            };
            entries.push((name.to_owned(), kind, is_target));
        }
        Ok(SchemaOverrides { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TableError::Schema(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    fn kind_for(&self, name: &str) -> Option<KindOverride> {
        self.entries.iter().find(|(n, ..)| n == name).map(|(_, k, _)| *k)
    }

    fn declared_target(&self) -> Option<&str> {
        self.entries.iter().find(|(.., t)| *t).map(|(n, ..)| n.as_str())
    }
}

/// Infers column kinds and the task. A column is numeric iff every cell is a finite decimal.
pub fn infer_schema(table: &Table, target: &str, task_hint: Option<Task>) -> Result<TableSchema, TableError> {
    infer_schema_with(table, target, task_hint, &SchemaOverrides::default())
}

pub fn infer_schema_with(
    table: &Table,
    target: &str,
    task_hint: Option<Task>,
    overrides: &SchemaOverrides,
) -> Result<TableSchema, TableError> {
    let target_idx = table
        .column_index(target)
        .ok_or_else(|| TableError::Schema(format!("unknown target column {target:?}")))?;
    if let Some(declared) = overrides.declared_target() {
        if declared != target {
            return Err(TableError::Schema(format!(
                "override file declares target {declared:?} but {target:?} was requested"
            )));
        }
    }
    for (name, ..) in &overrides.entries {
        if table.column_index(name).is_none() {
            return Err(TableError::Schema(format!("override names unknown column {name:?}")));
        }
    }
    if table.n_rows() == 0 {
        return Err(TableError::Schema("table has no rows".into()));
    }

    let mut specs = Vec::with_capacity(table.n_cols());
    for (idx, name) in table.columns().iter().enumerate() {
        let mut forced = overrides.kind_for(name);
        if idx == target_idx {
            match task_hint {
                Some(Task::Classification) => forced = Some(KindOverride::Categorical),
                Some(Task::Regression) => forced = Some(KindOverride::Numeric),
                None => {}
            }
        }
        let numeric: Option<Vec<f64>> = table.column(idx).map(parse_finite).collect();
        let kind = match (forced, numeric) {
            (Some(KindOverride::Categorical), _) | (None, None) => ColumnKind::Categorical {
                levels: table.column(idx).map(str::to_owned).collect(),
            },
            (Some(KindOverride::Numeric) | None, Some(values)) => {
                let (min, max) = values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                ColumnKind::Numeric { min, max }
            }
            (Some(KindOverride::Numeric), None) => {
                return Err(TableError::Schema(format!(
                    "column {name:?} is declared numeric but has non-numeric cells"
                )))
            }
        };
        specs.push(ColumnSpec { name: name.clone(), kind, is_target: idx == target_idx });
    }
    let task = if specs[target_idx].kind.is_numeric() { Task::Regression } else { Task::Classification };
    Ok(TableSchema { specs, task })
}

/// A seeded partition of a table into train and test rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Table,
    pub test: Table,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub seed: u64,
    pub ratio: f64,
}

/// Number of training rows for `ratio` of `n` rows, `floor(ratio * n)`.
pub fn train_size(n: usize, ratio: f64) -> usize {
    // the epsilon absorbs products like 0.9 * 10 landing a hair under an integer
    ((ratio * n as f64) + 1e-9).floor() as usize
}

/// Shuffles row indices with a seeded RNG and takes the first `floor(ratio * n)` as train.
pub fn split(table: &Table, ratio: f64, seed: u64) -> Result<SplitPair, TableError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TableError::Split(format!("ratio must lie in (0, 1), got {ratio}")));
    }
    if table.n_rows() < 2 {
        return Err(TableError::Split(format!("need at least 2 rows, got {}", table.n_rows())));
    }
    let mut order: Vec<usize> = (0..table.n_rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test_indices = order.split_off(train_size(table.n_rows(), ratio));
    Ok(SplitPair {
        train: table.select_rows(&order),
        test: table.select_rows(&test_indices),
        train_indices: order,
        test_indices,
        seed,
        ratio,
    })
}

/// Human-readable value range of each column: `[min, max]` or `{a, b, ...}`.
pub fn column_ranges(table: &Table, schema: &TableSchema) -> Result<Vec<String>, TableError> {
    schema.check_matches(table)?;
    Ok(schema
        .specs
        .iter()
        .map(|spec| match &spec.kind {
            ColumnKind::Numeric { min, max } => format!("[{min}, {max}]"),
            ColumnKind::Categorical { levels } => {
                format!("{{{}}}", levels.iter().map(String::as_str).collect::<Vec<_>>().join(", "))
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Table, TableError> {
        Table::from_csv_reader(text.as_bytes(), true)
    }

    fn table(cols: &[&str], rows: &[&[&str]]) -> Table {
        Table::new(
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reads_small_csv() {
        let t = read("a,b\n1,x\n2,y").unwrap();
        assert_eq!(t.columns(), ["a", "b"]);
        assert_eq!(t.rows(), [vec!["1", "x"], vec!["2", "y"]]);
        assert_eq!((t.n_rows(), t.n_cols()), (2, 2));
    }

    #[test]
    fn ragged_rows_name_the_record() {
        let err = read("a,b\n1,2,3\n").unwrap_err();
        assert_eq!(err, TableError::Ingest { record: Some(2), reason: "expected 2 fields, found 3".into() });
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        assert!(matches!(read(""), Err(TableError::Ingest { record: None, .. })));
        assert!(matches!(read("a,a\n1,2"), Err(TableError::Ingest { .. })));
        assert!(matches!(read("a,b\n1,\n"), Err(TableError::Ingest { record: Some(2), .. })));
        assert!(matches!(read("a,b\n1,\"x, y\"\n"), Err(TableError::Ingest { .. })));
        assert!(matches!(read("a,b\n1,this is it\n"), Err(TableError::Ingest { .. })));
    }

    #[test]
    fn lexemes_survive_write_back() {
        let t = read("a,b\n3e1,\"quoted,cell\"\n007, padded \n").unwrap();
        assert_eq!(t.rows()[0][0], "3e1");
        assert_eq!(t.rows()[1][1], " padded ");
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(Table::from_csv_reader(buf.as_slice(), true).unwrap(), t);
    }

    #[test]
    fn headerless_columns_are_numbered() {
        let t = Table::from_csv_reader("1,2\n3,4\n".as_bytes(), false).unwrap();
        assert_eq!(t.columns(), ["col1", "col2"]);
        assert_eq!(t.n_rows(), 2);
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let t = table(&["x", "class"], &[&["1.5", "g"], &["2", "h"], &["3e1", "g"]]);
        let s = infer_schema(&t, "class", None).unwrap();
        assert_eq!(s.specs[0].kind, ColumnKind::Numeric { min: 1.5, max: 30.0 });
        assert_eq!(s.specs[1].levels(), ["g", "h"]);
        assert_eq!(s.task, Task::Classification);
        assert!(s.specs[1].is_target && !s.specs[0].is_target);
        assert_eq!(infer_schema(&t, "class", None).unwrap(), s);
    }

    #[test]
    fn non_finite_lexemes_are_categorical() {
        let t = table(&["x", "y"], &[&["inf", "1"], &["2", "2"]]);
        let s = infer_schema(&t, "y", None).unwrap();
        assert!(!s.specs[0].kind.is_numeric());
        assert_eq!(s.task, Task::Regression);
    }

    #[test]
    fn task_hint_and_overrides_force_kinds() {
        let t = table(&["x", "y"], &[&["1", "0"], &["2", "1"]]);
        let s = infer_schema(&t, "y", Some(Task::Classification)).unwrap();
        assert_eq!(s.task, Task::Classification);
        assert_eq!(s.target().levels(), ["0", "1"]);

        let o = SchemaOverrides::parse("x,categorical,false\ny,numeric,true\n").unwrap();
        let s = infer_schema_with(&t, "y", None, &o).unwrap();
        assert!(!s.specs[0].kind.is_numeric());
        assert_eq!(s.task, Task::Regression);

        let conflict = SchemaOverrides::parse("x,numeric,true").unwrap();
        assert!(infer_schema_with(&t, "y", None, &conflict).is_err());
        assert!(SchemaOverrides::parse("x,weird,true").is_err());
    }

    #[test]
    fn unknown_target_is_schema_error() {
        let t = table(&["x"], &[&["1"]]);
        assert!(matches!(infer_schema(&t, "nope", None), Err(TableError::Schema(_))));
    }

    #[test]
    fn split_sizes_follow_floor() {
        let rows: Vec<Vec<String>> = (0..100).map(|i| vec![i.to_string()]).collect();
        let t = Table::new(vec!["v".into()], rows).unwrap();
        let s = split(&t, 0.9, 7).unwrap();
        assert_eq!((s.train.n_rows(), s.test.n_rows()), (90, 10));
        assert_eq!(split(&t, 0.9, 7).unwrap(), s);
        assert_ne!(split(&t, 0.9, 8).unwrap().train_indices, s.train_indices);
        assert_eq!(train_size(20_640, 0.9), 18_576);
        assert_eq!(20_640 - train_size(20_640, 0.9), 2_064);
    }

    #[test]
    fn split_rejects_bad_inputs() {
        let t = table(&["v"], &[&["1"]]);
        assert!(matches!(split(&t, 0.9, 0), Err(TableError::Split(_))));
        let t = table(&["v"], &[&["1"], &["2"]]);
        assert!(matches!(split(&t, 1.0, 0), Err(TableError::Split(_))));
        assert!(matches!(split(&t, f64::NAN, 0), Err(TableError::Split(_))));
    }

    #[test]
    fn ranges_render() {
        let t = table(&["n", "c", "k"], &[&["2", "h", "5"], &["9", "g", "5"], &["4", "h", "5"]]);
        let s = infer_schema(&t, "c", None).unwrap();
        assert_eq!(column_ranges(&t, &s).unwrap(), ["[2, 9]", "{g, h}", "[5, 5]"]);
        let other = table(&["z"], &[&["1"]]);
        assert!(column_ranges(&other, &s).is_err());
    }
}
