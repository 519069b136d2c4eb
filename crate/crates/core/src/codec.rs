//! Row ⇄ text conversion.
//!
//! A row is written as `"<d1> is <v1>, <d2> is <v2>, ..."` where each `d` is the
//! column's descriptor and each `v` the cell lexeme. Parsing goes the other way
//! and never fails: malformed text yields an incomplete [`ParsedRow`] carrying a
//! [`RejectReason`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::rng::stream_rng;
use crate::table::{cell_violation, parse_finite, ColumnKind, Table, TableSchema, ENTRY_SEPARATOR, QUALIFIER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("row has {got} cells but there are {expected} descriptors")]
    Arity { expected: usize, got: usize },
    #[error("descriptor for column {column:?} is empty after sanitization")]
    EmptyDescriptor { column: String },
    #[error("descriptor {descriptor:?} is used by more than one column")]
    DuplicateDescriptor { descriptor: String },
    #[error("descriptor columns {descriptors:?} do not match table columns {table:?}")]
    ColumnMismatch { descriptors: Vec<String>, table: Vec<String> },
    #[error("descriptor set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolTag {
    Baseline,
    Expert,
    LlmGuided,
    NovelMapping,
}

impl fmt::Display for ProtocolTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolTag::Baseline => "baseline",
            ProtocolTag::Expert => "expert",
            ProtocolTag::LlmGuided => "llm_guided",
            ProtocolTag::NovelMapping => "novel_mapping",
        })
    }
}

/// Normalizes descriptor text so it cannot collide with the encoding grammar:
/// commas are dropped, whitespace runs become one space, and an inner `" is "`
/// or a trailing `" is"` becomes `" is-"`.
pub fn sanitize_descriptor(text: &str) -> String {
    let mut out = text.replace(',', "").split_whitespace().collect::<Vec<_>>().join(" ");
    while out.contains(QUALIFIER) {
        out = out.replace(QUALIFIER, " is-");
    }
    if out.ends_with(QUALIFIER.trim_end()) && out.len() > 2 && out[..out.len() - 2].ends_with(' ') {
        out.push('-');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct DescriptorEntry {
    column: String,
    descriptor: String,
}

#[derive(Deserialize)]
struct RawDescriptorSet {
    protocol: ProtocolTag,
    entries: Vec<DescriptorEntry>,
}

/// Per-column descriptor text, in schema order, tagged with the protocol that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDescriptorSet")]
pub struct DescriptorSet {
    protocol: ProtocolTag,
    entries: Vec<DescriptorEntry>,
}

impl TryFrom<RawDescriptorSet> for DescriptorSet {
    type Error = CodecError;

    fn try_from(raw: RawDescriptorSet) -> Result<Self, Self::Error> {
        DescriptorSet::new(raw.entries.into_iter().map(|e| (e.column, e.descriptor)), raw.protocol)
    }
}

impl DescriptorSet {
    /// Sanitizes every descriptor and checks they are nonempty and unique.
    pub fn new<I, C, D>(entries: I, protocol: ProtocolTag) -> Result<Self, CodecError>
    where
        I: IntoIterator<Item = (C, D)>,
        C: Into<String>,
        D: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (column, text) in entries {
            let column = column.into();
            let descriptor = sanitize_descriptor(text.as_ref());
            if descriptor.is_empty() {
                return Err(CodecError::EmptyDescriptor { column });
            }
            if !seen.insert(descriptor.clone()) {
                return Err(CodecError::DuplicateDescriptor { descriptor });
            }
            out.push(DescriptorEntry { column, descriptor });
        }
        Ok(DescriptorSet { protocol, entries: out })
    }

    pub fn protocol(&self) -> ProtocolTag {
        self.protocol
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.column.as_str())
    }

    pub fn descriptors(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.descriptor.as_str())
    }

    pub fn descriptor(&self, index: usize) -> &str {
        &self.entries[index].descriptor
    }

    pub fn column(&self, index: usize) -> &str {
        &self.entries[index].column
    }

    /// Fails unless the descriptors cover exactly `columns`, in order.
    pub fn check_columns<S: AsRef<str>>(&self, columns: &[S]) -> Result<(), CodecError> {
        if self.len() != columns.len() || self.columns().zip(columns).any(|(a, b)| a != b.as_ref()) {
            return Err(CodecError::ColumnMismatch {
                descriptors: self.columns().map(str::to_owned).collect(),
                table: columns.iter().map(|c| c.as_ref().to_owned()).collect(),
            });
        }
        Ok(())
    }
}

/// One row rendered as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRow {
    pub text: String,
    pub source_row_index: Option<usize>,
}

/// Column order used when encoding a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnOrder {
    #[default]
    Fixed,
    /// An independent seeded column permutation for every row.
    Permuted,
}

/// Renders `row` in schema order.
pub fn encode_row<S: AsRef<str>>(row: &[S], descriptors: &DescriptorSet) -> Result<EncodedRow, CodecError> {
    let order: Vec<usize> = (0..row.len()).collect();
    encode_row_in_order(row, descriptors, &order)
}

/// Renders `row` visiting columns in `order` (a permutation of column indices).
pub fn encode_row_in_order<S: AsRef<str>>(
    row: &[S],
    descriptors: &DescriptorSet,
    order: &[usize],
) -> Result<EncodedRow, CodecError> {
    if row.len() != descriptors.len() {
        return Err(CodecError::Arity { expected: descriptors.len(), got: row.len() });
    }
    debug_assert_eq!(order.len(), row.len());
    let mut text = String::new();
    for (k, &col) in order.iter().enumerate() {
        if k > 0 {
            text.push_str(ENTRY_SEPARATOR);
        }
        text.push_str(descriptors.descriptor(col));
        text.push_str(QUALIFIER);
        text.push_str(row[col].as_ref());
    }
    Ok(EncodedRow { text, source_row_index: None })
}

/// Encodes every row of `table`. Permuted order draws each row's permutation
/// from its own RNG stream, so the output does not depend on scheduling.
pub fn encode_corpus(
    table: &Table,
    descriptors: &DescriptorSet,
    order: ColumnOrder,
    seed: u64,
) -> Result<Vec<EncodedRow>, CodecError> {
    descriptors.check_columns(table.columns())?;
    let rows = table.rows();
    par::map_range(rows.len(), |i| {
        let mut cols: Vec<usize> = (0..table.n_cols()).collect();
        if order == ColumnOrder::Permuted {
            cols.shuffle(&mut stream_rng(seed, i as u64));
        }
        encode_row_in_order(&rows[i], descriptors, &cols).map(|mut e| {
            e.source_row_index = Some(i);
            e
        })
    })
    .into_iter()
    .collect()
}

/// Indices of descriptors that can open an encoded line under `order`.
pub fn leading_descriptors(descriptors: &DescriptorSet, order: ColumnOrder) -> Vec<usize> {
    match order {
        ColumnOrder::Fixed => (0..descriptors.len().min(1)).collect(),
        ColumnOrder::Permuted => (0..descriptors.len()).collect(),
    }
}

/// A value-free prompt `"<d> is"` for a uniformly chosen descriptor.
pub fn make_test_prompt(descriptors: &DescriptorSet, seed: u64) -> Result<String, CodecError> {
    let all: Vec<usize> = (0..descriptors.len()).collect();
    make_test_prompt_among(descriptors, &all, seed)
}

/// Like [`make_test_prompt`] but drawing only from `candidates`.
pub fn make_test_prompt_among(
    descriptors: &DescriptorSet,
    candidates: &[usize],
    seed: u64,
) -> Result<String, CodecError> {
    if candidates.is_empty() || descriptors.is_empty() {
        return Err(CodecError::Empty);
    }
    let pick = candidates[stream_rng(seed, 0).gen_range(0..candidates.len())];
    Ok(format!("{}{}", descriptors.descriptor(pick), QUALIFIER.trim_end()))
}

/// Why generated text was not turned into a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    EmptyText,
    MalformedSegment,
    UnknownDescriptor,
    DuplicateColumn,
    MissingColumn,
    EmptyValue,
    NonNumericValue,
    InvalidValue,
    OutOfRange,
    UnknownLevel,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned));
        f.write_str(s.as_deref().unwrap_or("unknown"))
    }
}

/// Result of parsing one generated line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRow {
    pub values: BTreeMap<String, String>,
    pub complete: bool,
    pub reason: Option<RejectReason>,
}

impl ParsedRow {
    fn reject(values: BTreeMap<String, String>, reason: RejectReason) -> Self {
        ParsedRow { values, complete: false, reason: Some(reason) }
    }

    /// Cells in schema order, if the row is complete.
    pub fn to_record(&self, schema: &TableSchema) -> Option<Vec<String>> {
        if !self.complete {
            return None;
        }
        schema.specs.iter().map(|s| self.values.get(&s.name).cloned()).collect()
    }
}

/// Parses generated text back into a row. Only the first line is considered.
///
/// Each `", "`-separated segment is matched against the longest known
/// descriptor that is followed by `" is "`; the rest of the segment is the value.
pub fn parse_row(text: &str, schema: &TableSchema, descriptors: &DescriptorSet) -> ParsedRow {
    let line = text.split('\n').next().unwrap_or("");
    let line = line.strip_suffix('\r').unwrap_or(line);
    let mut values = BTreeMap::new();
    if line.is_empty() {
        return ParsedRow::reject(values, RejectReason::EmptyText);
    }

    let mut by_length: Vec<usize> = (0..descriptors.len()).collect();
    by_length.sort_by_key(|&i| std::cmp::Reverse(descriptors.descriptor(i).len()));

    for segment in line.split(ENTRY_SEPARATOR) {
        let matched = by_length.iter().find_map(|&i| {
            segment
                .strip_prefix(descriptors.descriptor(i))
                .and_then(|rest| {
                    // a bare "<d> is" with nothing after it is a present-but-empty value
                    if rest == QUALIFIER.trim_end() {
                        Some("")
                    } else {
                        rest.strip_prefix(QUALIFIER)
                    }
                })
                .map(|value| (i, value))
        });
        let Some((idx, value)) = matched else {
            let reason = if segment.contains(QUALIFIER) {
                RejectReason::UnknownDescriptor
            } else {
                RejectReason::MalformedSegment
            };
            return ParsedRow::reject(values, reason);
        };
        let column = descriptors.column(idx);
        if values.contains_key(column) {
            return ParsedRow::reject(values, RejectReason::DuplicateColumn);
        }
        if value.is_empty() {
            return ParsedRow::reject(values, RejectReason::EmptyValue);
        }
        match schema.spec(column).map(|s| &s.kind) {
            None => return ParsedRow::reject(values, RejectReason::UnknownDescriptor),
            Some(ColumnKind::Numeric { .. }) if parse_finite(value).is_none() => {
                return ParsedRow::reject(values, RejectReason::NonNumericValue)
            }
            Some(_) if cell_violation(value).is_some() => {
                return ParsedRow::reject(values, RejectReason::InvalidValue)
            }
            Some(_) => {}
        }
        values.insert(column.to_owned(), value.to_owned());
    }

    if schema.specs.iter().any(|s| !values.contains_key(&s.name)) {
        return ParsedRow::reject(values, RejectReason::MissingColumn);
    }
    ParsedRow { values, complete: true, reason: None }
}

/// Writes one encoded row per line.
pub fn write_corpus<'a, I>(path: impl AsRef<Path>, rows: I) -> std::io::Result<()>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for line in rows {
        writeln!(out, "{line}")?;
    }
    out.flush()
}

pub fn read_corpus(path: impl AsRef<Path>) -> std::io::Result<Vec<String>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    file.lines().collect()
}
