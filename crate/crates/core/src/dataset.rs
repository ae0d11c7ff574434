//! Example files: `id<TAB>utterance<TAB>table<TAB>answer1|answer2|…`.
//!
//! A first line starting with `id` is a header. Fields may use the public
//! dataset escapes `\p` (pipe), `\n` and `\\`. Table paths are relative to
//! a tables root, by default the directory holding the example file.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dcs::{self, LogicalForm};
use crate::graph::{build_graph, Table, TableError};
use crate::learn::{Example, Tables};
use crate::parser::Utterance;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("line {line}: expected 4 tab-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: empty answer list")]
    NoAnswer { line: usize },
    #[error("line {line}: {message}")]
    BadForm { line: usize, message: String },
    #[error("table {path}: {source}")]
    Table { path: PathBuf, source: TableError },
}

pub fn unescape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('p') => out.push('|'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn records(raw: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    raw.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(i, l)| !l.trim().is_empty() && !(*i == 1 && l.starts_with("id\t")))
        .map(|(i, l)| (i, l.split('\t').collect()))
}

pub fn parse_dataset(raw: &str) -> Result<Vec<Example>, DatasetError> {
    let mut out = Vec::new();
    for (line, fields) in records(raw) {
        if fields.len() != 4 {
            return Err(DatasetError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let gold: Vec<String> = fields[3]
            .split('|')
            .map(|a| unescape(a).trim().to_string())
            .filter(|a| !a.is_empty())
            .collect();
        if gold.is_empty() {
            return Err(DatasetError::NoAnswer { line });
        }
        out.push(Example {
            id: fields[0].trim().to_string(),
            utterance: Utterance::new(&unescape(fields[1])),
            table: fields[2].trim().to_string(),
            gold,
        });
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Example>, DatasetError> {
    parse_dataset(&read(path)?)
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Build a graph for every table the examples mention.
pub fn load_tables(data: &[Example], root: &Path) -> Result<Tables, DatasetError> {
    let mut tables = Tables::new();
    for ex in data {
        if tables.contains_key(&ex.table) {
            continue;
        }
        let path = root.join(&ex.table);
        let table = Table::load(&path).map_err(|source| match source {
            TableError::Io { source, .. } => DatasetError::Io {
                path: path.clone(),
                source,
            },
            other => DatasetError::Table {
                path: path.clone(),
                source: other,
            },
        })?;
        let w = build_graph(&table);
        for warning in w.warnings() {
            log::warn!("{}: {}", ex.table, warning);
        }
        tables.insert(ex.table.clone(), w);
    }
    Ok(tables)
}

/// The default tables root for an example file.
pub fn tables_root(dataset: &Path) -> PathBuf {
    dataset
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Annotated forms, `id<TAB>form` per line.
pub fn parse_gold_forms(raw: &str) -> Result<BTreeMap<String, LogicalForm>, DatasetError> {
    let mut out = BTreeMap::new();
    for (line, fields) in records(raw) {
        if fields.len() != 2 {
            return Err(DatasetError::FieldCount {
                line,
                found: fields.len(),
            });
        }
        let z = dcs::parse(fields[1].trim()).map_err(|e| DatasetError::BadForm {
            line,
            message: e.to_string(),
        })?;
        out.insert(fields[0].trim().to_string(), z);
    }
    Ok(out)
}

pub fn load_gold_forms(path: &Path) -> Result<BTreeMap<String, LogicalForm>, DatasetError> {
    parse_gold_forms(&read(path)?)
}
