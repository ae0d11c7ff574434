//! Tables and the knowledge graph built from them.
//!
//! Rows become row nodes, distinct cell strings become entity nodes, and each
//! column becomes a relation from rows to the entities in that column. Entity
//! nodes get `Number` and `Date` normalization edges when their text reads as
//! a number or a date, and rows are linked by `Next` (row i to row i+1) and
//! `Index` (row i to the number i).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::text;
use crate::value::{Date, Value};

pub const NEXT: &str = "Next";
pub const INDEX: &str = "Index";
pub const TYPE: &str = "Type";
pub const NUMBER: &str = "Number";
pub const DATE: &str = "Date";
/// The entity every row points at through `Type`.
pub const ROW_ENTITY: &str = "Row";

/// Names a column relation may not take, since the logical-form syntax
/// already uses them.
pub const RESERVED: &[&str] = &[
    NEXT, INDEX, TYPE, NUMBER, DATE, ROW_ENTITY, "R", "lambda", "count", "sum", "avg", "min",
    "max", "argmax", "argmin", "add", "sub",
];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no header or no data rows")]
    EmptyTable,
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("header {0} is empty")]
    EmptyHeader(usize),
    #[error("malformed delimited input: {0}")]
    Malformed(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("unknown relation {0}")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Tsv,
    Csv,
}

impl TableFormat {
    /// `.csv` files are CSV, everything else TSV.
    pub fn from_path(path: &Path) -> TableFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => TableFormat::Csv,
            _ => TableFormat::Tsv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub cells: Vec<Vec<String>>,
    pub source_id: String,
}

impl Table {
    pub fn new(
        headers: Vec<String>,
        cells: Vec<Vec<String>>,
        source_id: impl Into<String>,
    ) -> Result<Table, TableError> {
        if headers.is_empty() || cells.is_empty() {
            return Err(TableError::EmptyTable);
        }
        let headers: Vec<String> = headers.into_iter().map(|h| h.trim().to_string()).collect();
        if let Some(i) = headers.iter().position(|h| h.is_empty()) {
            return Err(TableError::EmptyHeader(i));
        }
        let mut rows = Vec::with_capacity(cells.len());
        for (i, row) in cells.into_iter().enumerate() {
            if row.len() != headers.len() {
                return Err(TableError::RaggedRow {
                    row: i,
                    found: row.len(),
                    expected: headers.len(),
                });
            }
            rows.push(row.into_iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Table {
            headers,
            cells: rows,
            source_id: source_id.into(),
        })
    }

    pub fn num_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn load(path: &Path) -> Result<Table, TableError> {
        let raw = std::fs::read_to_string(path).map_err(|source| TableError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut t = parse_table(&raw, TableFormat::from_path(path))?;
        t.source_id = path.display().to_string();
        Ok(t)
    }
}

/// Parse delimited text whose first record is the header row.
pub fn parse_table(raw: &str, format: TableFormat) -> Result<Table, TableError> {
    let mut builder = csv::ReaderBuilder::new();
    builder.has_headers(false).flexible(true);
    match format {
        TableFormat::Tsv => builder.delimiter(b'\t').quoting(false),
        TableFormat::Csv => builder.delimiter(b','),
    };
    let mut records = Vec::new();
    for rec in builder.from_reader(raw.as_bytes()).records() {
        let rec = rec.map_err(|e| TableError::Malformed(e.to_string()))?;
        // blank lines come through as a single empty field
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let mut records = records.into_iter();
    let headers = records.next().ok_or(TableError::EmptyTable)?;
    Table::new(headers, records.collect(), "")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NormRelation {
    Number,
    Date,
}

/// A normalization edge leaving an entity node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NormEdge {
    pub relation: NormRelation,
    pub target: Value,
}

/// Every normalization that applies to `cell`. Cells written as month-based
/// dates do not also yield their day number.
pub fn normalize_cell(cell: &str) -> BTreeSet<NormEdge> {
    let mut out = BTreeSet::new();
    let date = text::parse_date(cell);
    if let Some(d) = date {
        out.insert(NormEdge {
            relation: NormRelation::Date,
            target: Value::Date(d),
        });
    }
    let month_date = date.map_or(false, |d| d.bare_year().is_none());
    if !month_date {
        if let Some(n) = text::leading_number(cell) {
            out.insert(NormEdge {
                relation: NormRelation::Number,
                target: Value::Num(n),
            });
        }
    }
    out
}

/// Header text to relation identifier: whitespace runs become `_`, other
/// non-alphanumerics are dropped, case is kept.
pub fn relation_name(header: &str) -> String {
    let mut out = String::new();
    let mut pending_sep = false;
    for c in header.trim().chars() {
        if c.is_whitespace() || c == '_' {
            pending_sep = !out.is_empty();
        } else if c.is_alphanumeric() {
            if pending_sep {
                out.push('_');
                pending_sep = false;
            }
            out.push(c);
        }
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Relation {
    forward: BTreeMap<Value, BTreeSet<Value>>,
    reverse: BTreeMap<Value, BTreeSet<Value>>,
    len: usize,
}

impl Relation {
    fn insert(&mut self, from: Value, to: Value) {
        if self.forward.entry(from.clone()).or_default().insert(to.clone()) {
            self.reverse.entry(to).or_default().insert(from);
            self.len += 1;
        }
    }
}

/// What kind of normalized values a column's entities carry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ColumnKinds {
    pub numbers: bool,
    pub dates: bool,
}

/// Immutable graph view of one table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeGraph {
    num_rows: usize,
    columns: Vec<String>,
    headers: Vec<String>,
    relations: BTreeMap<String, Relation>,
    entity_index: BTreeMap<String, Vec<Value>>,
    entity_columns: BTreeMap<Value, BTreeSet<String>>,
    column_kinds: BTreeMap<String, ColumnKinds>,
    universe: BTreeSet<Value>,
    warnings: Vec<String>,
}

pub fn build_graph(table: &Table) -> KnowledgeGraph {
    let mut warnings = Vec::new();
    let mut taken: BTreeSet<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    let mut columns = Vec::with_capacity(table.headers.len());
    for (j, h) in table.headers.iter().enumerate() {
        let mut base = relation_name(h);
        if base.is_empty() {
            base = format!("col{}", j);
        }
        let mut name = base.clone();
        let mut k = 2;
        while taken.contains(&name) {
            name = format!("{}_{}", base, k);
            k += 1;
        }
        if name != base {
            let msg = format!("header {:?} renamed to relation {}", h, name);
            log::warn!("{}", msg);
            warnings.push(msg);
        }
        taken.insert(name.clone());
        columns.push(name);
    }

    let mut relations: BTreeMap<String, Relation> = BTreeMap::new();
    for name in columns.iter().map(String::as_str).chain([NEXT, INDEX, TYPE, NUMBER, DATE]) {
        relations.insert(name.to_string(), Relation::default());
    }
    let mut entity_index: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    let mut entity_columns: BTreeMap<Value, BTreeSet<String>> = BTreeMap::new();
    let mut column_kinds: BTreeMap<String, ColumnKinds> = BTreeMap::new();
    let mut universe = BTreeSet::new();

    let n = table.num_rows();
    for (i, row) in table.cells.iter().enumerate() {
        for (cell, col) in row.iter().zip(&columns) {
            if cell.is_empty() {
                continue;
            }
            let entity = Value::text(cell.clone());
            relations.get_mut(col).unwrap().insert(Value::Row(i), entity.clone());
            entity_columns.entry(entity.clone()).or_default().insert(col.clone());
            let kinds = column_kinds.entry(col.clone()).or_default();
            for edge in normalize_cell(cell) {
                let rel = match edge.relation {
                    NormRelation::Number => {
                        kinds.numbers = true;
                        NUMBER
                    }
                    NormRelation::Date => {
                        kinds.dates = true;
                        DATE
                    }
                };
                universe.insert(edge.target.clone());
                relations.get_mut(rel).unwrap().insert(entity.clone(), edge.target);
            }
            let key = text::normalize_phrase(cell);
            if !key.is_empty() {
                let slot = entity_index.entry(key).or_default();
                if !slot.contains(&entity) {
                    slot.push(entity);
                }
            }
        }
        let num = |k: usize| Value::num(k as f64);
        relations.get_mut(INDEX).unwrap().insert(Value::Row(i), num(i));
        relations
            .get_mut(TYPE)
            .unwrap()
            .insert(Value::Row(i), Value::text(ROW_ENTITY));
        if i + 1 < n {
            relations.get_mut(NEXT).unwrap().insert(Value::Row(i), Value::Row(i + 1));
        }
    }
    for c in &columns {
        column_kinds.entry(c.clone()).or_default();
    }

    KnowledgeGraph {
        num_rows: n,
        columns,
        headers: table.headers.clone(),
        relations,
        entity_index,
        entity_columns,
        column_kinds,
        universe,
        warnings,
    }
}

impl KnowledgeGraph {
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    pub fn rows(&self) -> impl Iterator<Item = Value> {
        (0..self.num_rows).map(Value::Row)
    }

    /// Column relation names, in table order.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// The original header for a column relation.
    pub fn header(&self, column: &str) -> Option<&str> {
        self.columns
            .iter()
            .position(|c| c == column)
            .map(|j| self.headers[j].as_str())
    }

    pub fn is_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }

    pub fn has_relation(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    pub fn column_kinds(&self, column: &str) -> ColumnKinds {
        self.column_kinds.get(column).copied().unwrap_or_default()
    }

    /// Normalized Num and Date values.
    pub fn universe(&self) -> &BTreeSet<Value> {
        &self.universe
    }

    /// Rows, entity nodes, and normalized values: every node in the graph.
    pub fn nodes(&self) -> BTreeSet<Value> {
        let mut out: BTreeSet<Value> = self.rows().collect();
        out.extend(self.entity_columns.keys().cloned());
        out.insert(Value::text(ROW_ENTITY));
        out.extend(self.universe.iter().cloned());
        out
    }

    /// Entities whose normalized text equals `key` (see [`text::normalize_phrase`]).
    pub fn entities_matching(&self, key: &str) -> &[Value] {
        self.entity_index.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn entity_index(&self) -> &BTreeMap<String, Vec<Value>> {
        &self.entity_index
    }

    /// Columns in which a text entity occurs.
    pub fn columns_of(&self, entity: &Value) -> Option<&BTreeSet<String>> {
        self.entity_columns.get(entity)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn relation_len(&self, rel: &str) -> Result<usize, GraphError> {
        self.relation(rel).map(|r| r.len)
    }

    fn relation(&self, rel: &str) -> Result<&Relation, GraphError> {
        self.relations
            .get(rel)
            .ok_or_else(|| GraphError::UnknownRelation(rel.to_string()))
    }

    /// Follow `rel` edges from `keys`: forward yields targets, reverse yields
    /// sources.
    pub fn lookup<'a>(
        &self,
        rel: &str,
        dir: Direction,
        keys: impl IntoIterator<Item = &'a Value>,
    ) -> Result<BTreeSet<Value>, GraphError> {
        let r = self.relation(rel)?;
        let map = match dir {
            Direction::Forward => &r.forward,
            Direction::Reverse => &r.reverse,
        };
        let mut out = BTreeSet::new();
        for k in keys {
            if let Some(vs) = map.get(k) {
                out.extend(vs.iter().cloned());
            }
        }
        Ok(out)
    }

    /// All `(source, target)` pairs of a relation.
    pub fn edges(&self, rel: &str) -> Result<impl Iterator<Item = (&Value, &Value)>, GraphError> {
        let r = self.relation(rel)?;
        Ok(r
            .forward
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(move |to| (from, to))))
    }

    /// One `relation<TAB>source<TAB>target` line per edge; columns first in
    /// table order, then the built-in relations.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let order = self
            .columns
            .iter()
            .map(String::as_str)
            .chain([NUMBER, DATE, NEXT, INDEX, TYPE]);
        for rel in order {
            for (a, b) in self.edges(rel).expect("known relation") {
                let _ = writeln!(out, "{}\t{}\t{}", rel, a.render_quoted(), b.render_quoted());
            }
        }
        out
    }
}

/// Convenience for dates in tests and fixtures.
pub fn year(y: i32) -> Value {
    Value::Date(Date::year(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    use crate::fixture::OLYMPICS_TSV as OLYMPICS;

    fn olympics() -> KnowledgeGraph {
        build_graph(&parse_table(OLYMPICS, TableFormat::Tsv).unwrap())
    }

    fn set(vs: &[Value]) -> BTreeSet<Value> {
        vs.iter().cloned().collect()
    }

    #[test]
    fn parses_fixture() {
        let t = parse_table(OLYMPICS, TableFormat::Tsv).unwrap();
        assert_eq!(t.headers, vec!["Year", "City", "Country", "Nations"]);
        assert_eq!(t.num_rows(), 6);
        assert_eq!(t.cells[2][1], "St. Louis");
    }

    #[test]
    fn header_only_is_empty() {
        assert!(matches!(
            parse_table("A\tB\n", TableFormat::Tsv),
            Err(TableError::EmptyTable)
        ));
        assert!(matches!(parse_table("", TableFormat::Csv), Err(TableError::EmptyTable)));
    }

    #[test]
    fn ragged_row() {
        let err = parse_table("A\tB\tC\tD\n1\t2\t3\n", TableFormat::Tsv).unwrap_err();
        assert!(matches!(
            err,
            TableError::RaggedRow {
                row: 0,
                found: 3,
                expected: 4
            }
        ));
    }

    #[test]
    fn csv_quoting() {
        let t = parse_table("Name,Place\n\"Beijing, China\",1\n", TableFormat::Csv).unwrap();
        assert_eq!(t.cells[0][0], "Beijing, China");
    }

    #[test]
    fn normalization_edges() {
        let e = normalize_cell("1900");
        assert_eq!(
            e,
            [
                NormEdge {
                    relation: NormRelation::Number,
                    target: Value::num(1900.0)
                },
                NormEdge {
                    relation: NormRelation::Date,
                    target: year(1900)
                },
            ]
            .into_iter()
            .collect()
        );
        let e = normalize_cell("200 km");
        assert_eq!(e.len(), 1);
        assert_eq!(e.iter().next().unwrap().target, Value::num(200.0));
        assert!(normalize_cell("Athens").is_empty());
        let e = normalize_cell("June 5, 1998");
        assert_eq!(e.len(), 1);
        assert_eq!(e.iter().next().unwrap().relation, NormRelation::Date);
    }

    #[test]
    fn relation_names() {
        assert_eq!(relation_name("  Height (m) "), "Height_m");
        assert_eq!(relation_name("No."), "No");
        assert_eq!(relation_name("2010 pop"), "_2010_pop");
        let t = Table::new(
            vec!["Date".into(), "A b".into(), "A  b".into()],
            vec![vec!["1".into(), "2".into(), "3".into()]],
            "t",
        )
        .unwrap();
        let g = build_graph(&t);
        assert_eq!(g.columns(), ["Date_2", "A_b", "A_b_2"]);
        assert_eq!(g.warnings().len(), 2);
    }

    #[test]
    fn shared_entity_nodes() {
        let g = olympics();
        let athens = Value::text("Athens");
        let rows = g.lookup("City", Direction::Reverse, [&athens]).unwrap();
        assert_eq!(rows, set(&[Value::Row(0), Value::Row(3)]));
        assert_eq!(g.entities_matching("athens"), [athens]);
        assert_eq!(g.entities_matching("st louis"), [Value::text("St. Louis")]);
    }

    #[test]
    fn next_and_index() {
        let g = olympics();
        assert!(g
            .lookup(NEXT, Direction::Forward, [&Value::Row(5)])
            .unwrap()
            .is_empty());
        assert_eq!(
            g.lookup(INDEX, Direction::Forward, [&Value::Row(4)]).unwrap(),
            set(&[Value::num(4.0)])
        );
        assert_eq!(g.relation_len(NEXT).unwrap(), 5);
        assert_eq!(g.relation_len(INDEX).unwrap(), 6);
        assert_eq!(
            g.lookup("Nope", Direction::Forward, []),
            Err(GraphError::UnknownRelation("Nope".into()))
        );
    }

    #[test]
    fn single_row_boundary() {
        let t = Table::new(vec!["A".into()], vec![vec!["x".into()]], "t").unwrap();
        let g = build_graph(&t);
        assert_eq!(g.relation_len(NEXT).unwrap(), 0);
        let idx: Vec<_> = g.edges(INDEX).unwrap().collect();
        assert_eq!(idx, vec![(&Value::Row(0), &Value::num(0.0))]);
    }

    #[test]
    fn universe_enumerates_normalizations() {
        // independent enumeration over the raw cells
        let t = parse_table(OLYMPICS, TableFormat::Tsv).unwrap();
        let mut expected = BTreeSet::new();
        for row in &t.cells {
            for cell in row {
                for e in normalize_cell(cell) {
                    expected.insert(e.target);
                }
            }
        }
        let g = build_graph(&t);
        assert_eq!(g.universe(), &expected);
        for v in [14.0, 24.0, 12.0, 201.0, 204.0] {
            assert!(g.universe().contains(&Value::num(v)));
        }
        for y in [1896, 1900, 1904, 2004, 2008, 2012] {
            assert!(g.universe().contains(&year(y)));
        }
        // "204" occurs twice but is one node with one Number edge
        assert_eq!(
            g.lookup(NUMBER, Direction::Forward, [&Value::text("204")]).unwrap(),
            set(&[Value::num(204.0)])
        );
    }

    #[test]
    fn empty_cells_have_no_edge() {
        let t = parse_table("A\tB\nx\t\ny\tz\n", TableFormat::Tsv).unwrap();
        let g = build_graph(&t);
        assert_eq!(g.relation_len("B").unwrap(), 1);
    }

    #[test]
    fn dump_format() {
        let g = olympics();
        let dump = g.dump();
        assert!(dump.starts_with("Year\tRow#0\t\"1896\"\n"));
        assert!(dump.contains("Date\t\"1900\"\t1900-xx-xx\n"));
        assert!(dump.contains("Next\tRow#0\tRow#1\n"));
        assert_eq!(dump, olympics().dump());
    }

    #[test]
    fn round_trip_every_cell() {
        let t = parse_table(OLYMPICS, TableFormat::Tsv).unwrap();
        let g = build_graph(&t);
        for (i, row) in t.cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let got = g
                    .lookup(&g.columns()[j], Direction::Forward, [&Value::Row(i)])
                    .unwrap();
                assert!(got.contains(&Value::text(cell.clone())));
            }
        }
    }
}
