//! The six-row Olympics table used throughout the docs and tests.

use crate::graph::{build_graph, parse_table, KnowledgeGraph, Table, TableFormat};

pub const OLYMPICS_TSV: &str = "Year\tCity\tCountry\tNations\n\
1896\tAthens\tGreece\t14\n\
1900\tParis\tFrance\t24\n\
1904\tSt. Louis\tUSA\t12\n\
2004\tAthens\tGreece\t201\n\
2008\tBeijing\tChina\t204\n\
2012\tLondon\tUK\t204\n";

pub fn olympics_table() -> Table {
    let mut t = parse_table(OLYMPICS_TSV, TableFormat::Tsv).expect("fixture parses");
    t.source_id = "olympics.tsv".into();
    t
}

pub fn olympics_graph() -> KnowledgeGraph {
    build_graph(&olympics_table())
}
