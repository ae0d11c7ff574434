//! Shared helpers for the integration tests: a definition-level executor to
//! check `exec::execute` against, random tables, and random well-typed forms.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tablequery::dcs::{self, AggOp, ArithOp, CmpOp, LogicalForm as Lf, SupOp};
use tablequery::graph::{build_graph, parse_table, KnowledgeGraph, TableFormat};
use tablequery::value::{compare_values, Value};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

type Set = BTreeSet<Value>;
type Pairs = BTreeSet<(Value, Value)>;

/// Executes by materializing every binary as its full pair set and every
/// lambda by substituting each graph node. Slow and literal on purpose.
pub fn reference_execute(z: &Lf, w: &KnowledgeGraph) -> Result<Set, String> {
    unary(z, w, &[])
}

fn lookup<'a>(env: &'a [(String, Value)], x: &str) -> Option<&'a Value> {
    env.iter().rev().find(|(n, _)| n == x).map(|(_, v)| v)
}

fn unary(z: &Lf, w: &KnowledgeGraph, env: &[(String, Value)]) -> Result<Set, String> {
    match z {
        Lf::Entity(v) => Ok([v.clone()].into()),
        Lf::VarRef(x) => lookup(env, x)
            .map(|v| [v.clone()].into())
            .ok_or_else(|| format!("unbound {}", x)),
        Lf::Cmp(op, p) => {
            let pivots = unary(p, w, env)?;
            Ok(w.universe()
                .iter()
                .filter(|a| {
                    pivots.iter().any(|p| {
                        std::mem::discriminant(*a) == std::mem::discriminant(p)
                            && holds(*op, a, p)
                    })
                })
                .cloned()
                .collect())
        }
        Lf::Join(b, u) => {
            let pairs = binary(b, w, env)?;
            let arg = unary(u, w, env)?;
            Ok(pairs
                .into_iter()
                .filter(|(_, y)| arg.contains(y))
                .map(|(x, _)| x)
                .collect())
        }
        Lf::Union(a, b) => Ok(&unary(a, w, env)? | &unary(b, w, env)?),
        Lf::Intersect(a, b) => Ok(&unary(a, w, env)? & &unary(b, w, env)?),
        Lf::Aggregate(op, u) => aggregate(*op, unary(u, w, env)?),
        Lf::Superlative(op, u, b) => {
            let s = unary(u, w, env)?;
            let pairs = binary(b, w, env)?;
            let mut keyed = Vec::new();
            for x in s {
                let image: Set = pairs
                    .iter()
                    .filter(|(a, _)| *a == x)
                    .map(|(_, k)| k.clone())
                    .collect();
                let key = match op {
                    SupOp::Argmax => image.into_iter().max(),
                    SupOp::Argmin => image.into_iter().min(),
                };
                if let Some(k) = key {
                    keyed.push((k, x));
                }
            }
            let kinds: BTreeSet<_> = keyed.iter().map(|(k, _)| kind(k)).collect();
            if kinds.len() > 1 || kinds.iter().any(|k| !matches!(k, 1 | 2)) {
                return Err("superlative over unordered keys".into());
            }
            let best = match op {
                SupOp::Argmax => keyed.iter().map(|(k, _)| k.clone()).max(),
                SupOp::Argmin => keyed.iter().map(|(k, _)| k.clone()).min(),
            };
            Ok(keyed
                .into_iter()
                .filter(|(k, _)| Some(k) == best.as_ref())
                .map(|(_, x)| x)
                .collect())
        }
        Lf::Arith(op, a, b) => {
            let x = single_num(&unary(a, w, env)?)?;
            let y = single_num(&unary(b, w, env)?)?;
            let r = match op {
                ArithOp::Add => x + y,
                ArithOp::Sub => x - y,
            };
            Ok([Value::num(r)].into())
        }
        Lf::Rel(_) | Lf::Reverse(_) | Lf::Lambda(..) => Err("binary used as unary".into()),
    }
}

/// Pairs `(x, y)` with `x` the side a join returns.
fn binary(b: &Lf, w: &KnowledgeGraph, env: &[(String, Value)]) -> Result<Pairs, String> {
    match b {
        Lf::Rel(r) => Ok(w
            .edges(r)
            .map_err(|e| e.to_string())?
            .map(|(s, t)| (s.clone(), t.clone()))
            .collect()),
        Lf::Reverse(inner) => Ok(binary(inner, w, env)?
            .into_iter()
            .map(|(x, y)| (y, x))
            .collect()),
        Lf::Lambda(x, body) => {
            let mut out = Pairs::new();
            for v in w.nodes() {
                let mut inner = env.to_vec();
                inner.push((x.clone(), v.clone()));
                for u in unary(body, w, &inner)? {
                    out.insert((u, v.clone()));
                }
            }
            Ok(out)
        }
        _ => Err("unary used as binary".into()),
    }
}

fn kind(v: &Value) -> u8 {
    match v {
        Value::Row(_) => 0,
        Value::Num(_) => 1,
        Value::Date(_) => 2,
        Value::Text(_) => 3,
    }
}

fn holds(op: CmpOp, a: &Value, p: &Value) -> bool {
    if let (Value::Date(d), Value::Date(q)) = (a, p) {
        let same = [(d.year, q.year), (d.month.map(i32::from), q.month.map(i32::from)), (d.day.map(i32::from), q.day.map(i32::from))]
            .iter()
            .all(|(have, want)| want.is_none() || have == want);
        match op {
            CmpOp::Eq => return same,
            CmpOp::Ne => return !same,
            _ => {}
        }
    }
    match compare_values(a, p) {
        Some(o) => op.holds(o),
        None => false,
    }
}

fn single_num(s: &Set) -> Result<f64, String> {
    match (s.len(), s.iter().next()) {
        (1, Some(Value::Num(n))) => Ok(n.get()),
        _ => Err("arithmetic needs one number".into()),
    }
}

fn aggregate(op: AggOp, s: Set) -> Result<Set, String> {
    if op == AggOp::Count {
        return Ok([Value::num(s.len() as f64)].into());
    }
    if s.is_empty() {
        return Ok(Set::new());
    }
    let kinds: BTreeSet<u8> = s.iter().map(kind).collect();
    match op {
        AggOp::Sum | AggOp::Avg => {
            if kinds != [1].into() {
                return Err("sum over non-numbers".into());
            }
            let total: f64 = s.iter().filter_map(Value::as_num).sum();
            let r = if op == AggOp::Sum { total } else { total / s.len() as f64 };
            Ok([Value::num(r)].into())
        }
        _ => {
            if kinds != [1].into() && kinds != [2].into() {
                return Err("min/max over unordered values".into());
            }
            let v = if op == AggOp::Min { s.iter().min() } else { s.iter().max() };
            Ok([v.unwrap().clone()].into())
        }
    }
}

const HEADERS: &[&str] = &["Name", "City", "Year", "Score", "Opened", "Rank", "Team", "Notes"];
const WORDS: &[&str] = &["Athens", "Paris", "Oslo", "Lima", "Rome", "Kyiv", "Quito"];
const DATES: &[&str] = &["March 3, 2004", "2004", "May 2010", "1999-12-31", "June 1, 1999", "2010"];

/// A random table of at most 8 rows and 4 columns with text, number, year
/// and date columns, sometimes mixed.
pub fn random_graph(rng: &mut ChaCha8Rng) -> KnowledgeGraph {
    let rows = rng.gen_range(1..=8);
    let cols = rng.gen_range(1..=4);
    let mut headers: Vec<&str> = HEADERS.to_vec();
    headers.shuffle(rng);
    headers.truncate(cols);
    let kinds: Vec<u8> = (0..cols).map(|_| rng.gen_range(0..5)).collect();
    let mut raw = headers.join("\t");
    for _ in 0..rows {
        raw.push('\n');
        let cells: Vec<String> = kinds
            .iter()
            .map(|k| match k {
                0 => WORDS.choose(rng).unwrap().to_string(),
                1 => rng.gen_range(0..12).to_string(),
                2 => rng.gen_range(1995..2005).to_string(),
                3 => DATES.choose(rng).unwrap().to_string(),
                _ => match rng.gen_range(0..3) {
                    0 => WORDS.choose(rng).unwrap().to_string(),
                    1 => format!("{} km", rng.gen_range(1..5)),
                    _ => "n/a".to_string(),
                },
            })
            .collect();
        raw.push_str(&cells.join("\t"));
    }
    build_graph(&parse_table(&raw, TableFormat::Tsv).expect("generated table parses"))
}

/// Random forms over `w` that typecheck and have at most `max_size` nodes.
pub struct FormGen<'a> {
    pub w: &'a KnowledgeGraph,
    pub rng: &'a mut ChaCha8Rng,
}

impl FormGen<'_> {
    pub fn sample(&mut self, max_size: usize) -> Lf {
        loop {
            let z = if self.rng.gen_bool(0.5) { self.rows(3) } else { self.values(3) };
            if z.size() <= max_size && dcs::typecheck(&z, self.w).is_ok() {
                return z;
            }
        }
    }

    fn column(&mut self) -> String {
        self.w.columns().choose(self.rng).unwrap().clone()
    }

    fn node_of(&mut self, pick: impl Fn(&Value) -> bool) -> Option<Value> {
        let nodes: Vec<Value> = self.w.nodes().into_iter().filter(|v| pick(v)).collect();
        nodes.choose(self.rng).cloned()
    }

    fn norm(&mut self) -> &'static str {
        if self.rng.gen_bool(0.5) {
            "Number"
        } else {
            "Date"
        }
    }

    fn literal(&mut self, norm: &str) -> Lf {
        let v = if norm == "Number" {
            self.node_of(|v| matches!(v, Value::Num(_)))
        } else {
            self.node_of(|v| matches!(v, Value::Date(_)))
        };
        Lf::entity(v.unwrap_or_else(|| Value::num(3.0)))
    }

    /// A relation from rows to normalized values: `lambda v0 [c.Number.v0]`.
    fn value_key(&mut self) -> Lf {
        let c = self.column();
        let n = self.norm();
        Lf::lambda("v0", Lf::join(Lf::rel(&c), Lf::join(Lf::rel(n), Lf::var("v0"))))
    }

    fn all_rows() -> Lf {
        Lf::join(Lf::rel("Type"), Lf::text("Row"))
    }

    pub fn rows(&mut self, depth: u32) -> Lf {
        let choice = if depth == 0 { self.rng.gen_range(0..3) } else { self.rng.gen_range(0..9) };
        match choice {
            0 => Self::all_rows(),
            1 => {
                let c = self.column();
                let e = self.node_of(|v| matches!(v, Value::Text(_)));
                Lf::join(Lf::rel(&c), Lf::entity(e.unwrap_or_else(|| Value::text("Athens"))))
            }
            2 => {
                let c = self.column();
                let n = self.norm();
                Lf::join(Lf::rel(&c), Lf::join(Lf::rel(n), self.literal(n)))
            }
            3 => {
                let c = self.column();
                let n = self.norm();
                let op = *[CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne]
                    .choose(self.rng)
                    .unwrap();
                let pivot = self.literal(n);
                Lf::join(Lf::rel(&c), Lf::join(Lf::rel(n), Lf::cmp(op, pivot)))
            }
            4 => {
                let next = if self.rng.gen_bool(0.5) {
                    Lf::rel("Next")
                } else {
                    Lf::reverse(Lf::rel("Next"))
                };
                Lf::join(next, self.rows(depth - 1))
            }
            5 => Lf::intersect(self.rows(depth - 1), self.rows(depth - 1)),
            6 => Lf::union(self.rows(depth - 1), self.rows(depth - 1)),
            7 => {
                let op = if self.rng.gen_bool(0.5) { SupOp::Argmax } else { SupOp::Argmin };
                let key = if self.rng.gen_bool(0.4) { Lf::rel("Index") } else { self.value_key() };
                Lf::superlative(op, self.rows(depth - 1), key)
            }
            _ => {
                let c = self.column();
                Lf::join(Lf::rel(&c), self.values(depth - 1))
            }
        }
    }

    pub fn values(&mut self, depth: u32) -> Lf {
        let choice = if depth == 0 { self.rng.gen_range(0..2) } else { self.rng.gen_range(0..8) };
        match choice {
            0 => {
                let c = self.column();
                Lf::join(Lf::reverse(Lf::rel(&c)), Self::all_rows())
            }
            1 => {
                let n = self.norm();
                self.literal(n)
            }
            2 => {
                let c = self.column();
                Lf::join(Lf::reverse(Lf::rel(&c)), self.rows(depth - 1))
            }
            3 => {
                let key = self.value_key();
                Lf::join(Lf::reverse(key), self.rows(depth - 1))
            }
            4 => Lf::aggregate(AggOp::Count, self.rows(depth - 1)),
            5 => {
                let op = *AggOp::ALL.choose(self.rng).unwrap();
                Lf::aggregate(op, self.values(depth - 1))
            }
            6 => {
                let op = if self.rng.gen_bool(0.5) { ArithOp::Add } else { ArithOp::Sub };
                Lf::arith(op, self.values(depth - 1), self.values(depth - 1))
            }
            _ => Lf::union(self.values(depth - 1), self.values(depth - 1)),
        }
    }
}

/// The Olympics fixture questions x1 to x5 with their gold forms and answers.
pub const FIGURE_ONE: [(&str, &str, &str); 5] = [
    (
        "Greece held its last Summer Olympics in which year?",
        "R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)",
        "2004",
    ),
    (
        "In which city's the first time with at least 20 nations?",
        "R[City].argmin(Nations.Number.>=.20, Index)",
        "Paris",
    ),
    (
        "Which years have the most participating countries?",
        "R[lambda v0 [Year.Number.v0]].argmax(Type.Row, lambda v0 [Nations.Number.v0])",
        "2008|2012",
    ),
    (
        "How many events were in Athens, Greece?",
        "count((City.Athens & Country.Greece))",
        "2",
    ),
    (
        "How many more participants were there in 1900 than in the first year?",
        "sub(R[lambda v0 [Nations.Number.v0]].Year.Number.1900, R[lambda v0 [Nations.Number.v0]].argmin(Type.Row, Index))",
        "10",
    ),
];
