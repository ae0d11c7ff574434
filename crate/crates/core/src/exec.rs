//! Executing logical forms against a knowledge graph.
//!
//! `b.u` is the set of `x` with some `(x, y)` in `b` and `y` in `u`. For a
//! column relation the pairs run from rows to cells, so `City.Athens` is the
//! rows whose city is Athens and `R[City].City.Athens` is `{Athens}` again.
//! A lambda `lambda x [f(x)]` pairs every `u` in `f(v)` with `v`, which makes
//! `lambda x [Year.Date.x]` run from rows to dates like a relation would.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::dcs::{self, AggOp, ArithOp, CmpOp, DcsType, LogicalForm as Lf, SupOp};
use crate::graph::{Direction, KnowledgeGraph};
use crate::value::{compare_values, Number, Value};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("type failure in {0}")]
    TypeFailure(String),
    #[error("arithmetic operand is not a single number in {0}")]
    NonSingletonArith(String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
}

/// The value set a unary denotes, in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Denotation(BTreeSet<Value>);

impl Denotation {
    pub fn new(values: impl IntoIterator<Item = Value>) -> Denotation {
        Denotation(values.into_iter().collect())
    }

    pub fn values(&self) -> &BTreeSet<Value> {
        &self.0
    }

    pub fn into_values(self) -> BTreeSet<Value> {
        self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Value> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.0.contains(v)
    }

    /// Pipe-separated rendering for answer files, e.g. `2008|2012`.
    pub fn render(&self) -> String {
        self.0.iter().map(Value::render).collect::<Vec<_>>().join("|")
    }
}

impl fmt::Display for Denotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromIterator<Value> for Denotation {
    fn from_iter<I: IntoIterator<Item = Value>>(iter: I) -> Self {
        Denotation(iter.into_iter().collect())
    }
}

/// The pair set a binary denotes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BinaryDenotation(pub BTreeSet<(Value, Value)>);

impl BinaryDenotation {
    pub fn contains(&self, a: &Value, b: &Value) -> bool {
        self.0.contains(&(a.clone(), b.clone()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn swapped(&self) -> BinaryDenotation {
        BinaryDenotation(self.0.iter().map(|(a, b)| (b.clone(), a.clone())).collect())
    }
}

type Set = BTreeSet<Value>;

pub fn execute(z: &Lf, w: &KnowledgeGraph) -> Result<Denotation, ExecError> {
    Executor { w, env: Vec::new() }.unary(z).map(Denotation)
}

pub fn execute_binary(b: &Lf, w: &KnowledgeGraph) -> Result<BinaryDenotation, ExecError> {
    let mut ex = Executor { w, env: Vec::new() };
    let pairs = match b {
        Lf::Rel(r) => w
            .edges(r)
            .map_err(|_| ExecError::UnknownRelation(r.clone()))?
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect(),
        Lf::Reverse(inner) => return execute_binary(inner, w).map(|d| d.swapped()),
        Lf::Lambda(x, body) => {
            let mut pairs = BTreeSet::new();
            for v in ex.var_range(b)? {
                ex.env.push((x.clone(), [v.clone()].into_iter().collect()));
                let out = ex.unary(body);
                ex.env.pop();
                for u in out? {
                    pairs.insert((u, v.clone()));
                }
            }
            pairs
        }
        Lf::Cmp(op, pivot) => {
            let pivots = ex.unary(pivot)?;
            let mut pairs = BTreeSet::new();
            for p in &pivots {
                for a in w.universe() {
                    if same_kind(a, p) && compares(*op, a, p) {
                        pairs.insert((a.clone(), p.clone()));
                    }
                }
            }
            pairs
        }
        _ => return Err(ExecError::TypeFailure(b.canonical())),
    };
    Ok(BinaryDenotation(pairs))
}

// Single operations over denotations that are already known. They agree with
// `execute` on the form the operation would build.

/// `b.u` where `⟦u⟧ = arg`.
pub fn join(b: &Lf, arg: &Denotation, w: &KnowledgeGraph) -> Result<Denotation, ExecError> {
    Executor { w, env: Vec::new() }.join(b, &arg.0).map(Denotation)
}

/// `op.p` where `⟦p⟧ = pivots`.
pub fn compare(op: CmpOp, pivots: &Denotation, w: &KnowledgeGraph) -> Denotation {
    Denotation(compare_set(op, &pivots.0, w))
}

pub fn aggregate_of(op: AggOp, arg: &Denotation) -> Result<Denotation, ExecError> {
    aggregate(op, &arg.0)
        .map(Denotation)
        .ok_or_else(|| ExecError::TypeFailure(op.name().to_string()))
}

pub fn superlative_of(
    op: SupOp,
    arg: &Denotation,
    key: &Lf,
    w: &KnowledgeGraph,
) -> Result<Denotation, ExecError> {
    Executor { w, env: Vec::new() }
        .superlative(op, arg.0.clone(), key)?
        .map(Denotation)
        .ok_or_else(|| ExecError::TypeFailure(op.name().to_string()))
}

pub fn arith_of(op: ArithOp, a: &Denotation, b: &Denotation) -> Result<Denotation, ExecError> {
    arith(op, &a.0, &b.0).map(Denotation)
}

impl ExecError {
    fn with_form(self, z: &Lf) -> ExecError {
        match self {
            ExecError::TypeFailure(_) => ExecError::TypeFailure(z.canonical()),
            ExecError::NonSingletonArith(_) => ExecError::NonSingletonArith(z.canonical()),
            other => other,
        }
    }
}

fn compare_set(op: CmpOp, pivots: &Set, w: &KnowledgeGraph) -> Set {
    w.universe()
        .iter()
        .filter(|a| pivots.iter().any(|p| same_kind(a, p) && compares(op, a, p)))
        .cloned()
        .collect()
}

fn arith(op: ArithOp, x: &Set, y: &Set) -> Result<Set, ExecError> {
    let single = |s: &Set| match (s.len(), s.iter().next()) {
        (1, Some(Value::Num(n))) => Ok(n.get()),
        (1, _) => Err(ExecError::TypeFailure(op.name().to_string())),
        _ => Err(ExecError::NonSingletonArith(op.name().to_string())),
    };
    let (x, y) = (single(x)?, single(y)?);
    let r = match op {
        ArithOp::Add => x + y,
        ArithOp::Sub => x - y,
    };
    Number::new(r)
        .map(|n| [Value::Num(n)].into_iter().collect())
        .ok_or_else(|| ExecError::TypeFailure(op.name().to_string()))
}

fn same_kind(a: &Value, b: &Value) -> bool {
    std::mem::discriminant(a) == std::mem::discriminant(b)
}

fn compares(op: CmpOp, a: &Value, pivot: &Value) -> bool {
    match (op, a, pivot) {
        (CmpOp::Eq, Value::Date(d), Value::Date(p)) => d.matches(p),
        (CmpOp::Ne, Value::Date(d), Value::Date(p)) => !d.matches(p),
        _ => compare_values(a, pivot).map_or(false, |o| op.holds(o)),
    }
}

struct Executor<'a> {
    w: &'a KnowledgeGraph,
    env: Vec<(String, Set)>,
}

impl Executor<'_> {
    fn unary(&mut self, z: &Lf) -> Result<Set, ExecError> {
        match z {
            Lf::Entity(v) => Ok([v.clone()].into_iter().collect()),
            Lf::VarRef(x) => self
                .env
                .iter()
                .rev()
                .find(|(n, _)| n == x)
                .map(|(_, s)| s.clone())
                .ok_or_else(|| ExecError::UnboundVariable(x.clone())),
            Lf::Cmp(op, p) => {
                let pivots = self.unary(p)?;
                Ok(compare_set(*op, &pivots, self.w))
            }
            Lf::Join(b, u) => {
                let arg = self.unary(u)?;
                self.join(b, &arg)
            }
            Lf::Union(a, b) => {
                let mut s = self.unary(a)?;
                s.extend(self.unary(b)?);
                Ok(s)
            }
            Lf::Intersect(a, b) => {
                let s = self.unary(a)?;
                let t = self.unary(b)?;
                Ok(s.intersection(&t).cloned().collect())
            }
            Lf::Aggregate(op, u) => {
                let s = self.unary(u)?;
                aggregate(*op, &s).ok_or_else(|| ExecError::TypeFailure(z.canonical()))
            }
            Lf::Superlative(op, u, b) => {
                let s = self.unary(u)?;
                self.superlative(*op, s, b)?
                    .ok_or_else(|| ExecError::TypeFailure(z.canonical()))
            }
            Lf::Arith(op, a, b) => {
                let x = self.unary(a)?;
                let y = self.unary(b)?;
                arith(*op, &x, &y).map_err(|e| e.with_form(z))
            }
            Lf::Rel(_) | Lf::Reverse(_) | Lf::Lambda(..) => {
                Err(ExecError::TypeFailure(z.canonical()))
            }
        }
    }

    fn superlative(&mut self, op: SupOp, s: Set, key: &Lf) -> Result<Option<Set>, ExecError> {
        let mut keyed = Vec::with_capacity(s.len());
        for x in s {
            let image = self.join_rev(key, &[x.clone()].into_iter().collect())?;
            let k = match op {
                SupOp::Argmax => image.iter().next_back(),
                SupOp::Argmin => image.iter().next(),
            };
            if let Some(k) = k {
                keyed.push((k.clone(), x));
            }
        }
        Ok(superlative(op, keyed))
    }

    /// `{x : (x, y) in b, y in arg}`
    fn join(&mut self, b: &Lf, arg: &Set) -> Result<Set, ExecError> {
        match b {
            Lf::Rel(r) => self
                .w
                .lookup(r, Direction::Reverse, arg)
                .map_err(|_| ExecError::UnknownRelation(r.clone())),
            Lf::Reverse(inner) => self.join_rev(inner, arg),
            Lf::Lambda(x, body) => {
                if chain_of(body, x).is_some() {
                    self.env.push((x.clone(), arg.clone()));
                    let out = self.unary(body);
                    self.env.pop();
                    return out;
                }
                let mut out = Set::new();
                let range = self.var_range(b)?;
                for v in arg.iter().filter(|v| range.contains(v)) {
                    self.env.push((x.clone(), [v.clone()].into_iter().collect()));
                    let r = self.unary(body);
                    self.env.pop();
                    out.extend(r?);
                }
                Ok(out)
            }
            _ => Err(ExecError::TypeFailure(b.canonical())),
        }
    }

    /// `{y : (x, y) in b, x in arg}`
    fn join_rev(&mut self, b: &Lf, arg: &Set) -> Result<Set, ExecError> {
        match b {
            Lf::Rel(r) => self
                .w
                .lookup(r, Direction::Forward, arg)
                .map_err(|_| ExecError::UnknownRelation(r.clone())),
            Lf::Reverse(inner) => self.join(inner, arg),
            Lf::Lambda(x, body) => {
                if let Some(links) = chain_of(body, x) {
                    let mut cur = arg.clone();
                    for link in links {
                        cur = self.join_rev(link, &cur)?;
                    }
                    return Ok(cur);
                }
                let mut out = Set::new();
                for v in self.var_range(b)? {
                    self.env.push((x.clone(), [v.clone()].into_iter().collect()));
                    let r = self.unary(body);
                    self.env.pop();
                    if r?.iter().any(|u| arg.contains(u)) {
                        out.insert(v);
                    }
                }
                Ok(out)
            }
            _ => Err(ExecError::TypeFailure(b.canonical())),
        }
    }

    /// Graph nodes whose kind matches the lambda's variable type.
    fn var_range(&self, lambda: &Lf) -> Result<Set, ExecError> {
        let var_type = match dcs::typecheck(lambda, self.w) {
            Ok(DcsType::Binary(_, to)) => *to,
            _ => return Err(ExecError::TypeFailure(lambda.canonical())),
        };
        Ok(self
            .w
            .nodes()
            .into_iter()
            .filter(|v| match (&var_type, v) {
                (DcsType::RowSet, Value::Row(_)) => true,
                (DcsType::EntitySet(_), Value::Text(_)) => true,
                (DcsType::NumSet, Value::Num(_)) => true,
                (DcsType::DateSet, Value::Date(_)) => true,
                _ => false,
            })
            .collect())
    }
}

/// For a body of the form `b1.b2.(...).x`, the binaries from the outside in.
fn chain_of<'a>(body: &'a Lf, x: &str) -> Option<Vec<&'a Lf>> {
    let mut links = Vec::new();
    let mut cur = body;
    loop {
        match cur {
            Lf::Join(b, u) => {
                if mentions(b, x) {
                    return None;
                }
                links.push(&**b);
                cur = u;
            }
            Lf::VarRef(v) if v == x => return Some(links),
            _ => return None,
        }
    }
}

fn mentions(z: &Lf, x: &str) -> bool {
    let mut found = false;
    z.visit(&mut |s| found |= matches!(s, Lf::VarRef(v) if v == x));
    found
}

fn aggregate(op: AggOp, s: &Set) -> Option<Set> {
    let one = |v: Value| Some([v].into_iter().collect::<Set>());
    if op == AggOp::Count {
        return one(Value::num(s.len() as f64));
    }
    if s.is_empty() {
        return Some(Set::new());
    }
    let nums: Option<Vec<f64>> = s.iter().map(Value::as_num).collect();
    match (op, nums) {
        (AggOp::Sum, Some(ns)) => one(Value::Num(Number::new(ns.iter().sum())?)),
        (AggOp::Avg, Some(ns)) => {
            one(Value::Num(Number::new(ns.iter().sum::<f64>() / ns.len() as f64)?))
        }
        (AggOp::Min | AggOp::Max, _) => {
            let all_dates = s.iter().all(|v| matches!(v, Value::Date(_)));
            let all_nums = s.iter().all(|v| matches!(v, Value::Num(_)));
            if !(all_dates || all_nums) {
                return None;
            }
            let v = if op == AggOp::Min { s.iter().next() } else { s.iter().next_back() };
            one(v?.clone())
        }
        _ => None,
    }
}

fn superlative(op: SupOp, keyed: Vec<(Value, Value)>) -> Option<Set> {
    let all_nums = keyed.iter().all(|(k, _)| matches!(k, Value::Num(_)));
    let all_dates = keyed.iter().all(|(k, _)| matches!(k, Value::Date(_)));
    if !(all_nums || all_dates) {
        return None;
    }
    let best = match op {
        SupOp::Argmax => keyed.iter().map(|(k, _)| k).max(),
        SupOp::Argmin => keyed.iter().map(|(k, _)| k).min(),
    };
    let Some(best) = best.cloned() else {
        return Some(Set::new());
    };
    Some(keyed.into_iter().filter(|(k, _)| *k == best).map(|(_, x)| x).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcs::parse;
    use crate::fixture::olympics_graph;
    use crate::graph::year;

    fn run(s: &str) -> Result<Denotation, ExecError> {
        execute(&parse(s).unwrap(), &olympics_graph())
    }

    fn render(s: &str) -> String {
        run(s).unwrap().render()
    }

    #[test]
    fn operation_table() {
        assert_eq!(render("City.Athens"), "Row#0|Row#3");
        assert_eq!(render("count(City.Athens)"), "2");
        assert_eq!(render("argmax(City.Athens, Index)"), "Row#3");
        assert_eq!(render("sub(204, 201)"), "3");
        assert_eq!(render("City.(Athens | Beijing)"), "Row#0|Row#3|Row#4");
        assert_eq!(render("R[Year].City.Athens"), "1896|2004");
    }

    #[test]
    fn figure_one_gold_forms() {
        assert_eq!(
            run("R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)").unwrap(),
            Denotation::new([year(2004)])
        );
        assert_eq!(
            render("R[City].argmin(Nations.Number.>=.20, Index)"),
            "Paris"
        );
        assert_eq!(
            render("R[Year].argmax(Type.Row, lambda v0 [Nations.Number.v0])"),
            "2008|2012"
        );
        assert_eq!(
            render(
                "sub(R[lambda v0 [Nations.Number.v0]].Year.Number.1900, \
                 R[lambda v0 [Nations.Number.v0]].argmin(Type.Row, Index))"
            ),
            "10"
        );
    }

    #[test]
    fn comparisons() {
        assert_eq!(
            render("(City.Athens & Year.Number.<.1990)"),
            "Row#0"
        );
        assert_eq!(render("Year.Date.=.1900-xx-xx"), "Row#1");
        assert_eq!(render("count(Nations.Number.>.200)"), "3");
        // pivot kind selects the universe members considered
        assert_eq!(render("Year.Date.<.1990"), "");
    }

    #[test]
    fn aggregates() {
        assert_eq!(render("sum(R[lambda v0 [Nations.Number.v0]].City.Athens)"), "215");
        assert_eq!(render("avg(R[lambda v0 [Nations.Number.v0]].City.Athens)"), "107.5");
        assert_eq!(render("max(R[lambda v0 [Year.Date.v0]].Type.Row)"), "2012-xx-xx");
        assert_eq!(render("min(R[lambda v0 [Nations.Number.v0]].Type.Row)"), "12");
        assert_eq!(render("count(City.Nowhere)"), "0");
        assert!(matches!(run("sum(R[City].Type.Row)"), Err(ExecError::TypeFailure(_))));
        assert!(matches!(
            run("avg(R[lambda v0 [Year.Date.v0]].Type.Row)"),
            Err(ExecError::TypeFailure(_))
        ));
    }

    #[test]
    fn arith_errors() {
        assert!(matches!(
            run("sub(R[lambda v0 [Nations.Number.v0]].Type.Row, 1)"),
            Err(ExecError::NonSingletonArith(_))
        ));
        assert!(matches!(run("sub(Athens, 1)"), Err(ExecError::TypeFailure(_))));
        assert_eq!(render("add(2.5, 1)"), "3.5");
    }

    #[test]
    fn join_over_empty_is_empty() {
        assert!(run("City.(Athens & Paris)").unwrap().is_empty());
        assert!(run("R[City].City.(Athens & Paris)").unwrap().is_empty());
    }

    #[test]
    fn next_goes_both_ways() {
        assert_eq!(render("R[City].Next.City.Paris"), "Athens");
        assert_eq!(render("R[City].R[Next].City.Paris"), "St. Louis");
    }

    #[test]
    fn superlative_missing_images_are_dropped() {
        // the last row has no Next edge, so it drops out instead of failing
        assert_eq!(render("argmax(Type.Row, lambda v0 [Nations.Number.v0])"), "Row#4|Row#5");
        assert_eq!(render("argmax(Next.Type.Row, Index)"), "Row#4");
    }

    #[test]
    fn binaries() {
        let w = olympics_graph();
        let rev = execute_binary(&dcs::parse_binary("R[City]").unwrap(), &w).unwrap();
        assert!(rev.contains(&Value::text("Athens"), &Value::Row(0)));
        let lam = execute_binary(&Lf::chain("Year", "Date"), &w).unwrap();
        assert!(lam.contains(&Value::Row(1), &year(1900)));
        assert_eq!(lam.len(), 6);
        let cmp = execute_binary(&Lf::cmp(CmpOp::Lt, Lf::num(1990.0)), &w).unwrap();
        assert!(cmp.contains(&Value::num(14.0), &Value::num(1990.0)));
        assert!(!cmp.contains(&Value::num(2012.0), &Value::num(1990.0)));
        let city = execute_binary(&Lf::rel("City"), &w).unwrap();
        assert_eq!(city.swapped().swapped(), city);
    }

    #[test]
    fn unbound_and_unknown() {
        let w = olympics_graph();
        assert_eq!(
            execute(&Lf::var("x"), &w),
            Err(ExecError::UnboundVariable("x".into()))
        );
        assert_eq!(
            execute(&Lf::join(Lf::rel("Nope"), Lf::text("a")), &w),
            Err(ExecError::UnknownRelation("Nope".into()))
        );
    }
}
