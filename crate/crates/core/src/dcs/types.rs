use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::{AggOp, LogicalForm as Lf};
use crate::graph::{self, KnowledgeGraph};
use crate::value::Value;

/// Static type of a logical form's denotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DcsType {
    RowSet,
    /// Text entities from the given columns. An empty column set means the
    /// column is unknown and matches any column.
    EntitySet(BTreeSet<String>),
    NumSet,
    DateSet,
    Binary(Box<DcsType>, Box<DcsType>),
}

impl DcsType {
    pub fn entities(column: &str) -> DcsType {
        DcsType::EntitySet([column.to_string()].into_iter().collect())
    }

    pub fn any_entity() -> DcsType {
        DcsType::EntitySet(BTreeSet::new())
    }

    fn binary(from: DcsType, to: DcsType) -> DcsType {
        DcsType::Binary(Box::new(from), Box::new(to))
    }

    pub fn is_ordered(&self) -> bool {
        matches!(self, DcsType::NumSet | DcsType::DateSet)
    }

    /// The single originating column, when there is exactly one.
    pub fn column(&self) -> Option<&str> {
        match self {
            DcsType::EntitySet(cols) if cols.len() == 1 => cols.iter().next().map(String::as_str),
            _ => None,
        }
    }

    /// Whether a value of type `other` may fill a slot of this type.
    pub fn accepts(&self, other: &DcsType) -> bool {
        self.unify(other).is_some()
    }

    /// The common type of two operands of a union or intersection.
    pub fn unify(&self, other: &DcsType) -> Option<DcsType> {
        match (self, other) {
            (DcsType::EntitySet(a), DcsType::EntitySet(b)) => {
                if a.is_empty() {
                    Some(other.clone())
                } else if b.is_empty() {
                    Some(self.clone())
                } else {
                    let both: BTreeSet<String> = a.intersection(b).cloned().collect();
                    (!both.is_empty()).then_some(DcsType::EntitySet(both))
                }
            }
            (DcsType::Binary(..), _) | (_, DcsType::Binary(..)) => None,
            (a, b) if a == b => Some(a.clone()),
            _ => None,
        }
    }
}

impl fmt::Display for DcsType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DcsType::RowSet => write!(f, "Row"),
            DcsType::EntitySet(c) if c.is_empty() => write!(f, "Entity"),
            DcsType::EntitySet(c) => {
                let cols: Vec<_> = c.iter().map(String::as_str).collect();
                write!(f, "Entity[{}]", cols.join(","))
            }
            DcsType::NumSet => write!(f, "Num"),
            DcsType::DateSet => write!(f, "Date"),
            DcsType::Binary(a, b) => write!(f, "({} -> {})", a, b),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("type error in {expr}: {reason}")]
pub struct TypeError {
    /// Canonical text of the offending sub-expression.
    pub expr: String,
    pub reason: String,
}

fn fail<T>(z: &Lf, reason: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        expr: z.canonical(),
        reason: reason.into(),
    })
}

type Env = Vec<(String, DcsType)>;

/// Static type of `z` over the schema of `w`.
pub fn typecheck(z: &Lf, w: &KnowledgeGraph) -> Result<DcsType, TypeError> {
    check(z, w, &mut Vec::new())
}

fn binary_parts(t: DcsType, z: &Lf) -> Result<(DcsType, DcsType), TypeError> {
    match t {
        DcsType::Binary(a, b) => Ok((*a, *b)),
        _ => fail(z, "expected a binary"),
    }
}

fn check(z: &Lf, w: &KnowledgeGraph, env: &mut Env) -> Result<DcsType, TypeError> {
    match z {
        Lf::Entity(v) => match v {
            Value::Row(i) if *i < w.num_rows() => Ok(DcsType::RowSet),
            Value::Row(_) => fail(z, "row out of range"),
            Value::Num(_) => Ok(DcsType::NumSet),
            Value::Date(_) => Ok(DcsType::DateSet),
            Value::Text(s) if s == graph::ROW_ENTITY => Ok(DcsType::RowSet),
            Value::Text(_) => match w.columns_of(v) {
                Some(cols) => Ok(DcsType::EntitySet(cols.clone())),
                None => fail(z, "entity does not occur in the table"),
            },
        },
        Lf::Rel(r) => match r.as_str() {
            graph::NEXT => Ok(DcsType::binary(DcsType::RowSet, DcsType::RowSet)),
            graph::TYPE => Ok(DcsType::binary(DcsType::RowSet, DcsType::RowSet)),
            graph::INDEX => Ok(DcsType::binary(DcsType::RowSet, DcsType::NumSet)),
            graph::NUMBER => Ok(DcsType::binary(DcsType::any_entity(), DcsType::NumSet)),
            graph::DATE => Ok(DcsType::binary(DcsType::any_entity(), DcsType::DateSet)),
            c if w.is_column(c) => Ok(DcsType::binary(DcsType::RowSet, DcsType::entities(c))),
            _ => fail(z, "unknown relation"),
        },
        Lf::VarRef(x) => match env.iter().rev().find(|(n, _)| n == x) {
            Some((_, t)) => Ok(t.clone()),
            None => fail(z, "unbound variable"),
        },
        Lf::Cmp(_, p) => {
            let t = check(p, w, env)?;
            if t.is_ordered() {
                Ok(t)
            } else {
                fail(z, format!("comparison pivot has type {}", t))
            }
        }
        Lf::Join(b, u) => {
            let (from, to) = binary_parts(check(b, w, env)?, b)?;
            let tu = check(u, w, env)?;
            if to.accepts(&tu) {
                Ok(from)
            } else {
                fail(z, format!("binary expects {}, argument is {}", to, tu))
            }
        }
        Lf::Union(a, b) | Lf::Intersect(a, b) => {
            let ta = check(a, w, env)?;
            let tb = check(b, w, env)?;
            if ta.arity_binary() || tb.arity_binary() {
                return fail(z, "operands must be unaries");
            }
            ta.unify(&tb)
                .map_or_else(|| fail(z, format!("{} and {} differ", ta, tb)), Ok)
        }
        Lf::Reverse(b) => {
            let (from, to) = binary_parts(check(b, w, env)?, b)?;
            Ok(DcsType::binary(to, from))
        }
        Lf::Lambda(x, body) => {
            let uses = count_uses(body, x);
            if uses != 1 {
                return fail(z, format!("variable used {} times", uses));
            }
            let var_type = match join_over_var(body, x) {
                Some(b) => binary_parts(check(b, w, env)?, b)?.1,
                None => return fail(z, "variable must be the argument of a join"),
            };
            env.push((x.clone(), var_type.clone()));
            let body_type = check(body, w, env);
            env.pop();
            let body_type = body_type?;
            if body_type.arity_binary() {
                return fail(z, "lambda body must be a unary");
            }
            Ok(DcsType::binary(body_type, var_type))
        }
        Lf::Aggregate(op, u) => {
            let t = check(u, w, env)?;
            match (op, &t) {
                (_, DcsType::Binary(..)) => fail(z, "cannot aggregate a binary"),
                (AggOp::Count, _) => Ok(DcsType::NumSet),
                (AggOp::Sum | AggOp::Avg, DcsType::NumSet) => Ok(DcsType::NumSet),
                (AggOp::Min | AggOp::Max, DcsType::NumSet | DcsType::DateSet) => Ok(t),
                _ => fail(z, format!("{} over {}", op.name(), t)),
            }
        }
        Lf::Superlative(_, u, b) => {
            let tu = check(u, w, env)?;
            if !matches!(tu, DcsType::RowSet | DcsType::EntitySet(_)) {
                return fail(z, format!("superlative over {}", tu));
            }
            let (from, to) = binary_parts(check(b, w, env)?, b)?;
            if !from.accepts(&tu) {
                return fail(z, format!("key binary expects {}, set is {}", from, tu));
            }
            if !to.is_ordered() {
                return fail(z, format!("key binary yields {}", to));
            }
            Ok(tu)
        }
        Lf::Arith(_, a, b) => {
            let ta = check(a, w, env)?;
            let tb = check(b, w, env)?;
            if ta == DcsType::NumSet && tb == DcsType::NumSet {
                Ok(DcsType::NumSet)
            } else {
                fail(z, format!("arithmetic on {} and {}", ta, tb))
            }
        }
    }
}

impl DcsType {
    fn arity_binary(&self) -> bool {
        matches!(self, DcsType::Binary(..))
    }
}

fn count_uses(z: &Lf, x: &str) -> usize {
    let mut n = 0;
    z.visit(&mut |s| {
        if matches!(s, Lf::VarRef(v) if v == x) {
            n += 1;
        }
    });
    n
}

/// The binary `b` in the sub-expression `b.x`.
fn join_over_var<'a>(z: &'a Lf, x: &str) -> Option<&'a Lf> {
    match z {
        Lf::Join(b, u) if matches!(&**u, Lf::VarRef(v) if v == x) => Some(b),
        Lf::Entity(_) | Lf::Rel(_) | Lf::VarRef(_) => None,
        Lf::Cmp(_, a) | Lf::Reverse(a) | Lf::Lambda(_, a) | Lf::Aggregate(_, a) => {
            join_over_var(a, x)
        }
        Lf::Join(a, b)
        | Lf::Union(a, b)
        | Lf::Intersect(a, b)
        | Lf::Superlative(_, a, b)
        | Lf::Arith(_, a, b) => join_over_var(a, x).or_else(|| join_over_var(b, x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcs::{parse, ArithOp};
    use crate::fixture;

    fn ty(s: &str) -> Result<DcsType, TypeError> {
        typecheck(&parse(s).unwrap(), &fixture::olympics_graph())
    }

    #[test]
    fn examples() {
        assert!(ty("(Beijing | Greece)").is_err());
        assert_eq!(ty("City.Athens").unwrap(), DcsType::RowSet);
        let sub = Lf::arith(ArithOp::Sub, Lf::num(204.0), Lf::num(201.0));
        assert_eq!(
            typecheck(&sub, &fixture::olympics_graph()).unwrap(),
            DcsType::NumSet
        );
    }

    #[test]
    fn joins_and_normalization() {
        assert_eq!(ty("R[City].Country.Greece").unwrap(), DcsType::entities("City"));
        assert_eq!(ty("Year.Number.<.1990").unwrap(), DcsType::RowSet);
        assert_eq!(ty("Year.Date.1900-xx-xx").unwrap(), DcsType::RowSet);
        assert!(ty("Year.Date.1900").is_err());
        assert!(ty("City.Greece").is_err());
        assert_eq!(ty("Type.Row").unwrap(), DcsType::RowSet);
        assert!(ty("Nope.Athens").is_err());
        assert!(ty("City.Nowhere").is_err());
    }

    #[test]
    fn lambda_types() {
        assert_eq!(
            ty("R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)").unwrap(),
            DcsType::DateSet
        );
        assert_eq!(
            ty("argmax(Type.Row, lambda v0 [Nations.Number.v0])").unwrap(),
            DcsType::RowSet
        );
        // variable used twice
        let z = Lf::lambda(
            "x",
            Lf::union(
                Lf::join(Lf::rel("City"), Lf::var("x")),
                Lf::join(Lf::rel("Country"), Lf::var("x")),
            ),
        );
        assert!(typecheck(&z, &fixture::olympics_graph()).is_err());
        assert!(typecheck(&Lf::var("x"), &fixture::olympics_graph()).is_err());
    }

    #[test]
    fn aggregates_and_superlatives() {
        assert_eq!(ty("count(City.Athens)").unwrap(), DcsType::NumSet);
        assert!(ty("sum(R[City].Type.Row)").is_err());
        assert_eq!(ty("max(R[lambda v0 [Year.Date.v0]].Type.Row)").unwrap(), DcsType::DateSet);
        assert!(ty("avg(R[lambda v0 [Year.Date.v0]].Type.Row)").is_err());
        assert!(ty("argmax(Type.Row, City)").is_err());
        assert!(ty("argmax(2004, Index)").is_err());
        assert!(ty("sub(count(City.Athens), R[City].Type.Row)").is_err());
    }
}
