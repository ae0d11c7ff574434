//! Lambda DCS logical forms.
//!
//! A unary denotes a set of values and a binary a set of pairs. Binaries are
//! relations (`City`, `Next`, `Index`, `Number`, ...), reversed binaries
//! `R[b]`, and lambda abstractions `lambda v0 [Year.Date.v0]`. Everything
//! else is a unary. Comparisons carry their pivot, so `<.1990` is the unary of
//! normalized values below 1990.

mod syntax;
mod types;

use std::collections::BTreeSet;
use std::fmt;

pub use syntax::{parse, parse_binary, ParseError};
pub use types::{typecheck, DcsType, TypeError};

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub const ORDERING: [CmpOp; 4] = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggOp {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggOp {
    pub const ALL: [AggOp; 5] = [AggOp::Count, AggOp::Sum, AggOp::Avg, AggOp::Min, AggOp::Max];

    pub fn name(self) -> &'static str {
        match self {
            AggOp::Count => "count",
            AggOp::Sum => "sum",
            AggOp::Avg => "avg",
            AggOp::Min => "min",
            AggOp::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SupOp {
    Argmax,
    Argmin,
}

impl SupOp {
    pub const ALL: [SupOp; 2] = [SupOp::Argmax, SupOp::Argmin];

    pub fn name(self) -> &'static str {
        match self {
            SupOp::Argmax => "argmax",
            SupOp::Argmin => "argmin",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
}

impl ArithOp {
    pub fn name(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Unary,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogicalForm {
    Entity(Value),
    Rel(String),
    Cmp(CmpOp, Box<LogicalForm>),
    Join(Box<LogicalForm>, Box<LogicalForm>),
    Union(Box<LogicalForm>, Box<LogicalForm>),
    Intersect(Box<LogicalForm>, Box<LogicalForm>),
    Reverse(Box<LogicalForm>),
    Lambda(String, Box<LogicalForm>),
    VarRef(String),
    Aggregate(AggOp, Box<LogicalForm>),
    Superlative(SupOp, Box<LogicalForm>, Box<LogicalForm>),
    Arith(ArithOp, Box<LogicalForm>, Box<LogicalForm>),
}

use LogicalForm as Lf;

// Constructors, mostly to keep tests and rule code readable.
impl LogicalForm {
    pub fn entity(v: Value) -> Lf {
        Lf::Entity(v)
    }

    pub fn text(s: &str) -> Lf {
        Lf::Entity(Value::text(s))
    }

    pub fn num(n: f64) -> Lf {
        Lf::Entity(Value::num(n))
    }

    pub fn rel(name: &str) -> Lf {
        Lf::Rel(name.to_string())
    }

    pub fn join(b: Lf, u: Lf) -> Lf {
        Lf::Join(Box::new(b), Box::new(u))
    }

    pub fn cmp(op: CmpOp, pivot: Lf) -> Lf {
        Lf::Cmp(op, Box::new(pivot))
    }

    pub fn union(a: Lf, b: Lf) -> Lf {
        Lf::Union(Box::new(a), Box::new(b))
    }

    pub fn intersect(a: Lf, b: Lf) -> Lf {
        Lf::Intersect(Box::new(a), Box::new(b))
    }

    pub fn reverse(b: Lf) -> Lf {
        Lf::Reverse(Box::new(b))
    }

    pub fn lambda(var: &str, body: Lf) -> Lf {
        Lf::Lambda(var.to_string(), Box::new(body))
    }

    pub fn var(name: &str) -> Lf {
        Lf::VarRef(name.to_string())
    }

    pub fn aggregate(op: AggOp, u: Lf) -> Lf {
        Lf::Aggregate(op, Box::new(u))
    }

    pub fn superlative(op: SupOp, u: Lf, b: Lf) -> Lf {
        Lf::Superlative(op, Box::new(u), Box::new(b))
    }

    pub fn arith(op: ArithOp, a: Lf, b: Lf) -> Lf {
        Lf::Arith(op, Box::new(a), Box::new(b))
    }

    /// `lambda x [r1.r2.x]`: the composition of two relations.
    pub fn chain(outer: &str, inner: &str) -> Lf {
        Lf::lambda("x", Lf::join(Lf::rel(outer), Lf::join(Lf::rel(inner), Lf::var("x"))))
    }

    pub fn arity(&self) -> Arity {
        match self {
            Lf::Rel(_) | Lf::Reverse(_) | Lf::Lambda(..) => Arity::Binary,
            _ => Arity::Unary,
        }
    }

    /// Number of rule applications that build this form: leaves count one,
    /// each combining node adds one over its children, a comparison adds one
    /// for its operator over the pivot.
    pub fn size(&self) -> usize {
        match self {
            Lf::Entity(_) | Lf::Rel(_) | Lf::VarRef(_) => 1,
            Lf::Cmp(_, p) => 1 + p.size(),
            Lf::Join(a, b) | Lf::Union(a, b) | Lf::Intersect(a, b) => a.size() + b.size() + 1,
            Lf::Superlative(_, a, b) | Lf::Arith(_, a, b) => a.size() + b.size() + 1,
            Lf::Reverse(b) | Lf::Lambda(_, b) | Lf::Aggregate(_, b) => b.size() + 1,
        }
    }

    /// Deterministic text; alpha-equivalent forms and forms differing only
    /// in the operand order of a union or intersection render identically.
    /// The rendering is accepted by [`parse`].
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        render(self, &mut Vec::new(), &mut out);
        out
    }

    /// Relation names, operator symbols, and entity values, in traversal
    /// order (duplicates kept). A reversed relation contributes `R[r]` as
    /// well as `r`.
    pub fn predicates(&self) -> Vec<Predicate> {
        let mut out = Vec::new();
        self.visit(&mut |z| match z {
            Lf::Entity(v) => out.push(Predicate::Entity(v.clone())),
            Lf::Rel(r) => out.push(Predicate::Relation(r.clone())),
            Lf::Cmp(op, _) => out.push(Predicate::Op(op.symbol())),
            Lf::Aggregate(op, _) => out.push(Predicate::Op(op.name())),
            Lf::Superlative(op, ..) => out.push(Predicate::Op(op.name())),
            Lf::Arith(op, ..) => out.push(Predicate::Op(op.name())),
            Lf::Union(..) => out.push(Predicate::Op("or")),
            Lf::Intersect(..) => out.push(Predicate::Op("and")),
            Lf::Reverse(b) => match &**b {
                Lf::Rel(r) => out.push(Predicate::Relation(format!("R[{}]", r))),
                _ => out.push(Predicate::Op("R")),
            },
            _ => {}
        });
        out
    }

    pub fn entities(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        self.visit(&mut |z| {
            if let Lf::Entity(v) = z {
                out.insert(v.clone());
            }
        });
        out
    }

    pub fn relations(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |z| {
            if let Lf::Rel(r) = z {
                out.insert(r.clone());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Lf)) {
        f(self);
        match self {
            Lf::Entity(_) | Lf::Rel(_) | Lf::VarRef(_) => {}
            Lf::Cmp(_, a) | Lf::Reverse(a) | Lf::Lambda(_, a) | Lf::Aggregate(_, a) => a.visit(f),
            Lf::Join(a, b)
            | Lf::Union(a, b)
            | Lf::Intersect(a, b)
            | Lf::Superlative(_, a, b)
            | Lf::Arith(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// One predicate occurring in a logical form, for feature extraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Predicate {
    Relation(String),
    Op(&'static str),
    Entity(Value),
}

impl Predicate {
    pub fn name(&self) -> String {
        match self {
            Predicate::Relation(r) => r.clone(),
            Predicate::Op(o) => o.to_string(),
            Predicate::Entity(v) => v.render(),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "R", "lambda", "count", "sum", "avg", "min", "max", "argmax", "argmin", "add", "sub",
];

fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_var_like(s: &str) -> bool {
    s.len() > 1 && s.starts_with('v') && s[1..].bytes().all(|b| b.is_ascii_digit())
}

pub(crate) fn render_entity(v: &Value) -> String {
    match v {
        Value::Text(s) if is_plain_ident(s) && !KEYWORDS.contains(&s.as_str()) && !is_var_like(s) => {
            s.clone()
        }
        Value::Text(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
            out
        }
        other => other.render(),
    }
}

fn render(z: &Lf, vars: &mut Vec<String>, out: &mut String) {
    match z {
        Lf::Entity(v) => out.push_str(&render_entity(v)),
        Lf::Rel(r) => out.push_str(r),
        Lf::VarRef(x) => match vars.iter().rposition(|v| v == x) {
            Some(i) => {
                out.push('v');
                out.push_str(&i.to_string());
            }
            // free variables only arise in ill-formed trees
            None => out.push_str(x),
        },
        Lf::Cmp(op, p) => {
            out.push_str(op.symbol());
            out.push('.');
            render(p, vars, out);
        }
        Lf::Join(b, u) => {
            if matches!(**b, Lf::Lambda(..)) {
                out.push('(');
                render(b, vars, out);
                out.push(')');
            } else {
                render(b, vars, out);
            }
            out.push('.');
            render(u, vars, out);
        }
        Lf::Union(a, b) | Lf::Intersect(a, b) => {
            let sym = if matches!(z, Lf::Union(..)) { " | " } else { " & " };
            let mut left = String::new();
            let mut right = String::new();
            render(a, vars, &mut left);
            render(b, vars, &mut right);
            if right < left {
                std::mem::swap(&mut left, &mut right);
            }
            out.push('(');
            out.push_str(&left);
            out.push_str(sym);
            out.push_str(&right);
            out.push(')');
        }
        Lf::Reverse(b) => {
            out.push_str("R[");
            render(b, vars, out);
            out.push(']');
        }
        Lf::Lambda(x, body) => {
            out.push_str("lambda v");
            out.push_str(&vars.len().to_string());
            out.push_str(" [");
            vars.push(x.clone());
            render(body, vars, out);
            vars.pop();
            out.push(']');
        }
        Lf::Aggregate(op, u) => {
            out.push_str(op.name());
            out.push('(');
            render(u, vars, out);
            out.push(')');
        }
        Lf::Superlative(op, u, b) => {
            out.push_str(op.name());
            out.push('(');
            render(u, vars, out);
            out.push_str(", ");
            render(b, vars, out);
            out.push(')');
        }
        Lf::Arith(op, a, b) => {
            out.push_str(op.name());
            out.push('(');
            render(a, vars, out);
            out.push_str(", ");
            render(b, vars, out);
            out.push(')');
        }
    }
}
