//! The floating parser.
//!
//! Cells are keyed by category and size rather than by token span. Anchored
//! entities seed size-one cells; relations and operations are parameters of
//! the rules and need no anchor. Every rule application adds one to the
//! size, so `Country.Greece` has size 2 and the Root cell holding
//! `R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)` has size 4.
//!
//! ```
//! use tablequery::fixture::olympics_graph;
//! use tablequery::learn::Model;
//! use tablequery::parser::{parse, ParserConfig, Utterance};
//!
//! let w = olympics_graph();
//! let x = Utterance::new("Greece held its last Summer Olympics in which year?");
//! let candidates = parse(&x, &w, &Model::default(), &ParserConfig::default());
//! assert!(candidates
//!     .iter()
//!     .any(|d| d.canonical == "R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)"));
//! ```

mod anchor;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use anchor::{detect_anchors, Anchor, MatchKind, Utterance, MAX_SPAN};

use crate::dcs::{
    self, AggOp, ArithOp, CmpOp, DcsType, LogicalForm as Lf, SupOp,
};
use crate::exec::{self, Denotation};
use crate::feat::{Context, FeatureVector};
use crate::graph::{self, KnowledgeGraph};
use crate::learn::Model;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleSet {
    JoinOnly,
    JoinCount,
    JoinCountSuperlative,
    NoUnionIntersect,
    Full,
}

impl RuleSet {
    pub const ALL: [RuleSet; 5] = [
        RuleSet::JoinOnly,
        RuleSet::JoinCount,
        RuleSet::JoinCountSuperlative,
        RuleSet::NoUnionIntersect,
        RuleSet::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleSet::JoinOnly => "join_only",
            RuleSet::JoinCount => "join_count",
            RuleSet::JoinCountSuperlative => "join_count_superlative",
            RuleSet::NoUnionIntersect => "no_union_intersect",
            RuleSet::Full => "full",
        }
    }

    fn allows(self, tier: Tier) -> bool {
        match self {
            RuleSet::JoinOnly => tier == Tier::Join,
            RuleSet::JoinCount => matches!(tier, Tier::Join | Tier::Count),
            RuleSet::JoinCountSuperlative => {
                matches!(tier, Tier::Join | Tier::Count | Tier::Superlative)
            }
            RuleSet::NoUnionIntersect => tier != Tier::Combine,
            RuleSet::Full => true,
        }
    }
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("unknown rule set {0:?}")]
    UnknownRuleSet(String),
    #[error("beam size must be at least 1")]
    EmptyBeam,
    #[error("maximum size must be at least 1")]
    ZeroMaxSize,
}

impl FromStr for RuleSet {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<RuleSet, ConfigError> {
        RuleSet::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| ConfigError::UnknownRuleSet(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tier {
    Join,
    Count,
    Superlative,
    Aggregate,
    Arith,
    Combine,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParserConfig {
    /// Derivations kept per cell; `usize::MAX` disables the beam.
    pub beam_size: usize,
    pub max_size: usize,
    pub rule_set: RuleSet,
    /// Operations fire only when one of their trigger words occurs.
    pub trigger_words: bool,
    pub pruning: bool,
    /// Also build `!=` comparisons.
    pub not_equal: bool,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            beam_size: 200,
            max_size: 7,
            rule_set: RuleSet::Full,
            trigger_words: false,
            pruning: true,
            not_equal: false,
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.beam_size == 0 {
            return Err(ConfigError::EmptyBeam);
        }
        if self.max_size == 0 {
            return Err(ConfigError::ZeroMaxSize);
        }
        Ok(())
    }
}

/// Words that let an operation fire in trigger-word mode.
pub fn triggers(op: &str) -> &'static [&'static str] {
    match op {
        "count" => &["how", "many", "total", "number"],
        "argmax" => &["most", "last", "highest", "largest", "latest"],
        "argmin" => &["least", "first", "lowest", "smallest", "earliest"],
        "sub" => &["more", "than", "difference", "less", "fewer"],
        "add" => &["combined", "together", "plus"],
        "sum" => &["total", "sum", "combined"],
        "avg" => &["average", "mean"],
        "max" => &["most", "highest", "maximum", "largest", "latest"],
        "min" => &["least", "lowest", "minimum", "smallest", "earliest"],
        _ => &[],
    }
}

/// `Entity` holds anchored values, `Set` holds row sets, `Values` holds any
/// other unary, and `Root` holds finished candidates.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Category {
    Entity,
    Values(DcsType),
    Set,
    Root,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Category::Entity => write!(f, "Entity"),
            Category::Values(t) => write!(f, "Values[{}]", t),
            Category::Set => write!(f, "Set"),
            Category::Root => write!(f, "Root"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Derivation {
    pub lf: Lf,
    pub canonical: String,
    pub category: Category,
    pub size: usize,
    /// Token indices consumed by anchors anywhere below.
    pub anchors_used: BTreeSet<usize>,
    pub children: Vec<Arc<Derivation>>,
    pub denotation: Denotation,
    pub partial_score: f64,
    /// All feature families; filled for Root derivations only.
    pub features: FeatureVector,
    /// Model score over `features` for Root derivations, the partial score
    /// otherwise.
    pub score: f64,
}

/// Candidate logical forms for `x`, best first by model score then by
/// canonical text.
pub fn parse(x: &Utterance, w: &KnowledgeGraph, model: &Model, cfg: &ParserConfig) -> Vec<Derivation> {
    parse_in(&Context::new(x, w), model, cfg)
}

pub fn parse_in(ctx: &Context<'_>, model: &Model, cfg: &ParserConfig) -> Vec<Derivation> {
    let mut chart = Chart::new(ctx, model, cfg);
    chart.fill();
    chart.roots()
}

/// `score<TAB>size<TAB>form<TAB>denotation` per candidate.
pub fn dump_candidates(candidates: &[Derivation]) -> String {
    let mut out = String::new();
    for d in candidates {
        out.push_str(&format!(
            "{:.6}\t{}\t{}\t{}\n",
            d.score,
            d.size,
            d.canonical,
            d.denotation.render()
        ));
    }
    out
}

/// Whether a form is invalid or redundant: it fails to type check, a closed
/// sub-form executes to nothing, an aggregate or superlative ranges over a
/// single value, a relation is joined with its own reverse, or a sub-form
/// is a roundabout way of writing all rows (see [`redundant`]).
pub fn prunable(z: &Lf, w: &KnowledgeGraph) -> bool {
    if dcs::typecheck(z, w).is_err() {
        return true;
    }
    let mut bad = false;
    let free = free_variable_forms(z);
    z.visit(&mut |s| {
        if bad || s.arity() != dcs::Arity::Unary || free.contains(&(s as *const Lf)) {
            return;
        }
        if reverse_join(s) {
            bad = true;
            return;
        }
        if matches!(s, Lf::Cmp(..)) {
            return;
        }
        match exec::execute(s, w) {
            Err(_) => bad = true,
            Ok(d) if d.is_empty() => bad = true,
            Ok(d) => {
                if let Lf::Aggregate(_, u) | Lf::Superlative(_, u, _) = s {
                    bad |= exec::execute(u, w).map_or(true, |d| d.len() == 1);
                }
                bad |= redundant(s, &d, w);
            }
        }
    });
    bad
}

/// Sub-forms (by address) that mention a variable bound above them.
fn free_variable_forms(z: &Lf) -> BTreeSet<*const Lf> {
    fn walk(z: &Lf, out: &mut BTreeSet<*const Lf>) -> bool {
        let free = match z {
            Lf::VarRef(_) => true,
            Lf::Entity(_) | Lf::Rel(_) => false,
            Lf::Lambda(_, b) => {
                walk(b, out);
                false
            }
            Lf::Cmp(_, a) | Lf::Reverse(a) | Lf::Aggregate(_, a) => walk(a, out),
            Lf::Join(a, b)
            | Lf::Union(a, b)
            | Lf::Intersect(a, b)
            | Lf::Superlative(_, a, b)
            | Lf::Arith(_, a, b) => {
                let fa = walk(a, out);
                let fb = walk(b, out);
                fa || fb
            }
        };
        if free {
            out.insert(z as *const Lf);
        }
        free
    }
    let mut out = BTreeSet::new();
    walk(z, &mut out);
    out
}

fn all_rows() -> Lf {
    Lf::join(Lf::rel(graph::TYPE), Lf::text(graph::ROW_ENTITY))
}

fn is_next(b: &Lf) -> bool {
    match b {
        Lf::Rel(r) => r == graph::NEXT,
        Lf::Reverse(a) => matches!(&**a, Lf::Rel(r) if r == graph::NEXT),
        _ => false,
    }
}

/// A form equivalent to a smaller one: a row set other than `Type.Row`
/// that holds every row, a union or intersection with `Type.Row`, or two
/// `Next` steps in a row.
pub fn redundant(z: &Lf, den: &Denotation, w: &KnowledgeGraph) -> bool {
    match z {
        Lf::Union(a, b) | Lf::Intersect(a, b) if **a == all_rows() || **b == all_rows() => {
            return true
        }
        Lf::Join(b, u) if is_next(b) => {
            if let Lf::Join(c, _) = &**u {
                if is_next(c) {
                    return true;
                }
            }
        }
        _ => {}
    }
    den.len() == w.num_rows()
        && den.iter().all(|v| matches!(v, Value::Row(_)))
        && *z != all_rows()
}

/// `R[b].b.u` or `b.R[b].u`, where `b` is a relation or a normalized chain
/// `lambda v0 [c.Number.v0]` spelled out as `c.Number`.
fn reverse_join(z: &Lf) -> bool {
    let Lf::Join(outer, u) = z else { return false };
    let Lf::Join(inner, rest) = &**u else { return false };
    match (&**outer, &**inner) {
        (Lf::Reverse(a), b) | (b, Lf::Reverse(a)) if **a == *b => return true,
        _ => {}
    }
    if let Lf::Reverse(a) = &**outer {
        if let (Some((c, n)), Lf::Join(n2, _)) = (chain_parts(a), &**rest) {
            return c == &**inner && n == &**n2;
        }
    }
    if let (Lf::Join(r, _), Lf::Rel(_)) = (&**rest, &**outer) {
        if let Lf::Reverse(a) = &**r {
            if let Some((c, n)) = chain_parts(a) {
                return c == &**outer && n == &**inner;
            }
        }
    }
    false
}

/// `(c, n)` for `lambda x [c.n.x]`.
fn chain_parts(b: &Lf) -> Option<(&Lf, &Lf)> {
    let Lf::Lambda(x, body) = b else { return None };
    let Lf::Join(c, rest) = &**body else { return None };
    let Lf::Join(n, v) = &**rest else { return None };
    match &**v {
        Lf::VarRef(y) if y == x => Some((&**c, &**n)),
        _ => None,
    }
}

fn number_chain(column: &str) -> Lf {
    Lf::lambda(
        "v0",
        Lf::join(Lf::rel(column), Lf::join(Lf::rel(graph::NUMBER), Lf::var("v0"))),
    )
}

fn date_chain(column: &str) -> Lf {
    Lf::lambda(
        "v0",
        Lf::join(Lf::rel(column), Lf::join(Lf::rel(graph::DATE), Lf::var("v0"))),
    )
}

type CellKey = (usize, String);

/// A unary-to-unary step fixed by the graph schema, e.g. `R[City]` taking
/// row sets to cities.
struct Step {
    /// Binaries applied innermost first.
    path: Vec<Lf>,
    op: Option<CmpOp>,
    output: Category,
}

impl Step {
    fn wrap(&self, z: &Lf) -> Lf {
        let mut lf = match self.op {
            Some(op) => Lf::cmp(op, z.clone()),
            None => z.clone(),
        };
        for b in &self.path {
            lf = Lf::join(b.clone(), lf);
        }
        lf
    }

    fn apply(&self, den: &Denotation, w: &KnowledgeGraph) -> Option<Denotation> {
        let mut cur = match self.op {
            Some(op) => exec::compare(op, den, w),
            None => den.clone(),
        };
        for b in &self.path {
            cur = exec::join(b, &cur, w).ok()?;
        }
        Some(cur)
    }

}

struct Chart<'c> {
    ctx: &'c Context<'c>,
    model: &'c Model,
    cfg: &'c ParserConfig,
    words: BTreeSet<String>,
    cells: BTreeMap<CellKey, Vec<Arc<Derivation>>>,
    /// Joins out of row sets.
    from_rows: Vec<Step>,
    /// Joins into row sets, keyed by the argument type they accept.
    to_rows: Vec<(DcsType, Step)>,
    /// Comparison joins into row sets, for anchored numbers and dates.
    compared: Vec<(DcsType, Step)>,
    superlative_keys: Vec<Lf>,
    /// Per predicate: summed `pp::lex` weight and whether its name is spelled.
    predicate_scores: RefCell<HashMap<String, (f64, bool)>>,
}

struct Group<'a> {
    set: bool,
    ty: DcsType,
    members: Vec<(usize, &'a Arc<Derivation>)>,
}

struct Proposal {
    lf: Lf,
    category: Category,
    denotation: Denotation,
    children: Vec<Arc<Derivation>>,
    /// Tokens of the anchor this proposal comes straight from.
    tokens: BTreeSet<usize>,
}

impl<'c> Chart<'c> {
    fn new(ctx: &'c Context<'c>, model: &'c Model, cfg: &'c ParserConfig) -> Chart<'c> {
        let w = ctx.w;
        let step = |path: Vec<Lf>, op, output| Step { path, op, output };
        let mut from_rows = vec![
            step(vec![Lf::rel(graph::NEXT)], None, Category::Set),
            step(vec![Lf::reverse(Lf::rel(graph::NEXT))], None, Category::Set),
        ];
        let mut to_rows = Vec::new();
        let mut compared = Vec::new();
        let mut superlative_keys = vec![Lf::rel(graph::INDEX)];
        let mut ops = CmpOp::ORDERING.to_vec();
        if cfg.not_equal {
            ops.push(CmpOp::Ne);
        }
        for c in w.columns() {
            let kinds = w.column_kinds(c);
            from_rows.push(step(
                vec![Lf::reverse(Lf::rel(c))],
                None,
                Category::Values(DcsType::entities(c)),
            ));
            to_rows.push((DcsType::entities(c), step(vec![Lf::rel(c)], None, Category::Set)));
            let mut normalized = Vec::new();
            if kinds.numbers {
                normalized.push((DcsType::NumSet, graph::NUMBER, number_chain(c)));
            }
            if kinds.dates {
                normalized.push((DcsType::DateSet, graph::DATE, date_chain(c)));
            }
            for (ty, norm, chain) in normalized {
                from_rows.push(step(
                    vec![Lf::reverse(chain.clone())],
                    None,
                    Category::Values(ty.clone()),
                ));
                let path = vec![Lf::rel(norm), Lf::rel(c)];
                to_rows.push((ty.clone(), step(path.clone(), None, Category::Set)));
                for &op in &ops {
                    compared.push((ty.clone(), step(path.clone(), Some(op), Category::Set)));
                }
                superlative_keys.push(chain);
            }
        }
        Chart {
            ctx,
            model,
            cfg,
            words: ctx.utterance.words().into_iter().map(str::to_string).collect(),
            cells: BTreeMap::new(),
            from_rows,
            to_rows,
            compared,
            superlative_keys,
            predicate_scores: RefCell::new(HashMap::new()),
        }
    }

    /// Equal to the model score of the partial features of `z`.
    fn partial_score(&self, z: &Lf) -> f64 {
        let mut cache = self.predicate_scores.borrow_mut();
        let preds: BTreeSet<String> = z.predicates().iter().map(|p| p.name()).collect();
        let mut total = 0.0;
        let mut spelled = false;
        for p in preds {
            let (lex, hit) = *cache.entry(p).or_insert_with_key(|p| {
                let pf = self.ctx.predicate_features(p);
                (pf.names.iter().map(|n| self.model.weight(n)).sum(), pf.spelled)
            });
            total += lex;
            spelled |= hit;
        }
        if spelled {
            total += self.model.weight("pp::unlex::phrase=predicate");
        }
        for n in self.ctx.missing(z) {
            total += self.model.weight(n);
        }
        total
    }

    fn w(&self) -> &'c KnowledgeGraph {
        self.ctx.w
    }

    fn fires(&self, tier: Tier, op: &str) -> bool {
        self.cfg.rule_set.allows(tier)
            && (!self.cfg.trigger_words
                || triggers(op).is_empty()
                || triggers(op).iter().any(|t| self.words.contains(*t)))
    }

    fn fill(&mut self) {
        for size in 1..=self.cfg.max_size {
            let mut fresh: BTreeMap<String, Vec<Derivation>> = BTreeMap::new();
            let proposals = if size == 1 {
                self.base()
            } else {
                let mut p = self.unary_rules(size - 1);
                p.extend(self.binary_rules(size));
                p
            };
            for p in proposals {
                let d = self.realize(p, size);
                fresh.entry(d.category.to_string()).or_default().push(d);
            }
            for (label, mut ds) in fresh {
                ds.sort_by(|a, b| {
                    b.partial_score
                        .total_cmp(&a.partial_score)
                        .then_with(|| a.canonical.cmp(&b.canonical))
                });
                let mut seen = BTreeSet::new();
                ds.retain(|d| seen.insert(d.canonical.clone()));
                ds.truncate(self.cfg.beam_size);
                self.cells
                    .insert((size, label), ds.into_iter().map(Arc::new).collect());
            }
        }
    }

    fn cells_of_size(&self, size: usize) -> impl Iterator<Item = &Arc<Derivation>> {
        self.cells
            .range((size, String::new())..(size + 1, String::new()))
            .flat_map(|(_, ds)| ds.iter())
    }

    fn keep(&self, lf: &Lf, den: &Denotation) -> bool {
        !(self.cfg.pruning && (den.is_empty() || redundant(lf, den, self.w())))
    }

    /// Aggregates and superlatives over one value are redundant.
    fn spread(&self, arg: &Derivation) -> bool {
        !(self.cfg.pruning && arg.denotation.len() == 1)
    }

    fn base(&self) -> Vec<Proposal> {
        let mut out: Vec<Proposal> = self
            .ctx
            .anchors
            .iter()
            .map(|a| Proposal {
                lf: a.lf(),
                category: Category::Entity,
                denotation: Denotation::new([a.value.clone()]),
                children: Vec::new(),
                tokens: a.tokens().collect(),
            })
            .collect();
        let rows = Lf::join(Lf::rel(graph::TYPE), Lf::text(graph::ROW_ENTITY));
        out.push(Proposal {
            denotation: exec::execute(&rows, self.w()).unwrap_or_default(),
            lf: rows,
            category: Category::Set,
            children: Vec::new(),
            tokens: BTreeSet::new(),
        });
        out
    }

    fn unary_rules(&self, size: usize) -> Vec<Proposal> {
        let w = self.w();
        let mut out = Vec::new();
        for d in self.cells_of_size(size) {
            let mut push = |lf: Lf, category: Category, denotation: Denotation| {
                if self.keep(&lf, &denotation) {
                    out.push(Proposal {
                        lf,
                        category,
                        denotation,
                        children: vec![Arc::clone(d)],
                        tokens: BTreeSet::new(),
                    });
                }
            };
            let z = &d.lf;
            let ty = self.type_of(d);
            let steps: Vec<&Step> = match &d.category {
                Category::Set => self.from_rows.iter().collect(),
                Category::Entity | Category::Values(_) => {
                    let mut s: Vec<&Step> = self
                        .to_rows
                        .iter()
                        .filter(|(t, _)| t.accepts(&ty))
                        .map(|(_, s)| s)
                        .collect();
                    if d.category == Category::Entity {
                        s.extend(self.compared.iter().filter(|(t, _)| *t == ty).map(|(_, s)| s));
                    }
                    s
                }
                Category::Root => Vec::new(),
            };
            if self.fires(Tier::Join, "") {
                for step in steps {
                    let lf = step.wrap(z);
                    if self.cfg.pruning && step.op.is_none() && reverse_join(&lf) {
                        continue;
                    }
                    if let Some(den) = step.apply(&d.denotation, w) {
                        push(lf, step.output.clone(), den);
                    }
                }
            }
            if !self.spread(d) {
                continue;
            }
            if self.fires(Tier::Count, "count") {
                let den = Denotation::new([crate::value::Value::num(d.denotation.len() as f64)]);
                push(Lf::aggregate(AggOp::Count, z.clone()), Category::Values(DcsType::NumSet), den);
            }
            if d.category == Category::Set && !matches!(z, Lf::Superlative(..)) {
                for op in SupOp::ALL {
                    if !self.fires(Tier::Superlative, op.name()) {
                        continue;
                    }
                    for key in &self.superlative_keys {
                        if let Ok(den) = exec::superlative_of(op, &d.denotation, key, w) {
                            push(Lf::superlative(op, z.clone(), key.clone()), Category::Set, den);
                        }
                    }
                }
            } else {
                for op in [AggOp::Sum, AggOp::Avg, AggOp::Min, AggOp::Max] {
                    let typed = match op {
                        AggOp::Sum | AggOp::Avg => ty == DcsType::NumSet,
                        _ => ty.is_ordered(),
                    };
                    if !typed || !self.fires(Tier::Aggregate, op.name()) {
                        continue;
                    }
                    if let Ok(den) = exec::aggregate_of(op, &d.denotation) {
                        push(Lf::aggregate(op, z.clone()), Category::Values(ty.clone()), den);
                    }
                }
            }
        }
        out
    }

    /// Derivations of one size grouped by static type, each tagged with
    /// its position in a fixed order over the whole size.
    fn groups(&self, size: usize) -> Vec<Group<'_>> {
        let mut groups: Vec<Group<'_>> = Vec::new();
        let mut index = 0;
        for (_, ds) in self.cells.range((size, String::new())..(size + 1, String::new())) {
            for d in ds {
                let ty = self.type_of(d);
                let set = d.category == Category::Set;
                match groups.iter_mut().find(|g| g.set == set && g.ty == ty) {
                    Some(g) => g.members.push((index, d)),
                    None => groups.push(Group {
                        set,
                        ty,
                        members: vec![(index, d)],
                    }),
                }
                index += 1;
            }
        }
        groups
    }

    fn binary_rules(&self, size: usize) -> Vec<Proposal> {
        let mut out = Vec::new();
        let combine = self.fires(Tier::Combine, "");
        let sub = self.fires(Tier::Arith, "sub");
        let add = self.fires(Tier::Arith, "add");
        if !(combine || sub || add) {
            return out;
        }
        for s1 in 1..size - 1 {
            let s2 = size - 1 - s1;
            let left = self.groups(s1);
            let right = self.groups(s2);
            for ga in &left {
                for gb in &right {
                    let joint = if ga.set && gb.set {
                        Some(Category::Set)
                    } else if !ga.set && !gb.set {
                        ga.ty.unify(&gb.ty).map(Category::Values)
                    } else {
                        None
                    };
                    let numeric = ga.ty == DcsType::NumSet && gb.ty == DcsType::NumSet;
                    let combined = if combine { joint } else { None };
                    if combined.is_none() && !(numeric && (sub || add)) {
                        continue;
                    }
                    for &(i, a) in &ga.members {
                        for &(j, b) in &gb.members {
                            if !a.anchors_used.is_disjoint(&b.anchors_used) {
                                continue;
                            }
                            let ordered = s1 < s2 || (s1 == s2 && i < j);
                            let mut push = |lf: Lf, category: Category, denotation: Denotation| {
                                if self.keep(&lf, &denotation) {
                                    out.push(Proposal {
                                        lf,
                                        category,
                                        denotation,
                                        children: vec![Arc::clone(a), Arc::clone(b)],
                                        tokens: BTreeSet::new(),
                                    });
                                }
                            };
                            if let (Some(category), true) = (&combined, ordered) {
                                let (x, y) = (a.denotation.values(), b.denotation.values());
                                push(
                                    Lf::union(a.lf.clone(), b.lf.clone()),
                                    category.clone(),
                                    x.union(y).cloned().collect(),
                                );
                                push(
                                    Lf::intersect(a.lf.clone(), b.lf.clone()),
                                    category.clone(),
                                    x.intersection(y).cloned().collect(),
                                );
                            }
                            if numeric {
                                let mut arith = |op: ArithOp| {
                                    if let Ok(den) = exec::arith_of(op, &a.denotation, &b.denotation) {
                                        push(
                                            Lf::arith(op, a.lf.clone(), b.lf.clone()),
                                            Category::Values(DcsType::NumSet),
                                            den,
                                        );
                                    }
                                };
                                if sub {
                                    arith(ArithOp::Sub);
                                }
                                if add && ordered {
                                    arith(ArithOp::Add);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn type_of(&self, d: &Derivation) -> DcsType {
        match &d.category {
            Category::Values(t) => t.clone(),
            Category::Set | Category::Root => DcsType::RowSet,
            Category::Entity => {
                dcs::typecheck(&d.lf, self.w()).unwrap_or_else(|_| DcsType::any_entity())
            }
        }
    }

    fn realize(&self, p: Proposal, size: usize) -> Derivation {
        let mut anchors_used = p.tokens;
        for c in &p.children {
            anchors_used.extend(c.anchors_used.iter().copied());
        }
        let partial_score = self.partial_score(&p.lf);
        Derivation {
            canonical: p.lf.canonical(),
            lf: p.lf,
            category: p.category,
            size,
            anchors_used,
            children: p.children,
            denotation: p.denotation,
            partial_score,
            features: FeatureVector::new(),
            score: partial_score,
        }
    }

    /// Promote every value-like derivation outside the Entity cells to Root.
    fn roots(&self) -> Vec<Derivation> {
        let mut best: BTreeMap<String, Derivation> = BTreeMap::new();
        for ds in self.cells.values() {
            for d in ds.iter().filter(|d| matches!(d.category, Category::Values(_))) {
                if best.contains_key(&d.canonical) {
                    continue;
                }
                let features = self.ctx.full(&d.lf, &d.denotation);
                let score = self.model.score(&features);
                best.insert(
                    d.canonical.clone(),
                    Derivation {
                        lf: d.lf.clone(),
                        canonical: d.canonical.clone(),
                        category: Category::Root,
                        size: d.size,
                        anchors_used: d.anchors_used.clone(),
                        children: vec![Arc::clone(d)],
                        denotation: d.denotation.clone(),
                        partial_score: d.partial_score,
                        features,
                        score,
                    },
                );
            }
        }
        let mut out: Vec<Derivation> = best.into_values().collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.canonical.cmp(&b.canonical))
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcs::parse as read;
    use crate::fixture::olympics_graph;

    fn candidates(x: &str, cfg: &ParserConfig) -> Vec<Derivation> {
        parse(&Utterance::new(x), &olympics_graph(), &Model::default(), cfg)
    }

    #[test]
    fn finds_the_worked_derivation() {
        let ds = candidates(
            "Greece held its last Summer Olympics in which year?",
            &ParserConfig::default(),
        );
        let gold = ds
            .iter()
            .find(|d| d.canonical == "R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)")
            .expect("gold form among candidates");
        assert_eq!(gold.size, 4);
        assert_eq!(gold.denotation.render(), "2004-xx-xx");
    }

    #[test]
    fn join_count_has_no_superlatives() {
        let cfg = ParserConfig {
            rule_set: RuleSet::JoinCount,
            ..ParserConfig::default()
        };
        let ds = candidates("Greece held its last Summer Olympics in which year?", &cfg);
        assert!(!ds.is_empty());
        assert!(ds.iter().all(|d| !d.canonical.contains("argm")));
    }

    #[test]
    fn floating_only_candidates() {
        let cfg = ParserConfig {
            max_size: 4,
            ..ParserConfig::default()
        };
        let ds = candidates("", &cfg);
        let count = ds.iter().find(|d| d.canonical == "count(Type.Row)").unwrap();
        assert_eq!(count.denotation.render(), "6");
    }

    #[test]
    fn sizes_never_exceed_the_form_size() {
        for d in candidates("how many times was Athens the host city", &ParserConfig::default()) {
            assert!(d.size <= 7);
            assert!(d.size <= d.lf.size(), "{} {}", d.size, d.canonical);
        }
    }

    #[test]
    fn anchors_are_not_shared() {
        let ds = candidates("Athens or Athens", &ParserConfig::default());
        assert!(ds.iter().all(|d| d.canonical != "(Athens | Athens)"));
        let ds = candidates("what is 204 minus 201", &ParserConfig::default());
        let d = ds.iter().find(|d| d.canonical == "sub(204, 201)").unwrap();
        assert_eq!(d.denotation.render(), "3");
        assert!(ds.iter().all(|d| d.canonical != "sub(204, 204)"));
    }

    #[test]
    fn pruning_examples() {
        let w = olympics_graph();
        let p = |s: &str| prunable(&read(s).unwrap(), &w);
        assert!(p("argmax(Year.Number.2012, Index)"));
        assert!(p("R[City].City.Beijing"));
        assert!(p("R[lambda v0 [Nations.Number.v0]].Nations.Number.204"));
        assert!(p("R[City].Nations.Number.R[lambda v0 [Nations.Number.v0]].City.Athens"));
        assert!(p("Year.Number.24"));
        assert!(p("(Beijing | Greece)"));
        assert!(!p("City.Athens"));
        assert!(!p("R[lambda v0 [Year.Date.v0]].argmax(Country.Greece, Index)"));
        assert!(!p("sub(R[lambda v0 [Nations.Number.v0]].Year.Number.1900, R[lambda v0 [Nations.Number.v0]].argmin(Type.Row, Index))"));
    }

    #[test]
    fn trigger_words_gate_operations() {
        let cfg = ParserConfig {
            trigger_words: true,
            ..ParserConfig::default()
        };
        let ds = candidates("which city hosted in Greece", &cfg);
        assert!(ds.iter().all(|d| !d.canonical.contains("count(")));
        let ds = candidates("how many cities in Greece", &cfg);
        assert!(ds.iter().any(|d| d.canonical.contains("count(")));
    }

    #[test]
    fn rule_sets_round_trip() {
        for r in RuleSet::ALL {
            assert_eq!(r.name().parse::<RuleSet>().unwrap(), r);
        }
        assert!("bogus".parse::<RuleSet>().is_err());
    }

    #[test]
    fn dump_line_shape() {
        let ds = candidates("Greece", &ParserConfig { max_size: 3, ..ParserConfig::default() });
        let dump = dump_candidates(&ds);
        let first = dump.lines().next().unwrap();
        assert_eq!(first.split('\t').count(), 4);
    }
}
