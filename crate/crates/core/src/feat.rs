//! Sparse binary features over (utterance, graph, logical form, denotation).
//!
//! Families, by name prefix:
//!
//! - `pp::` phrase-predicate: n-gram and predicate pairs, plus an
//!   unlexicalized indicator when an n-gram spells a predicate name.
//! - `mp::` missing-predicate: an anchored entity or a mentioned column that
//!   the form does not use.
//! - `den::` size bin, value type, and originating column of the denotation.
//! - `pd::` phrase-denotation: n-gram and denotation type pairs.
//! - `hd::` headword-denotation: question word or headword with the type.
//!
//! Only `pp::` and `mp::` are available before execution.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::rc::Rc;
use std::sync::Arc;

use crate::dcs::LogicalForm as Lf;
use crate::exec::Denotation;
use crate::graph::KnowledgeGraph;
use crate::parser::{detect_anchors, Anchor, Utterance};
use crate::text;
use crate::value::Value;

pub const FAMILIES: [&str; 5] = ["pp", "mp", "den", "pd", "hd"];

pub const ENTITY_PLACEHOLDER: &str = "<ent>";

const STRING_MATCH: &str = "pp::unlex::phrase=predicate";
const MISSING_ENTITY: &str = "mp::missing-entity";
const MISSING_RELATION: &str = "mp::missing-relation";

const QUESTION_WORDS: [&str; 8] = ["what", "which", "who", "whom", "whose", "when", "where", "how"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector(BTreeMap<Arc<str>, f64>);

impl FeatureVector {
    pub fn new() -> FeatureVector {
        FeatureVector::default()
    }

    pub fn fire(&mut self, name: impl Into<Arc<str>>) {
        self.0.insert(name.into(), 1.0);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (&**k, *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| &**k)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn extend(&mut self, other: FeatureVector) {
        self.0.extend(other.0);
    }

    fn retain(&mut self, keep: impl Fn(&str) -> bool) {
        self.0.retain(|k, _| keep(k));
    }
}

impl fmt::Display for FeatureVector {
    /// `name<TAB>value` lines sorted by name.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.0 {
            writeln!(f, "{}\t{}", k, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeadwordInfo {
    pub q: Option<String>,
    pub h: Option<String>,
}

/// The question word (`how many` counts as one) and the first content word
/// after it.
pub fn headword(x: &Utterance) -> HeadwordInfo {
    let words = x.words();
    let Some(qi) = words.iter().position(|w| QUESTION_WORDS.contains(w)) else {
        return HeadwordInfo::default();
    };
    let (q, rest) = if words[qi] == "how" && words.get(qi + 1) == Some(&"many") {
        ("how many".to_string(), qi + 2)
    } else {
        (words[qi].to_string(), qi + 1)
    };
    let h = words[rest.min(words.len())..]
        .iter()
        .find(|w| !text::is_stopword(w))
        .map(|w| w.to_string());
    HeadwordInfo { q: Some(q), h }
}

/// Per-utterance state shared by every candidate of one example.
#[derive(Debug, Clone)]
pub struct Context<'a> {
    pub utterance: &'a Utterance,
    pub w: &'a KnowledgeGraph,
    pub anchors: Vec<Anchor>,
    pub headword: HeadwordInfo,
    /// Unigrams and bigrams with anchored spans collapsed to a placeholder.
    ngrams: BTreeSet<String>,
    mentioned_columns: BTreeSet<String>,
    ablated: Vec<String>,
    predicate_cache: RefCell<HashMap<String, Rc<PredicateFeatures>>>,
    type_cache: RefCell<HashMap<&'static str, Rc<Vec<Arc<str>>>>>,
}

/// The `pp::lex` names for one predicate, and whether an n-gram spells it.
#[derive(Debug)]
pub struct PredicateFeatures {
    pub names: Vec<Arc<str>>,
    pub spelled: bool,
}

impl<'a> Context<'a> {
    pub fn new(x: &'a Utterance, w: &'a KnowledgeGraph) -> Context<'a> {
        let anchors = detect_anchors(x, w);
        let words = x.words();

        let mut seq = Vec::new();
        let mut i = 0;
        while i < words.len() {
            match anchors.iter().filter(|a| a.start == i).map(|a| a.end).max() {
                Some(end) => {
                    seq.push(ENTITY_PLACEHOLDER);
                    i = end + 1;
                }
                None => {
                    seq.push(words[i]);
                    i += 1;
                }
            }
        }
        let placeholder_ngrams = ngrams(&seq);
        let raw_ngrams = ngrams(&words);
        let mentioned_columns = w
            .columns()
            .iter()
            .filter(|c| raw_ngrams.contains(&text::normalize_phrase(c)))
            .cloned()
            .collect();

        Context {
            utterance: x,
            w,
            anchors,
            headword: headword(x),
            ngrams: placeholder_ngrams,
            mentioned_columns,
            ablated: Vec::new(),
            predicate_cache: RefCell::default(),
            type_cache: RefCell::default(),
        }
    }

    /// Drop every feature whose name starts with one of `prefixes` (a
    /// family like `pp`, or a longer prefix like `pp::lex`).
    pub fn ablate(mut self, prefixes: &[String]) -> Context<'a> {
        self.ablated = prefixes.to_vec();
        self
    }

    pub fn ngrams(&self) -> &BTreeSet<String> {
        &self.ngrams
    }

    fn allowed(&self, name: &str) -> bool {
        !self.ablated.iter().any(|p| {
            name.starts_with(p.as_str())
                && (p.ends_with("::") || name[p.len()..].is_empty() || name[p.len()..].starts_with("::"))
        })
    }

    /// `pp::lex` names pairing every n-gram with `pred`, and whether some
    /// n-gram spells `pred`.
    pub fn predicate_features(&self, pred: &str) -> Rc<PredicateFeatures> {
        if let Some(hit) = self.predicate_cache.borrow().get(pred) {
            return Rc::clone(hit);
        }
        let key = text::normalize_phrase(pred);
        let names = self
            .ngrams
            .iter()
            .map(|g| format!("pp::lex::{}|{}", g, pred))
            .filter(|n| self.allowed(n))
            .map(Arc::from)
            .collect();
        let spelled = !key.is_empty() && self.ngrams.contains(&key);
        let pf = Rc::new(PredicateFeatures {
            names,
            spelled: spelled && self.allowed(STRING_MATCH),
        });
        self.predicate_cache
            .borrow_mut()
            .insert(pred.to_string(), Rc::clone(&pf));
        pf
    }

    /// `pd::lex` names pairing every n-gram with a denotation type.
    fn typed_ngrams(&self, ty: &'static str) -> Rc<Vec<Arc<str>>> {
        let mut cache = self.type_cache.borrow_mut();
        let names = cache.entry(ty).or_insert_with(|| {
            Rc::new(
                self.ngrams
                    .iter()
                    .map(|g| Arc::from(format!("pd::lex::{}|{}", g, ty)))
                    .collect(),
            )
        });
        Rc::clone(names)
    }

    /// The `mp` features firing for `z`.
    pub fn missing(&self, z: &Lf) -> Vec<&'static str> {
        let mut out = Vec::new();
        let used = z.entities();
        let mut spans: BTreeMap<(usize, usize), bool> = BTreeMap::new();
        for a in &self.anchors {
            *spans.entry((a.start, a.end)).or_default() |= used.contains(&a.value);
        }
        if spans.values().any(|hit| !hit) {
            out.push(MISSING_ENTITY);
        }
        let rels = z.relations();
        if self.mentioned_columns.iter().any(|c| !rels.contains(c)) {
            out.push(MISSING_RELATION);
        }
        out.retain(|n| self.allowed(n));
        out
    }

    /// The denotation-independent families (`pp`, `mp`).
    pub fn partial(&self, z: &Lf) -> FeatureVector {
        let mut f = FeatureVector::new();
        let preds: BTreeSet<String> = z.predicates().iter().map(|p| p.name()).collect();
        for p in &preds {
            let pf = self.predicate_features(p);
            for n in &pf.names {
                f.fire(Arc::clone(n));
            }
            if pf.spelled {
                f.fire(STRING_MATCH);
            }
        }
        for n in self.missing(z) {
            f.fire(n);
        }
        f
    }

    /// All five families.
    pub fn full(&self, z: &Lf, den: &Denotation) -> FeatureVector {
        let mut f = self.partial(z);
        let column = answer_column(z).or_else(|| graph_column(den, self.w));
        f.extend(self.denotation(den, column.as_deref()));
        f
    }

    /// `den`, `pd` and `hd` features of an answer set, optionally tied to
    /// the column it came from.
    pub fn denotation(&self, den: &Denotation, column: Option<&str>) -> FeatureVector {
        let mut f = FeatureVector::new();
        let size = match den.len() {
            0 => "0",
            1 => "1",
            2 => "2",
            _ => "3+",
        };
        f.fire(format!("den::size={}", size));
        let ty = denotation_type(den);
        if let Some(ty) = ty {
            f.fire(format!("den::type={}", ty));
        }
        if let Some(c) = column {
            f.fire(format!("den::column={}", c));
        }
        let col_key = column.map(text::normalize_phrase);

        if let Some(ty) = ty {
            for n in self.typed_ngrams(ty).iter() {
                f.fire(Arc::clone(n));
            }
        }
        if col_key.as_ref().map_or(false, |c| self.ngrams.contains(c)) {
            f.fire("pd::unlex::phrase=column");
        }

        if let Some(ty) = ty {
            if let Some(q) = &self.headword.q {
                f.fire(format!("hd::lex::Q={}|{}", q, ty));
            }
            if let Some(h) = &self.headword.h {
                f.fire(format!("hd::lex::H={}|{}", h, ty));
            }
        }
        if let (Some(h), Some(c)) = (&self.headword.h, &col_key) {
            if h == c {
                f.fire("hd::unlex::H=column");
            }
        }
        f.retain(|n| self.allowed(n));
        f
    }
}

pub fn featurize(x: &Utterance, w: &KnowledgeGraph, z: &Lf, den: &Denotation) -> FeatureVector {
    Context::new(x, w).full(z, den)
}

pub fn partial_featurize(x: &Utterance, w: &KnowledgeGraph, z: &Lf) -> FeatureVector {
    Context::new(x, w).partial(z)
}

fn ngrams(seq: &[&str]) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = seq.iter().map(|s| s.to_string()).collect();
    out.extend(seq.windows(2).map(|w| w.join(" ")));
    out
}

/// `Num`, `Date`, `Entity` or `Row` when the denotation is uniform.
fn denotation_type(den: &Denotation) -> Option<&'static str> {
    let mut kinds = den.iter().map(|v| match v {
        Value::Num(_) => "Num",
        Value::Date(_) => "Date",
        Value::Text(_) => "Entity",
        Value::Row(_) => "Row",
    });
    let first = kinds.next()?;
    kinds.all(|k| k == first).then_some(first)
}

/// The column whose values a form returns, read off its outermost
/// reverse join.
pub fn answer_column(z: &Lf) -> Option<String> {
    match z {
        Lf::Join(b, _) => match &**b {
            Lf::Reverse(inner) => match &**inner {
                Lf::Rel(r) => Some(r.clone()),
                Lf::Lambda(_, body) => match &**body {
                    Lf::Join(r, _) => match &**r {
                        Lf::Rel(r) => Some(r.clone()),
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        },
        Lf::Aggregate(op, u) if op.name() != "count" => answer_column(u),
        Lf::Arith(_, a, _) => answer_column(a),
        Lf::Union(a, b) | Lf::Intersect(a, b) => {
            let c = answer_column(a)?;
            (answer_column(b).as_ref() == Some(&c)).then_some(c)
        }
        _ => None,
    }
}

/// The single column all text values of `den` occur in, if any.
fn graph_column(den: &Denotation, w: &KnowledgeGraph) -> Option<String> {
    let mut common: Option<BTreeSet<String>> = None;
    for v in den.iter() {
        let cols = w.columns_of(v)?;
        common = Some(match common {
            None => cols.clone(),
            Some(c) => c.intersection(cols).cloned().collect(),
        });
    }
    let common = common?;
    (common.len() == 1).then(|| common.into_iter().next().unwrap())
}
