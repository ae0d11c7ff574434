use std::collections::BTreeSet;

use crate::dcs::LogicalForm;
use crate::graph::KnowledgeGraph;
use crate::text::{self, Token};
use crate::value::Value;

/// Longest token span considered for an anchor.
pub const MAX_SPAN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<Token>,
}

impl Utterance {
    pub fn new(raw: &str) -> Utterance {
        Utterance {
            raw: raw.to_string(),
            tokens: text::tokenize(raw),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Lowercased tokens.
    pub fn words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.lower.as_str()).collect()
    }

    /// Source text covered by tokens `i..=j`.
    pub fn span_text(&self, i: usize, j: usize) -> &str {
        &self.raw[self.tokens[i].start..self.tokens[j].end]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatchKind {
    Exact,
    Fuzzy,
    Number,
    Date,
}

/// A token span `start..=end` tied to an entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Anchor {
    pub start: usize,
    pub end: usize,
    pub value: Value,
    pub kind: MatchKind,
}

impl Anchor {
    pub fn lf(&self) -> LogicalForm {
        LogicalForm::Entity(self.value.clone())
    }

    pub fn tokens(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }

    fn within(&self, other: &Anchor) -> bool {
        other.start <= self.start
            && self.end <= other.end
            && (other.start, other.end) != (self.start, self.end)
    }
}

/// Entity mentions, numbers, and dates in `x`. Only maximal spans are kept:
/// an anchor strictly inside another anchor's span is dropped.
pub fn detect_anchors(x: &Utterance, w: &KnowledgeGraph) -> Vec<Anchor> {
    let words = x.words();
    let n = words.len();
    let mut found = BTreeSet::new();

    let keyed: Vec<(Vec<&str>, &Vec<Value>)> = w
        .entity_index()
        .iter()
        .map(|(k, vs)| (k.split(' ').collect(), vs))
        .collect();

    for i in 0..n {
        for j in i..n.min(i + MAX_SPAN) {
            let span = &words[i..=j];
            let mut add = |value: Value, kind| {
                found.insert(Anchor {
                    start: i,
                    end: j,
                    value,
                    kind,
                });
            };
            for v in w.entities_matching(&span.join(" ")) {
                add(v.clone(), MatchKind::Exact);
            }
            if !span.iter().all(|t| text::is_stopword(t)) {
                for (key, vs) in &keyed {
                    if key.len() > span.len() && key.windows(span.len()).any(|win| win == span) {
                        for v in vs.iter() {
                            add(v.clone(), MatchKind::Fuzzy);
                        }
                    }
                }
            }
            if i == j {
                if let Some(num) = text::parse_numeric_token(words[i]) {
                    add(Value::Num(num), MatchKind::Number);
                }
            }
            if let Some(d) = text::parse_date(x.span_text(i, j)) {
                add(Value::Date(d), MatchKind::Date);
            }
        }
    }

    let all: Vec<Anchor> = found.into_iter().collect();
    all.iter()
        .filter(|a| !all.iter().any(|b| a.within(b)))
        .cloned()
        .collect()
}
