//! Tokenization and literal detection shared by the graph builder, the
//! anchoring step, and the feature extractor.

use once_cell::sync::Lazy;
use regex::Regex;

use crate::value::{Date, Number};

static WORD: Lazy<Regex> = Lazy::new(|| Regex::new(r"[^\W_]+(?:[.,]\d+)*").unwrap());
static NUMERIC_TOKEN: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?$").unwrap());
static EMBEDDED_NUMBER: Lazy<Regex> = Lazy::new(|| {
    Regex::new(r"[-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+").unwrap()
});
static ISO_DATE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(\d{4})-(\d{1,2})-(\d{1,2})$").unwrap());
static YEAR: Lazy<Regex> = Lazy::new(|| Regex::new(r"^\d{4}$").unwrap());
static MONTH_YEAR: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(?i)([a-z]+)\.?\s+(\d{4})$").unwrap());
static MONTH_DAY_YEAR: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"^(?i)([a-z]+)\.?\s+(\d{1,2}),?\s+(\d{4})$").unwrap());

/// Function words: never anchored on their own, never taken as a headword.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "am", "an", "and", "any", "are", "as", "at", "be", "been",
    "before", "being", "but", "by", "can", "could", "did", "do", "does", "each", "for", "from",
    "had", "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "many", "much", "of", "on", "one", "or", "other", "s", "she", "so", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to", "was", "were",
    "what", "when", "where", "which", "who", "whom", "whose", "will", "with", "would",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

/// One word of an utterance or cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub lower: String,
    /// Byte offsets into the source string.
    pub start: usize,
    pub end: usize,
}

/// Split on anything that is not a letter or digit. Decimal points and
/// thousands separators between digits stay inside the token.
pub fn tokenize(s: &str) -> Vec<Token> {
    WORD.find_iter(s)
        .map(|m| Token {
            text: m.as_str().to_string(),
            lower: m.as_str().to_lowercase(),
            start: m.start(),
            end: m.end(),
        })
        .collect()
}

/// Lowercased tokens joined by single spaces; the key used for entity
/// matching and predicate/phrase string matches.
pub fn normalize_phrase(s: &str) -> String {
    tokenize(s)
        .into_iter()
        .map(|t| t.lower)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Parse a token that is exactly a number (`20`, `1,000`, `3.5`).
pub fn parse_numeric_token(token: &str) -> Option<Number> {
    if !NUMERIC_TOKEN.is_match(token) {
        return None;
    }
    token.replace(',', "").parse::<f64>().ok().and_then(Number::new)
}

/// The first number literal inside `s`, thousands separators stripped.
pub fn leading_number(s: &str) -> Option<Number> {
    let m = EMBEDDED_NUMBER.find(s)?;
    m.as_str().replace(',', "").parse::<f64>().ok().and_then(Number::new)
}

/// Parse a whole string as a number; surrounding text is not allowed.
pub fn parse_exact_number(s: &str) -> Option<Number> {
    let s = s.trim();
    let s = s.strip_suffix('%').unwrap_or(s).trim();
    let m = EMBEDDED_NUMBER.find(s)?;
    if m.start() != 0 || m.end() != s.len() {
        return None;
    }
    m.as_str().replace(',', "").parse::<f64>().ok().and_then(Number::new)
}

pub fn month_from_name(name: &str) -> Option<u8> {
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    let name = name.to_lowercase();
    if name.len() < 3 {
        return None;
    }
    if name == "sept" {
        return Some(9);
    }
    MONTHS
        .iter()
        .position(|m| *m == name || (name.len() == 3 && m.starts_with(&name)))
        .map(|i| i as u8 + 1)
}

fn plausible_year(s: &str) -> Option<i32> {
    let y: i32 = s.parse().ok()?;
    (1000..=2999).contains(&y).then_some(y)
}

/// Date literals: `YYYY`, `Month YYYY`, `Month D, YYYY`, `YYYY-MM-DD`.
/// Years must fall in 1000–2999.
pub fn parse_date(s: &str) -> Option<Date> {
    let s = s.trim();
    if YEAR.is_match(s) {
        return plausible_year(s).map(Date::year);
    }
    if let Some(c) = ISO_DATE.captures(s) {
        let y = plausible_year(&c[1])?;
        return Date::new(Some(y), c[2].parse().ok(), c[3].parse().ok());
    }
    if let Some(c) = MONTH_DAY_YEAR.captures(s) {
        let m = month_from_name(&c[1])?;
        let y = plausible_year(&c[3])?;
        return Date::new(Some(y), Some(m), c[2].parse().ok());
    }
    if let Some(c) = MONTH_YEAR.captures(s) {
        let m = month_from_name(&c[1])?;
        let y = plausible_year(&c[2])?;
        return Date::new(Some(y), Some(m), None);
    }
    None
}
