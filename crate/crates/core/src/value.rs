//! Atomic values stored in knowledge-graph nodes and denotations.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// A finite number with a total order, so it can live in ordered sets.
#[derive(Debug, Clone, Copy)]
pub struct Number(f64);

impl Number {
    /// Returns `None` for NaN or infinite input.
    pub fn new(value: f64) -> Option<Number> {
        if value.is_finite() {
            // fold -0.0 into 0.0 so equality and hashing agree
            Some(Number(if value == 0.0 { 0.0 } else { value }))
        } else {
            None
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_bits() == other.0.to_bits()
    }
}

impl Eq for Number {}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Number {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Number {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.0.to_bits().hash(state);
    }
}

impl fmt::Display for Number {
    /// Minimal decimal rendering: `3`, `2.5`, `-0.125`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 && self.0.abs() < 1e15 {
            write!(f, "{}", self.0 as i64)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// A possibly partial calendar date. At least one component is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    pub year: Option<i32>,
    pub month: Option<u8>,
    pub day: Option<u8>,
}

impl Date {
    pub fn new(year: Option<i32>, month: Option<u8>, day: Option<u8>) -> Option<Date> {
        if year.is_none() && month.is_none() && day.is_none() {
            return None;
        }
        if matches!(month, Some(m) if !(1..=12).contains(&m)) {
            return None;
        }
        if matches!(day, Some(d) if !(1..=31).contains(&d)) {
            return None;
        }
        Some(Date { year, month, day })
    }

    pub fn year(year: i32) -> Date {
        Date {
            year: Some(year),
            month: None,
            day: None,
        }
    }

    /// A date holding only a year component.
    pub fn bare_year(&self) -> Option<i32> {
        match (self.year, self.month, self.day) {
            (Some(y), None, None) => Some(y),
            _ => None,
        }
    }

    /// Equality on every component present in `pattern`.
    pub fn matches(&self, pattern: &Date) -> bool {
        fn ok<T: PartialEq>(have: Option<T>, want: Option<T>) -> bool {
            want.is_none() || have == want
        }
        ok(self.year, pattern.year) && ok(self.month, pattern.month) && ok(self.day, pattern.day)
    }

    /// Chronological comparison over the components both dates carry.
    pub fn compare(&self, other: &Date) -> Ordering {
        fn step<T: Ord>(a: Option<T>, b: Option<T>) -> Ordering {
            match (a, b) {
                (Some(a), Some(b)) => a.cmp(&b),
                _ => Ordering::Equal,
            }
        }
        step(self.year, other.year)
            .then(step(self.month, other.month))
            .then(step(self.day, other.day))
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.year {
            Some(y) => write!(f, "{:04}", y)?,
            None => write!(f, "xxxx")?,
        }
        match self.month {
            Some(m) => write!(f, "-{:02}", m)?,
            None => write!(f, "-xx")?,
        }
        match self.day {
            Some(d) => write!(f, "-{:02}", d),
            None => write!(f, "-xx"),
        }
    }
}

/// A node value. The variant order gives the canonical denotation order:
/// rows by index, then numbers, then dates (missing parts first), then text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Row(usize),
    Num(Number),
    Date(Date),
    Text(String),
}

impl Value {
    /// Panics on non-finite input; use [`Number::new`] for fallible construction.
    pub fn num(value: f64) -> Value {
        Value::Num(Number::new(value).expect("finite number"))
    }

    pub fn text(value: impl Into<String>) -> Value {
        Value::Text(value.into())
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(n.get()),
            _ => None,
        }
    }

    /// Rendering used in answer files: numbers minimal-decimal, dates with
    /// `xx` placeholders, text verbatim, rows as `Row#i`.
    pub fn render(&self) -> String {
        match self {
            Value::Row(i) => format!("Row#{}", i),
            Value::Num(n) => n.to_string(),
            Value::Date(d) => d.to_string(),
            Value::Text(s) => s.clone(),
        }
    }

    /// Rendering used in debug dumps, with text quoted.
    pub fn render_quoted(&self) -> String {
        match self {
            Value::Text(s) => format!("{:?}", s),
            other => other.render(),
        }
    }
}

/// Compare two values for the comparison binaries. Numbers compare
/// numerically, dates chronologically, and a bare-year date compares with a
/// number as that year. Everything else is incomparable.
pub fn compare_values(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => Some(x.cmp(y)),
        (Value::Date(x), Value::Date(y)) => Some(x.compare(y)),
        (Value::Date(d), Value::Num(n)) => d
            .bare_year()
            .and_then(|y| (y as f64).partial_cmp(&n.get())),
        (Value::Num(n), Value::Date(d)) => d
            .bare_year()
            .and_then(|y| n.get().partial_cmp(&(y as f64))),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order_puts_rows_first_and_text_last() {
        let mut v = vec![
            Value::text("b"),
            Value::Date(Date::year(1900)),
            Value::num(3.0),
            Value::Row(2),
            Value::text("a"),
            Value::num(-1.0),
            Value::Row(0),
        ];
        v.sort();
        let rendered: Vec<_> = v.iter().map(Value::render).collect();
        assert_eq!(
            rendered,
            vec!["Row#0", "Row#2", "-1", "3", "1900-xx-xx", "a", "b"]
        );
    }

    #[test]
    fn partial_dates_sort_before_complete_ones() {
        let partial = Date::year(2004);
        let full = Date::new(Some(2004), Some(5), Some(1)).unwrap();
        assert!(partial < full);
    }

    #[test]
    fn number_rendering_is_minimal() {
        assert_eq!(Value::num(204.0).render(), "204");
        assert_eq!(Value::num(2.5).render(), "2.5");
        assert_eq!(Value::num(-0.0).render(), "0");
    }

    #[test]
    fn date_validation() {
        assert!(Date::new(None, None, None).is_none());
        assert!(Date::new(Some(2000), Some(13), None).is_none());
        assert!(Date::new(Some(2000), Some(2), Some(0)).is_none());
        assert!(Date::new(None, Some(5), Some(3)).is_some());
    }

    #[test]
    fn bare_year_compares_with_numbers() {
        let d = Value::Date(Date::year(1896));
        assert_eq!(compare_values(&d, &Value::num(1990.0)), Some(Ordering::Less));
        let full = Value::Date(Date::new(Some(1896), Some(4), None).unwrap());
        assert_eq!(compare_values(&full, &Value::num(1990.0)), None);
        assert_eq!(compare_values(&Value::text("x"), &Value::num(1.0)), None);
    }

    #[test]
    fn partial_pattern_matching() {
        let d = Date::new(Some(2010), Some(5), Some(3)).unwrap();
        assert!(d.matches(&Date::year(2010)));
        assert!(!d.matches(&Date::year(2011)));
        assert!(d.matches(&Date::new(None, Some(5), None).unwrap()));
    }
}
