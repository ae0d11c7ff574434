//! Reader for the canonical logical-form text.
//!
//! ```text
//! unary  := NUM | DATE | STRING | IDENT | Row#N
//!         | binary '.' unary
//!         | CMP '.' unary
//!         | '(' unary ('|' | '&') unary ')' | '(' unary ')'
//!         | AGG '(' unary ')'
//!         | SUP '(' unary ',' binary ')'
//!         | ARITH '(' unary ',' unary ')'
//! binary := IDENT | 'R' '[' binary ']' | 'lambda' IDENT '[' unary ']' | '(' binary ')'
//! ```

use thiserror::Error;

use super::{AggOp, ArithOp, CmpOp, LogicalForm as Lf, SupOp};
use crate::value::{Date, Number, Value};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("logical form syntax error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Date(Date),
    Row(usize),
    Sym(&'static str),
}

const SYMBOLS: [&str; 14] = [
    "<=", ">=", "!=", "<", ">", "=", ".", "(", ")", "[", "]", ",", "|", "&",
];

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        pos,
        msg: msg.into(),
    })
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < src.len() {
        let c = src[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let start = i;
        if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return err(start, "unterminated string");
                };
                i += ch.len_utf8();
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(esc) = src[i..].chars().next() else {
                            return err(start, "unterminated string");
                        };
                        i += esc.len_utf8();
                        s.push(esc);
                    }
                    _ => s.push(ch),
                }
            }
            out.push((start, Tok::Str(s)));
            continue;
        }
        // dates: YYYY-MM-DD with xx/xxxx placeholders
        if let Some(d) = lex_date(&src[i..]) {
            out.push((start, Tok::Date(d)));
            i += 10;
            continue;
        }
        let neg_num = c == '-' && bytes.get(i + 1).map_or(false, u8::is_ascii_digit);
        if c.is_ascii_digit() || neg_num {
            let mut j = i + 1;
            while j < src.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                // a '.' is only part of the number if a digit follows
                if bytes[j] == b'.' && !bytes.get(j + 1).map_or(false, u8::is_ascii_digit) {
                    break;
                }
                j += 1;
            }
            let n: f64 = match src[i..j].parse() {
                Ok(n) => n,
                Err(_) => return err(start, "bad number"),
            };
            out.push((start, Tok::Num(n)));
            i = j;
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let mut j = i;
            for ch in src[i..].chars() {
                if ch.is_alphanumeric() || ch == '_' {
                    j += ch.len_utf8();
                } else {
                    break;
                }
            }
            let word = &src[i..j];
            if word == "Row" && src[j..].starts_with('#') {
                let mut k = j + 1;
                while k < src.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                match src[j + 1..k].parse() {
                    Ok(n) => out.push((start, Tok::Row(n))),
                    Err(_) => return err(start, "bad row reference"),
                }
                i = k;
                continue;
            }
            out.push((start, Tok::Ident(word.to_string())));
            i = j;
            continue;
        }
        match SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            Some(s) => {
                out.push((start, Tok::Sym(s)));
                i += s.len();
            }
            None => return err(start, format!("unexpected character {:?}", c)),
        }
    }
    Ok(out)
}

fn lex_date(s: &str) -> Option<Date> {
    let b = s.as_bytes();
    if b.len() < 10 || b[4] != b'-' || b[7] != b'-' {
        return None;
    }
    if b.get(10).map_or(false, |c| c.is_ascii_alphanumeric()) {
        return None;
    }
    fn part<T: std::str::FromStr>(p: &str, placeholder: &str) -> Option<Option<T>> {
        if p == placeholder {
            Some(None)
        } else if p.bytes().all(|c| c.is_ascii_digit()) {
            p.parse().ok().map(Some)
        } else {
            None
        }
    }
    let year = part::<i32>(&s[0..4], "xxxx")?;
    let month = part::<u8>(&s[5..7], "xx")?;
    let day = part::<u8>(&s[8..10], "xx")?;
    Date::new(year, month, day)
}

struct Reader {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    bound: Vec<String>,
}

impl Reader {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, sym: &str) -> Result<(), ParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Sym(s)) if s == sym => Ok(()),
            other => err(at, format!("expected '{}', found {:?}", sym, other)),
        }
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym)
    }

    fn unary(&mut self) -> Result<Lf, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            None => err(at, "unexpected end of input"),
            Some(Tok::Num(n)) => {
                self.pos += 1;
                match Number::new(n) {
                    Some(n) => Ok(Lf::Entity(Value::Num(n))),
                    None => err(at, "non-finite number"),
                }
            }
            Some(Tok::Date(d)) => {
                self.pos += 1;
                Ok(Lf::Entity(Value::Date(d)))
            }
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(Lf::Entity(Value::Text(s)))
            }
            Some(Tok::Row(i)) => {
                self.pos += 1;
                Ok(Lf::Entity(Value::Row(i)))
            }
            Some(Tok::Sym(s)) if ["<", "<=", ">", ">=", "=", "!="].contains(&s) => {
                self.pos += 1;
                let op = match s {
                    "<" => CmpOp::Lt,
                    "<=" => CmpOp::Le,
                    ">" => CmpOp::Gt,
                    ">=" => CmpOp::Ge,
                    "=" => CmpOp::Eq,
                    _ => CmpOp::Ne,
                };
                self.expect(".")?;
                Ok(Lf::cmp(op, self.unary()?))
            }
            Some(Tok::Sym("(")) => {
                if matches!(self.peek2(), Some(Tok::Ident(w)) if w == "lambda")
                    || matches!(self.peek2(), Some(Tok::Sym("(")) if self.paren_is_binary())
                {
                    let b = self.binary()?;
                    self.expect(".")?;
                    return Ok(Lf::join(b, self.unary()?));
                }
                self.pos += 1;
                let a = self.unary()?;
                let z = if self.is_sym("|") {
                    self.pos += 1;
                    Lf::union(a, self.unary()?)
                } else if self.is_sym("&") {
                    self.pos += 1;
                    Lf::intersect(a, self.unary()?)
                } else {
                    a
                };
                self.expect(")")?;
                Ok(z)
            }
            Some(Tok::Ident(word)) => {
                let call = matches!(self.peek2(), Some(Tok::Sym("(")));
                if call {
                    if let Some(op) = AggOp::ALL.iter().find(|o| o.name() == word) {
                        self.pos += 2;
                        let u = self.unary()?;
                        self.expect(")")?;
                        return Ok(Lf::aggregate(*op, u));
                    }
                    if let Some(op) = SupOp::ALL.iter().find(|o| o.name() == word) {
                        self.pos += 2;
                        let u = self.unary()?;
                        self.expect(",")?;
                        let b = self.binary()?;
                        self.expect(")")?;
                        return Ok(Lf::superlative(*op, u, b));
                    }
                    if let Some(op) = [ArithOp::Add, ArithOp::Sub].iter().find(|o| o.name() == word) {
                        self.pos += 2;
                        let a = self.unary()?;
                        self.expect(",")?;
                        let b = self.unary()?;
                        self.expect(")")?;
                        return Ok(Lf::arith(*op, a, b));
                    }
                }
                let is_binary = word == "lambda"
                    || (word == "R" && matches!(self.peek2(), Some(Tok::Sym("["))))
                    || matches!(self.peek2(), Some(Tok::Sym(".")));
                if is_binary {
                    let b = self.binary()?;
                    self.expect(".")?;
                    return Ok(Lf::join(b, self.unary()?));
                }
                self.pos += 1;
                if self.bound.contains(&word) {
                    Ok(Lf::VarRef(word))
                } else {
                    Ok(Lf::Entity(Value::Text(word)))
                }
            }
            Some(t) => err(at, format!("unexpected {:?}", t)),
        }
    }

    /// Looks past nested parentheses to see whether they wrap a lambda.
    fn paren_is_binary(&self) -> bool {
        let mut k = self.pos;
        while matches!(self.toks.get(k), Some((_, Tok::Sym("(")))) {
            k += 1;
        }
        matches!(self.toks.get(k), Some((_, Tok::Ident(w))) if w == "lambda")
    }

    fn binary(&mut self) -> Result<Lf, ParseError> {
        let at = self.offset();
        match self.next() {
            Some(Tok::Sym("(")) => {
                let b = self.binary()?;
                self.expect(")")?;
                Ok(b)
            }
            Some(Tok::Ident(w)) if w == "R" && self.is_sym("[") => {
                self.pos += 1;
                let b = self.binary()?;
                self.expect("]")?;
                Ok(Lf::reverse(b))
            }
            Some(Tok::Ident(w)) if w == "lambda" => {
                let at = self.offset();
                let var = match self.next() {
                    Some(Tok::Ident(v)) => v,
                    other => return err(at, format!("expected variable, found {:?}", other)),
                };
                self.expect("[")?;
                self.bound.push(var.clone());
                let body = self.unary();
                self.bound.pop();
                let body = body?;
                self.expect("]")?;
                Ok(Lf::Lambda(var, Box::new(body)))
            }
            Some(Tok::Ident(w)) => Ok(Lf::Rel(w)),
            other => err(at, format!("expected a binary, found {:?}", other)),
        }
    }
}

/// Read a logical form written in the canonical syntax.
pub fn parse(src: &str) -> Result<Lf, ParseError> {
    read(src, Reader::unary)
}

/// Read a standalone binary such as `R[City]` or `lambda v0 [Year.Date.v0]`.
pub fn parse_binary(src: &str) -> Result<Lf, ParseError> {
    read(src, Reader::binary)
}

fn read(
    src: &str,
    top: fn(&mut Reader) -> Result<Lf, ParseError>,
) -> Result<Lf, ParseError> {
    let toks = lex(src)?;
    let mut r = Reader {
        toks,
        pos: 0,
        end: src.len(),
        bound: Vec::new(),
    };
    let z = top(&mut r)?;
    if r.pos < r.toks.len() {
        return err(r.offset(), "trailing input");
    }
    Ok(z)
}
