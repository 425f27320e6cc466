//! Parser for the concrete formula syntax.
//!
//! Grammar sketch, loosest binding first:
//!
//! ```text
//! formula   := ('forall'|'exists') VAR 'in' NAT '..' NAT ':' formula
//!            | implication
//! impl      := disj ('->' impl)?                        right-assoc, sugar
//! disj      := conj ('|' conj)*                         n-ary
//! conj      := temporal ('&' temporal)*                 n-ary
//! temporal  := unary (('U'|'S') interval temporal)?     right-assoc
//! unary     := '!' unary
//!            | ('F'|'G'|'X'|'P'|'H'|'Y') interval unary
//!            | 'C' '[' cmp NAT ',' NAT ']' '(' formula ')'
//!            | ('M'|'A') '[' cmp NAT ',' NAT ',' NAT ']' '(' formula ')'
//!            | 'D' '[' cmp NAT ',' NAT ']' '(' formula ',' formula ')'
//!            | 'true' | 'false' | atom | '(' formula ')'
//! interval  := ('('|'[') NAT ',' (NAT|'inf') (')'|']')
//! cmp       := '<=' | '<' | '>=' | '>' | '='
//! ```
//!
//! The single-letter operator names are only treated as operators when
//! followed by their interval or parameter bracket, so they remain usable
//! as atom names.
//!
//! Quantifiers range over inclusive natural intervals and expand to n-ary
//! conjunction/disjunction. Within a quantifier body, atoms may carry
//! subscript templates: `a_{i}` instantiates to `a_1`, `a_{i+1,j}` to e.g.
//! `a_2_0` (comma-separated subscripts are joined with `_`).

use std::fmt;

use thiserror::Error;

use super::{Comparator, Formula, FormulaBuilder, FormulaError, FormulaId, Interval};

/// Syntax or validation error, with the byte offset it was detected at.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum SubscriptTerm {
    Var { name: String, offset: i64 },
    Literal(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum NamePart {
    Text(String),
    Subscript(Vec<SubscriptTerm>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    // Identifier, possibly with `{...}` subscript templates glued on.
    Name(Vec<NamePart>),
    Nat(u64),
    Bang,
    Amp,
    Pipe,
    Arrow,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Colon,
    DotDot,
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Name(parts) => {
                return match parts.as_slice() {
                    [NamePart::Text(t)] => write!(f, "`{}`", t),
                    _ => write!(f, "templated name"),
                };
            }
            Tok::Nat(n) => return write!(f, "`{}`", n),
            Tok::Bang => "`!`",
            Tok::Amp => "`&`",
            Tok::Pipe => "`|`",
            Tok::Arrow => "`->`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::Comma => "`,`",
            Tok::Colon => "`:`",
            Tok::DotDot => "`..`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::Ge => "`>=`",
            Tok::Gt => "`>`",
            Tok::Eq => "`=`",
        };
        f.write_str(s)
    }
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn ident(&mut self) -> &'a str {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        &self.src[start..self.pos]
    }

    fn nat(&mut self) -> Result<u64, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = &self.src[start..self.pos];
        let n: u64 = text
            .parse()
            .map_err(|_| ParseError::new(start, format!("number `{}` out of range", text)))?;
        if n > u32::MAX as u64 {
            return Err(ParseError::new(
                start,
                format!("number `{}` exceeds the supported bound {}", text, u32::MAX),
            ));
        }
        Ok(n)
    }

    // One `{...}` subscript group; the opening brace is at `self.pos`.
    fn subscript(&mut self) -> Result<Vec<SubscriptTerm>, ParseError> {
        let open = self.pos;
        self.pos += 1; // consume '{'
        let mut terms = Vec::new();
        loop {
            self.skip_ws();
            if self.pos >= self.bytes.len() {
                return Err(ParseError::new(open, "unterminated `{` subscript"));
            }
            let c = self.bytes[self.pos];
            let term = if c.is_ascii_digit() {
                SubscriptTerm::Literal(self.nat()?)
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let name = self.ident().to_owned();
                self.skip_ws();
                let mut offset = 0i64;
                if self.pos < self.bytes.len()
                    && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-')
                {
                    let neg = self.bytes[self.pos] == b'-';
                    self.pos += 1;
                    self.skip_ws();
                    if self.pos >= self.bytes.len() || !self.bytes[self.pos].is_ascii_digit() {
                        return Err(ParseError::new(self.pos, "expected number after `+`/`-`"));
                    }
                    let n = self.nat()? as i64;
                    offset = if neg { -n } else { n };
                }
                SubscriptTerm::Var { name, offset }
            } else {
                return Err(ParseError::new(
                    self.pos,
                    "expected variable or number in subscript",
                ));
            };
            terms.push(term);
            self.skip_ws();
            match self.bytes.get(self.pos) {
                Some(b',') => {
                    self.pos += 1;
                }
                Some(b'}') => {
                    self.pos += 1;
                    return Ok(terms);
                }
                _ => return Err(ParseError::new(self.pos, "expected `,` or `}` in subscript")),
            }
        }
    }

    fn next(&mut self) -> Result<Option<(usize, Tok)>, ParseError> {
        self.skip_ws();
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let at = self.pos;
        let c = self.bytes[at];
        let tok = match c {
            b'!' => {
                self.pos += 1;
                Tok::Bang
            }
            b'&' => {
                self.pos += 1;
                Tok::Amp
            }
            b'|' => {
                self.pos += 1;
                Tok::Pipe
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'[' => {
                self.pos += 1;
                Tok::LBracket
            }
            b']' => {
                self.pos += 1;
                Tok::RBracket
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b':' => {
                self.pos += 1;
                Tok::Colon
            }
            b'-' => {
                if self.bytes.get(at + 1) == Some(&b'>') {
                    self.pos += 2;
                    Tok::Arrow
                } else {
                    return Err(ParseError::new(at, "expected `->`"));
                }
            }
            b'.' => {
                if self.bytes.get(at + 1) == Some(&b'.') {
                    self.pos += 2;
                    Tok::DotDot
                } else {
                    return Err(ParseError::new(at, "expected `..`"));
                }
            }
            b'<' => {
                if self.bytes.get(at + 1) == Some(&b'=') {
                    self.pos += 2;
                    Tok::Le
                } else {
                    self.pos += 1;
                    Tok::Lt
                }
            }
            b'>' => {
                if self.bytes.get(at + 1) == Some(&b'=') {
                    self.pos += 2;
                    Tok::Ge
                } else {
                    self.pos += 1;
                    Tok::Gt
                }
            }
            b'=' => {
                self.pos += 1;
                Tok::Eq
            }
            _ if c.is_ascii_digit() => Tok::Nat(self.nat()?),
            _ if c.is_ascii_alphabetic() || c == b'_' => {
                let mut parts = vec![NamePart::Text(self.ident().to_owned())];
                // Glue `{...}` groups and trailing ident chars into one name.
                loop {
                    match self.bytes.get(self.pos) {
                        Some(b'{') => parts.push(NamePart::Subscript(self.subscript()?)),
                        Some(&b)
                            if b.is_ascii_alphanumeric() || b == b'_' =>
                        {
                            parts.push(NamePart::Text(self.ident().to_owned()))
                        }
                        _ => break,
                    }
                }
                Tok::Name(parts)
            }
            _ => {
                return Err(ParseError::new(
                    at,
                    format!("unexpected character `{}`", &self.src[at..at + 1]),
                ))
            }
        };
        Ok(Some((at, tok)))
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut lexer = Lexer::new(src);
    let mut toks = Vec::new();
    while let Some(t) = lexer.next()? {
        toks.push(t);
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    cursor: usize,
    end: usize,
    builder: FormulaBuilder,
    env: Vec<(String, u64)>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.cursor).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.cursor + 1).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks
            .get(self.cursor)
            .map(|(o, _)| *o)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<&'a Tok> {
        let t = self.toks.get(self.cursor).map(|(_, t)| t);
        self.cursor += 1;
        t
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(t) if *t == tok => Ok(()),
            Some(t) => Err(ParseError::new(at, format!("expected {}, found {}", tok, t))),
            None => Err(ParseError::new(at, format!("expected {}, found end of input", tok))),
        }
    }

    fn expect_nat(&mut self) -> Result<u64, ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Nat(n)) => Ok(*n),
            Some(t) => Err(ParseError::new(at, format!("expected number, found {}", t))),
            None => Err(ParseError::new(at, "expected number, found end of input")),
        }
    }


    // Plain (keyword-checkable) name, or None for templated/multi-part ones.
    fn plain_name(tok: &Tok) -> Option<&str> {
        match tok {
            Tok::Name(parts) => match parts.as_slice() {
                [NamePart::Text(t)] => Some(t),
                _ => None,
            },
            _ => None,
        }
    }

    fn formula(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        if let Some(tok) = self.peek() {
            if let Some(kw @ ("forall" | "exists")) = Self::plain_name(tok) {
                let conj = kw == "forall";
                return self.quantifier(at, conj);
            }
        }
        self.implication()
    }

    fn quantifier(&mut self, at: usize, conj: bool) -> Result<FormulaId, ParseError> {
        self.bump(); // forall / exists
        let var_at = self.offset();
        let var = match self.bump() {
            Some(tok) => match Self::plain_name(tok) {
                Some(name) => name.to_owned(),
                None => {
                    return Err(ParseError::new(var_at, "expected quantifier variable name"))
                }
            },
            None => return Err(ParseError::new(var_at, "expected quantifier variable name")),
        };
        let in_at = self.offset();
        match self.bump() {
            Some(tok) if Self::plain_name(tok) == Some("in") => {}
            _ => return Err(ParseError::new(in_at, "expected `in`")),
        }
        let lo = self.expect_nat()?;
        self.expect(Tok::DotDot)?;
        let hi = self.expect_nat()?;
        if lo > hi {
            return Err(ParseError::new(
                at,
                format!("empty quantifier range {}..{}", lo, hi),
            ));
        }
        self.expect(Tok::Colon)?;

        // Parse the body once per value, rewinding the cursor in between.
        let body_start = self.cursor;
        let mut children = Vec::new();
        for value in lo..=hi {
            self.cursor = body_start;
            self.env.push((var.clone(), value));
            let child = self.formula()?;
            self.env.pop();
            children.push(child);
        }
        let res = if conj {
            self.builder.and(children)
        } else {
            self.builder.or(children)
        };
        lift(at, res)
    }

    fn implication(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.bump();
            let rhs = self.implication()?;
            let neg = self.builder.not(lhs);
            let res = self.builder.or(vec![neg, rhs]);
            return lift(at, res);
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        let first = self.conjunction()?;
        let mut children = vec![first];
        while self.peek() == Some(&Tok::Pipe) {
            self.bump();
            children.push(self.conjunction()?);
        }
        if children.len() == 1 {
            return Ok(children[0]);
        }
        let res = self.builder.or(children);
        lift(at, res)
    }

    fn conjunction(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        let first = self.temporal()?;
        let mut children = vec![first];
        while self.peek() == Some(&Tok::Amp) {
            self.bump();
            children.push(self.temporal()?);
        }
        if children.len() == 1 {
            return Ok(children[0]);
        }
        let res = self.builder.and(children);
        lift(at, res)
    }

    fn at_interval_start(&self) -> bool {
        matches!(self.peek2(), Some(Tok::LParen) | Some(Tok::LBracket))
    }

    fn temporal(&mut self) -> Result<FormulaId, ParseError> {
        let left = self.unary()?;
        if let Some(tok) = self.peek() {
            if let Some(op @ ("U" | "S")) = Self::plain_name(tok) {
                if self.at_interval_start() {
                    let until = op == "U";
                    self.bump();
                    let interval = self.interval()?;
                    let right = self.temporal()?;
                    let id = if until {
                        self.builder.until(interval, left, right)
                    } else {
                        self.builder.since(interval, left, right)
                    };
                    return Ok(id);
                }
            }
        }
        Ok(left)
    }

    fn interval(&mut self) -> Result<Interval, ParseError> {
        let at = self.offset();
        let lo_closed = match self.bump() {
            Some(Tok::LParen) => false,
            Some(Tok::LBracket) => true,
            Some(t) => return Err(ParseError::new(at, format!("expected interval, found {}", t))),
            None => return Err(ParseError::new(at, "expected interval, found end of input")),
        };
        let lo = self.expect_nat()?;
        self.expect(Tok::Comma)?;
        let hi_at = self.offset();
        let hi = match self.peek() {
            Some(Tok::Nat(_)) => Some(self.expect_nat()?),
            Some(tok) if Self::plain_name(tok) == Some("inf") => {
                self.bump();
                None
            }
            _ => {
                return Err(ParseError::new(
                    hi_at,
                    "expected interval upper bound (number or `inf`)",
                ))
            }
        };
        let close_at = self.offset();
        let hi_closed = match self.bump() {
            Some(Tok::RParen) => false,
            Some(Tok::RBracket) => true,
            Some(t) => {
                return Err(ParseError::new(
                    close_at,
                    format!("expected `)` or `]`, found {}", t),
                ))
            }
            None => return Err(ParseError::new(close_at, "unterminated interval")),
        };
        if hi.is_none() && hi_closed {
            return Err(ParseError::new(close_at, "unbounded interval must end with `)`"));
        }
        Interval::new(lo, hi, lo_closed, hi_closed).map_err(|e| ParseError::new(at, e.to_string()))
    }

    fn comparator(&mut self) -> Result<Comparator, ParseError> {
        let at = self.offset();
        match self.bump() {
            Some(Tok::Lt) => Ok(Comparator::Lt),
            Some(Tok::Le) => Ok(Comparator::Le),
            Some(Tok::Ge) => Ok(Comparator::Ge),
            Some(Tok::Gt) => Ok(Comparator::Gt),
            Some(Tok::Eq) => Ok(Comparator::Eq),
            Some(t) => Err(ParseError::new(at, format!("expected comparator, found {}", t))),
            None => Err(ParseError::new(at, "expected comparator, found end of input")),
        }
    }

    fn unary(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        match self.peek() {
            Some(Tok::Bang) => {
                self.bump();
                let child = self.unary()?;
                Ok(self.builder.not(child))
            }
            Some(Tok::LParen) => {
                self.bump();
                let inner = self.formula()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Some(tok) => {
                if let Some(name) = Self::plain_name(tok) {
                    match name {
                        "true" => {
                            self.bump();
                            return Ok(self.builder.tt());
                        }
                        "false" => {
                            self.bump();
                            return Ok(self.builder.ff());
                        }
                        "F" | "G" | "X" | "P" | "H" | "Y" if self.at_interval_start() => {
                            let op = name.to_owned();
                            self.bump();
                            let interval = self.interval()?;
                            let child = self.unary()?;
                            let id = match op.as_str() {
                                "F" => self.builder.eventually(interval, child),
                                "G" => self.builder.always(interval, child),
                                "X" => self.builder.next(interval, child),
                                "P" => self.builder.once(interval, child),
                                "H" => self.builder.historically(interval, child),
                                _ => self.builder.prev(interval, child),
                            };
                            return Ok(id);
                        }
                        "C" | "M" | "A" | "D" if self.peek2() == Some(&Tok::LBracket) => {
                            let op = name.to_owned();
                            return self.aggregate(at, &op);
                        }
                        _ => {}
                    }
                }
                self.atom()
            }
            None => Err(ParseError::new(at, "expected formula, found end of input")),
        }
    }

    fn aggregate(&mut self, at: usize, op: &str) -> Result<FormulaId, ParseError> {
        self.bump(); // operator letter
        self.expect(Tok::LBracket)?;
        let cmp = self.comparator()?;
        let bound = self.expect_nat()?;
        self.expect(Tok::Comma)?;
        let window = self.expect_nat()?;
        let subwindow = if op == "M" || op == "A" {
            self.expect(Tok::Comma)?;
            Some(self.expect_nat()?)
        } else {
            None
        };
        self.expect(Tok::RBracket)?;
        self.expect(Tok::LParen)?;
        let first = self.formula()?;
        let id = match op {
            "C" => self.builder.count(cmp, bound, window, first),
            "M" => {
                let sw = subwindow.unwrap();
                let res = self.builder.max_count(cmp, bound, window, sw, first);
                lift(at, res)?
            }
            "A" => {
                let sw = subwindow.unwrap();
                let res = self.builder.avg_count(cmp, bound, window, sw, first);
                lift(at, res)?
            }
            _ => {
                self.expect(Tok::Comma)?;
                let second = self.formula()?;
                self.builder.avg_dist(cmp, bound, window, first, second)
            }
        };
        self.expect(Tok::RParen)?;
        Ok(id)
    }

    fn atom(&mut self) -> Result<FormulaId, ParseError> {
        let at = self.offset();
        let parts = match self.bump() {
            Some(Tok::Name(parts)) => parts.clone(),
            Some(t) => return Err(ParseError::new(at, format!("expected formula, found {}", t))),
            None => return Err(ParseError::new(at, "expected formula, found end of input")),
        };
        let mut name = String::new();
        for part in &parts {
            match part {
                NamePart::Text(t) => name.push_str(t),
                NamePart::Subscript(terms) => {
                    for (k, term) in terms.iter().enumerate() {
                        if k > 0 {
                            name.push('_');
                        }
                        let value = match term {
                            SubscriptTerm::Literal(n) => *n as i64,
                            SubscriptTerm::Var { name: var, offset } => {
                                let base = self
                                    .env
                                    .iter()
                                    .rev()
                                    .find(|(v, _)| v == var)
                                    .map(|(_, val)| *val);
                                match base {
                                    Some(v) => v as i64 + offset,
                                    None => {
                                        return Err(ParseError::new(
                                            at,
                                            format!("unbound subscript variable `{}`", var),
                                        ))
                                    }
                                }
                            }
                        };
                        if value < 0 {
                            return Err(ParseError::new(
                                at,
                                format!("subscript evaluates to negative value {}", value),
                            ));
                        }
                        name.push_str(&value.to_string());
                    }
                }
            }
        }
        let res = self.builder.atom(&name);
        lift(at, res)
    }
}

fn lift(at: usize, res: Result<FormulaId, FormulaError>) -> Result<FormulaId, ParseError> {
    res.map_err(|e| ParseError::new(at, e.to_string()))
}

/// Parses the surface syntax into an interned [`Formula`], expanding
/// quantifiers and implication on the way.
pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks: &toks,
        cursor: 0,
        end: text.len(),
        builder: FormulaBuilder::new(),
        env: Vec::new(),
    };
    let root = parser.formula()?;
    if parser.cursor < toks.len() {
        let (at, tok) = &toks[parser.cursor];
        return Err(ParseError::new(*at, format!("unexpected trailing {}", tok)));
    }
    Ok(parser.builder.build(root))
}
