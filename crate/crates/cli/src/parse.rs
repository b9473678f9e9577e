//! Lexer, LL(1) parser and canonical formatter for element expressions.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | power
//! power   := primary ('^' INT)?
//! primary := scalar | 'i' | 'id' | 'U' | 'Us' | 'V' | 'Vi'
//!          | 'diag' '(' NAME ')' | 'diag' '[' (INT ':' scalar ,)* ';'? scalar, ... ']'
//!          | 'comm' '(' expr ',' expr ')' | 'adj' '(' expr ')' | '(' expr ')'
//! ```

use std::collections::BTreeMap;
use std::fmt;

use bdshift_core::algebra::{BilateralElement, UnilateralElement};
use bdshift_core::profinite::LocallyConstantFunction;
use bdshift_core::sequences::EPSequence;
use bdshift_core::Scalar;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ParseError {
    Syntax { pos: Pos, message: String },
    UnknownName { pos: Pos, name: String },
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax { pos, message } => write!(f, "syntax error at {pos}: {message}"),
            ParseError::UnknownName { pos, name } => write!(f, "unknown name `{name}` at {pos}"),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Sym(c) => write!(f, "`{c}`"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

const MAX_INPUT: usize = 1 << 20;

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    if text.len() > MAX_INPUT {
        return Err(ParseError::Syntax { pos: Pos { line: 1, col: 1 }, message: "input exceeds 1 MB".into() });
    }
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                return Err(ParseError::Syntax {
                    pos: Pos { line, col: col + (i - start) },
                    message: "float literals are not accepted; write an exact fraction".into(),
                });
            }
            let digits: String = chars[start..i].iter().collect();
            out.push((Tok::Int(digits.parse().expect("digits")), pos));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if "+-*^/()[],;:".contains(c) {
            i += 1;
            out.push((Tok::Sym(c), pos));
        } else {
            return Err(ParseError::Syntax { pos, message: format!("unexpected character `{c}`") });
        }
        col += i - start;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Scalar(Scalar),
    Id,
    U,
    Us,
    V,
    Vi,
    DiagName(String, Pos),
    DiagLit { correction: BTreeMap<u64, Scalar>, table: Vec<Scalar> },
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Comm(Box<Expr>, Box<Expr>),
    Adj(Box<Expr>),
}

impl Expr {
    /// Whether a bilateral-only token occurs.
    pub fn mentions_v(&self) -> bool {
        match self {
            Expr::V | Expr::Vi => true,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Comm(a, b) => a.mentions_v() || b.mentions_v(),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Adj(a) => a.mentions_v(),
            _ => false,
        }
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    known: Option<&'a dyn Fn(&str) -> bool>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, message: String) -> Result<T, ParseError> {
        Err(ParseError::Syntax { pos: self.pos(), message })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected `{c}`, found {}", self.peek()))
        }
    }

    fn is_sym(&self, c: char) -> bool {
        *self.peek() == Tok::Sym(c)
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.is_sym('+') {
                self.bump();
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.is_sym('-') {
                self.bump();
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while self.is_sym('*') {
            self.bump();
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.is_sym('^') {
            return Ok(base);
        }
        self.bump();
        match self.peek().clone() {
            Tok::Int(k) => {
                let pos = self.pos();
                self.bump();
                let k = k.to_u32().ok_or(ParseError::Syntax { pos, message: "exponent too large".into() })?;
                Ok(Expr::Pow(Box::new(base), k))
            }
            Tok::Sym('-') => self.fail("negative powers are written with Us or Vi".into()),
            t => self.fail(format!("expected a nonnegative integer exponent, found {t}")),
        }
    }

    /// `INT ('/' INT)? 'i'?`
    fn number(&mut self, num: BigInt) -> Result<Scalar, ParseError> {
        let mut value = BigRational::from_integer(num);
        if self.is_sym('/') {
            self.bump();
            match self.peek().clone() {
                Tok::Int(d) if !d.is_zero() => {
                    self.bump();
                    value /= BigRational::from_integer(d);
                }
                Tok::Int(_) => return self.fail("zero denominator".into()),
                t => return self.fail(format!("expected a denominator, found {t}")),
            }
        }
        if *self.peek() == Tok::Ident("i".into()) {
            self.bump();
            return Ok(Scalar::new(BigRational::zero(), value));
        }
        Ok(Scalar::new(value, BigRational::zero()))
    }

    /// Signed sum of numeric literals and `i`, as used inside `diag[...]`.
    fn scalar(&mut self) -> Result<Scalar, ParseError> {
        let mut total = Scalar::zero();
        let mut first = true;
        loop {
            let negative = if self.is_sym('-') {
                self.bump();
                true
            } else if self.is_sym('+') {
                if first {
                    self.bump();
                }
                false
            } else if first {
                false
            } else {
                return Ok(total);
            };
            if !first && !negative {
                self.bump();
            }
            let v = match self.peek().clone() {
                Tok::Int(n) => {
                    self.bump();
                    self.number(n)?
                }
                Tok::Ident(s) if s == "i" => {
                    self.bump();
                    Scalar::i()
                }
                t => return self.fail(format!("expected a scalar, found {t}")),
            };
            total = if negative { total - v } else { total + v };
            first = false;
            if !self.is_sym('+') && !self.is_sym('-') {
                return Ok(total);
            }
        }
    }

    fn diag_literal(&mut self) -> Result<Expr, ParseError> {
        let mut correction = BTreeMap::new();
        let mut items = Vec::new();
        let mut seen_semicolon = false;
        loop {
            let pos = self.pos();
            let s = self.scalar()?;
            if self.is_sym(':') {
                if seen_semicolon || !items.is_empty() {
                    return self.fail("corrections must precede `;` and the periodic table".into());
                }
                self.bump();
                let idx = if s.im.is_zero() && s.re.is_integer() && !s.re.is_negative() {
                    s.re.to_integer().to_u64()
                } else {
                    None
                };
                let idx = idx.ok_or(ParseError::Syntax { pos, message: "correction index must be a nonnegative integer".into() })?;
                correction.insert(idx, self.scalar()?);
            } else {
                items.push(s);
            }
            if self.is_sym(',') {
                self.bump();
            } else if self.is_sym(';') && !seen_semicolon && items.is_empty() {
                self.bump();
                seen_semicolon = true;
            } else if self.is_sym(']') {
                self.bump();
                break;
            } else {
                return self.fail(format!("expected `,`, `;` or `]`, found {}", self.peek()));
            }
        }
        if items.is_empty() {
            return self.fail("diag literal needs a periodic table".into());
        }
        Ok(Expr::DiagLit { correction, table: items })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Int(n) => Ok(Expr::Scalar(self.number(n)?)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "i" => Ok(Expr::Scalar(Scalar::i())),
                "id" => Ok(Expr::Id),
                "U" => Ok(Expr::U),
                "Us" => Ok(Expr::Us),
                "V" => Ok(Expr::V),
                "Vi" => Ok(Expr::Vi),
                "diag" => {
                    if self.is_sym('[') {
                        self.bump();
                        return self.diag_literal();
                    }
                    self.expect('(')?;
                    let (t, npos) = self.bump();
                    let Tok::Ident(n) = t else {
                        return Err(ParseError::Syntax { pos: npos, message: format!("expected a sequence name, found {t}") });
                    };
                    if let Some(known) = self.known {
                        if !known(&n) {
                            return Err(ParseError::UnknownName { pos: npos, name: n });
                        }
                    }
                    self.expect(')')?;
                    Ok(Expr::DiagName(n, npos))
                }
                "comm" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(',')?;
                    let b = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Comm(Box::new(a), Box::new(b)))
                }
                "adj" => {
                    self.expect('(')?;
                    let a = self.expr()?;
                    self.expect(')')?;
                    Ok(Expr::Adj(Box::new(a)))
                }
                _ => Err(ParseError::UnknownName { pos, name }),
            },
            t => Err(ParseError::Syntax { pos, message: format!("unexpected {t}") }),
        }
    }
}

fn parse_inner(text: &str, known: Option<&dyn Fn(&str) -> bool>) -> Result<Expr, ParseError> {
    let mut p = Parser { toks: lex(text)?, at: 0, known };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {} after expression", p.peek()));
    }
    Ok(e)
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_inner(text, None)
}

/// Parses and rejects `diag(name)` for names the predicate does not know.
pub fn parse_with(text: &str, known: &dyn Fn(&str) -> bool) -> Result<Expr, ParseError> {
    parse_inner(text, Some(known))
}

// ---- formatting -------------------------------------------------------------

fn scalar_factor(s: &Scalar) -> String {
    let t = s.to_string();
    if t[1..].contains(['+', '-']) {
        format!("({t})")
    } else {
        t
    }
}

fn join_list(v: &[Scalar]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

/// A coefficient as printed: a scalar goes in front of the generator word,
/// anything else after it (or before `Us^p`).
enum Coef {
    Scalar(Scalar),
    Diag(String),
}

fn ep_coef(a: &EPSequence) -> Coef {
    if a.correction().is_empty() && a.table().len() == 1 {
        return Coef::Scalar(a.table()[0].clone());
    }
    let table = join_list(a.table());
    if a.correction().is_empty() {
        return Coef::Diag(format!("diag[{table}]"));
    }
    let corr: Vec<String> = a.correction().iter().map(|(k, v)| format!("{k}: {v}")).collect();
    Coef::Diag(format!("diag[{}; {table}]", corr.join(", ")))
}

fn lcf_coef(a: &LocallyConstantFunction) -> Coef {
    if a.period() == 1 {
        return Coef::Scalar(a.values()[0].clone());
    }
    Coef::Diag(format!("diag[{}]", join_list(a.values())))
}

fn power(g: &str, p: u64) -> String {
    if p == 1 {
        g.to_string()
    } else {
        format!("{g}^{p}")
    }
}

/// `word` is empty for degree zero.
fn scaled(c: &Scalar, word: &str) -> String {
    if word.is_empty() {
        return c.to_string();
    }
    if c.is_one() {
        word.to_string()
    } else if (-c).is_one() {
        format!("-{word}")
    } else {
        format!("{}*{word}", scalar_factor(c))
    }
}

fn join_terms(terms: Vec<String>) -> String {
    let mut out = String::new();
    for t in terms {
        if out.is_empty() {
            out = t;
        } else if let Some(rest) = t.strip_prefix('-') {
            out = format!("{out} - {rest}");
        } else {
            out = format!("{out} + {t}");
        }
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

fn term(coef: Coef, word: String, diag_first: bool) -> String {
    match coef {
        Coef::Scalar(c) if word.is_empty() && c.is_one() => "id".into(),
        Coef::Scalar(c) => scaled(&c, &word),
        Coef::Diag(d) if word.is_empty() => d,
        Coef::Diag(d) if diag_first => format!("{d}*{word}"),
        Coef::Diag(d) => format!("{word}*{d}"),
    }
}

/// Canonical text: `U^n*a` for `n > 0`, `a*Us^p` for `n = -p`; scalar
/// coefficients lead.
pub fn format_unilateral(x: &UnilateralElement) -> String {
    let terms = x
        .terms()
        .iter()
        .map(|(n, a)| {
            let p = n.unsigned_abs();
            let word = match n.signum() {
                0 => String::new(),
                1 => power("U", p),
                _ => power("Us", p),
            };
            term(ep_coef(a), word, *n < 0)
        })
        .collect();
    join_terms(terms)
}

/// Canonical text: `V^n*b` for `n > 0`, `Vi^p*b` for `n = -p`.
pub fn format_bilateral(x: &BilateralElement) -> String {
    let terms = x
        .terms()
        .iter()
        .map(|(n, b)| {
            let p = n.unsigned_abs();
            let word = match n.signum() {
                0 => String::new(),
                1 => power("V", p),
                _ => power("Vi", p),
            };
            term(lcf_coef(b), word, false)
        })
        .collect();
    join_terms(terms)
}
