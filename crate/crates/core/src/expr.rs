//! Arithmetic expressions for user-defined payoff templates.
//!
//! Grammar (EBNF), lowest precedence first:
//!
//! ```text
//! expr    = term , { ( "+" | "-" ) , term } ;
//! term    = unary , { ( "*" | "/" ) , unary } ;
//! unary   = "-" , unary | power ;
//! power   = primary , [ "^" , unary ] ;          (* right-associative *)
//! primary = number | identifier | "(" , expr , ")" ;
//! number  = digits , [ "." , [ digits ] ] , [ exponent ]
//!         | "." , digits , [ exponent ] ;
//! exponent = ( "e" | "E" ) , [ "+" | "-" ] , digits ;
//! identifier = letter , { letter | digit | "_" } ;
//! ```
//!
//! Identifiers `x1..xm` name group-one strategies and `y1..yn` group-two
//! strategies; any other identifier must be a named parameter supplied at
//! parse time. So `-2^2` is `-(2^2)` and `2^3^2` is `2^(3^2)`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::game::{GroupSpec, StrategyProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown variable '{name}' at offset {offset} (valid: x1..x{m}, y1..y{n})")]
    UnknownVariable {
        name: String,
        offset: usize,
        m: usize,
        n: usize,
    },
    #[error("unknown identifier '{name}' at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("division by zero in '{expr}'")]
    DivisionByZero { expr: String },
    #[error("profile has {g1} + {g2} strategies, expression expects {m} + {n}")]
    DimensionMismatch { g1: usize, g2: usize, m: usize, n: usize },
}

/// A strategy variable, zero-based (`X(0)` prints as `x1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X(usize),
    Y(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::Y(i) => write!(f, "y{}", i + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    /// A named constant, resolved when parsed.
    Param { name: String, value: f64 },
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Evaluates with the variables read from `profile`.
    pub fn evaluate(&self, profile: &StrategyProfile) -> Result<f64, ExprError> {
        self.evaluate_with(&|v| match v {
            Var::X(i) => profile.g1.get(i).copied(),
            Var::Y(i) => profile.g2.get(i).copied(),
        })
        .map_err(|e| match e {
            ExprError::UnknownVariable { .. } => ExprError::DimensionMismatch {
                g1: profile.g1.len(),
                g2: profile.g2.len(),
                m: self.max_index(|v| matches!(v, Var::X(_))),
                n: self.max_index(|v| matches!(v, Var::Y(_))),
            },
            other => other,
        })
    }

    /// Evaluates with an arbitrary variable lookup; `None` from the lookup is
    /// reported as an unknown variable.
    pub fn evaluate_with(&self, lookup: &dyn Fn(Var) -> Option<f64>) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Param { value, .. } => *value,
            Expr::Var(v) => lookup(*v).ok_or_else(|| ExprError::UnknownVariable {
                name: v.to_string(),
                offset: 0,
                m: 0,
                n: 0,
            })?,
            Expr::Neg(e) => -e.evaluate_with(lookup)?,
            Expr::Binary { op, lhs, rhs } => {
                let l = lhs.evaluate_with(lookup)?;
                let r = rhs.evaluate_with(lookup)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(ExprError::DivisionByZero {
                                expr: self.to_string(),
                            });
                        }
                        l / r
                    }
                    BinOp::Pow => l.powf(r),
                }
            }
        })
    }

    fn max_index(&self, pick: impl Fn(&Var) -> bool + Copy) -> usize {
        match self {
            Expr::Var(v) if pick(v) => match v {
                Var::X(i) | Var::Y(i) => i + 1,
            },
            Expr::Neg(e) => e.max_index(pick),
            Expr::Binary { lhs, rhs, .. } => lhs.max_index(pick).max(rhs.max_index(pick)),
            _ => 0,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => match op {
                BinOp::Add | BinOp::Sub => 1,
                BinOp::Mul | BinOp::Div => 2,
                BinOp::Pow => 4,
            },
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let paren = self.precedence() < min_prec;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(v) => write!(f, "{v}")?,
            Expr::Param { name, .. } => f.write_str(name)?,
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.write_at(f, 3)?;
            }
            Expr::Binary { op, lhs, rhs } => {
                let (l, r) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                lhs.write_at(f, l)?;
                if *op == BinOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                rhs.write_at(f, r)?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// Prints with the minimum parentheses needed to parse back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::End => "end of input".into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number '{text}'"),
                })?;
                out.push((Tok::Num(value), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

/// Recognizes `x<k>` / `y<k>` with a positive decimal index.
fn variable_name(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let head = chars.next()?;
    if head != 'x' && head != 'y' {
        return None;
    }
    let digits = chars.as_str();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().map(|k| (head, k))
}

pub fn is_variable_name(name: &str) -> bool {
    variable_name(name).is_some()
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    groups: GroupSpec,
    params: &'a BTreeMap<String, f64>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ExprError {
        ExprError::Syntax {
            offset: self.offset(),
            message: format!("unexpected {}", describe(self.peek())),
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                let offset = self.offset();
                self.bump();
                self.identifier(name, offset)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(ExprError::Syntax {
                        offset: self.offset(),
                        message: format!("expected ')', found {}", describe(self.peek())),
                    });
                }
                self.bump();
                Ok(inner)
            }
            _ => Err(self.unexpected()),
        }
    }

    fn identifier(&self, name: String, offset: usize) -> Result<Expr, ExprError> {
        if let Some((head, k)) = variable_name(&name) {
            let limit = if head == 'x' { self.groups.m() } else { self.groups.n() };
            if k == 0 || k > limit {
                return Err(ExprError::UnknownVariable {
                    name,
                    offset,
                    m: self.groups.m(),
                    n: self.groups.n(),
                });
            }
            return Ok(Expr::Var(if head == 'x' {
                Var::X(k - 1)
            } else {
                Var::Y(k - 1)
            }));
        }
        match self.params.get(&name) {
            Some(&value) => Ok(Expr::Param { name, value }),
            None => Err(ExprError::UnknownIdentifier { name, offset }),
        }
    }
}

/// Parses `source` against the given group sizes and named parameters.
pub fn parse(
    source: &str,
    groups: GroupSpec,
    params: &BTreeMap<String, f64>,
) -> Result<Expr, ExprError> {
    let mut p = Parser {
        toks: tokenize(source)?,
        pos: 0,
        groups,
        params,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected());
    }
    Ok(e)
}
