//! Arithmetic expressions in one variable.
//!
//! This is the closed-form branch language: binary `+ - * /`, right-associative
//! `^`, unary minus, `sqrt(e)`, the variable `x`, and numeric literals
//! (decimal, with optional exponent). A rational constant like `17/60` is the
//! division of two literals, which in double precision is exactly the
//! correctly rounded rational. There is no implicit multiplication and the
//! only identifiers are `x` and `sqrt`.
//!
//! [`differentiate`] is total: powers with a non-constant exponent use the
//! logarithmic rule and introduce [`Expr::Ln`], which evaluates and prints but
//! is deliberately not part of the input grammar. Simplification is constant
//! folding plus the 0/1 identities, nothing more; trees round-trip through
//! [`Display`](std::fmt::Display) and [`parse`].

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// The variable `x`.
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sqrt(Box<Expr>),
    /// Natural logarithm. Produced by [`differentiate`] for `a^b` with
    /// non-constant `b`; rejected by the parser.
    Ln(Box<Expr>),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

/// What went wrong while evaluating, and on which subexpression.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("square root of negative value {value} in `{subexpr}`")]
    SqrtOfNegative { value: f64, subexpr: String },
    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },
    #[error("logarithm of non-positive value {value} in `{subexpr}`")]
    LnOfNonPositive { value: f64, subexpr: String },
    #[error("non-finite result in `{subexpr}`")]
    NonFinite { subexpr: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Tok {
    Num(f64),
    X,
    Sqrt,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, bytes: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token and its starting byte offset.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.pos >= self.bytes.len() {
            return Ok((Tok::Eof, start));
        }
        let b = self.bytes[self.pos];
        let simple = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((tok, start));
        }
        if b.is_ascii_digit() || b == b'.' {
            return self.lex_number(start);
        }
        if b.is_ascii_alphabetic() {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident = &self.src[start..self.pos];
            return match ident {
                "x" => Ok((Tok::X, start)),
                "sqrt" => Ok((Tok::Sqrt, start)),
                other => Err(ParseError {
                    offset: start,
                    message: format!("unknown identifier `{other}` (only `x` and `sqrt` are allowed)"),
                }),
            };
        }
        Err(ParseError {
            offset: start,
            message: format!("unexpected character `{}`", &self.src[start..start + 1]),
        })
    }

    fn lex_number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let n = self.bytes.len();
        while self.pos < n && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < n && self.bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < n && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        if self.pos < n && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < n && (self.bytes[self.pos] == b'+' || self.bytes[self.pos] == b'-') {
                self.pos += 1;
            }
            if self.pos < n && self.bytes[self.pos].is_ascii_digit() {
                while self.pos < n && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            } else {
                // `2e` with no exponent digits: the `e` belongs to nothing.
                self.pos = mark;
            }
        }
        let text = &self.src[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((Tok::Num(v), start)),
            _ => Err(ParseError { offset: start, message: format!("invalid number literal `{text}`") }),
        }
    }
}

/// Hard cap on grammar recursion: adversarial nesting must fail with a
/// parse error rather than overflow the stack.
const MAX_NESTING: usize = 200;

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    tok_offset: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let (tok, tok_offset) = lexer.next()?;
        Ok(Parser { lexer, tok, tok_offset, depth: 0 })
    }

    fn bump(&mut self) -> Result<(), ParseError> {
        let (tok, off) = self.lexer.next()?;
        self.tok = tok;
        self.tok_offset = off;
        Ok(())
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if self.tok == want {
            self.bump()
        } else {
            Err(self.unexpected(what))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        ParseError { offset: self.tok_offset, message: format!("expected {what}") }
    }

    // sum := product (('+'|'-') product)*
    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            match self.tok {
                Tok::Plus => {
                    self.bump()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.product()?));
                }
                Tok::Minus => {
                    self.bump()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.product()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // product := unary (('*'|'/') unary)*
    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.tok {
                Tok::Star => {
                    self.bump()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Tok::Slash => {
                    self.bump()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    // unary := '-' unary | power
    //
    // Every nesting construct recurses through here (parens and sqrt via
    // atom -> sum -> product, minus chains directly), so this is the one
    // place the depth cap has to live.
    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.depth >= MAX_NESTING {
            return Err(ParseError {
                offset: self.tok_offset,
                message: "expression nests too deeply".into(),
            });
        }
        self.depth += 1;
        let result = if self.tok == Tok::Minus {
            match self.bump() {
                Ok(()) => self.unary().map(|e| Expr::Neg(Box::new(e))),
                Err(err) => Err(err),
            }
        } else {
            self.power()
        };
        self.depth -= 1;
        result
    }

    // power := atom ('^' unary)?   (right-associative, exponent may be signed)
    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.tok == Tok::Caret {
            self.bump()?;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.tok {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Const(v))
            }
            Tok::X => {
                self.bump()?;
                Ok(Expr::Var)
            }
            Tok::Sqrt => {
                self.bump()?;
                self.expect(Tok::LParen, "`(` after `sqrt`")?;
                let inner = self.sum()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(Expr::Sqrt(Box::new(inner)))
            }
            Tok::LParen => {
                self.bump()?;
                let inner = self.sum()?;
                self.expect(Tok::RParen, "closing `)`")?;
                Ok(inner)
            }
            _ => Err(self.unexpected("a number, `x`, `sqrt(...)`, or `(`")),
        }
    }
}

/// Parse `src` into an expression tree. Errors carry the byte offset of the
/// offending token.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(src)?;
    let e = p.sum()?;
    if p.tok != Tok::Eof {
        return Err(ParseError { offset: p.tok_offset, message: "expected end of input".into() });
    }
    Ok(e)
}

/// Evaluate at the given value of `x`. Domain violations (square root of a
/// negative, division by zero, log of a non-positive) report the offending
/// subexpression; so does any non-finite intermediate.
pub fn eval(e: &Expr, x: f64) -> Result<f64, EvalError> {
    let v = match e {
        Expr::Const(c) => *c,
        Expr::Var => x,
        Expr::Neg(a) => -eval(a, x)?,
        Expr::Add(a, b) => eval(a, x)? + eval(b, x)?,
        Expr::Sub(a, b) => eval(a, x)? - eval(b, x)?,
        Expr::Mul(a, b) => eval(a, x)? * eval(b, x)?,
        Expr::Div(a, b) => {
            let den = eval(b, x)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero { subexpr: e.to_string() });
            }
            eval(a, x)? / den
        }
        Expr::Pow(a, b) => eval(a, x)?.powf(eval(b, x)?),
        Expr::Sqrt(a) => {
            let v = eval(a, x)?;
            if v < 0.0 {
                return Err(EvalError::SqrtOfNegative { value: v, subexpr: e.to_string() });
            }
            v.sqrt()
        }
        Expr::Ln(a) => {
            let v = eval(a, x)?;
            if v <= 0.0 {
                return Err(EvalError::LnOfNonPositive { value: v, subexpr: e.to_string() });
            }
            v.ln()
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite { subexpr: e.to_string() })
    }
}

// Smart constructors: fold constant operands and the 0/1 identities so that
// derivative trees stay readable. No deeper rewriting.

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn is_const(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x + y),
        _ if is_const(&a, 0.0) => b,
        _ if is_const(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x - y),
        _ if is_const(&b, 0.0) => a,
        _ if is_const(&a, 0.0) => Expr::Neg(Box::new(b)),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x * y),
        _ if is_const(&a, 0.0) || is_const(&b, 0.0) => c(0.0),
        _ if is_const(&a, 1.0) => b,
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) if *y != 0.0 => c(x / y),
        _ if is_const(&a, 0.0) && !is_const(&b, 0.0) => c(0.0),
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => c(x.powf(*y)),
        _ if is_const(&b, 1.0) => a,
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match &a {
        Expr::Const(x) => c(-x),
        _ => Expr::Neg(Box::new(a)),
    }
}

/// True when the tree mentions `x` anywhere.
pub fn contains_var(e: &Expr) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var => true,
        Expr::Neg(a) | Expr::Sqrt(a) | Expr::Ln(a) => contains_var(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
            contains_var(a) || contains_var(b)
        }
    }
}

/// Symbolic derivative with respect to `x`, with constant folding. Total on
/// all trees: `a^b` with non-constant `b` differentiates through
/// `a^b · (b'·ln a + b·a'/a)`.
pub fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Var => c(1.0),
        Expr::Neg(a) => neg(differentiate(a)),
        Expr::Add(a, b) => add(differentiate(a), differentiate(b)),
        Expr::Sub(a, b) => sub(differentiate(a), differentiate(b)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a), (**b).clone()),
            mul((**a).clone(), differentiate(b)),
        ),
        Expr::Div(a, b) => div(
            sub(
                mul(differentiate(a), (**b).clone()),
                mul((**a).clone(), differentiate(b)),
            ),
            pow((**b).clone(), c(2.0)),
        ),
        Expr::Pow(a, b) => match &**b {
            Expr::Const(k) => mul(
                mul(c(*k), pow((**a).clone(), c(k - 1.0))),
                differentiate(a),
            ),
            _ => mul(
                Expr::Pow(a.clone(), b.clone()),
                add(
                    mul(differentiate(b), Expr::Ln(a.clone())),
                    div(mul((**b).clone(), differentiate(a)), (**a).clone()),
                ),
            ),
        },
        Expr::Sqrt(a) => div(differentiate(a), mul(c(2.0), Expr::Sqrt(a.clone()))),
        Expr::Ln(a) => div(differentiate(a), (**a).clone()),
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; `parse` reconstructs the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Ln(a) => write!(f, "ln({a})"),
        }
    }
}
