//! Expression language for scalar fields over `(x, y, t)`.
//!
//! Precedence from loosest to tightest: `+ -`, `* /`, unary `-`, `^`
//! (right-associative). `2^-x` is accepted; `-x^2` is `-(x^2)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::noise::value_noise;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
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
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Abs,
    Exp,
    Log,
    Min,
    Max,
    Atan2,
    Hypot,
    VNoise,
}

impl Func {
    const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Sqrt,
        Func::Abs,
        Func::Exp,
        Func::Log,
        Func::Min,
        Func::Max,
        Func::Atan2,
        Func::Hypot,
        Func::VNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Min => "min",
            Func::Max => "max",
            Func::Atan2 => "atan2",
            Func::Hypot => "hypot",
            Func::VNoise => "vnoise",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Atan2 | Func::Hypot => 2,
            Func::VNoise => 3,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Var(Var::T) => t,
            Expr::Neg(e) => -e.eval(x, y, t),
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x, y, t), b.eval(x, y, t));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => libm::pow(a, b),
                }
            }
            Expr::Call(func, args) => {
                let arg = |k: usize| args[k].eval(x, y, t);
                match func {
                    Func::Sin => libm::sin(arg(0)),
                    Func::Cos => libm::cos(arg(0)),
                    Func::Sqrt => libm::sqrt(arg(0)),
                    Func::Abs => arg(0).abs(),
                    Func::Exp => libm::exp(arg(0)),
                    Func::Log => libm::log(arg(0)),
                    Func::Min => libm::fmin(arg(0), arg(1)),
                    Func::Max => libm::fmax(arg(0), arg(1)),
                    Func::Atan2 => libm::atan2(arg(0), arg(1)),
                    Func::Hypot => libm::hypot(arg(0), arg(1)),
                    Func::VNoise => value_noise(arg(0), arg(1), seed_from(arg(2))),
                }
            }
        }
    }
}

fn seed_from(v: f64) -> u64 {
    // Saturating float-to-int cast; NaN maps to 0.
    v as i64 as u64
}

// Fully parenthesized so printing and re-parsing gives back the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(v) => write!(f, "{v}"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::T) => f.write_str("t"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A parsed field expression.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProgram {
    root: Expr,
}

impl FieldProgram {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let tokens = lex(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let root = parser.expr()?;
        let tok = parser.peek();
        if tok.kind != TokenKind::End {
            return Err(ParseError::new(tok.offset, "unexpected trailing input"));
        }
        Ok(FieldProgram { root })
    }

    pub fn from_expr(root: Expr) -> Self {
        FieldProgram { root }
    }

    pub fn expr(&self) -> &Expr {
        &self.root
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.root.eval(x, y, t)
    }
}

impl FromStr for FieldProgram {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldProgram::parse(s)
    }
}

impl fmt::Display for FieldProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => TokenKind::Plus,
            b'-' => TokenKind::Minus,
            b'*' => TokenKind::Star,
            b'/' => TokenKind::Slash,
            b'^' => TokenKind::Caret,
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
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
                let literal = &text[start..i];
                let value = literal
                    .parse::<f64>()
                    .map_err(|_| ParseError::new(start, format!("invalid number {literal:?}")))?;
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(text[start..i].to_string()),
                    offset: start,
                });
                continue;
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::new(
                    start,
                    format!("unexpected character {ch:?}"),
                ));
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    tokens.push(Token {
        kind: TokenKind::End,
        offset: text.len(),
    });
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if tok.kind != TokenKind::End {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, kind: TokenKind, what: &str) -> Result<(), ParseError> {
        let tok = self.next();
        if tok.kind == kind {
            Ok(())
        } else {
            Err(ParseError::new(tok.offset, format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Plus => BinOp::Add,
                TokenKind::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().kind {
                TokenKind::Star => BinOp::Mul,
                TokenKind::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().kind == TokenKind::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if self.peek().kind == TokenKind::Caret {
            self.next();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let tok = self.next();
        match tok.kind {
            TokenKind::Number(v) => Ok(Expr::Number(v)),
            TokenKind::LParen => {
                let e = self.expr()?;
                self.expect(TokenKind::RParen, "')'")?;
                Ok(e)
            }
            TokenKind::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "t" => Ok(Expr::Var(Var::T)),
                "pi" => Ok(Expr::Number(std::f64::consts::PI)),
                _ => {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        ParseError::new(tok.offset, format!("unknown identifier {name:?}"))
                    })?;
                    self.call(func, tok.offset)
                }
            },
            TokenKind::End => Err(ParseError::new(tok.offset, "unexpected end of input")),
            _ => Err(ParseError::new(tok.offset, "expected an expression")),
        }
    }

    fn call(&mut self, func: Func, offset: usize) -> Result<Expr, ParseError> {
        self.expect(TokenKind::LParen, "'(' after function name")?;
        let mut args = vec![self.expr()?];
        while self.peek().kind == TokenKind::Comma {
            self.next();
            args.push(self.expr()?);
        }
        self.expect(TokenKind::RParen, "')'")?;
        if args.len() != func.arity() {
            return Err(ParseError::new(
                offset,
                format!(
                    "{} takes {} argument(s), got {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}
