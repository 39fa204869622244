//! A small arithmetic language for coefficient functions.
//!
//! Coefficients `m`, `a`, `g` and the nonlinearity `f` are written as
//! expressions over the variables `x`, `y`, `d` (unsigned distance to the
//! boundary) and `u`. The grammar, with the usual precedence
//! (`^` > unary `-` > `* /` > `+ -`), left associativity for binary operators
//! and right associativity for `^`:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Functions: `sin cos exp log sqrt abs` (one argument) and `min max` (two or
//! more). Evaluation never produces a silent NaN: domain violations are
//! reported as [`EvalError::Domain`].

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X,
    Y,
    D,
    U,
}

impl Var {
    pub fn name(self) -> char {
        match self {
            Var::X => 'x',
            Var::Y => 'y',
            Var::D => 'd',
            Var::U => 'u',
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    const ALL: [Func; 8] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
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

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parse failure. `offset` is the 1-based byte column of the offending token
/// (`len + 1` for an unexpected end of input).
#[derive(Clone, Debug, PartialEq, Error)]
#[error("syntax error at offset {offset}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{}`", .0.name())]
    UnboundVariable(Var),
    #[error("domain error: {op} of {arg}")]
    Domain { op: &'static str, arg: f64 },
}

/// Values for the free variables of an expression.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bindings {
    values: [f64; 4],
    bound: u8,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var.slot()] = value;
        self.bound |= 1 << var.slot();
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        (self.bound & (1 << var.slot()) != 0).then(|| self.values[var.slot()])
    }

    /// Position variables `x`, `y`, `d`.
    pub fn at(x: f64, y: f64, d: f64) -> Self {
        Self::new().with(Var::X, x).with(Var::Y, y).with(Var::D, d)
    }
}

pub fn parse(source: &str) -> Result<Expr, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: source.len() + 1,
    };
    let e = p.expr()?;
    match p.peek() {
        None => Ok(e),
        Some(_) => Err(p.error(&["operator", "end of input"])),
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Expr {
    pub fn eval(&self, env: &Bindings) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(var) => env.get(*var).ok_or(EvalError::UnboundVariable(*var))?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(env)?, r.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(EvalError::Domain { op: "division", arg: b });
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b),
                }
            }
            Expr::Call(func, args) => {
                let first = args[0].eval(env)?;
                match func {
                    Func::Sin => first.sin(),
                    Func::Cos => first.cos(),
                    Func::Exp => first.exp(),
                    Func::Log => {
                        if first <= 0.0 {
                            return Err(EvalError::Domain { op: "log", arg: first });
                        }
                        first.ln()
                    }
                    Func::Sqrt => {
                        if first < 0.0 {
                            return Err(EvalError::Domain { op: "sqrt", arg: first });
                        }
                        first.sqrt()
                    }
                    Func::Abs => first.abs(),
                    Func::Min | Func::Max => {
                        let mut acc = first;
                        for a in &args[1..] {
                            let v = a.eval(env)?;
                            acc = if *func == Func::Min { acc.min(v) } else { acc.max(v) };
                        }
                        acc
                    }
                }
            }
        };
        if v.is_nan() {
            return Err(EvalError::Domain {
                op: "operation",
                arg: f64::NAN,
            });
        }
        Ok(v)
    }

    /// Centered finite difference of the expression in `u`, step
    /// `1e-6 * max(1, |u|)`.
    pub fn partial_u(&self, env: &Bindings) -> Result<f64, EvalError> {
        let u = env.get(Var::U).ok_or(EvalError::UnboundVariable(Var::U))?;
        let step = 1e-6 * u.abs().max(1.0);
        let hi = self.eval(&env.with(Var::U, u + step))?;
        let lo = self.eval(&env.with(Var::U, u - step))?;
        Ok((hi - lo) / (2.0 * step))
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(e) => e.uses(var),
            Expr::Binary(_, l, r) => l.uses(var) || r.uses(var),
            Expr::Call(_, args) => args.iter().any(|a| a.uses(var)),
        }
    }

    /// Evaluates a closed expression (no variables).
    pub fn constant(&self) -> Result<f64, EvalError> {
        self.eval(&Bindings::new())
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b == 2.0 {
        a * a
    } else if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// Fully parenthesized, so that printing then parsing reproduces the tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Op(c) => write!(f, "`{c}`"),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == b'.' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| ParseError {
                offset: start + 1,
                expected: vec!["number"],
                found: format!("`{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else if b"+-*/^(),".contains(&c) {
            out.push((Tok::Op(c as char), i));
            i += 1;
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(ParseError {
                offset: i + 1,
                expected: vec!["expression"],
                found: format!("`{ch}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        let (offset, found) = match self.tokens.get(self.pos) {
            Some((t, at)) => (at + 1, t.to_string()),
            None => (self.end, "end of input".to_string()),
        };
        ParseError {
            offset,
            expected: expected.to_vec(),
            found,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            // Exponent may carry its own sign: 2^-1, and binds right: 2^3^2 = 2^9.
            let exp = self.unary()?;
            Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        const ATOM: &[&str] = &["number", "variable", "function", "`(`"];
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Op('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error(&["`)`", "operator"]));
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                let var = match name.as_str() {
                    "x" => Some(Var::X),
                    "y" => Some(Var::Y),
                    "d" => Some(Var::D),
                    "u" => Some(Var::U),
                    _ => None,
                };
                if let Some(v) = var {
                    self.pos += 1;
                    return Ok(Expr::Var(v));
                }
                let Some(func) = Func::ALL.into_iter().find(|f| f.name() == name) else {
                    return Err(self.error(&["variable x, y, d or u", "function"]));
                };
                self.pos += 1;
                if !self.eat('(') {
                    return Err(self.error(&["`(`"]));
                }
                let mut args = vec![self.expr()?];
                while self.eat(',') {
                    if !func.variadic() {
                        self.pos -= 1;
                        return Err(self.error(&["`)`"]));
                    }
                    args.push(self.expr()?);
                }
                if func.variadic() && args.len() < 2 {
                    return Err(self.error(&["`,`"]));
                }
                if !self.eat(')') {
                    return Err(self.error(&["`)`", "`,`", "operator"]));
                }
                Ok(Expr::Call(func, args))
            }
            _ => Err(self.error(ATOM)),
        }
    }
}
