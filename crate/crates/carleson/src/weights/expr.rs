//! Weight expression language: parser, printer and evaluators.
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//!        | 'piecewise' '{' piece (';' piece)* '}'
//! piece := '(' expr ',' expr ']' ':' expr
//! ```
//!
//! Variables are `r` (distance to the boundary, `1 - |z|`), `theta` (angle,
//! circle of measure 1), `k` (shell index inside shell families) and `pi`.
//! Any other identifier is a parameter and must be substituted before use.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::quad::{ln_add, ln_sub};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Min,
    Max,
    Pow,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            "pow" => Func::Pow,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }

    pub const ALL: [Func; 9] =
        [Func::Exp, Func::Log, Func::Abs, Func::Min, Func::Max, Func::Pow, Func::Sin, Func::Cos, Func::Sqrt];
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub lo: Expr,
    pub hi: Expr,
    pub body: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
    /// Pieces keyed by half-open intervals `(lo, hi]` of `r`.
    Piecewise(Vec<Piece>),
}

/// Values of the free variables during evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Env {
    pub r: f64,
    pub theta: f64,
    pub k: f64,
}

impl Env {
    pub fn r(r: f64) -> Self {
        Env { r, ..Default::default() }
    }
}

pub const RESERVED: [&str; 4] = ["r", "theta", "k", "pi"];

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn eval(&self, env: &Env) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => match name.as_str() {
                "r" => env.r,
                "theta" => env.theta,
                "k" => env.k,
                "pi" => std::f64::consts::PI,
                _ => f64::NAN,
            },
            Expr::Neg(e) => -e.eval(env),
            Expr::Bin(op, a, b) => {
                let (x, y) = (a.eval(env), b.eval(env));
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, args) => {
                let x = args[0].eval(env);
                match f {
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Abs => x.abs(),
                    Func::Min => x.min(args[1].eval(env)),
                    Func::Max => x.max(args[1].eval(env)),
                    Func::Pow => x.powf(args[1].eval(env)),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Sqrt => x.sqrt(),
                }
            }
            Expr::Piecewise(pieces) => match self.select(pieces, env) {
                Some(p) => p.body.eval(env),
                None => f64::NAN,
            },
        }
    }

    fn select<'a>(&self, pieces: &'a [Piece], env: &Env) -> Option<&'a Piece> {
        pieces.iter().find(|p| p.lo.eval(env) < env.r && env.r <= p.hi.eval(env))
    }

    /// Natural log of the value, computed symbolically where possible so that
    /// products of exponentials keep their size after `exp` underflows.
    /// NaN signals a negative value.
    pub fn ln_eval(&self, env: &Env) -> f64 {
        let direct = || self.eval(env).ln();
        match self {
            Expr::Num(v) => v.ln(),
            Expr::Var(_) => direct(),
            Expr::Neg(_) => direct(),
            Expr::Bin(op, a, b) => match op {
                BinOp::Mul | BinOp::Div => {
                    let (x, y) = (a.ln_eval(env), b.ln_eval(env));
                    if x.is_nan() || y.is_nan() {
                        return direct();
                    }
                    if *op == BinOp::Mul {
                        x + y
                    } else {
                        x - y
                    }
                }
                BinOp::Add | BinOp::Sub => {
                    let (x, y) = (a.ln_eval(env), b.ln_eval(env));
                    if x.is_nan() || y.is_nan() {
                        return direct();
                    }
                    if *op == BinOp::Add {
                        ln_add(x, y)
                    } else if x >= y {
                        ln_sub(x, y)
                    } else {
                        f64::NAN
                    }
                }
                BinOp::Pow => ln_pow(a, b, env).unwrap_or_else(direct),
            },
            Expr::Call(f, args) => match f {
                Func::Exp => args[0].eval(env),
                Func::Sqrt => 0.5 * args[0].ln_eval(env),
                Func::Pow => ln_pow(&args[0], &args[1], env).unwrap_or_else(direct),
                Func::Abs => {
                    let x = args[0].ln_eval(env);
                    if x.is_nan() {
                        direct()
                    } else {
                        x
                    }
                }
                Func::Min | Func::Max => {
                    let (x, y) = (args[0].ln_eval(env), args[1].ln_eval(env));
                    if x.is_nan() || y.is_nan() {
                        return direct();
                    }
                    if *f == Func::Min {
                        x.min(y)
                    } else {
                        x.max(y)
                    }
                }
                Func::Log => args[0].ln_eval(env).ln(),
                _ => direct(),
            },
            Expr::Piecewise(pieces) => match self.select(pieces, env) {
                Some(p) => p.body.ln_eval(env),
                None => f64::NAN,
            },
        }
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => v == var,
            Expr::Neg(e) => e.mentions(var),
            Expr::Bin(_, a, b) => a.mentions(var) || b.mentions(var),
            Expr::Call(_, args) => args.iter().any(|a| a.mentions(var)),
            Expr::Piecewise(ps) => {
                var == "r" || ps.iter().any(|p| p.lo.mentions(var) || p.hi.mentions(var) || p.body.mentions(var))
            }
        }
    }

    /// Identifiers that are neither reserved variables nor known parameters.
    pub fn free_parameters(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !RESERVED.contains(&v.as_str()) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Neg(e) => e.free_parameters(out),
            Expr::Bin(_, a, b) => {
                a.free_parameters(out);
                b.free_parameters(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.free_parameters(out)),
            Expr::Piecewise(ps) => {
                for p in ps {
                    p.lo.free_parameters(out);
                    p.hi.free_parameters(out);
                    p.body.free_parameters(out);
                }
            }
        }
    }

    /// Replace parameter names by their numeric values.
    pub fn substitute(&self, params: &BTreeMap<String, f64>) -> Expr {
        match self {
            Expr::Var(v) => match params.get(v) {
                Some(x) if !RESERVED.contains(&v.as_str()) => Expr::Num(*x),
                _ => self.clone(),
            },
            Expr::Num(_) => self.clone(),
            Expr::Neg(e) => Expr::Neg(Box::new(e.substitute(params))),
            Expr::Bin(op, a, b) => Expr::bin(*op, a.substitute(params), b.substitute(params)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| a.substitute(params)).collect()),
            Expr::Piecewise(ps) => Expr::Piecewise(
                ps.iter()
                    .map(|p| Piece { lo: p.lo.substitute(params), hi: p.hi.substitute(params), body: p.body.substitute(params) })
                    .collect(),
            ),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "(")?;
            self.write_at(f, 0)?;
            return write!(f, ")");
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_at(f, 3)
            }
            Expr::Bin(op, a, b) => {
                let (sym, l, r) = match op {
                    BinOp::Add => (" + ", 1, 2),
                    BinOp::Sub => (" - ", 1, 2),
                    BinOp::Mul => (" * ", 2, 3),
                    BinOp::Div => (" / ", 2, 3),
                    BinOp::Pow => ("^", 5, 3),
                };
                a.write_at(f, l)?;
                write!(f, "{sym}")?;
                b.write_at(f, r)
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    a.write_at(f, 0)?;
                }
                write!(f, ")")
            }
            Expr::Piecewise(ps) => {
                write!(f, "piecewise {{ ")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "(")?;
                    p.lo.write_at(f, 0)?;
                    write!(f, ", ")?;
                    p.hi.write_at(f, 0)?;
                    write!(f, "]: ")?;
                    p.body.write_at(f, 0)?;
                }
                write!(f, " }}")
            }
        }
    }
}

fn ln_pow(a: &Expr, b: &Expr, env: &Env) -> Option<f64> {
    let la = a.ln_eval(env);
    if la.is_nan() {
        return None;
    }
    let y = b.eval(env);
    if y == 0.0 {
        return Some(0.0);
    }
    Some(y * la)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize, usize)>> {
        let mut lx = Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 };
        let mut out = Vec::new();
        loop {
            lx.skip_ws();
            let (line, col) = (lx.line, lx.col);
            let Some(&c) = lx.src.get(lx.pos) else {
                out.push((Tok::End, line, col));
                return Ok(out);
            };
            let tok = if c.is_ascii_digit() || c == b'.' {
                lx.number()?
            } else if c.is_ascii_alphabetic() || c == b'_' {
                let start = lx.pos;
                while lx.pos < lx.src.len() && (lx.src[lx.pos].is_ascii_alphanumeric() || lx.src[lx.pos] == b'_') {
                    lx.bump();
                }
                Tok::Ident(String::from_utf8_lossy(&lx.src[start..lx.pos]).into_owned())
            } else if b"+-*/^(),;:{}]".contains(&c) {
                lx.bump();
                Tok::Sym(c as char)
            } else {
                return Err(Error::Syntax { line, col, msg: format!("unexpected character `{}`", c as char) });
            };
            out.push((tok, line, col));
        }
    }

    fn bump(&mut self) {
        if self.src[self.pos] == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        self.pos += 1;
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c == b'#' {
                while self.pos < self.src.len() && self.src[self.pos] != b'\n' {
                    self.bump();
                }
            } else if c.is_ascii_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<Tok> {
        let (line, col) = (self.line, self.col);
        let start = self.pos;
        let digits = |lx: &mut Lexer| {
            while lx.pos < lx.src.len() && lx.src[lx.pos].is_ascii_digit() {
                lx.bump();
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.bump();
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = (self.pos, self.line, self.col);
            self.bump();
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.bump();
            }
            if self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                (self.pos, self.line, self.col) = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| Error::Syntax { line, col, msg: format!("bad number `{text}`") })
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (_, line, col) = &self.toks[self.pos];
        Err(Error::Syntax { line: *line, col: *col, msg: msg.into() })
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if *self.peek() == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Sym('-') {
            self.next();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Sym('^') {
            self.next();
            return Ok(Expr::bin(BinOp::Pow, base, self.unary()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.next();
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.next();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) if name == "piecewise" => {
                self.next();
                self.piecewise()
            }
            Tok::Ident(name) => {
                self.next();
                if *self.peek() != Tok::Sym('(') {
                    return Ok(Expr::Var(name));
                }
                let Some(func) = Func::from_name(&name) else {
                    return self.err(format!("unknown function `{name}`"));
                };
                self.next();
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Sym(',') {
                    self.next();
                    args.push(self.expr()?);
                }
                self.expect(')')?;
                if args.len() != func.arity() {
                    return self.err(format!("`{name}` takes {} argument(s), got {}", func.arity(), args.len()));
                }
                Ok(Expr::Call(func, args))
            }
            Tok::End => self.err("unexpected end of input"),
            Tok::Sym(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn piecewise(&mut self) -> Result<Expr> {
        self.expect('{')?;
        let mut pieces = Vec::new();
        loop {
            self.expect('(')?;
            let lo = self.expr()?;
            self.expect(',')?;
            let hi = self.expr()?;
            self.expect(']')?;
            self.expect(':')?;
            let body = self.expr()?;
            pieces.push(Piece { lo, hi, body });
            match self.next() {
                Tok::Sym(';') => continue,
                Tok::Sym('}') => return Ok(Expr::Piecewise(pieces)),
                _ => {
                    self.pos -= 1;
                    return self.err("expected `;` or `}`");
                }
            }
        }
    }
}

/// Parse an expression; errors carry line and column.
pub fn parse(src: &str) -> Result<Expr> {
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_associativity() {
        let e = parse("-2^2").unwrap();
        assert_eq!(e.eval(&Env::default()), -4.0);
        let e = parse("2^-k").unwrap();
        assert_eq!(e.eval(&Env { k: 3.0, ..Default::default() }), 0.125);
        let e = parse("2^3^2").unwrap();
        assert_eq!(e.eval(&Env::default()), 512.0);
        let e = parse("8 / 4 / 2 - 1 - 1").unwrap();
        assert_eq!(e.eval(&Env::default()), -1.0);
    }

    #[test]
    fn printing_is_stable() {
        for src in ["a - (b - c)", "(-a)^b", "-a^b", "a * -b", "2^(-k - 1) * (1 + 2^(-k - 1))", "min(r, 1 / 2)"] {
            let e = parse(src).unwrap();
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
        assert_eq!(parse("a-(b-c)").unwrap().to_string(), "a - (b - c)");
    }

    #[test]
    fn piecewise_blocks() {
        let e = parse("piecewise { (0, 1/2]: r; (1/2, 1]: 1 - r }").unwrap();
        assert_eq!(e.eval(&Env::r(0.25)), 0.25);
        assert_eq!(e.eval(&Env::r(0.75)), 0.25);
        assert_eq!(e.eval(&Env::r(0.5)), 0.5);
        assert_eq!(parse(&e.to_string()).unwrap(), e);
    }

    #[test]
    fn errors_have_positions() {
        match parse("exp(") {
            Err(Error::Syntax { line: 1, col: 5, .. }) => {}
            other => panic!("{other:?}"),
        }
        match parse("1 +\n  * 2") {
            Err(Error::Syntax { line: 2, col: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(parse("foo(1)").is_err());
        assert!(parse("min(1)").is_err());
    }

    #[test]
    fn log_evaluation_past_underflow() {
        let e = parse("2 * exp(-1 / r^2) / (r^3 * (1 - r))").unwrap();
        let r = 1e-3;
        let want = 2f64.ln() - 1.0 / (r * r) - 3.0 * r.ln() - (1.0 - r).ln();
        assert_eq!(e.eval(&Env::r(r)), 0.0);
        assert!((e.ln_eval(&Env::r(r)) - want).abs() < 1e-9 * want.abs());
    }
}
