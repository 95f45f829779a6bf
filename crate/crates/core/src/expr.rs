//! Coefficient mini-language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          right associative
//! primary := number | 'x' | 'y' | 'pi' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! func    := sin | cos | exp | abs | min | max
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::{Grid, Point};

/// Denominators closer to zero than this are rejected when an expression is
/// checked on a grid.
pub const DIVISION_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn eval(&self, p: Point) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::X => p[0],
            Expr::Y => p[1],
            Expr::Neg(e) => -e.eval(p),
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval(p), r.eval(p));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
            Expr::Call(f, args) => match f {
                Func::Sin => args[0].eval(p).sin(),
                Func::Cos => args[0].eval(p).cos(),
                Func::Exp => args[0].eval(p).exp(),
                Func::Abs => args[0].eval(p).abs(),
                Func::Min => args.iter().map(|a| a.eval(p)).fold(f64::INFINITY, f64::min),
                Func::Max => args
                    .iter()
                    .map(|a| a.eval(p))
                    .fold(f64::NEG_INFINITY, f64::max),
            },
        }
    }

    /// Evaluation that fails on near-zero denominators and non-finite values.
    fn eval_guarded(&self, p: Point) -> std::result::Result<f64, String> {
        let v = match self {
            Expr::Bin(BinOp::Div, l, r) => {
                let d = r.eval_guarded(p)?;
                if d.abs() < DIVISION_GUARD {
                    return Err(format!("division by {d:e}"));
                }
                l.eval_guarded(p)? / d
            }
            Expr::Bin(op, l, r) => {
                let (a, b) = (l.eval_guarded(p)?, r.eval_guarded(p)?);
                Expr::Bin(*op, Box::new(Expr::Num(a)), Box::new(Expr::Num(b))).eval(p)
            }
            Expr::Neg(e) => -e.eval_guarded(p)?,
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval_guarded(p).map(Expr::Num))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                Expr::Call(*f, vals).eval(p)
            }
            leaf => leaf.eval(p),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("non-finite value {v}"))
        }
    }

    /// Samples the expression at every grid node, checking that evaluation is
    /// total there.
    pub fn sample_checked(&self, grid: &Grid) -> Result<Vec<f64>> {
        grid.coords()
            .iter()
            .enumerate()
            .map(|(node, &p)| {
                self.eval_guarded(p).map_err(|message| Error::InvalidArgument(format!(
                    "expression `{self}` at node {node} ({:.6}, {:.6}): {message}",
                    p[0], p[1]
                )))
            })
            .collect()
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "({v:?})")
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, l, r) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({l}{s}{r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Expr> {
        parse_expr(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
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
            let text = &src[start..i];
            let v = text.parse::<f64>().map_err(|_| Error::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                _ => {
                    let ch = src[start..].chars().next().unwrap_or('?');
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("unexpected character `{ch}`"),
                    });
                }
            };
            i += 1;
            out.push((tok, start));
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
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

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Num(std::f64::consts::PI)),
                _ => {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(Error::UnknownIdentifier { name, offset });
                    };
                    self.expect(Tok::LParen, &format!("`(` after `{name}`"))?;
                    let mut args = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "`)` or `,`")?;
                    if !func.variadic() && args.len() != 1 {
                        return Err(Error::Syntax {
                            offset,
                            message: format!("`{name}` takes one argument, got {}", args.len()),
                        });
                    }
                    Ok(Expr::Call(func, args))
                }
            },
            Tok::End => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Syntax {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(s: &str, x: f64) -> f64 {
        parse_expr(s).unwrap().eval([x, 0.0])
    }

    #[test]
    fn documented_examples() {
        assert!((ev("sin(pi*x)", 0.5) - 1.0).abs() < 1e-15);
        assert_eq!(ev("min(1, 2*x)", 0.25), 0.5);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^-1", 0.0), 0.5);
        assert_eq!(ev("1-2-3", 0.0), -4.0);
        assert_eq!(ev("8/4/2", 0.0), 1.0);
        assert_eq!(ev("1+2*3", 0.0), 7.0);
        assert_eq!(ev("(1+2)*3", 0.0), 9.0);
        assert_eq!(ev("0-sin(pi*x)", 0.5), -1.0);
        assert_eq!(ev("max(x, 1e-1, -3)", 0.05), 0.1);
        assert_eq!(parse_expr("x*y").unwrap().eval([2.0, 3.0]), 6.0);
        assert_eq!(ev("abs(-x) + exp(0) + cos(0)", 2.0), 4.0);
    }

    #[test]
    fn error_offsets() {
        match parse_expr("1 + * 2").unwrap_err() {
            Error::Syntax { offset, .. } => assert_eq!(offset, 4),
            e => panic!("{e}"),
        }
        match parse_expr("sin(x) + foo").unwrap_err() {
            Error::UnknownIdentifier { name, offset } => {
                assert_eq!(name, "foo");
                assert_eq!(offset, 9);
            }
            e => panic!("{e}"),
        }
        match parse_expr("(x + 1").unwrap_err() {
            Error::Syntax { offset, .. } => assert_eq!(offset, 6),
            e => panic!("{e}"),
        }
        assert!(parse_expr("").is_err());
        assert!(parse_expr("sin(1, 2)").is_err());
        assert!(parse_expr("x $ 2").is_err());
        assert!(parse_expr("2 3").is_err());
    }

    #[test]
    fn guarded_sampling_rejects_division_by_zero() {
        let grid = Grid::new(crate::mesh::Domain::unit_interval(), 5).unwrap();
        let e = parse_expr("1/(x-0.5)").unwrap();
        assert!(e.sample_checked(&grid).is_err());
        let ok = parse_expr("1/(x+1)").unwrap();
        assert_eq!(ok.sample_checked(&grid).unwrap()[0], 1.0);
    }

    proptest! {
        #[test]
        fn display_reparses_to_same_values(a in -5.0f64..5.0, b in -5.0f64..5.0, x in -1.0f64..1.0) {
            let src = format!("{a}*sin(x) - ({b})^2 / (1 + x*x) + max(x, {a})");
            let e = parse_expr(&src).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            prop_assert_eq!(e.eval([x, 0.0]), again.eval([x, 0.0]));
        }
    }
}
