//! Arithmetic expressions over `t`, `x`, `y` for custom coefficients.
//!
//! Grammar: `+ - * /`, unary minus, parentheses, numeric literals, the
//! constants `pi` and `e`, and the functions `min(a,b)`, `max(a,b)`,
//! `sqrt`, `tanh`, `abs`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Time,
    Var(usize),
    Neg(Box<Expr>),
    Bin(Op, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<(Func, usize)> {
        Some(match name {
            "min" => (Func::Min, 2),
            "max" => (Func::Max, 2),
            "sqrt" => (Func::Sqrt, 1),
            "tanh" => (Func::Tanh, 1),
            "abs" => (Func::Abs, 1),
            _ => return None,
        })
    }
}

impl Expr {
    /// Parse `src`; `dim` limits which of `x`, `y` may appear.
    pub fn parse(src: &str, dim: usize) -> Result<Expr> {
        let mut p = Parser {
            src: src.as_bytes(),
            pos: 0,
            dim,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Time => t,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(t, x),
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x), b.eval(t, x));
                match op {
                    Op::Add => a + b,
                    Op::Sub => a - b,
                    Op::Mul => a * b,
                    Op::Div => a / b,
                }
            }
            Expr::Call(f, args) => {
                let a = args[0].eval(t, x);
                match f {
                    Func::Min => a.min(args[1].eval(t, x)),
                    Func::Max => a.max(args[1].eval(t, x)),
                    Func::Sqrt => a.sqrt(),
                    Func::Tanh => a.tanh(),
                    Func::Abs => a.abs(),
                }
            }
        }
    }

    /// Value when the expression has no variables.
    pub fn constant(&self) -> Option<f64> {
        (!self.mentions_variables()).then(|| self.eval(0.0, &[0.0, 0.0]))
    }

    pub fn mentions_time(&self) -> bool {
        match self {
            Expr::Time => true,
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(e) => e.mentions_time(),
            Expr::Bin(_, a, b) => a.mentions_time() || b.mentions_time(),
            Expr::Call(_, args) => args.iter().any(Expr::mentions_time),
        }
    }

    fn mentions_variables(&self) -> bool {
        match self {
            Expr::Time | Expr::Var(_) => true,
            Expr::Num(_) => false,
            Expr::Neg(e) => e.mentions_variables(),
            Expr::Bin(_, a, b) => a.mentions_variables() || b.mentions_variables(),
            Expr::Call(_, args) => args.iter().any(Expr::mentions_variables),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> Error {
        Error::Expression {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => Op::Add,
                Some(b'-') => Op::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => Op::Mul,
                Some(b'/') => Op::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'+' || c == b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Expression {
                offset: start,
                message: format!("bad number `{text}`"),
            })
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        if let Some((func, arity)) = Func::lookup(name) {
            self.expect(b'(')?;
            let mut args = vec![self.expr()?];
            while self.peek() == Some(b',') {
                self.pos += 1;
                args.push(self.expr()?);
            }
            self.expect(b')')?;
            if args.len() != arity {
                return Err(Error::Expression {
                    offset: start,
                    message: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                });
            }
            return Ok(Expr::Call(func, args));
        }
        let var = |i: usize, p: &Self| {
            if i < p.dim {
                Ok(Expr::Var(i))
            } else {
                Err(Error::Expression {
                    offset: start,
                    message: format!("`{name}` is not available in dimension {}", p.dim),
                })
            }
        };
        match name {
            "t" => Ok(Expr::Time),
            "x" => var(0, self),
            "y" => var(1, self),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            _ => Err(Error::Expression {
                offset: start,
                message: format!("unknown identifier `{name}`"),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, t: f64, x: &[f64]) -> f64 {
        Expr::parse(src, x.len()).unwrap().eval(t, x)
    }

    #[test]
    fn precedence_and_unary_minus() {
        assert_eq!(ev("1 + 2 * 3", 0.0, &[0.0]), 7.0);
        assert_eq!(ev("-2 * -3", 0.0, &[0.0]), 6.0);
        assert_eq!(ev("(1 + 2) * 3 / 4", 0.0, &[0.0]), 2.25);
        assert_eq!(ev("1 - 2 - 3", 0.0, &[0.0]), -4.0);
        assert_eq!(ev("2.5e-1 + 1E1", 0.0, &[0.0]), 10.25);
    }

    #[test]
    fn functions_and_variables() {
        assert_eq!(ev("min(sqrt(max(x, 0)), 1)", 0.0, &[0.25]), 0.5);
        assert_eq!(ev("min(sqrt(max(x, 0)), 1)", 0.0, &[-3.0]), 0.0);
        assert_eq!(ev("-tanh(x)", 0.0, &[0.0]), 0.0);
        assert_eq!(ev("abs(x - y) + t", 2.0, &[1.0, 4.0]), 5.0);
        assert!((ev("pi", 0.0, &[0.0]) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn errors_report_offsets() {
        match Expr::parse("1 + foo(x)", 1) {
            Err(Error::Expression { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("y", 1).is_err());
        assert!(Expr::parse("min(1)", 1).is_err());
        assert!(Expr::parse("1 +", 1).is_err());
        assert!(Expr::parse("(1", 1).is_err());
        assert!(Expr::parse("1 2", 1).is_err());
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Expr::parse("0", 1).unwrap().constant(), Some(0.0));
        assert_eq!(Expr::parse("2*3", 1).unwrap().constant(), Some(6.0));
        assert_eq!(Expr::parse("x", 1).unwrap().constant(), None);
        assert!(Expr::parse("t*x", 1).unwrap().mentions_time());
    }
}
