//! A small expression language for coefficient functions.
//!
//! Grammar (usual precedence, `^` binds tighter than unary minus and is
//! right-associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 'e' | 'x' | 'u' | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | abs | sqrt
//! ```
//!
//! Evaluation is forward-mode: every node yields a [`Jet`] carrying the value
//! and both partial derivatives, so `r'(x)`, `g_x` and `g_u` are exact.

use crate::error::{Error, Result};
use std::fmt;

/// Value together with its partial derivatives in `x` and `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub dx: f64,
    pub du: f64,
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet {
            v,
            dx: 0.0,
            du: 0.0,
        }
    }

    fn scale_derivs(self, value: f64, factor: f64) -> Self {
        Jet {
            v: value,
            dx: factor * self.dx,
            du: factor * self.du,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, a: Jet) -> Jet {
        match self {
            Func::Sin => a.scale_derivs(a.v.sin(), a.v.cos()),
            Func::Cos => a.scale_derivs(a.v.cos(), -a.v.sin()),
            Func::Exp => {
                let e = a.v.exp();
                a.scale_derivs(e, e)
            }
            Func::Abs => {
                let s = if a.v > 0.0 {
                    1.0
                } else if a.v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                a.scale_derivs(a.v.abs(), s)
            }
            Func::Sqrt => {
                let s = a.v.sqrt();
                let f = if a.dx == 0.0 && a.du == 0.0 {
                    0.0
                } else {
                    0.5 / s
                };
                a.scale_derivs(s, f)
            }
        }
    }
}

/// Abstract syntax tree of a parsed expression.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Const(f64),
    X,
    U,
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Pow(Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    pub fn eval(&self, x: f64, u: f64) -> Jet {
        match self {
            Node::Const(c) => Jet::constant(*c),
            Node::X => Jet {
                v: x,
                dx: 1.0,
                du: 0.0,
            },
            Node::U => Jet {
                v: u,
                dx: 0.0,
                du: 1.0,
            },
            Node::Neg(a) => {
                let a = a.eval(x, u);
                Jet {
                    v: -a.v,
                    dx: -a.dx,
                    du: -a.du,
                }
            }
            Node::Add(a, b) => {
                let (a, b) = (a.eval(x, u), b.eval(x, u));
                Jet {
                    v: a.v + b.v,
                    dx: a.dx + b.dx,
                    du: a.du + b.du,
                }
            }
            Node::Sub(a, b) => {
                let (a, b) = (a.eval(x, u), b.eval(x, u));
                Jet {
                    v: a.v - b.v,
                    dx: a.dx - b.dx,
                    du: a.du - b.du,
                }
            }
            Node::Mul(a, b) => {
                let (a, b) = (a.eval(x, u), b.eval(x, u));
                Jet {
                    v: a.v * b.v,
                    dx: a.dx * b.v + a.v * b.dx,
                    du: a.du * b.v + a.v * b.du,
                }
            }
            Node::Div(a, b) => {
                let (a, b) = (a.eval(x, u), b.eval(x, u));
                let q = a.v / b.v;
                Jet {
                    v: q,
                    dx: (a.dx - q * b.dx) / b.v,
                    du: (a.du - q * b.du) / b.v,
                }
            }
            Node::Pow(a, b) => pow(a.eval(x, u), b.eval(x, u)),
            Node::Call(f, a) => f.apply(a.eval(x, u)),
        }
    }

    /// Replaces every occurrence of `u` by the constant `value`.
    pub fn substitute_u(&self, value: f64) -> Node {
        let s = |n: &Node| Box::new(n.substitute_u(value));
        match self {
            Node::U => Node::Const(value),
            Node::Const(_) | Node::X => self.clone(),
            Node::Neg(a) => Node::Neg(s(a)),
            Node::Add(a, b) => Node::Add(s(a), s(b)),
            Node::Sub(a, b) => Node::Sub(s(a), s(b)),
            Node::Mul(a, b) => Node::Mul(s(a), s(b)),
            Node::Div(a, b) => Node::Div(s(a), s(b)),
            Node::Pow(a, b) => Node::Pow(s(a), s(b)),
            Node::Call(f, a) => Node::Call(*f, s(a)),
        }
    }

    pub fn uses_u(&self) -> bool {
        match self {
            Node::U => true,
            Node::Const(_) | Node::X => false,
            Node::Neg(a) | Node::Call(_, a) => a.uses_u(),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.uses_u() || b.uses_u(),
        }
    }
}

fn pow(a: Jet, b: Jet) -> Jet {
    if b.dx == 0.0 && b.du == 0.0 {
        let n = b.v;
        if n == 0.0 {
            return Jet::constant(1.0);
        }
        let (v, dv) = if n.fract() == 0.0 && n.abs() < 1024.0 {
            let k = n as i32;
            (a.v.powi(k), n * a.v.powi(k - 1))
        } else {
            (a.v.powf(n), n * a.v.powf(n - 1.0))
        };
        let dv = if a.dx == 0.0 && a.du == 0.0 { 0.0 } else { dv };
        return a.scale_derivs(v, dv);
    }
    let v = a.v.powf(b.v);
    let ln = a.v.ln();
    Jet {
        v,
        dx: v * (b.dx * ln + b.v * a.dx / a.v),
        du: v * (b.du * ln + b.v * a.du / a.v),
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Const(c) => write!(f, "{c:?}"),
            Node::X => write!(f, "x"),
            Node::U => write!(f, "u"),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| Error::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            out.push((Tok::Num(value), start));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => {
                    return Err(Error::Syntax {
                        pos: start,
                        msg: format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push((tok, start));
            i += 1;
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
    allow_u: bool,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Tok::Op(op @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            lhs = if op == '+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Tok::Op(op @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            lhs = if op == '*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match *self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if let Tok::Op('^') = *self.peek() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Node::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        let (tok, pos) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(Error::Syntax {
                            pos: self.pos(),
                            msg: format!("expected `(` after `{name}`"),
                        });
                    }
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Node::Call(func, Box::new(arg)));
                }
                match name.as_str() {
                    "x" => Ok(Node::X),
                    "u" if self.allow_u => Ok(Node::U),
                    "pi" => Ok(Node::Const(std::f64::consts::PI)),
                    "e" => Ok(Node::Const(std::f64::consts::E)),
                    _ => Err(Error::UnknownIdentifier { name, pos }),
                }
            }
            Tok::End => Err(Error::Syntax {
                pos,
                msg: "unexpected end of expression".into(),
            }),
            other => Err(Error::Syntax {
                pos,
                msg: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.bump() {
            (Tok::RParen, _) => Ok(()),
            (_, pos) => Err(Error::Syntax {
                pos,
                msg: "expected `)`".into(),
            }),
        }
    }
}

/// Parses `src`. When `allow_u` is false the identifier `u` is rejected.
pub fn parse(src: &str, allow_u: bool) -> Result<Node> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        allow_u,
    };
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(Error::Syntax {
            pos: p.pos(),
            msg: "trailing input".into(),
        });
    }
    Ok(node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ev(s: &str, x: f64) -> Jet {
        parse(s, true).unwrap().eval(x, 0.0)
    }

    #[test]
    fn precedence() {
        assert_eq!(ev("1 + 2 * 3", 0.0).v, 7.0);
        assert_eq!(ev("-2^2", 0.0).v, -4.0);
        assert_eq!(ev("2^3^2", 0.0).v, 512.0);
        assert_eq!(ev("2^-1", 0.0).v, 0.5);
        assert_eq!(ev("(1 + 2) * 3", 0.0).v, 9.0);
        assert_eq!(ev("8 / 4 / 2", 0.0).v, 1.0);
        assert_eq!(ev("1.5e1 + .5", 0.0).v, 15.5);
    }

    #[test]
    fn derivative_of_example_coefficient() {
        let j = ev("2 - cos(pi*x/2)", 0.5);
        assert!((j.v - (2.0 - (PI / 4.0).cos())).abs() < 1e-15);
        assert!((j.dx - 0.5 * PI * (PI / 4.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn partials_in_u() {
        let n = parse("(1+15*u^2)/(1+u^2)", true).unwrap();
        let j = n.eval(0.0, 1.0);
        assert!((j.v - 8.0).abs() < 1e-15);
        // g_u = 28u/(1+u^2)^2
        assert!((j.du - 7.0).abs() < 1e-14);
        assert_eq!(j.dx, 0.0);
    }

    #[test]
    fn negative_base_integer_power() {
        let j = ev("x^3", -2.0);
        assert_eq!(j.v, -8.0);
        assert_eq!(j.dx, 12.0);
    }

    #[test]
    fn errors_report_position() {
        match parse("1 + * 2", false) {
            Err(Error::Syntax { pos, .. }) => assert_eq!(pos, 4),
            other => panic!("{other:?}"),
        }
        match parse("1 + y", false) {
            Err(Error::UnknownIdentifier { name, pos }) => {
                assert_eq!(name, "y");
                assert_eq!(pos, 4);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse("u", false),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse("sin x", false), Err(Error::Syntax { .. })));
        assert!(matches!(parse("(1", false), Err(Error::Syntax { .. })));
        assert!(matches!(parse("1 2", false), Err(Error::Syntax { .. })));
    }

    #[test]
    fn substitution_removes_u() {
        let n = parse("x + u^2", true).unwrap().substitute_u(3.0);
        assert!(!n.uses_u());
        assert_eq!(n.eval(1.0, 100.0).v, 10.0);
    }
}
