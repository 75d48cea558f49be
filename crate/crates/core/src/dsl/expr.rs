use std::fmt;

use crate::error::{Error, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Sqrt,
    Log,
}

impl UnaryOp {
    pub fn function(name: &str) -> Option<UnaryOp> {
        match name {
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "sqrt" => Some(UnaryOp::Sqrt),
            "log" => Some(UnaryOp::Log),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Log => "log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Expression in the chart variables `x1`, `x2`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    /// 0 for `x1`, 1 for `x2`.
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Base raised to a constant exponent built from literals only.
    Pow(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Pi => true,
            Expr::Var(_) => false,
            Expr::Unary(_, a) => a.is_constant(),
            Expr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            Expr::Pow(a, b) => a.is_constant() && b.is_constant(),
        }
    }

    /// Plain evaluation at a chart point.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(i) => x[*i],
            Expr::Unary(op, a) => {
                let a = a.eval(x);
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Sqrt => a.sqrt(),
                    UnaryOp::Log => a.ln(),
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(a, p) => {
                let p = p.eval(x);
                let a = a.eval(x);
                if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
                    a.powi(p as i32)
                } else {
                    a.powf(p)
                }
            }
        }
    }

    /// Evaluation as a third-order jet in `(x1, x2)`.
    pub fn eval_jet(&self, x: [f64; 2], tol: f64) -> Result<Jet> {
        Ok(match self {
            Expr::Const(c) => Jet::constant(*c),
            Expr::Pi => Jet::constant(std::f64::consts::PI),
            Expr::Var(i) => Jet::variable(*i, x[*i]),
            Expr::Unary(op, a) => {
                let a = a.eval_jet(x, tol)?;
                match op {
                    UnaryOp::Neg => -a,
                    UnaryOp::Sin => a.sin(),
                    UnaryOp::Cos => a.cos(),
                    UnaryOp::Sqrt => a.sqrt(tol)?,
                    UnaryOp::Log => a.ln(tol)?,
                }
            }
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_jet(x, tol)?, b.eval_jet(x, tol)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.div(&b, tol)?,
                }
            }
            Expr::Pow(a, p) => {
                let p = p.eval(x);
                if !p.is_finite() {
                    return Err(Error::Domain(format!("non-finite exponent {p}")));
                }
                a.eval_jet(x, tol)?.powf(p, tol)?
            }
        })
    }
}

/// Fully parenthesized infix form; parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Pow(a, p) => write!(f, "({a}^{p})"),
        }
    }
}
