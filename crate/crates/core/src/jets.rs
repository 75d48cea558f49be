//! Third-order jets of scalar functions of two variables.
//!
//! A [`Jet`] stores the value and all partial derivatives up to order three.
//! Mixed partials are stored once, indexed by how many times the second
//! variable appears: `d2 = [xx, xy, yy]`, `d3 = [xxx, xxy, xyy, yyy]`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// The ordered index triples of the stored third derivatives.
const THIRD: [(usize, usize, usize); 4] = [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)];
const SECOND: [(usize, usize); 3] = [(0, 0), (0, 1), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: [f64; 2],
    pub d2: [f64; 3],
    pub d3: [f64; 4],
}

/// Elementary operations understood by [`apply_primitive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    /// Power with a literal exponent.
    Pow(f64),
    Sin,
    Cos,
    Sqrt,
    Log,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Self::default()
        }
    }

    /// The coordinate function `x_index` (0 or 1) evaluated at `value`.
    pub fn variable(index: usize, value: f64) -> Self {
        assert!(index < 2, "jets have two variables");
        let mut jet = Self::constant(value);
        jet.d1[index] = 1.0;
        jet
    }

    #[inline]
    pub fn second(&self, i: usize, j: usize) -> f64 {
        self.d2[i + j]
    }

    #[inline]
    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        self.d3[i + j + k]
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            value: self.value * s,
            d1: self.d1.map(|x| x * s),
            d2: self.d2.map(|x| x * s),
            d3: self.d3.map(|x| x * s),
        }
    }

    /// Drops all derivatives above `order`.
    pub fn truncate(mut self, order: usize) -> Self {
        if order < 3 {
            self.d3 = [0.0; 4];
        }
        if order < 2 {
            self.d2 = [0.0; 3];
        }
        if order < 1 {
            self.d1 = [0.0; 2];
        }
        self
    }

    /// Chain rule for `phi(self)` given `phi` and its first three derivatives
    /// at `self.value`.
    pub fn compose(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Self {
        let g1 = self.d1;
        let mut out = Self::constant(f0);
        for i in 0..2 {
            out.d1[i] = f1 * g1[i];
        }
        for (slot, &(i, j)) in SECOND.iter().enumerate() {
            out.d2[slot] = f2 * g1[i] * g1[j] + f1 * self.second(i, j);
        }
        for (slot, &(i, j, k)) in THIRD.iter().enumerate() {
            out.d3[slot] = f3 * g1[i] * g1[j] * g1[k]
                + f2 * (self.second(i, j) * g1[k]
                    + self.second(i, k) * g1[j]
                    + self.second(j, k) * g1[i])
                + f1 * self.third(i, j, k);
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s, -c)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c, s)
    }

    pub fn sqrt(&self, tol: f64) -> Result<Self> {
        let y = self.value;
        if !(y > tol) {
            return Err(Error::Domain(format!("sqrt of {y:e}")));
        }
        let r = y.sqrt();
        Ok(self.compose(r, 0.5 / r, -0.25 / (r * y), 0.375 / (r * y * y)))
    }

    pub fn ln(&self, tol: f64) -> Result<Self> {
        let y = self.value;
        if !(y > tol) {
            return Err(Error::Domain(format!("log of {y:e}")));
        }
        let inv = 1.0 / y;
        Ok(self.compose(y.ln(), inv, -inv * inv, 2.0 * inv * inv * inv))
    }

    pub fn recip(&self, tol: f64) -> Result<Self> {
        let y = self.value;
        if !(y.abs() > tol) {
            return Err(Error::Domain(format!("division by {y:e}")));
        }
        let inv = 1.0 / y;
        let inv2 = inv * inv;
        Ok(self.compose(inv, -inv2, 2.0 * inv2 * inv, -6.0 * inv2 * inv2))
    }

    pub fn div(&self, rhs: &Self, tol: f64) -> Result<Self> {
        Ok(*self * rhs.recip(tol)?)
    }

    /// `self^p` for a literal exponent. Integer exponents accept any base
    /// (nonzero when negative); other exponents require a positive base.
    pub fn powf(&self, p: f64, tol: f64) -> Result<Self> {
        let y = self.value;
        let integral = p.fract() == 0.0 && p.abs() < i32::MAX as f64;
        if integral {
            if p < 0.0 && !(y.abs() > tol) {
                return Err(Error::Domain(format!("{y:e} raised to {p}")));
            }
            let n = p as i32;
            let term = |k: i32| {
                let coeff: f64 = (0..k).map(|m| p - m as f64).product();
                if coeff == 0.0 {
                    0.0
                } else {
                    coeff * y.powi(n - k)
                }
            };
            Ok(self.compose(term(0), term(1), term(2), term(3)))
        } else {
            if !(y > tol) {
                return Err(Error::Domain(format!("{y:e} raised to {p}")));
            }
            let term = |k: i32| {
                let coeff: f64 = (0..k).map(|m| p - m as f64).product();
                coeff * y.powf(p - k as f64)
            };
            Ok(self.compose(term(0), term(1), term(2), term(3)))
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        let mut out = self;
        out.value += rhs.value;
        out.d1.iter_mut().zip(rhs.d1).for_each(|(a, b)| *a += b);
        out.d2.iter_mut().zip(rhs.d2).for_each(|(a, b)| *a += b);
        out.d3.iter_mut().zip(rhs.d3).for_each(|(a, b)| *a += b);
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let (f, g) = (&self, &rhs);
        let mut out = Jet::constant(f.value * g.value);
        for i in 0..2 {
            out.d1[i] = f.d1[i] * g.value + f.value * g.d1[i];
        }
        for (slot, &(i, j)) in SECOND.iter().enumerate() {
            out.d2[slot] = f.second(i, j) * g.value
                + f.d1[i] * g.d1[j]
                + f.d1[j] * g.d1[i]
                + f.value * g.second(i, j);
        }
        for (slot, &(i, j, k)) in THIRD.iter().enumerate() {
            out.d3[slot] = f.third(i, j, k) * g.value
                + f.second(i, j) * g.d1[k]
                + f.second(i, k) * g.d1[j]
                + f.second(j, k) * g.d1[i]
                + f.d1[i] * g.second(j, k)
                + f.d1[j] * g.second(i, k)
                + f.d1[k] * g.second(i, j)
                + f.value * g.third(i, j, k);
        }
        out
    }
}

/// Applies `op` to its operands. Binary operations take two jets, the rest one.
pub fn apply_primitive(op: Primitive, args: &[Jet], tol: f64) -> Result<Jet> {
    let arity = match op {
        Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => 2,
        _ => 1,
    };
    if args.len() != arity {
        return Err(Error::Arity(format!(
            "{op:?} expects {arity} operand(s), got {}",
            args.len()
        )));
    }
    let a = args[0];
    match op {
        Primitive::Add => Ok(a + args[1]),
        Primitive::Sub => Ok(a - args[1]),
        Primitive::Mul => Ok(a * args[1]),
        Primitive::Div => a.div(&args[1], tol),
        Primitive::Pow(p) => a.powf(p, tol),
        Primitive::Sin => Ok(a.sin()),
        Primitive::Cos => Ok(a.cos()),
        Primitive::Sqrt => a.sqrt(tol),
        Primitive::Log => a.ln(tol),
    }
}
