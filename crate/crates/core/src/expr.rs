//! Elementary-function expressions over chart coordinates.
//!
//! Expressions are immutable DAGs behind `Arc`, closed under symbolic
//! differentiation, and evaluate to exact [`Jet2`]s.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use crate::jet::{CJet, Jet2};

#[derive(Debug)]
enum Node {
    Const(f64),
    Var(usize),
    Add(ScalarField, ScalarField),
    Mul(ScalarField, ScalarField),
    Div(ScalarField, ScalarField),
    Powi(ScalarField, i32),
    Neg(ScalarField),
    Sin(ScalarField),
    Cos(ScalarField),
    Exp(ScalarField),
}

/// A smooth real function of the chart coordinates.
#[derive(Clone)]
pub struct ScalarField(Arc<Node>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(i) => write!(f, "x{i}"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Mul(a, b) => write!(f, "{a}*{b}"),
            Node::Div(a, b) => write!(f, "({a})/({b})"),
            Node::Powi(a, n) => write!(f, "({a})^{n}"),
            Node::Neg(a) => write!(f, "-({a})"),
            Node::Sin(a) => write!(f, "sin({a})"),
            Node::Cos(a) => write!(f, "cos({a})"),
            Node::Exp(a) => write!(f, "exp({a})"),
        }
    }
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        Self(Arc::new(Node::Const(c)))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// The coordinate function `x_i`.
    pub fn var(i: usize) -> Self {
        Self(Arc::new(Node::Var(i)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn sin(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sin()),
            None => Self(Arc::new(Node::Sin(self.clone()))),
        }
    }

    pub fn cos(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.cos()),
            None => Self(Arc::new(Node::Cos(self.clone()))),
        }
    }

    pub fn exp(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.exp()),
            None => Self(Arc::new(Node::Exp(self.clone()))),
        }
    }

    pub fn tan(&self) -> Self {
        self.sin() / self.cos()
    }

    pub fn powi(&self, n: i32) -> Self {
        match (self.as_const(), n) {
            (_, 0) => Self::one(),
            (_, 1) => self.clone(),
            (Some(c), _) => Self::constant(c.powi(n)),
            _ => Self(Arc::new(Node::Powi(self.clone(), n))),
        }
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match &*self.0 {
            Node::Const(_) => None,
            Node::Var(i) => Some(*i),
            Node::Add(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.max_var().max(b.max_var()),
            Node::Powi(a, _) | Node::Neg(a) | Node::Sin(a) | Node::Cos(a) | Node::Exp(a) => {
                a.max_var()
            }
        }
    }

    /// Symbolic partial derivative with respect to `x_i`.
    pub fn diff(&self, i: usize) -> Self {
        match &*self.0 {
            Node::Const(_) => Self::zero(),
            Node::Var(j) => Self::constant(if *j == i { 1.0 } else { 0.0 }),
            Node::Add(a, b) => a.diff(i) + b.diff(i),
            Node::Mul(a, b) => a.diff(i) * b.clone() + a.clone() * b.diff(i),
            Node::Div(a, b) => {
                (a.diff(i) * b.clone() - a.clone() * b.diff(i)) / b.powi(2)
            }
            Node::Powi(a, n) => Self::constant(*n as f64) * a.powi(n - 1) * a.diff(i),
            Node::Neg(a) => -a.diff(i),
            Node::Sin(a) => a.cos() * a.diff(i),
            Node::Cos(a) => -(a.sin() * a.diff(i)),
            Node::Exp(a) => self.clone() * a.diff(i),
        }
    }

    /// Replace each coordinate `x_i` by `subs[i]`.
    pub fn substitute(&self, subs: &[ScalarField]) -> Self {
        match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Var(i) => subs[*i].clone(),
            Node::Add(a, b) => a.substitute(subs) + b.substitute(subs),
            Node::Mul(a, b) => a.substitute(subs) * b.substitute(subs),
            Node::Div(a, b) => a.substitute(subs) / b.substitute(subs),
            Node::Powi(a, n) => a.substitute(subs).powi(*n),
            Node::Neg(a) => -a.substitute(subs),
            Node::Sin(a) => a.substitute(subs).sin(),
            Node::Cos(a) => a.substitute(subs).cos(),
            Node::Exp(a) => a.substitute(subs).exp(),
        }
    }

    /// Plain value at `coords`.
    pub fn eval(&self, coords: &[f64]) -> f64 {
        match &*self.0 {
            Node::Const(c) => *c,
            Node::Var(i) => coords[*i],
            Node::Add(a, b) => a.eval(coords) + b.eval(coords),
            Node::Mul(a, b) => a.eval(coords) * b.eval(coords),
            Node::Div(a, b) => a.eval(coords) / b.eval(coords),
            Node::Powi(a, n) => a.eval(coords).powi(*n),
            Node::Neg(a) => -a.eval(coords),
            Node::Sin(a) => a.eval(coords).sin(),
            Node::Cos(a) => a.eval(coords).cos(),
            Node::Exp(a) => a.eval(coords).exp(),
        }
    }

    /// Exact value, gradient and Hessian at `coords`.
    ///
    /// Shared subexpressions are evaluated once per call.
    pub fn eval_jet(&self, coords: &[f64]) -> Jet2 {
        let mut memo = HashMap::new();
        self.eval_jet_memo(coords, &mut memo)
    }

    fn eval_jet_memo(&self, coords: &[f64], memo: &mut HashMap<usize, Jet2>) -> Jet2 {
        let key = Arc::as_ptr(&self.0) as usize;
        if let Some(j) = memo.get(&key) {
            return j.clone();
        }
        let dim = coords.len();
        let out = match &*self.0 {
            Node::Const(c) => Jet2::constant(*c, dim),
            Node::Var(i) => Jet2::variable(coords[*i], *i, dim),
            Node::Add(a, b) => a.eval_jet_memo(coords, memo) + b.eval_jet_memo(coords, memo),
            Node::Mul(a, b) => a.eval_jet_memo(coords, memo) * b.eval_jet_memo(coords, memo),
            Node::Div(a, b) => a.eval_jet_memo(coords, memo) / b.eval_jet_memo(coords, memo),
            Node::Powi(a, n) => a.eval_jet_memo(coords, memo).powi(*n),
            Node::Neg(a) => -a.eval_jet_memo(coords, memo),
            Node::Sin(a) => a.eval_jet_memo(coords, memo).sin(),
            Node::Cos(a) => a.eval_jet_memo(coords, memo).cos(),
            Node::Exp(a) => a.eval_jet_memo(coords, memo).exp(),
        };
        memo.insert(key, out.clone());
        out
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        Self::constant(c)
    }
}

impl Add for ScalarField {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Self::constant(a + b),
            (Some(a), _) if a == 0.0 => rhs,
            (_, Some(b)) if b == 0.0 => self,
            _ => Self(Arc::new(Node::Add(self, rhs))),
        }
    }
}

impl Sub for ScalarField {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for ScalarField {
    type Output = Self;
    fn neg(self) -> Self {
        match &*self.0 {
            Node::Const(c) => Self::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Self(Arc::new(Node::Neg(self))),
        }
    }
}

impl Mul for ScalarField {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Self::constant(a * b),
            (Some(a), _) | (_, Some(a)) if a == 0.0 => Self::zero(),
            (Some(a), _) if a == 1.0 => rhs,
            (_, Some(b)) if b == 1.0 => self,
            (Some(a), _) if a == -1.0 => -rhs,
            (_, Some(b)) if b == -1.0 => -self,
            _ => Self(Arc::new(Node::Mul(self, rhs))),
        }
    }
}

impl Div for ScalarField {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Self::constant(a / b),
            (Some(a), _) if a == 0.0 => Self::zero(),
            (_, Some(b)) if b == 1.0 => self,
            _ => Self(Arc::new(Node::Div(self, rhs))),
        }
    }
}

macro_rules! ref_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: &ScalarField) -> ScalarField {
                $tr::$m(self.clone(), rhs.clone())
            }
        }
        impl $tr<f64> for ScalarField {
            type Output = ScalarField;
            fn $m(self, rhs: f64) -> ScalarField {
                $tr::$m(self, ScalarField::constant(rhs))
            }
        }
        impl $tr<ScalarField> for f64 {
            type Output = ScalarField;
            fn $m(self, rhs: ScalarField) -> ScalarField {
                $tr::$m(ScalarField::constant(self), rhs)
            }
        }
    )*};
}
ref_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        -self.clone()
    }
}

/// A complex function stored as a pair of real expressions.
#[derive(Clone, Debug)]
pub struct CField {
    pub re: ScalarField,
    pub im: ScalarField,
}

impl CField {
    pub fn new(re: ScalarField, im: ScalarField) -> Self {
        Self { re, im }
    }

    pub fn real(re: ScalarField) -> Self {
        Self { re, im: ScalarField::zero() }
    }

    pub fn constant(c: Complex64) -> Self {
        Self::new(c.re.into(), c.im.into())
    }

    pub fn zero() -> Self {
        Self::real(ScalarField::zero())
    }

    /// `e^{i·phase}`.
    pub fn expi(phase: &ScalarField) -> Self {
        Self::new(phase.cos(), phase.sin())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -&self.im)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.clone() * CField::constant(c)
    }

    pub fn diff(&self, i: usize) -> Self {
        Self::new(self.re.diff(i), self.im.diff(i))
    }

    pub fn eval(&self, coords: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(coords), self.im.eval(coords))
    }

    pub fn eval_jet(&self, coords: &[f64]) -> CJet {
        CJet::from_re_im(&self.re.eval_jet(coords), &self.im.eval_jet(coords))
    }
}

impl From<ScalarField> for CField {
    fn from(re: ScalarField) -> Self {
        Self::real(re)
    }
}

impl Add for CField {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for CField {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for CField {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl Mul for CField {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> ScalarField {
        ScalarField::var(0)
    }
    fn y() -> ScalarField {
        ScalarField::var(1)
    }
    fn z() -> ScalarField {
        ScalarField::var(2)
    }

    #[test]
    fn product_jet() {
        let f = x() * y();
        let j = f.eval_jet(&[2.0, 3.0, 0.0]);
        assert_eq!(j.value, 6.0);
        assert_eq!(j.grad, vec![3.0, 2.0, 0.0]);
        assert_eq!(j.hess(0, 1), 1.0);
    }

    #[test]
    fn constant_has_flat_jet() {
        let j = ScalarField::constant(4.2).eval_jet(&[0.3, -1.0, 7.0]);
        assert_eq!(j.value, 4.2);
        assert!(j.grad.iter().all(|g| *g == 0.0));
        assert!(j.hessian_matrix().iter().flatten().all(|h| *h == 0.0));
    }

    #[test]
    fn sin_times_z() {
        let f = x().sin() * z();
        let j = f.eval_jet(&[0.0, 1.0, 2.0]);
        assert_eq!(j.value, 0.0);
        assert_eq!(j.grad, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn symbolic_diff_agrees_with_jet() {
        let f = (x() * y().exp() + z().cos()) / (1.0 + x().powi(2)) + y().tan();
        let p = [0.4, -0.3, 1.1];
        let j = f.eval_jet(&p);
        for i in 0..3 {
            let di = f.diff(i).eval_jet(&p);
            assert!((di.value - j.grad[i]).abs() < 1e-14);
            for k in 0..3 {
                assert!((di.grad[k] - j.hess(i, k)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn substitution_composes() {
        let f = x() * y();
        let g = f.substitute(&[y(), x() - z()]);
        assert!((g.eval(&[1.0, 2.0, 0.5]) - 2.0 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn complex_product() {
        let a = CField::expi(&x());
        let b = a.conj();
        let p = a * b;
        let v = p.eval(&[0.7]);
        assert!((v.re - 1.0).abs() < 1e-15 && v.im.abs() < 1e-15);
    }
}
