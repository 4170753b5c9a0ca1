//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries the value, gradient and Hessian of a quantity with
//! respect to the chart coordinates of a single point. Arithmetic on jets
//! applies the chain rule exactly, so anything assembled from jets (linear
//! solves included) has exact first and second derivatives up to rounding.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_complex::Complex64;

/// Scalars a jet can be built over: `f64` and `Complex64`.
pub trait Field:
    Copy
    + fmt::Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(&self) -> f64;
    fn conj(&self) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(&self) -> f64 {
        self.abs()
    }
    fn conj(&self) -> Self {
        *self
    }
}

impl Field for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(&self) -> f64 {
        self.norm()
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
}

/// Index of `(i, j)` in a packed upper triangle of a `dim`-square matrix.
#[inline]
pub fn packed_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * dim - i + 1) / 2 + (j - i)
}

/// Value, gradient and (packed, symmetric) Hessian at a point.
#[derive(Clone, PartialEq)]
pub struct Jet2<T: Field = f64> {
    pub value: T,
    pub grad: Vec<T>,
    hess: Vec<T>,
}

pub type CJet = Jet2<Complex64>;

impl<T: Field> fmt::Debug for Jet2<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet2")
            .field("value", &self.value)
            .field("grad", &self.grad)
            .field("hess", &self.hess)
            .finish()
    }
}

impl<T: Field> Jet2<T> {
    pub fn constant(value: T, dim: usize) -> Self {
        Self {
            value,
            grad: vec![T::zero(); dim],
            hess: vec![T::zero(); dim * (dim + 1) / 2],
        }
    }

    /// The coordinate function `x_i` at `value`.
    pub fn variable(value: T, i: usize, dim: usize) -> Self {
        let mut j = Self::constant(value, dim);
        j.grad[i] = T::one();
        j
    }

    pub fn from_parts(value: T, grad: Vec<T>, hess_full: &[Vec<T>]) -> Self {
        let dim = grad.len();
        let mut hess = vec![T::zero(); dim * (dim + 1) / 2];
        for i in 0..dim {
            for j in i..dim {
                hess[packed_index(dim, i, j)] = hess_full[i][j];
            }
        }
        Self { value, grad, hess }
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    pub fn hess(&self, i: usize, j: usize) -> T {
        self.hess[packed_index(self.dim(), i, j)]
    }

    pub fn hessian_matrix(&self) -> Vec<Vec<T>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.hess(i, j)).collect()).collect()
    }

    pub fn zero_like(&self) -> Self {
        Self::constant(T::zero(), self.dim())
    }

    pub fn const_like(&self, value: T) -> Self {
        Self::constant(value, self.dim())
    }

    /// Directional derivative `v · grad`, with `v` given by plain values.
    pub fn directional(&self, v: &[T]) -> T {
        self.grad
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (g, x)| acc + *g * *x)
    }

    /// First derivative `∂_k` of this jet, as a jet of one order lower.
    ///
    /// The Hessian of the result is not known from second-order data and
    /// is returned as zero; callers use only its value and gradient.
    pub fn partial(&self, k: usize) -> Self {
        let d = self.dim();
        Self {
            value: self.grad[k],
            grad: (0..d).map(|j| self.hess(k, j)).collect(),
            hess: vec![T::zero(); self.hess.len()],
        }
    }

    /// Derivative along a jet-valued direction `v`, keeping value and gradient exact.
    pub fn derivative_along(&self, v: &[Jet2<T>]) -> Self {
        let mut acc = self.zero_like();
        for (k, vk) in v.iter().enumerate() {
            acc = acc + self.partial(k) * vk.clone();
        }
        acc
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            value: self.value * s,
            grad: self.grad.iter().map(|g| *g * s).collect(),
            hess: self.hess.iter().map(|h| *h * s).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            value: self.value.conj(),
            grad: self.grad.iter().map(Field::conj).collect(),
            hess: self.hess.iter().map(Field::conj).collect(),
        }
    }

    /// Compose with a scalar function given its value and first two derivatives.
    pub fn compose(&self, f0: T, f1: T, f2: T) -> Self {
        let d = self.dim();
        let mut hess = vec![T::zero(); self.hess.len()];
        for i in 0..d {
            for j in i..d {
                let k = packed_index(d, i, j);
                hess[k] = f1 * self.hess[k] + f2 * self.grad[i] * self.grad[j];
            }
        }
        Self {
            value: f0,
            grad: self.grad.iter().map(|g| f1 * *g).collect(),
            hess,
        }
    }

    pub fn recip(&self) -> Self {
        let v = self.value;
        let r = T::one() / v;
        self.compose(r, -(r * r), T::from_real(2.0) * r * r * r)
    }

    pub fn powi(&self, n: i32) -> Self {
        match n {
            0 => self.const_like(T::one()),
            1 => self.clone(),
            _ => {
                let v = self.value;
                let p = |k: i32| -> T {
                    let mut acc = T::one();
                    let base = if k >= 0 { v } else { T::one() / v };
                    for _ in 0..k.unsigned_abs() {
                        acc = acc * base;
                    }
                    acc
                };
                let nf = T::from_real(n as f64);
                let nm1 = T::from_real((n - 1) as f64);
                self.compose(p(n), nf * p(n - 1), nf * nm1 * p(n - 2))
            }
        }
    }
}

impl Jet2<f64> {
    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.compose(c, -s, -c)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.compose(e, e, e)
    }

    pub fn to_complex(&self) -> CJet {
        Jet2 {
            value: Complex64::new(self.value, 0.0),
            grad: self.grad.iter().map(|g| Complex64::new(*g, 0.0)).collect(),
            hess: self.hess.iter().map(|h| Complex64::new(*h, 0.0)).collect(),
        }
    }
}

impl CJet {
    pub fn from_re_im(re: &Jet2<f64>, im: &Jet2<f64>) -> Self {
        Jet2 {
            value: Complex64::new(re.value, im.value),
            grad: re
                .grad
                .iter()
                .zip(&im.grad)
                .map(|(a, b)| Complex64::new(*a, *b))
                .collect(),
            hess: re
                .hess
                .iter()
                .zip(&im.hess)
                .map(|(a, b)| Complex64::new(*a, *b))
                .collect(),
        }
    }

    pub fn re(&self) -> Jet2<f64> {
        Jet2 {
            value: self.value.re,
            grad: self.grad.iter().map(|g| g.re).collect(),
            hess: self.hess.iter().map(|h| h.re).collect(),
        }
    }

    pub fn im(&self) -> Jet2<f64> {
        Jet2 {
            value: self.value.im,
            grad: self.grad.iter().map(|g| g.im).collect(),
            hess: self.hess.iter().map(|h| h.im).collect(),
        }
    }
}

impl<T: Field> Add for Jet2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self {
            value: self.value + rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| *a + *b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Field> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            value: self.value - rhs.value,
            grad: self.grad.iter().zip(&rhs.grad).map(|(a, b)| *a - *b).collect(),
            hess: self.hess.iter().zip(&rhs.hess).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl<T: Field> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            value: -self.value,
            grad: self.grad.iter().map(|a| -*a).collect(),
            hess: self.hess.iter().map(|a| -*a).collect(),
        }
    }
}

impl<T: Field> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let d = self.dim();
        let (a, b) = (self.value, rhs.value);
        let mut hess = vec![T::zero(); self.hess.len()];
        for i in 0..d {
            for j in i..d {
                let k = packed_index(d, i, j);
                hess[k] = a * rhs.hess[k]
                    + b * self.hess[k]
                    + self.grad[i] * rhs.grad[j]
                    + self.grad[j] * rhs.grad[i];
            }
        }
        Self {
            value: a * b,
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(ga, gb)| a * *gb + b * *ga)
                .collect(),
            hess,
        }
    }
}

impl<T: Field> Div for Jet2<T> {
    type Output = Self;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * rhs.recip()
    }
}

/// Scalars accepted by the dense solver: plain numbers and jets over them.
pub trait LinScalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// Magnitude of the value part, used for pivoting.
    fn magnitude(&self) -> f64;
    fn zero_like(&self) -> Self;
    fn one_like(&self) -> Self;
    fn scale_re(&self, s: f64) -> Self;
}

impl LinScalar for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn zero_like(&self) -> Self {
        0.0
    }
    fn one_like(&self) -> Self {
        1.0
    }
    fn scale_re(&self, s: f64) -> Self {
        self * s
    }
}

impl LinScalar for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one_like(&self) -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn scale_re(&self, s: f64) -> Self {
        self * s
    }
}

impl<T: Field> LinScalar for Jet2<T> {
    fn magnitude(&self) -> f64 {
        self.value.modulus()
    }
    fn zero_like(&self) -> Self {
        Jet2::zero_like(self)
    }
    fn one_like(&self) -> Self {
        self.const_like(T::one())
    }
    fn scale_re(&self, s: f64) -> Self {
        self.scale(T::from_real(s))
    }
}

/// Pivot below this fraction of the largest entry is treated as singular.
pub const SINGULAR_PIVOT: f64 = 1e-13;

/// Solve `a x = b` by Gaussian elimination with partial pivoting on values.
///
/// Pivot order is chosen from the values only, so on jets the result is the
/// exact jet of the solution. Returns `None` when the system is singular.
pub fn solve_dense<S: LinScalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>) -> Option<Vec<S>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|r| r.len() == n), "square system expected");
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(LinScalar::magnitude))
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].magnitude().total_cmp(&a[j][col].magnitude()))
            .expect("nonempty range");
        if a[piv][col].magnitude() <= SINGULAR_PIVOT * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col].clone() / a[col][col].clone();
            for k in col..n {
                let t = a[row][k].clone() - factor.clone() * a[col][k].clone();
                a[row][k] = t;
            }
            let t = b[row].clone() - factor * b[col].clone();
            b[row] = t;
        }
    }
    let mut x: Vec<S> = b.iter().map(LinScalar::zero_like).collect();
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc = acc - a[row][k].clone() * x[k].clone();
        }
        x[row] = acc / a[row][row].clone();
    }
    Some(x)
}

/// Invert a square matrix with [`solve_dense`], column by column.
pub fn invert_dense<S: LinScalar>(a: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = a.len();
    let zero = a[0][0].zero_like();
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        let e: Vec<S> = (0..n)
            .map(|i| if i == j { zero.one_like() } else { zero.clone() })
            .collect();
        cols.push(solve_dense(a.to_vec(), e)?);
    }
    Some((0..n).map(|i| (0..n).map(|j| cols[j][i].clone()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: &[f64], i: usize) -> Jet2 {
        Jet2::variable(v[i], i, v.len())
    }

    #[test]
    fn product_rule_matches_hand_derivatives() {
        let p = [2.0, 3.0, 0.0];
        let f = var(&p, 0) * var(&p, 1);
        assert_eq!(f.value, 6.0);
        assert_eq!(f.grad, vec![3.0, 2.0, 0.0]);
        assert_eq!(f.hess(0, 1), 1.0);
        assert_eq!(f.hess(1, 0), 1.0);
        assert_eq!(f.hess(0, 0), 0.0);
    }

    #[test]
    fn quotient_and_trig_chain_rule() {
        let p = [0.7, -1.3];
        let x = var(&p, 0);
        let y = var(&p, 1);
        // f = sin(x) / y
        let f = x.sin() / y.clone();
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let yv = -1.3;
        assert!((f.value - s / yv).abs() < 1e-15);
        assert!((f.grad[0] - c / yv).abs() < 1e-15);
        assert!((f.grad[1] + s / (yv * yv)).abs() < 1e-15);
        assert!((f.hess(0, 0) + s / yv).abs() < 1e-15);
        assert!((f.hess(0, 1) + c / (yv * yv)).abs() < 1e-15);
        assert!((f.hess(1, 1) - 2.0 * s / (yv * yv * yv)).abs() < 1e-14);
    }

    #[test]
    fn jet_linear_solve_differentiates_the_solution() {
        // x solves [[a, 1], [1, 2]] x = [1, 0] with a = p0; x0 = 2 / (2a - 1).
        let p = [1.5];
        let a = Jet2::variable(1.5, 0, 1);
        let one = Jet2::constant(1.0, 1);
        let two = Jet2::constant(2.0, 1);
        let zero = Jet2::constant(0.0, 1);
        let x = solve_dense(
            vec![vec![a, one.clone()], vec![one.clone(), two]],
            vec![one, zero],
        )
        .unwrap();
        let a0 = p[0];
        let d = 2.0 * a0 - 1.0;
        assert!((x[0].value - 2.0 / d).abs() < 1e-15);
        assert!((x[0].grad[0] + 4.0 / (d * d)).abs() < 1e-14);
        assert!((x[0].hess(0, 0) - 16.0 / (d * d * d)).abs() < 1e-13);
    }

    #[test]
    fn singular_system_is_reported() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve_dense(a, vec![1.0, 1.0]).is_none());
    }

    #[test]
    fn complex_jets_split_and_rejoin() {
        let x = Jet2::variable(0.3, 0, 2);
        let y = Jet2::variable(-0.2, 1, 2);
        let z = CJet::from_re_im(&x, &y);
        let zz = z.clone() * z.conj();
        let r2 = x.clone() * x + y.clone() * y;
        assert!((zz.re().value - r2.value).abs() < 1e-15);
        assert!(zz.im().grad.iter().all(|g| g.abs() < 1e-15));
        assert!((zz.re().hess(0, 0) - 2.0).abs() < 1e-15);
    }
}
