//! Chart-local exterior calculus: points, vector fields and differential forms.
//!
//! Everything here is symbolic over [`ScalarField`]; numbers only appear when
//! a field or form is evaluated at a [`ChartPoint`]. The pointwise helpers at
//! the bottom work on jet vectors produced by linear solves.

use std::collections::BTreeMap;
use std::ops::{Add, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::{CField, ScalarField};
use crate::jet::{CJet, Jet2};

#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for ChartPoint {
    fn from(coords: Vec<f64>) -> Self {
        Self { coords }
    }
}

/// A coordinate box: open chart domain plus a closed sampling box inside it.
#[derive(Clone, Debug)]
pub struct Chart {
    pub domain: Vec<(f64, f64)>,
    pub sample: Vec<(f64, f64)>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        p.dim() == self.dim()
            && p
                .coords
                .iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| x.is_finite() && lo < x && x < hi)
    }

    pub fn check(&self, p: &ChartPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::Domain(p.coords.clone()))
        }
    }
}

/// Exact jet of `f` at `p`, rejecting points outside the chart.
pub fn eval_jet(f: &ScalarField, p: &ChartPoint, chart: &Chart) -> Result<Jet2> {
    chart.check(p)?;
    Ok(f.eval_jet(&p.coords))
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Self {
        Self { comps }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![ScalarField::zero(); dim])
    }

    /// The coordinate field `∂_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut v = Self::zero(dim);
        v.comps[i] = ScalarField::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    /// `X·f`.
    pub fn apply(&self, f: &ScalarField) -> ScalarField {
        self.comps
            .iter()
            .enumerate()
            .fold(ScalarField::zero(), |acc, (j, c)| acc + c * &f.diff(j))
    }

    pub fn scale(&self, f: &ScalarField) -> Self {
        Self::new(self.comps.iter().map(|c| c * f).collect())
    }

    pub fn eval(&self, p: &ChartPoint) -> Vec<f64> {
        self.comps.iter().map(|c| c.eval(&p.coords)).collect()
    }

    pub fn eval_jet(&self, p: &ChartPoint) -> Vec<Jet2> {
        self.comps.iter().map(|c| c.eval_jet(&p.coords)).collect()
    }
}

impl Add for VectorField {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.comps.into_iter().zip(rhs.comps).map(|(a, b)| a + b).collect())
    }
}

impl Sub for VectorField {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.comps.into_iter().zip(rhs.comps).map(|(a, b)| a - b).collect())
    }
}

/// `[X,Y]^i = X·Y^i − Y·X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> VectorField {
    VectorField::new(
        (0..x.dim())
            .map(|i| x.apply(&y.comps[i]) - y.apply(&x.comps[i]))
            .collect(),
    )
}

/// A complex vector field `re + i·im`.
#[derive(Clone, Debug)]
pub struct CVectorField {
    pub re: VectorField,
    pub im: VectorField,
}

impl CVectorField {
    pub fn new(re: VectorField, im: VectorField) -> Self {
        Self { re, im }
    }

    pub fn from_components(comps: Vec<CField>) -> Self {
        let (re, im) = comps.into_iter().map(|c| (c.re, c.im)).unzip();
        Self::new(VectorField::new(re), VectorField::new(im))
    }

    pub fn real(v: VectorField) -> Self {
        let d = v.dim();
        Self::new(v, VectorField::zero(d))
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn conj(&self) -> Self {
        Self::new(
            self.re.clone(),
            VectorField::new(self.im.comps.iter().map(|c| -c).collect()),
        )
    }

    pub fn component(&self, i: usize) -> CField {
        CField::new(self.re.comps[i].clone(), self.im.comps[i].clone())
    }

    /// `Z·f` for a complex function `f`.
    pub fn apply(&self, f: &CField) -> CField {
        (0..self.dim()).fold(CField::zero(), |acc, j| acc + self.component(j) * f.diff(j))
    }

    pub fn eval(&self, p: &ChartPoint) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.component(i).eval(&p.coords)).collect()
    }

    pub fn eval_jet(&self, p: &ChartPoint) -> Vec<CJet> {
        (0..self.dim()).map(|i| self.component(i).eval_jet(&p.coords)).collect()
    }
}

/// Sort `idx` in place and return the permutation sign, or `None` on a repeat.
fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && idx[j - 1] > idx[j] {
            idx.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some(sign)
    }
}

/// A differential k-form, stored by strictly increasing index tuples.
#[derive(Clone, Debug)]
pub struct KForm {
    pub dim: usize,
    pub degree: usize,
    pub comps: BTreeMap<Vec<usize>, ScalarField>,
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        Self { dim, degree, comps: BTreeMap::new() }
    }

    pub fn function(dim: usize, f: ScalarField) -> Self {
        let mut w = Self::zero(dim, 0);
        w.add_term(vec![], 1.0, f);
        w
    }

    /// `dx_i`.
    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut w = Self::zero(dim, 1);
        w.add_term(vec![i], 1.0, ScalarField::one());
        w
    }

    /// The 1-form `Σ c_i dx_i`.
    pub fn one_form(comps: Vec<ScalarField>) -> Self {
        let mut w = Self::zero(comps.len(), 1);
        for (i, c) in comps.into_iter().enumerate() {
            w.add_term(vec![i], 1.0, c);
        }
        w
    }

    /// Differential of a function.
    pub fn df(dim: usize, f: &ScalarField) -> Self {
        Self::one_form((0..dim).map(|i| f.diff(i)).collect())
    }

    /// Add `sign · f · dx_{idx}`, reordering `idx` as needed.
    pub fn add_term(&mut self, mut idx: Vec<usize>, sign: f64, f: ScalarField) {
        assert_eq!(idx.len(), self.degree, "index length must match degree");
        let Some(s) = sort_with_sign(&mut idx) else {
            return;
        };
        let term = if s * sign < 0.0 { -f } else { f };
        let entry = self.comps.remove(&idx).map_or(term.clone(), |old| old + term);
        if !entry.is_zero() {
            self.comps.insert(idx, entry);
        }
    }

    pub fn get(&self, idx: &[usize]) -> ScalarField {
        let mut idx = idx.to_vec();
        match sort_with_sign(&mut idx) {
            None => ScalarField::zero(),
            Some(s) => match self.comps.get(&idx) {
                Some(f) if s < 0.0 => -f,
                Some(f) => f.clone(),
                None => ScalarField::zero(),
            },
        }
    }

    pub fn scale(&self, f: &ScalarField) -> Self {
        let mut out = Self::zero(self.dim, self.degree);
        for (idx, c) in &self.comps {
            out.add_term(idx.clone(), 1.0, c * f);
        }
        out
    }

    /// Numerical components at `p`.
    pub fn eval(&self, p: &ChartPoint) -> BTreeMap<Vec<usize>, f64> {
        self.comps.iter().map(|(k, f)| (k.clone(), f.eval(&p.coords))).collect()
    }

    /// Largest absolute component at `p`.
    pub fn max_abs(&self, p: &ChartPoint) -> f64 {
        self.comps.values().map(|f| f.eval(&p.coords).abs()).fold(0.0, f64::max)
    }

    /// The form applied to `degree` complex vectors at `p`.
    pub fn eval_on(&self, vectors: &[Vec<Complex64>], p: &ChartPoint) -> Complex64 {
        assert_eq!(vectors.len(), self.degree);
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, f) in &self.comps {
            let m: Vec<Vec<Complex64>> = vectors
                .iter()
                .map(|v| idx.iter().map(|&i| v[i]).collect())
                .collect();
            acc += f.eval(&p.coords) * det(&m);
        }
        acc
    }

    /// Real-vector version of [`KForm::eval_on`].
    pub fn eval_on_real(&self, vectors: &[Vec<f64>], p: &ChartPoint) -> f64 {
        let cv: Vec<Vec<Complex64>> = vectors
            .iter()
            .map(|v| v.iter().map(|x| Complex64::new(*x, 0.0)).collect())
            .collect();
        self.eval_on(&cv, p).re
    }
}

impl Add for KForm {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.degree, rhs.degree);
        for (idx, f) in rhs.comps {
            self.add_term(idx, 1.0, f);
        }
        self
    }
}

impl Sub for KForm {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        assert_eq!(self.degree, rhs.degree);
        for (idx, f) in rhs.comps {
            self.add_term(idx, -1.0, f);
        }
        self
    }
}

/// Determinant by Laplace expansion; matrices here are at most dim × dim.
fn det(m: &[Vec<Complex64>]) -> Complex64 {
    match m.len() {
        0 => Complex64::new(1.0, 0.0),
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        n => {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..n {
                let minor: Vec<Vec<Complex64>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, x)| *x).collect())
                    .collect();
                let s = if c % 2 == 0 { 1.0 } else { -1.0 };
                acc += m[0][c] * det(&minor) * s;
            }
            acc
        }
    }
}

pub fn exterior_derivative(w: &KForm) -> KForm {
    let mut out = KForm::zero(w.dim, w.degree + 1);
    if w.degree >= w.dim {
        return out;
    }
    for (idx, f) in &w.comps {
        for j in 0..w.dim {
            if idx.contains(&j) {
                continue;
            }
            let mut full = vec![j];
            full.extend_from_slice(idx);
            out.add_term(full, 1.0, f.diff(j));
        }
    }
    out
}

pub fn wedge(a: &KForm, b: &KForm) -> KForm {
    let mut out = KForm::zero(a.dim, a.degree + b.degree);
    if a.degree + b.degree > a.dim {
        return out;
    }
    for (ia, fa) in &a.comps {
        for (ib, fb) in &b.comps {
            let mut full = ia.clone();
            full.extend_from_slice(ib);
            out.add_term(full, 1.0, fa * fb);
        }
    }
    out
}

/// `ι(X)ω`, contracting into the first slot.
pub fn interior_product(x: &VectorField, w: &KForm) -> Result<KForm> {
    if w.degree == 0 {
        return Err(Error::Degree("interior product of a function".into()));
    }
    let mut out = KForm::zero(w.dim, w.degree - 1);
    for (idx, f) in &w.comps {
        for (m, &i) in idx.iter().enumerate() {
            let mut rest = idx.clone();
            rest.remove(m);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out.add_term(rest, sign, &x.comps[i] * f);
        }
    }
    Ok(out)
}

/// Lie derivative by Cartan's formula `dι(X)ω + ι(X)dω`.
pub fn lie_derivative(x: &VectorField, w: &KForm) -> KForm {
    let inner_d = if w.degree == 0 {
        KForm::zero(w.dim, 0)
    } else {
        exterior_derivative(&interior_product(x, w).expect("degree ≥ 1"))
    };
    let dw = exterior_derivative(w);
    let d_inner = if dw.degree == 0 || dw.degree > w.dim {
        KForm::zero(w.dim, w.degree)
    } else {
        interior_product(x, &dw).expect("degree ≥ 1")
    };
    if w.degree == 0 {
        d_inner
    } else {
        inner_d + d_inner
    }
}

// Pointwise operations on jet vectors.

/// Value of `[X,Y]` at the jets' base point.
pub fn bracket_at<T: crate::jet::Field>(x: &[Jet2<T>], y: &[Jet2<T>]) -> Vec<T> {
    (0..x.len())
        .map(|i| y[i].directional(&values(x)) - x[i].directional(&values(y)))
        .collect()
}

/// Values of a jet vector.
pub fn values<T: crate::jet::Field>(v: &[Jet2<T>]) -> Vec<T> {
    v.iter().map(|j| j.value).collect()
}

/// `X·f` as a jet with exact value and gradient.
pub fn apply_at<T: crate::jet::Field>(x: &[Jet2<T>], f: &Jet2<T>) -> Jet2<T> {
    f.derivative_along(x)
}

/// `(L_X α)_i = X^j ∂_j α_i + α_j ∂_i X^j` for a 1-form given by jets.
pub fn lie_derivative_1form_at(x: &[Jet2], alpha: &[Jet2]) -> Vec<f64> {
    let xv = values(x);
    (0..x.len())
        .map(|i| {
            alpha[i].directional(&xv)
                + (0..x.len()).map(|j| alpha[j].value * x[j].grad[i]).sum::<f64>()
        })
        .collect()
}

/// `(dα)_{ij} = ∂_i α_j − ∂_j α_i` for a 1-form given by jets.
pub fn d_1form_at(alpha: &[Jet2]) -> Vec<Vec<f64>> {
    let d = alpha.len();
    (0..d)
        .map(|i| (0..d).map(|j| alpha[j].grad[i] - alpha[i].grad[j]).collect())
        .collect()
}
