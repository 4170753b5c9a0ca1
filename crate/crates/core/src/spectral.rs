//! ∂̄_b on restricted polynomials of S³, Kohn-Rossi multiplicities per Hopf
//! weight, the resulting character, and its pairing with test functions.
//!
//! Polynomials in `z, w, z̄, w̄` are reduced to canonical monomials with
//! `a·c = 0` through `z z̄ = 1 − w w̄`. Assembly is exact over the rationals;
//! floating point enters only after Gram orthonormalization.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::contact::ContactModel;
use crate::cr::{CRFrame, FramePoint};
use crate::error::Result;
use crate::expr::{CField, ScalarField};
use crate::forms::{bracket_at, lie_bracket, values, CVectorField, ChartPoint};
use crate::jet::{invert_dense, CJet, Jet2};
use crate::quadrature::{S3Quadrature, ROUND_VOLUME};
use crate::symmetry::{transversality_check, LieAction};

/// Relative singular-value threshold for rank decisions.
pub const RANK_THRESHOLD: f64 = 1e-8;

type Q = BigRational;

fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// `z^a w^b z̄^c w̄^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Monomial {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
}

impl Monomial {
    pub fn new(a: u32, b: u32, c: u32, d: u32) -> Self {
        Self { a, b, c, d }
    }

    pub fn degree(&self) -> u32 {
        self.a + self.b + self.c + self.d
    }

    /// Weight under the diagonal circle.
    pub fn weight(&self) -> i64 {
        self.a as i64 + self.b as i64 - self.c as i64 - self.d as i64
    }

    /// Weights `(a − c, b − d)` under the torus.
    pub fn torus_weight(&self) -> (i64, i64) {
        (self.a as i64 - self.c as i64, self.b as i64 - self.d as i64)
    }

    pub fn is_canonical(&self) -> bool {
        self.a == 0 || self.c == 0
    }

    pub fn eval(&self, p: &ChartPoint) -> Complex64 {
        let (eta, p1, p2) = (p.coords[0], p.coords[1], p.coords[2]);
        let z = Complex64::from_polar(eta.cos(), p1);
        let w = Complex64::from_polar(eta.sin(), p2);
        z.powu(self.a) * w.powu(self.b) * z.conj().powu(self.c) * w.conj().powu(self.d)
    }

    /// The monomial as a field on the Hopf chart.
    pub fn field(&self) -> CField {
        let v = ScalarField::var;
        let modulus = v(0).cos().powi((self.a + self.c) as i32) * v(0).sin().powi((self.b + self.d) as i32);
        let phase = v(1) * (self.a as f64 - self.c as f64) + v(2) * (self.b as f64 - self.d as f64);
        CField::expi(&phase) * CField::real(modulus)
    }
}

/// Exact polynomial with rational coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly(pub BTreeMap<Monomial, Q>);

impl Poly {
    pub fn monomial(m: Monomial) -> Self {
        let mut p = Self::default();
        p.add(m, Q::one());
        p
    }

    pub fn add(&mut self, m: Monomial, k: Q) {
        if k.is_zero() {
            return;
        }
        let e = self.0.entry(m).or_insert_with(Q::zero);
        *e += k;
        if e.is_zero() {
            self.0.remove(&m);
        }
    }

    pub fn add_poly(&mut self, other: &Poly, k: &Q) {
        for (m, c) in &other.0 {
            self.add(*m, c * k);
        }
    }

    /// Rewrite to canonical monomials.
    pub fn canonical(&self) -> Poly {
        let mut out = Poly::default();
        let mut stack: Vec<(Monomial, Q)> = self.0.iter().map(|(m, c)| (*m, c.clone())).collect();
        while let Some((m, c)) = stack.pop() {
            if m.is_canonical() {
                out.add(m, c);
            } else {
                // z z̄ = 1 − w w̄
                let base = Monomial::new(m.a - 1, m.b, m.c - 1, m.d);
                stack.push((base, c.clone()));
                stack.push((Monomial::new(base.a, base.b + 1, base.c, base.d + 1), -c));
            }
        }
        out
    }

    pub fn eval(&self, p: &ChartPoint) -> Complex64 {
        self.0.iter().map(|(m, c)| m.eval(p) * c.to_f64().unwrap_or(f64::NAN)).sum()
    }
}

/// `Z̄ = w ∂_{z̄} − z ∂_{w̄}` on a monomial.
pub fn zbar_monomial(m: Monomial) -> Poly {
    let mut p = Poly::default();
    if m.c > 0 {
        p.add(Monomial::new(m.a, m.b + 1, m.c - 1, m.d), q(m.c as i64));
    }
    if m.d > 0 {
        p.add(Monomial::new(m.a + 1, m.b, m.c, m.d - 1), q(-(m.d as i64)));
    }
    p
}

/// `Z = w̄ ∂_z − z̄ ∂_w` on a monomial.
pub fn z_monomial(m: Monomial) -> Poly {
    let mut p = Poly::default();
    if m.a > 0 {
        p.add(Monomial::new(m.a - 1, m.b, m.c, m.d + 1), q(m.a as i64));
    }
    if m.b > 0 {
        p.add(Monomial::new(m.a, m.b - 1, m.c + 1, m.d), q(-(m.b as i64)));
    }
    p
}

fn apply_poly(op: fn(Monomial) -> Poly, p: &Poly) -> Poly {
    let mut out = Poly::default();
    for (m, c) in &p.0 {
        out.add_poly(&op(*m), c);
    }
    out.canonical()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestrictedMonomialBasis {
    pub degree_cap: u32,
    pub weight: i64,
    pub monomials: Vec<Monomial>,
}

impl RestrictedMonomialBasis {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }
}

/// Canonical monomials of degree ≤ N and weight n.
pub fn enumerate_basis(cap: u32, weight: i64) -> RestrictedMonomialBasis {
    let mut monomials = vec![];
    for a in 0..=cap {
        for c in 0..=cap - a {
            if a > 0 && c > 0 {
                continue;
            }
            for b in 0..=cap - a - c {
                for d in 0..=cap - a - b - c {
                    let m = Monomial::new(a, b, c, d);
                    if m.weight() == weight {
                        monomials.push(m);
                    }
                }
            }
        }
    }
    RestrictedMonomialBasis { degree_cap: cap, weight, monomials }
}

/// Canonical monomials of degree ≤ N with torus weight `(j, k)`.
pub fn torus_block(cap: u32, j: i64, k: i64) -> Vec<Monomial> {
    let base = (j.unsigned_abs() + k.unsigned_abs()) as u32;
    let mut out = vec![];
    let mut t = 0;
    while base + 2 * t <= cap {
        let (a, c) = if j >= 0 { (j as u32, 0) } else { (0, (-j) as u32) };
        let (b, d) = if k >= 0 { (k as u32 + t, t) } else { (t, (-k) as u32 + t) };
        out.push(Monomial::new(a, b, c, d));
        t += 1;
    }
    out
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `⟨m₁, m₂⟩ / 2π²`, exactly.
pub fn gram_entry(m1: Monomial, m2: Monomial) -> Q {
    let (a, b, c, d) = (m1.a + m2.c, m1.b + m2.d, m1.c + m2.a, m1.d + m2.b);
    if a != c || b != d {
        return Q::zero();
    }
    Q::new(factorial(a) * factorial(b), factorial(a + b + 1))
}

/// Gram matrix over the round S³, as exact multiples of `2π²`.
pub fn gram_exact(basis: &[Monomial]) -> Vec<Vec<Q>> {
    basis.iter().map(|x| basis.iter().map(|y| gram_entry(*x, *y)).collect()).collect()
}

pub fn gram_matrix(basis: &RestrictedMonomialBasis) -> DMatrix<f64> {
    let g = gram_exact(&basis.monomials);
    let n = basis.len();
    DMatrix::from_fn(n, n, |i, j| ROUND_VOLUME * g[i][j].to_f64().unwrap_or(f64::NAN))
}

/// Exact `L D Lᵀ` of a symmetric matrix; `None` if a pivot is not positive.
pub fn ldl_exact(g: &[Vec<Q>]) -> Option<(Vec<Vec<Q>>, Vec<Q>)> {
    let n = g.len();
    let mut l = vec![vec![Q::zero(); n]; n];
    let mut d = vec![Q::zero(); n];
    for j in 0..n {
        let mut dj = g[j][j].clone();
        for k in 0..j {
            dj -= &l[j][k] * &l[j][k] * &d[k];
        }
        if !dj.is_positive() {
            return None;
        }
        l[j][j] = Q::one();
        for i in j + 1..n {
            let mut s = g[i][j].clone();
            for k in 0..j {
                s -= &l[i][k] * &l[j][k] * &d[k];
            }
            l[i][j] = s / &dj;
        }
        d[j] = dj;
    }
    Some((l, d))
}

/// Inverse of a unit lower-triangular matrix.
fn unit_lower_inverse(l: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = l.len();
    let mut inv = vec![vec![Q::zero(); n]; n];
    for col in 0..n {
        inv[col][col] = Q::one();
        for i in col + 1..n {
            let mut s = Q::zero();
            for k in col..i {
                s -= &l[i][k] * &inv[k][col];
            }
            inv[i][col] = s;
        }
    }
    inv
}

fn matmul(a: &[Vec<Q>], b: &[Vec<Q>], inner: usize, cols: usize) -> Vec<Vec<Q>> {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

fn transpose(a: &[Vec<Q>], rows: usize, cols: usize) -> Vec<Vec<Q>> {
    (0..cols).map(|j| (0..rows).map(|i| a[i][j].clone()).collect()).collect()
}

/// Exact rank by fraction-free elimination.
pub fn exact_rank(a: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<Q>> = a.to_vec();
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| !m[r][c].is_zero()) else {
            continue;
        };
        m.swap(rank, piv);
        for r in 0..rows {
            if r != rank && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[rank][c];
                for k in c..cols {
                    let t = &f * &m[rank][k];
                    m[r][k] -= t;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Matrix of an operator between monomial lists, plus the count of image
/// terms falling outside `codomain`.
pub fn assemble(op: fn(Monomial) -> Poly, domain: &[Monomial], codomain: &[Monomial]) -> (Vec<Vec<Q>>, usize) {
    let index: HashMap<Monomial, usize> = codomain.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let mut mat = vec![vec![Q::zero(); domain.len()]; codomain.len()];
    let mut leak = 0;
    for (j, m) in domain.iter().enumerate() {
        let img = apply_poly(op, &Poly::monomial(*m));
        for (mm, c) in &img.0 {
            match index.get(mm) {
                Some(&i) => mat[i][j] += c,
                None => leak += 1,
            }
        }
    }
    (mat, leak)
}

/// Exact ∂̄_b matrix from weight-n functions to weight-n (0,1)-forms, whose
/// coefficient functions carry weight n+2.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub domain: RestrictedMonomialBasis,
    pub codomain: RestrictedMonomialBasis,
    pub entries: Vec<Vec<Q>>,
    pub leakage: usize,
}

pub fn assemble_dbar(basis: &RestrictedMonomialBasis) -> OperatorMatrix {
    let codomain = enumerate_basis(basis.degree_cap, basis.weight + 2);
    let (entries, leakage) = assemble(zbar_monomial, &basis.monomials, &codomain.monomials);
    OperatorMatrix { domain: basis.clone(), codomain, entries, leakage }
}

/// Operator between Gram-orthonormal bases: `D₁^{½} L₁ᵀ A L₀^{−ᵀ} D₀^{−½}`.
pub struct Orthonormalized {
    pub matrix: DMatrix<f64>,
    pub min_pivot_dom: f64,
    pub min_pivot_cod: f64,
}

fn orthonormalize(a: &[Vec<Q>], dom: &[Monomial], cod: &[Monomial]) -> Orthonormalized {
    let (nd, nc) = (dom.len(), cod.len());
    let (l0, d0) = ldl_exact(&gram_exact(dom)).expect("Gram matrix must be positive definite");
    let (l1, d1) = ldl_exact(&gram_exact(cod)).expect("Gram matrix must be positive definite");
    let l0_inv_t = transpose(&unit_lower_inverse(&l0), nd, nd);
    let l1_t = transpose(&l1, nc, nc);
    let b = matmul(&matmul(&l1_t, a, nc, nd), &l0_inv_t, nd, nd);
    let f = |x: &Q| x.to_f64().unwrap_or(f64::NAN);
    let matrix = DMatrix::from_fn(nc, nd, |i, j| f(&d1[i]).sqrt() * f(&b[i][j]) / f(&d0[j]).sqrt());
    let minp = |d: &[Q]| d.iter().map(f).fold(f64::INFINITY, f64::min);
    Orthonormalized { matrix, min_pivot_dom: minp(&d0), min_pivot_cod: minp(&d1) }
}

/// Orthonormalized matrix of an operator mapping a monomial list to itself.
fn orthonormalize_square(a: &[Vec<Q>], basis: &[Monomial]) -> DMatrix<f64> {
    orthonormalize(a, basis, basis).matrix
}

fn serialize_margin<S: serde::Serializer>(m: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(v) if v.is_infinite() => s.serialize_str("inf"),
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_none(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KohnRossi {
    pub weight: i64,
    pub degree_cap: u32,
    pub dim_h00: usize,
    pub dim_h01: usize,
    pub domain_dim: usize,
    pub codomain_dim: usize,
    pub rank: usize,
    pub exact_rank: usize,
    /// Smallest kept over largest discarded singular value (infinite when every
    /// discarded direction is an exact zero); `None` when nothing is kept.
    #[serde(serialize_with = "serialize_margin")]
    pub singular_value_margin: Option<f64>,
    /// Smallest kept singular value relative to the largest.
    pub min_kept_relative: Option<f64>,
    /// Relative singular values within a factor 10 of the threshold.
    pub near_threshold: Vec<f64>,
    pub leakage: usize,
    pub min_gram_pivot: f64,
}

struct BlockResult {
    dom: usize,
    cod: usize,
    sv: Vec<f64>,
    exact_rank: usize,
    leakage: usize,
    min_pivot: f64,
}

fn block_result(dom: &[Monomial], cod: &[Monomial]) -> BlockResult {
    let (a, leakage) = assemble(zbar_monomial, dom, cod);
    let exact = exact_rank(&a);
    let (sv, min_pivot) = if dom.is_empty() || cod.is_empty() {
        (vec![], f64::INFINITY)
    } else {
        let o = orthonormalize(&a, dom, cod);
        (o.matrix.singular_values().iter().copied().collect(), o.min_pivot_dom.min(o.min_pivot_cod))
    };
    BlockResult { dom: dom.len(), cod: cod.len(), sv, exact_rank: exact, leakage, min_pivot }
}

fn combine(weight: i64, cap: u32, blocks: Vec<BlockResult>) -> KohnRossi {
    let smax = blocks.iter().flat_map(|b| b.sv.iter()).fold(0.0_f64, |a, b| a.max(*b));
    let cut = RANK_THRESHOLD * smax;
    let (mut dom, mut cod, mut rank, mut exact, mut leak) = (0, 0, 0, 0, 0);
    let mut kept_min = f64::INFINITY;
    let mut disc_max: f64 = 0.0;
    let mut near = vec![];
    let mut min_pivot = f64::INFINITY;
    for b in &blocks {
        dom += b.dom;
        cod += b.cod;
        exact += b.exact_rank;
        leak += b.leakage;
        min_pivot = min_pivot.min(b.min_pivot);
        let mut r = 0;
        for &s in &b.sv {
            if s > cut {
                r += 1;
                kept_min = kept_min.min(s);
            } else {
                disc_max = disc_max.max(s);
            }
            if smax > 0.0 && s > cut / 10.0 && s < cut * 10.0 {
                near.push(s / smax);
            }
        }
        rank += r;
    }
    // Kernel and cokernel directions without a singular value count as exact zeros.
    let margin = if rank == 0 {
        None
    } else if disc_max == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(kept_min / disc_max)
    };
    let min_kept_relative = (rank > 0).then(|| kept_min / smax);
    KohnRossi {
        weight,
        degree_cap: cap,
        dim_h00: dom - rank,
        dim_h01: cod - rank,
        domain_dim: dom,
        codomain_dim: cod,
        rank,
        exact_rank: exact,
        singular_value_margin: margin,
        min_kept_relative,
        near_threshold: near,
        leakage: leak,
        min_gram_pivot: min_pivot,
    }
}

/// Kohn-Rossi dimensions at weight `n`, computed block by block over the torus grading.
pub fn kohn_rossi_multiplicities(cap: u32, weight: i64) -> KohnRossi {
    let c = cap as i64;
    let blocks = (-c - 1..=c + 1)
        .filter_map(|j| {
            let k = weight - j;
            let dom = torus_block(cap, j, k);
            let cod = torus_block(cap, j + 1, k + 1);
            (!dom.is_empty() || !cod.is_empty()).then(|| block_result(&dom, &cod))
        })
        .collect();
    combine(weight, cap, blocks)
}

/// Same dimensions from the full weight-n basis without torus splitting.
pub fn kohn_rossi_unsplit(cap: u32, weight: i64) -> KohnRossi {
    let dom = enumerate_basis(cap, weight);
    let cod = enumerate_basis(cap, weight + 2);
    combine(weight, cap, vec![block_result(&dom.monomials, &cod.monomials)])
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightEntry {
    pub weight: i64,
    pub degree_cap: u32,
    pub dim_h00: usize,
    pub dim_h01: usize,
    pub m: Option<i64>,
    pub stable: bool,
    #[serde(serialize_with = "serialize_margin")]
    pub singular_value_margin: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightedCharacter {
    pub degree_cap: u32,
    pub n_min: i64,
    pub n_max: i64,
    pub entries: Vec<WeightEntry>,
}

impl WeightedCharacter {
    pub fn multiplicity(&self, n: i64) -> Option<i64> {
        self.entries.iter().find(|e| e.weight == n).and_then(|e| e.m)
    }

    pub fn gaps(&self) -> Vec<i64> {
        self.entries.iter().filter(|e| !e.stable).map(|e| e.weight).collect()
    }

    /// A character from given multiplicities (all marked stable).
    pub fn from_table(table: &[(i64, i64)]) -> Self {
        let entries = table
            .iter()
            .map(|&(weight, m)| WeightEntry {
                weight,
                degree_cap: 0,
                dim_h00: 0,
                dim_h01: 0,
                m: Some(m),
                stable: true,
                singular_value_margin: None,
            })
            .collect();
        let n_min = table.iter().map(|t| t.0).min().unwrap_or(0);
        let n_max = table.iter().map(|t| t.0).max().unwrap_or(-1);
        Self { degree_cap: 0, n_min, n_max, entries }
    }
}

/// `m_n = dim H^{0,0}_n − dim H^{0,1}_n`, kept only where it agrees at `N` and `N+2`.
pub fn character(cap: u32, n_min: i64, n_max: i64) -> WeightedCharacter {
    let entries = (n_min..=n_max)
        .map(|n| {
            let a = kohn_rossi_multiplicities(cap, n);
            let b = kohn_rossi_multiplicities(cap + 2, n);
            let stable = a.dim_h00 == b.dim_h00 && a.dim_h01 == b.dim_h01 && a.leakage == 0;
            WeightEntry {
                weight: n,
                degree_cap: cap,
                dim_h00: a.dim_h00,
                dim_h01: a.dim_h01,
                m: stable.then(|| a.dim_h00 as i64 - a.dim_h01 as i64),
                stable,
                singular_value_margin: a.singular_value_margin,
            }
        })
        .collect();
    WeightedCharacter { degree_cap: cap, n_min, n_max, entries }
}

/// Max-norm gap between `D_b²` and the assembled Kohn Laplacian
/// `2(∂̄*∂̄ + ∂̄∂̄*)` at weight `n`, both in orthonormal bases.
pub fn laplacian_gap(cap: u32, weight: i64) -> f64 {
    let c = cap as i64;
    let mut worst: f64 = 0.0;
    for j in -c - 1..=c + 1 {
        let k = weight - j;
        let dom = torus_block(cap, j, k);
        let cod = torus_block(cap, j + 1, k + 1);
        if dom.is_empty() && cod.is_empty() {
            continue;
        }
        let (a, _) = assemble(zbar_monomial, &dom, &cod);
        let ahat = if dom.is_empty() || cod.is_empty() {
            DMatrix::zeros(cod.len(), dom.len())
        } else {
            orthonormalize(&a, &dom, &cod).matrix
        };
        // On S³ the formal adjoint of Z̄ is −Z.
        let lap = |basis: &[Monomial], first: fn(Monomial) -> Poly, second: fn(Monomial) -> Poly| {
            let compose = |m: Monomial| -> Poly {
                let mut out = apply_poly(second, &apply_poly(first, &Poly::monomial(m)));
                out.0.values_mut().for_each(|v| *v *= q(-2));
                out
            };
            let mut mat = vec![vec![Q::zero(); basis.len()]; basis.len()];
            let index: HashMap<Monomial, usize> = basis.iter().enumerate().map(|(i, m)| (*m, i)).collect();
            for (jj, m) in basis.iter().enumerate() {
                for (mm, cc) in &compose(*m).0 {
                    if let Some(&i) = index.get(mm) {
                        mat[i][jj] += cc;
                    }
                }
            }
            mat
        };
        if !dom.is_empty() {
            let l0 = orthonormalize_square(&lap(&dom, zbar_monomial, z_monomial), &dom);
            let d2 = ahat.transpose() * &ahat * 2.0;
            worst = worst.max((d2 - l0).amax());
        }
        if !cod.is_empty() {
            let l1 = orthonormalize_square(&lap(&cod, z_monomial, zbar_monomial), &cod);
            let d2 = &ahat * ahat.transpose() * 2.0;
            worst = worst.max((d2 - l1).amax());
        }
    }
    worst
}

/// Gram adjoint of ∂̄_b applied to the (0,1)-form `m θ̄`, as a polynomial.
pub fn gram_adjoint_of(cap: u32, m: Monomial) -> Poly {
    // The coefficient m has weight n+2; the adjoint lands in weight n.
    let cod = enumerate_basis(cap, m.weight());
    let dom = enumerate_basis(cap, m.weight() - 2);
    let (a, _) = assemble(zbar_monomial, &dom.monomials, &cod.monomials);
    let g0 = gram_exact(&dom.monomials);
    let g1 = gram_exact(&cod.monomials);
    let mut e = vec![Q::zero(); cod.len()];
    let Some(pos) = cod.monomials.iter().position(|x| *x == m) else {
        return Poly::default();
    };
    e[pos] = Q::one();
    // x = G₀⁻¹ Aᵀ G₁ e
    let g1e: Vec<Q> = g1.iter().map(|row| row.iter().zip(&e).fold(Q::zero(), |s, (a, b)| s + a * b)).collect();
    let rhs: Vec<Q> = (0..dom.len())
        .map(|j| (0..cod.len()).fold(Q::zero(), |s, i| s + &a[i][j] * &g1e[i]))
        .collect();
    let x = solve_exact(&g0, &rhs);
    let mut out = Poly::default();
    for (k, mm) in dom.monomials.iter().enumerate() {
        out.add(*mm, x[k].clone());
    }
    out
}

fn solve_exact(g: &[Vec<Q>], b: &[Q]) -> Vec<Q> {
    let n = b.len();
    let mut m: Vec<Vec<Q>> = g.iter().zip(b).map(|(r, v)| {
        let mut row = r.clone();
        row.push(v.clone());
        row
    }).collect();
    for c in 0..n {
        let piv = (c..n).find(|&r| !m[r][c].is_zero()).expect("nonsingular Gram matrix");
        m.swap(c, piv);
        for r in 0..n {
            if r != c && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[c][c];
                for k in c..=n {
                    let t = &f * &m[c][k];
                    m[r][k] -= t;
                }
            }
        }
    }
    (0..n).map(|i| &m[i][n] / &m[i][i]).collect()
}

// Test functions and pairings.

/// `φ(t) = (1 + c t) exp(−(t − s)²/(2σ²) − 1/(1 − (t/L)²))` on `|t| < L`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TestFunction {
    pub shift: f64,
    pub width: f64,
    pub slope: f64,
    pub support: f64,
}

impl TestFunction {
    pub fn new(shift: f64, width: f64, slope: f64) -> Self {
        Self { shift, width, slope, support: 3.0 }
    }

    pub fn with_support(mut self, support: f64) -> Self {
        self.support = support;
        self
    }

    pub fn builtin() -> [TestFunction; 3] {
        [
            TestFunction::new(0.0, 0.4, 0.5),
            TestFunction::new(0.25, 0.45, 0.0),
            TestFunction::new(-0.2, 0.35, -0.8),
        ]
    }

    fn jet_at(&self, t: f64) -> Jet2 {
        let x = Jet2::variable(t, 0, 1);
        let one = x.const_like(1.0);
        let u = x.scale(1.0 / self.support);
        let edge = (one.clone() - u.clone() * u).recip();
        let g = (x.clone() - x.const_like(self.shift)).powi(2).scale(-0.5 / (self.width * self.width)) - edge;
        (one + x.scale(self.slope)) * g.exp()
    }

    pub fn value(&self, t: f64) -> f64 {
        if t.abs() >= self.support {
            0.0
        } else {
            self.jet_at(t).value
        }
    }

    /// `(φ(0), φ'(0), φ''(0))`, exact.
    pub fn derivatives_at_zero(&self) -> [f64; 3] {
        let j = self.jet_at(0.0);
        [j.value, j.grad[0], j.hess(0, 0)]
    }

    /// `∫ φ(t) e^{−int} dt` by the trapezoid rule on the support.
    pub fn fourier(&self, n: i64, points: usize) -> Complex64 {
        let h = 2.0 * self.support / points as f64;
        (1..points)
            .map(|k| {
                let t = -self.support + k as f64 * h;
                Complex64::from_polar(self.value(t), -(n as f64) * t) * h
            })
            .sum()
    }
}

pub const FOURIER_POINTS: usize = 4096;

#[derive(Clone, Debug, Serialize)]
pub struct SpectralPairing {
    pub value: Complex64,
    /// `(K, partial sum over |n| ≤ K)`.
    pub partial_sums: Vec<(i64, Complex64)>,
}

/// `Σ_{|n| ≤ K} m_n φ̂(n)` with the character's weights, reporting each partial sum.
pub fn pair_spectral(ch: &WeightedCharacter, phi: &TestFunction, k_max: i64) -> SpectralPairing {
    let mut partial = vec![];
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..=k_max {
        for n in if k == 0 { vec![0] } else { vec![-k, k] } {
            if let Some(m) = ch.multiplicity(n) {
                acc += phi.fourier(n, FOURIER_POINTS) * m as f64;
            }
        }
        partial.push((k, acc));
    }
    SpectralPairing { value: acc, partial_sums: partial }
}

/// Pointwise data entering the index density for `n = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityData {
    /// `Φ = θ(X)`.
    pub phi: f64,
    /// Moment of the generator on `E_{1,0}`: `θ¹([X,Z]) − ω(X)`.
    pub moment: Complex64,
    /// `F(Z,Z̄)/dθ(Z,Z̄)` for the Tanaka-Webster curvature on `E_{1,0}`.
    pub curvature_ratio: Complex64,
}

/// `ω(Z)` and `ω(Z̄)` for `n = 1` as jets (exact value and gradient), and
/// `ω(ξ)`, from the closed-form Tanaka-Webster solution.
fn connection_form_jets(frame: &CRFrame, fp: &FramePoint) -> Result<(CJet, CJet, Complex64)> {
    let z = &frame.z[0];
    let br = complex_bracket(z, &z.conj()).eval_jet(&fp.p);
    let m = fp.m;
    let fmat: Vec<Vec<CJet>> = (0..m).map(|k| (0..m).map(|a| fp.jets[a][k].clone()).collect()).collect();
    let cof = invert_dense(&fmat).ok_or_else(|| crate::Error::BadFrame("frame is not a basis".into()))?;
    let a = br.iter().zip(&cof[0]).fold(br[0].zero_like(), |s, (x, c)| s + x.clone() * c.clone());
    let h = fp.h[0][0].clone();
    let zh = h.derivative_along(&fp.jets[0]);
    Ok((zh / h + a.conj(), -a, fp.brackets[2][0][0]))
}

fn complex_bracket(x: &CVectorField, y: &CVectorField) -> CVectorField {
    let re = lie_bracket(&x.re, &y.re) - lie_bracket(&x.im, &y.im);
    let im = lie_bracket(&x.re, &y.im) + lie_bracket(&x.im, &y.re);
    CVectorField::new(re, im)
}

/// Pointwise density ingredients for a circle generator on an `n = 1` frame.
pub fn density_data(frame: &CRFrame, action: &LieAction, p: &ChartPoint) -> Result<DensityData> {
    let model = &frame.model;
    let fp = frame.at(p)?;
    let (wz, wzb, wxi) = connection_form_jets(frame, &fp)?;
    let omega = [wz.value, wzb.value, wxi];
    // F(Z,Z̄) = Z ω(Z̄) − Z̄ ω(Z) − ω([Z,Z̄])
    let br = &fp.brackets[0][1];
    let f_zzb = fp.derive(0, &wzb) - fp.derive(1, &wz) - (0..3).map(|c| br[c] * omega[c]).sum::<Complex64>();
    let dtheta_zzb = model.dtheta.eval_on(&[fp.vectors[0].clone(), fp.vectors[1].clone()], p);
    let xj: Vec<CJet> = action.generators[0].eval_jet(p).iter().map(|j| j.to_complex()).collect();
    let xc = values(&xj);
    let omega_x: Complex64 = fp.decompose(&xc).iter().zip(&omega).map(|(a, b)| a * b).sum();
    let theta1 = fp.decompose(&bracket_at(&xj, &fp.jets[0]))[0];
    let phi = action.momentum(model, 0).eval(&p.coords);
    Ok(DensityData { phi, moment: theta1 - omega_x, curvature_ratio: f_zzb / dtheta_zzb })
}

#[derive(Clone, Debug, Serialize)]
pub struct FormulaPairing {
    pub value: Complex64,
    pub contact_volume: f64,
    pub convention_log: Vec<String>,
}

/// The index integrand near the identity, paired with `φ`, for the diagonal circle on S³.
pub fn pair_formula(phi: &TestFunction, td_is_one: bool, quad_order: usize) -> Result<FormulaPairing> {
    let model = ContactModel::s3_hopf();
    let frame = CRFrame::for_model(&model)?;
    let action = LieAction::by_name(&model, "s3_diagonal")?;
    let quad = S3Quadrature::new(quad_order, quad_order);
    let nodes: Vec<ChartPoint> = quad.nodes().iter().map(|(p, _)| p.clone()).collect();
    let interior: Vec<ChartPoint> = nodes.into_iter().filter(|p| model.chart.contains(p)).collect();
    if !transversality_check(&model, &action, &interior) {
        return Err(crate::Error::Config("momentum vanishes: action is not transverse".into()));
    }
    let [f0, f1, _] = phi.derivatives_at_zero();
    let i2pi = Complex64::new(0.0, 2.0 * PI);
    let mut volume = 0.0;
    let mut total = Complex64::new(0.0, 0.0);
    for (p, w) in quad.nodes() {
        // |θ∧dθ| = 2 × round volume element.
        let mu = 2.0 * w;
        volume += mu;
        let d = density_data(&frame, &action, p)?;
        let (moment, rho) = if td_is_one {
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
        } else {
            (d.moment, d.curvature_ratio)
        };
        let phi_abs = d.phi.abs();
        let term = (Complex64::new(f1, 0.0) - moment * f0 / 2.0) / (d.phi * phi_abs) - rho * f0 / (2.0 * phi_abs);
        total += term / i2pi * mu;
    }
    let convention_log = vec![
        "character: chi(t) = sum_n m_n exp(-i n t); pairing uses phi_hat(n) = int phi(t) exp(-i n t) dt".into(),
        "delta pairing: <delta^(k)(-Phi t), psi> = Phi^-k |Phi|^-1 psi^(k)(0)".into(),
        "Todd: Td(x) = x/(e^x - 1) = 1 - x/2 + ..., x = t*moment + F with F the Tanaka-Webster curvature on E_{1,0}".into(),
        "curvature_ratio rho = F(Z,Zbar)/dtheta(Z,Zbar); density (1/2 pi i)[(phi'(0) - moment phi(0)/2)/(Phi|Phi|) - rho phi(0)/(2|Phi|)] per unit |theta^dtheta|".into(),
        format!("volume: int |theta^dtheta| = {volume:.12} (round S3 volume 2 pi^2 times 2)"),
        format!("Td == 1 debug mode: {td_is_one}"),
    ];
    Ok(FormulaPairing { value: total, contact_volume: volume, convention_log })
}

/// Closed form of the Td ≡ 1 pairing: `(1/2πi)·4π²·φ'(0)`.
pub fn delta_prime_oracle(phi: &TestFunction) -> Complex64 {
    let [_, f1, _] = phi.derivatives_at_zero();
    Complex64::new(0.0, -2.0 * PI) * f1
}

/// Floor below which gap changes count as converged in monotonicity checks.
pub const MONOTONE_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct PairingReport {
    pub test_function: TestFunction,
    pub spectral: Complex64,
    pub formula: Complex64,
    pub gap_abs: f64,
    pub gap_rel: f64,
    /// `(K, |partial_K − formula|)` for K = 2, 4, …
    pub convergence: Vec<(i64, f64)>,
    pub monotone: bool,
    pub convention_log: Vec<String>,
}

pub fn index_pairing(
    ch: &WeightedCharacter,
    phi: &TestFunction,
    k_max: i64,
    td_is_one: bool,
    quad_order: usize,
) -> Result<PairingReport> {
    let sp = pair_spectral(ch, phi, k_max);
    let fo = pair_formula(phi, td_is_one, quad_order)?;
    let gap_abs = (sp.value - fo.value).norm();
    let gap_rel = gap_abs / sp.value.norm().max(1.0);
    let convergence: Vec<(i64, f64)> = sp
        .partial_sums
        .iter()
        .filter(|(k, _)| *k >= 2 && k % 2 == 0)
        .map(|(k, v)| (*k, (*v - fo.value).norm()))
        .collect();
    let monotone = convergence
        .windows(2)
        .all(|w| w[1].1 <= w[0].1 || w[1].1 < MONOTONE_FLOOR);
    Ok(PairingReport {
        test_function: *phi,
        spectral: sp.value,
        formula: fo.value,
        gap_abs,
        gap_rel,
        convergence,
        monotone,
        convention_log: fo.convention_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_examples() {
        let b = enumerate_basis(2, 2);
        let mut got = b.monomials.clone();
        got.sort();
        let mut want = vec![Monomial::new(2, 0, 0, 0), Monomial::new(1, 1, 0, 0), Monomial::new(0, 2, 0, 0)];
        want.sort();
        assert_eq!(got, want);
        assert_eq!(enumerate_basis(1, 0).monomials, vec![Monomial::new(0, 0, 0, 0)]);
        assert!(enumerate_basis(1, 3).is_empty());
    }

    /// Rank of the canonical forms of every monomial of weight n, degree ≤ N.
    fn brute_force_dimension(cap: u32, weight: i64) -> usize {
        let mut all = vec![];
        for a in 0..=cap {
            for b in 0..=cap {
                for c in 0..=cap {
                    for d in 0..=cap {
                        let m = Monomial::new(a, b, c, d);
                        if m.degree() <= cap && m.weight() == weight {
                            all.push(Poly::monomial(m).canonical());
                        }
                    }
                }
            }
        }
        let mut keys: Vec<Monomial> = all.iter().flat_map(|p| p.0.keys().copied()).collect();
        keys.sort();
        keys.dedup();
        let rows: Vec<Vec<Q>> = all
            .iter()
            .map(|p| keys.iter().map(|k| p.0.get(k).cloned().unwrap_or_else(Q::zero)).collect())
            .collect();
        exact_rank(&rows)
    }

    #[test]
    fn basis_count_matches_brute_force() {
        for (cap, n) in [(3, -1), (4, 0), (5, 2), (6, -3)] {
            assert_eq!(enumerate_basis(cap, n).len(), brute_force_dimension(cap, n));
        }
    }

    #[test]
    fn canonical_rewriting() {
        let p = Poly::monomial(Monomial::new(1, 0, 1, 0)).canonical();
        let mut want = Poly::default();
        want.add(Monomial::new(0, 0, 0, 0), q(1));
        want.add(Monomial::new(0, 1, 0, 1), q(-1));
        assert_eq!(p, want);
        let pt = ChartPoint::new(vec![0.4, 1.1, -0.3]);
        let m = Monomial::new(2, 1, 1, 3);
        assert!((Poly::monomial(m).canonical().eval(&pt) - m.eval(&pt)).norm() < 1e-14);
    }

    #[test]
    fn gram_examples_match_quadrature() {
        let quad = S3Quadrature::new(16, 16);
        let one = Monomial::new(0, 0, 0, 0);
        let z = Monomial::new(1, 0, 0, 0);
        let w = Monomial::new(0, 1, 0, 0);
        let ip = |x: Monomial, y: Monomial| quad.integrate_complex(|p| x.eval(p) * y.eval(p).conj());
        assert!((ROUND_VOLUME * gram_entry(one, one).to_f64().unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert!((ip(one, one).re - 2.0 * PI * PI).abs() < 1e-10 * 2.0 * PI * PI);
        assert_eq!(gram_entry(z, w), Q::zero());
        assert!(ip(z, w).norm() < 1e-12);
        assert!((ROUND_VOLUME * gram_entry(z, z).to_f64().unwrap() - PI * PI).abs() < 1e-12);
        assert!((ip(z, z).re - PI * PI).abs() < 1e-10 * PI * PI);
        let b = enumerate_basis(4, 1);
        let g = gram_matrix(&b);
        for i in 0..b.len() {
            for j in 0..b.len() {
                let qv = ip(b.monomials[i], b.monomials[j]);
                assert!((qv.re - g[(i, j)]).abs() < 1e-10 && qv.im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dbar_examples() {
        for m in [Monomial::new(2, 0, 0, 0), Monomial::new(1, 3, 0, 0)] {
            assert!(apply_poly(zbar_monomial, &Poly::monomial(m)).0.is_empty());
        }
        assert_eq!(apply_poly(zbar_monomial, &Poly::monomial(Monomial::new(0, 0, 1, 0))), Poly::monomial(Monomial::new(0, 1, 0, 0)));
        let mut want = Poly::default();
        want.add(Monomial::new(2, 0, 0, 0), q(-1));
        assert_eq!(apply_poly(zbar_monomial, &Poly::monomial(Monomial::new(1, 0, 0, 1))), want);
    }

    #[test]
    fn assembly_matches_frame_evaluation() {
        let model = ContactModel::s3_hopf();
        let frame = CRFrame::for_model(&model).unwrap();
        let pts = crate::sampling::points(&mut crate::sampling::rng(5), &model.chart, 5);
        for m in enumerate_basis(4, 0).monomials {
            let img = apply_poly(zbar_monomial, &Poly::monomial(m));
            for p in &pts {
                let a = img.eval(p);
                let b = frame.dbar_function(&m.field(), p)[0];
                assert!((a - b).norm() <= 1e-8 * b.norm().max(1.0));
            }
        }
    }

    #[test]
    fn kernel_counts() {
        let k0 = kohn_rossi_multiplicities(12, 0);
        assert_eq!((k0.dim_h00, k0.dim_h01), (1, 0));
        let k3 = kohn_rossi_multiplicities(12, 3);
        assert_eq!((k3.dim_h00, k3.dim_h01), (4, 0));
        let a = kohn_rossi_multiplicities(10, -3);
        let b = kohn_rossi_multiplicities(12, -3);
        assert_eq!((a.dim_h00, a.dim_h01), (b.dim_h00, b.dim_h01));
        assert_eq!(a.rank, a.exact_rank);
    }

    #[test]
    fn split_and_unsplit_agree() {
        for n in -4..=4 {
            let a = kohn_rossi_multiplicities(8, n);
            let b = kohn_rossi_unsplit(8, n);
            assert_eq!((a.dim_h00, a.dim_h01), (b.dim_h00, b.dim_h01), "weight {n}");
        }
    }

    #[test]
    fn laplacian_is_dirac_square() {
        for n in [-3, 0, 2] {
            assert!(laplacian_gap(8, n) < 1e-10);
        }
    }

    #[test]
    fn holomorphic_monomials_in_kernel() {
        let k = kohn_rossi_multiplicities(6, 2);
        assert_eq!(k.dim_h00, 3);
        for m in [Monomial::new(2, 0, 0, 0), Monomial::new(1, 1, 0, 0), Monomial::new(0, 2, 0, 0)] {
            assert!(apply_poly(zbar_monomial, &Poly::monomial(m)).0.is_empty());
        }
    }

    #[test]
    fn single_weight_character() {
        let phi = TestFunction::builtin()[0];
        let ch = WeightedCharacter::from_table(&[(0, 1)]);
        let sp = pair_spectral(&ch, &phi, 3);
        assert!((sp.value - phi.fourier(0, FOURIER_POINTS)).norm() < 1e-15);
        let empty = WeightedCharacter::from_table(&[]);
        assert_eq!(pair_spectral(&empty, &phi, 3).value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn test_function_derivatives() {
        let phi = TestFunction::new(0.1, 0.5, 0.3);
        let [f0, f1, _] = phi.derivatives_at_zero();
        let h = 1e-5;
        let fd = (phi.value(h) - phi.value(-h)) / (2.0 * h);
        assert!((fd - f1).abs() < 1e-8);
        assert!((phi.value(0.0) - f0).abs() < 1e-15);
        assert_eq!(phi.value(3.0), 0.0);
    }

    #[test]
    fn sphere_density_constants() {
        let model = ContactModel::s3_hopf();
        let frame = CRFrame::for_model(&model).unwrap();
        let action = LieAction::by_name(&model, "s3_diagonal").unwrap();
        let d = density_data(&frame, &action, &ChartPoint::new(vec![0.6, 0.3, 2.0])).unwrap();
        assert!((d.phi - 1.0).abs() < 1e-14);
        assert!(d.moment.norm() < 1e-12);
        assert!((d.curvature_ratio - Complex64::new(0.0, -2.0)).norm() < 1e-10);
    }

    #[test]
    fn td_one_matches_delta_prime() {
        let phi = TestFunction::builtin()[1];
        let f = pair_formula(&phi, true, 6).unwrap();
        assert!((f.value - delta_prime_oracle(&phi)).norm() < 1e-10);
    }

    #[test]
    fn vanishing_test_function_pairs_to_zero() {
        // φ with φ(0) = φ'(0) = 0 is not in the bump family; use the formula directly.
        let d = DensityData { phi: 1.0, moment: Complex64::new(0.0, 0.0), curvature_ratio: Complex64::new(0.0, -2.0) };
        let term = (0.0 - d.moment * 0.0 / 2.0) / d.phi - d.curvature_ratio * 0.0 / 2.0;
        assert_eq!(term, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gram_adjoint_is_minus_z() {
        let pts = crate::sampling::points(&mut crate::sampling::rng(6), &ContactModel::s3_hopf().chart, 3);
        for m in [Monomial::new(0, 1, 0, 0), Monomial::new(1, 1, 0, 1), Monomial::new(0, 2, 1, 0)] {
            let adj = gram_adjoint_of(6, m);
            let mut want = apply_poly(z_monomial, &Poly::monomial(m));
            want.0.values_mut().for_each(|v| *v = -v.clone());
            for p in &pts {
                assert!((adj.eval(p) - want.eval(p)).norm() < 1e-12);
            }
        }
    }
}
