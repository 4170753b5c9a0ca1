//! CR frames, the Tanaka-Webster connection, ∂̄_b and the spinor Dirac operator.
//!
//! Frames are ordered `e = (Z_1..Z_n, Z̄_1..Z̄_n, ξ)`. Connection coefficients
//! are `∇_{e_a} e_b = Σ_c Γ[a][b][c] e_c`. The complex structure acts on the
//! frame by `J Z = iZ`, `J Z̄ = −iZ̄`, `Jξ = 0`, and the Levi matrix is
//! `h_ij = −i dθ(Z_i, Z̄_j)`.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::contact::{ContactModel, ModelKind};
use crate::error::{Error, Result};
use crate::expr::{CField, ScalarField};
use crate::forms::{bracket_at, values, CVectorField, ChartPoint, VectorField};
use crate::jet::{invert_dense, CJet, LinScalar};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c0() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Clone, Debug)]
pub struct CRFrame {
    pub model: ContactModel,
    pub z: Vec<CVectorField>,
}

impl CRFrame {
    pub fn new(model: ContactModel, z: Vec<CVectorField>) -> Self {
        Self { model, z }
    }

    /// The registered frame of a model, if it has one.
    pub fn for_model(model: &ContactModel) -> Result<Self> {
        let v = ScalarField::var;
        match model.kind {
            ModelKind::Heisenberg => {
                // Z = ∂x − i∂y + y∂z
                let re = VectorField::new(vec![ScalarField::one(), ScalarField::zero(), v(1)]);
                let im = VectorField::new(vec![ScalarField::zero(), ScalarField::constant(-1.0), ScalarField::zero()]);
                Ok(Self::new(model.clone(), vec![CVectorField::new(re, im)]))
            }
            ModelKind::S3Hopf => {
                // The ambient field w̄∂z − z̄∂w written in Hopf coordinates.
                let eta = v(0);
                let phase = CField::expi(&-(v(1) + v(2))).scale(Complex64::new(0.5, 0.0));
                let comps = vec![
                    phase.clone() * CField::real(ScalarField::constant(-1.0)),
                    phase.clone() * CField::new(ScalarField::zero(), -eta.tan()),
                    phase * CField::new(ScalarField::zero(), eta.cos() / eta.sin()),
                ];
                Ok(Self::new(model.clone(), vec![CVectorField::from_components(comps)]))
            }
            ModelKind::Torus(_) => Err(Error::BadFrame(format!("no CR frame registered for {}", model.name))),
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Frame fields in the fixed order `(Z, Z̄, ξ)`; ξ is returned as `None`
    /// because it comes from a pointwise solve.
    fn symbolic_frame(&self) -> Vec<CVectorField> {
        let mut out = self.z.clone();
        out.extend(self.z.iter().map(CVectorField::conj));
        out
    }

    pub fn at(&self, p: &ChartPoint) -> Result<FramePoint> {
        FramePoint::new(self, p)
    }

    /// `−i dθ(Z_i, Z̄_j)` at `p`.
    pub fn levi_form(&self, i: usize, j: usize, p: &ChartPoint) -> Complex64 {
        let zi = self.z[i].eval(p);
        let zj = self.z[j].conj().eval(p);
        -I * self.model.dtheta.eval_on(&[zi, zj], p)
    }

    pub fn levi_matrix(&self, p: &ChartPoint) -> Vec<Vec<Complex64>> {
        (0..self.n()).map(|i| (0..self.n()).map(|j| self.levi_form(i, j, p)).collect()).collect()
    }

    /// Smallest eigenvalue of the Hermitian part of the Levi matrix.
    pub fn levi_min_eigenvalue(&self, p: &ChartPoint) -> f64 {
        let l = self.levi_matrix(p);
        let n = self.n();
        let m = DMatrix::from_fn(n, n, |i, j| (l[i][j] + l[j][i].conj()) * 0.5);
        // Real symmetric embedding of the Hermitian matrix has the same spectrum (doubled).
        let r = DMatrix::from_fn(2 * n, 2 * n, |a, b| {
            let (i, j) = (a % n, b % n);
            match (a < n, b < n) {
                (true, true) | (false, false) => m[(i, j)].re,
                (true, false) => -m[(i, j)].im,
                (false, true) => m[(i, j)].im,
            }
        });
        r.symmetric_eigenvalues().min()
    }

    /// Worst of `|θ(Z_i)|` and the `Z̄`/ξ components of `[Z_i, Z_j]` at `p`.
    pub fn integrability_residual(&self, p: &ChartPoint) -> Result<f64> {
        let fp = self.at(p)?;
        let n = self.n();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let th: Complex64 = self
                .model
                .theta
                .eval_on(&[self.z[i].eval(p)], p);
            worst = worst.max(th.norm());
            for j in 0..n {
                for c in n..2 * n + 1 {
                    worst = worst.max(fp.brackets[i][j][c].norm());
                }
            }
        }
        Ok(worst)
    }

    /// Real matrix of `J` on `TM` in chart coordinates (zero on ξ).
    pub fn j_matrix(&self, p: &ChartPoint) -> Result<Vec<Vec<f64>>> {
        let fp = self.at(p)?;
        let d = fp.m;
        Ok((0..d)
            .map(|r| {
                (0..d)
                    .map(|c| {
                        (0..d)
                            .map(|a| fp.vectors[a][r] * fp.lambda[a] * fp.coframe[a][c])
                            .sum::<Complex64>()
                            .re
                    })
                    .collect()
            })
            .collect())
    }

    /// `(Z̄_i f)` for each i: the frame formula for `∂̄_b f`.
    pub fn dbar_function(&self, f: &CField, p: &ChartPoint) -> Vec<Complex64> {
        self.z.iter().map(|z| z.conj().apply(f).eval(&p.coords)).collect()
    }

    /// `π^{0,1}(df)` obtained by decomposing `df` in the dual coframe.
    pub fn dbar_function_by_projection(&self, f: &CField, p: &ChartPoint) -> Result<Vec<Complex64>> {
        let fp = self.at(p)?;
        let jet = f.eval_jet(&p.coords);
        let df: Vec<Complex64> = jet.grad.clone();
        let parts = fp.split_covector(&df)?;
        Ok(parts.q01)
    }
}

/// Covector split along the coframe `(θ^i, θ̄^i, θ)`.
#[derive(Clone, Debug)]
pub struct CovectorSplit {
    pub p10: Vec<Complex64>,
    pub q01: Vec<Complex64>,
    pub theta: Complex64,
}

/// Frame data evaluated at a point.
#[derive(Clone, Debug)]
pub struct FramePoint {
    pub p: ChartPoint,
    pub n: usize,
    pub m: usize,
    /// `e_a` as jets.
    pub jets: Vec<Vec<CJet>>,
    /// `e_a` values, `vectors[a][k]`.
    pub vectors: Vec<Vec<Complex64>>,
    /// Dual coframe, `coframe[a][k]` with `Σ_k coframe[a][k] vectors[b][k] = δ_ab`.
    pub coframe: Vec<Vec<Complex64>>,
    /// `[e_a, e_b] = Σ_c brackets[a][b][c] e_c`.
    pub brackets: Vec<Vec<Vec<Complex64>>>,
    /// Levi matrix as jets.
    pub h: Vec<Vec<CJet>>,
    /// Eigenvalues of `J` on the frame.
    pub lambda: Vec<Complex64>,
}

impl FramePoint {
    fn new(frame: &CRFrame, p: &ChartPoint) -> Result<Self> {
        let model = &frame.model;
        model.chart.check(p)?;
        let n = frame.n();
        let m = 2 * n + 1;
        let mut jets: Vec<Vec<CJet>> = frame.symbolic_frame().iter().map(|z| z.eval_jet(p)).collect();
        jets.push(model.reeb_jet(p)?.iter().map(|j| j.to_complex()).collect());
        let vectors: Vec<Vec<Complex64>> = jets.iter().map(|v| values(v)).collect();
        let fmat: Vec<Vec<Complex64>> = (0..m).map(|k| (0..m).map(|a| vectors[a][k]).collect()).collect();
        let inv = invert_dense(&fmat).ok_or_else(|| Error::BadFrame("frame is not a basis".into()))?;
        let coframe = inv;
        let mut brackets = vec![vec![vec![c0(); m]; m]; m];
        for a in 0..m {
            for b in 0..m {
                let br = bracket_at(&jets[a], &jets[b]);
                for c in 0..m {
                    brackets[a][b][c] = (0..m).map(|k| coframe[c][k] * br[k]).sum();
                }
            }
        }
        let om = model.dtheta_jet(p);
        let dtheta = |x: &[CJet], y: &[CJet]| -> CJet {
            let mut acc = x[0].zero_like();
            for (k, xk) in x.iter().enumerate() {
                for (l, yl) in y.iter().enumerate() {
                    if om[k][l].value != 0.0 || om[k][l].grad.iter().any(|g| *g != 0.0) {
                        acc = acc + om[k][l].to_complex() * xk.clone() * yl.clone();
                    }
                }
            }
            acc
        };
        let h = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| dtheta(&jets[i], &jets[n + j]).scale(-I))
                    .collect()
            })
            .collect();
        let mut lambda = vec![I; n];
        lambda.extend(vec![-I; n]);
        lambda.push(c0());
        Ok(Self { p: p.clone(), n, m, jets, vectors, coframe, brackets, h, lambda })
    }

    pub fn bar(&self, a: usize) -> usize {
        let n = self.n;
        if a < n {
            a + n
        } else if a < 2 * n {
            a - n
        } else {
            a
        }
    }

    pub fn xi(&self) -> usize {
        2 * self.n
    }

    pub fn h_values(&self) -> Vec<Vec<Complex64>> {
        self.h.iter().map(|r| values(r)).collect()
    }

    pub fn h_inverse(&self) -> Result<Vec<Vec<Complex64>>> {
        invert_dense(&self.h_values()).ok_or_else(|| Error::BadFrame("degenerate Levi form".into()))
    }

    /// Coefficients of a vector in the frame.
    pub fn decompose(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.coframe.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// Derivative of a jet along frame vector `a`.
    pub fn derive(&self, a: usize, f: &CJet) -> Complex64 {
        f.directional(&self.vectors[a])
    }

    pub fn split_covector(&self, alpha: &[Complex64]) -> Result<CovectorSplit> {
        // α = Σ_a α(e_a) e^a
        let on: Vec<Complex64> = self
            .vectors
            .iter()
            .map(|v| v.iter().zip(alpha).map(|(a, b)| a * b).sum())
            .collect();
        let n = self.n;
        Ok(CovectorSplit {
            p10: on[..n].to_vec(),
            q01: on[n..2 * n].to_vec(),
            theta: on[2 * n],
        })
    }
}

#[derive(Clone, Debug)]
pub struct TWConnection {
    pub gamma: Vec<Vec<Vec<Complex64>>>,
    /// Smallest over largest singular value of the axiom system.
    pub sigma_ratio: f64,
    /// Least-squares residual of the axiom system.
    pub system_residual: f64,
}

/// Full-rank threshold for the uniqueness certificate.
pub const RANK_RATIO: f64 = 1e-8;
pub const AXIOM_TOL: f64 = 1e-8;

struct RealSystem {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

impl RealSystem {
    /// Add `Σ k_u Γ_u = r` with complex coefficients.
    fn complex(&mut self, terms: &[(usize, Complex64)], r: Complex64) {
        let re = terms.iter().flat_map(|(u, k)| [(2 * u, k.re), (2 * u + 1, -k.im)]).collect();
        let im = terms.iter().flat_map(|(u, k)| [(2 * u, k.im), (2 * u + 1, k.re)]).collect();
        self.rows.push(re);
        self.rhs.push(r.re);
        self.rows.push(im);
        self.rhs.push(r.im);
    }

    /// `Γ_v = conj(Γ_u)`.
    fn conjugate(&mut self, v: usize, u: usize) {
        self.rows.push(vec![(2 * v, 1.0), (2 * u, -1.0)]);
        self.rhs.push(0.0);
        self.rows.push(vec![(2 * v + 1, 1.0), (2 * u + 1, 1.0)]);
        self.rhs.push(0.0);
    }
}

/// Solve the Tanaka-Webster axioms at a point as one linear system in Γ.
pub fn tw_solve(fp: &FramePoint) -> Result<TWConnection> {
    let (n, m) = (fp.n, fp.m);
    let xi = fp.xi();
    let u = |a: usize, b: usize, c: usize| (a * m + b) * m + c;
    let one = Complex64::new(1.0, 0.0);
    let mut sys = RealSystem { rows: vec![], rhs: vec![] };
    let zs = 0..n;
    let zbars = n..2 * n;

    for a in 0..m {
        for b in 0..m {
            // θ parallel.
            sys.complex(&[(u(a, b, xi), one)], c0());
            // J parallel: types are preserved and ξ is parallel.
            for c in 0..m {
                let mixes = (zs.contains(&b) && zbars.contains(&c)) || (zbars.contains(&b) && zs.contains(&c));
                if mixes || b == xi {
                    sys.complex(&[(u(a, b, c), one)], c0());
                }
            }
            // Reality.
            for c in 0..m {
                sys.conjugate(u(fp.bar(a), fp.bar(b), fp.bar(c)), u(a, b, c));
            }
        }
        // Metric: e_a(h_ij) = Σ_k Γ^{Z_k}_{a Z_i} h_kj + Σ_k Γ^{Z̄_k}_{a Z̄_j} h_ik.
        let h = fp.h_values();
        for i in 0..n {
            for j in 0..n {
                let mut terms = vec![];
                for k in 0..n {
                    terms.push((u(a, i, k), h[k][j]));
                    terms.push((u(a, n + j, n + k), h[i][k]));
                }
                sys.complex(&terms, fp.derive(a, &fp.h[i][j]));
            }
        }
    }
    // Torsion T^c_ab = Γ^c_ab − Γ^c_ba − C^c_ab.
    let mut torsion = |a: usize, b: usize, c: usize, target: Complex64| {
        sys.complex(&[(u(a, b, c), one), (u(b, a, c), -one)], target + fp.brackets[a][b][c]);
    };
    let hv = fp.h_values();
    for i in 0..n {
        for j in 0..n {
            for c in 0..m {
                torsion(i, j, c, c0());
                // dθ(Z_i, Z̄_j) = i h_ij
                let t = if c == xi { I * hv[i][j] } else { c0() };
                torsion(i, n + j, c, t);
            }
        }
        for c in (0..n).chain([xi]) {
            torsion(xi, i, c, c0());
        }
    }

    let nu = 2 * m * m * m;
    let rows = sys.rows.len();
    let mut a = DMatrix::<f64>::zeros(rows, nu);
    for (r, row) in sys.rows.iter().enumerate() {
        for &(col, val) in row {
            a[(r, col)] += val;
        }
    }
    let b = DVector::from_vec(sys.rhs.clone());
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ratio = smin / smax;
    if ratio <= RANK_RATIO {
        return Err(Error::RankDeficient(
            svd.singular_values.iter().filter(|s| **s > RANK_RATIO * smax).count(),
            nu,
        ));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::BadFrame(e.to_string()))?;
    let resid = (&a * &x - &b).amax();
    if resid > AXIOM_TOL {
        return Err(Error::BadFrame(format!("axiom system inconsistent, residual {resid:.3e}")));
    }
    let mut gamma = vec![vec![vec![c0(); m]; m]; m];
    for aa in 0..m {
        for bb in 0..m {
            for cc in 0..m {
                let k = u(aa, bb, cc);
                gamma[aa][bb][cc] = Complex64::new(x[2 * k], x[2 * k + 1]);
            }
        }
    }
    Ok(TWConnection { gamma, sigma_ratio: ratio, system_residual: resid })
}

#[derive(Clone, Debug, Default)]
pub struct TwResiduals {
    pub j: f64,
    pub metric: f64,
    pub theta: f64,
    pub torsion_zz: f64,
    pub torsion_zzbar: f64,
    pub torsion_pure: f64,
    pub torsion_zbar_zbar: f64,
}

impl TwResiduals {
    pub fn max(&self) -> f64 {
        [self.j, self.metric, self.theta, self.torsion_zz, self.torsion_zzbar, self.torsion_pure, self.torsion_zbar_zbar]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

impl TWConnection {
    pub fn torsion(&self, fp: &FramePoint, a: usize, b: usize, c: usize) -> Complex64 {
        self.gamma[a][b][c] - self.gamma[b][a][c] - fp.brackets[a][b][c]
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma.iter().flatten().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Check the defining properties, recomputing the metric from `dθ(·, J·) + θ⊗θ`.
    pub fn residuals(&self, fp: &FramePoint, model: &ContactModel) -> TwResiduals {
        let (n, m) = (fp.n, fp.m);
        let xi = fp.xi();
        let mut r = TwResiduals::default();
        let g = &self.gamma;
        for a in 0..m {
            for b in 0..m {
                r.theta = r.theta.max(g[a][b][xi].norm());
                for c in 0..m {
                    r.j = r.j.max(((fp.lambda[b] - fp.lambda[c]) * g[a][b][c]).norm());
                }
            }
        }
        // g_bc = λ_c dθ(e_b, e_c) + θ(e_b)θ(e_c), as jets.
        let om = model.dtheta_jet(&fp.p);
        let th = model.theta_jet(&fp.p);
        let metric = |b: usize, c: usize| -> CJet {
            let (x, y) = (&fp.jets[b], &fp.jets[c]);
            let mut dt = x[0].zero_like();
            let mut tx = x[0].zero_like();
            let mut ty = x[0].zero_like();
            for k in 0..m {
                tx = tx + th[k].to_complex() * x[k].clone();
                ty = ty + th[k].to_complex() * y[k].clone();
                for l in 0..m {
                    dt = dt + om[k][l].to_complex() * x[k].clone() * y[l].clone();
                }
            }
            dt.scale(fp.lambda[c]) + tx * ty
        };
        let gm: Vec<Vec<CJet>> = (0..m).map(|b| (0..m).map(|c| metric(b, c)).collect()).collect();
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let lhs = fp.derive(a, &gm[b][c]);
                    let rhs: Complex64 = (0..m)
                        .map(|d| g[a][b][d] * gm[d][c].value + g[a][c][d] * gm[b][d].value)
                        .sum();
                    r.metric = r.metric.max((lhs - rhs).norm());
                }
            }
        }
        let hv = fp.h_values();
        for i in 0..n {
            for j in 0..n {
                for c in 0..m {
                    r.torsion_zz = r.torsion_zz.max(self.torsion(fp, i, j, c).norm());
                    r.torsion_zbar_zbar = r.torsion_zbar_zbar.max(self.torsion(fp, n + i, n + j, c).norm());
                    let want = if c == xi { I * hv[i][j] } else { c0() };
                    r.torsion_zzbar = r.torsion_zzbar.max((self.torsion(fp, i, n + j, c) - want).norm());
                }
            }
        }
        // T(ξ, JX) + J T(ξ, X) over X in the frame of E.
        for b in 0..2 * n {
            for c in 0..m {
                let t = self.torsion(fp, xi, b, c);
                r.torsion_pure = r.torsion_pure.max(((fp.lambda[b] + fp.lambda[c]) * t).norm());
            }
        }
        r
    }

    /// `Γ_X[b][c]` for a vector `X` given in chart coordinates.
    pub fn along(&self, fp: &FramePoint, x: &[Complex64]) -> Vec<Vec<Complex64>> {
        let coeff = fp.decompose(x);
        let m = fp.m;
        (0..m)
            .map(|b| (0..m).map(|c| (0..m).map(|a| coeff[a] * self.gamma[a][b][c]).sum()).collect())
            .collect()
    }

    /// Matrix `B` with `∇_X Z̄_i = Σ_k B[k][i] Z̄_k`.
    fn zbar_block(&self, fp: &FramePoint, x: &[Complex64]) -> Vec<Vec<Complex64>> {
        let gx = self.along(fp, x);
        let n = fp.n;
        (0..n).map(|k| (0..n).map(|i| gx[n + i][n + k]).collect()).collect()
    }
}

/// Connection 1-form values `(ω(Z), ω(Z̄), ω(ξ))` for `n = 1` from brackets
/// `[Z,Z̄] = aZ + bZ̄ + cξ`, `[ξ,Z] = pZ + qZ̄` and `h = h_11`:
/// `ω(Z̄) = −a`, `ω(Z) = Zh/h + ā`, `ω(ξ) = p`.
pub fn tw_closed_form_n1(fp: &FramePoint) -> [Complex64; 3] {
    let a = fp.brackets[0][1][0];
    let p = fp.brackets[2][0][0];
    let h = fp.h[0][0].value;
    let zh = fp.derive(0, &fp.h[0][0]);
    [zh / h + a.conj(), -a, p]
}

// Spinors: Λ E^{0,1} with basis θ̄^S indexed by bitmasks S ⊂ {0..n-1}.

#[derive(Clone, Debug, PartialEq)]
pub struct SpinorValue {
    pub n: usize,
    pub comps: Vec<Complex64>,
}

impl SpinorValue {
    pub fn new(n: usize, comps: Vec<Complex64>) -> Self {
        assert_eq!(comps.len(), 1 << n);
        Self { n, comps }
    }

    pub fn zero(n: usize) -> Self {
        Self::new(n, vec![c0(); 1 << n])
    }

    pub fn even(&self) -> Vec<Complex64> {
        self.parity_part(0)
    }

    pub fn odd(&self) -> Vec<Complex64> {
        self.parity_part(1)
    }

    fn parity_part(&self, par: u32) -> Vec<Complex64> {
        self.comps
            .iter()
            .enumerate()
            .map(|(s, c)| if (s as u32).count_ones() % 2 == par { *c } else { c0() })
            .collect()
    }

    pub fn max_diff(&self, other: &SpinorValue) -> f64 {
        self.comps.iter().zip(&other.comps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Sign of moving `θ̄^j` past the factors of `S` with smaller index.
fn pass_sign(s: usize, j: usize) -> f64 {
    if (s & ((1 << j) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `θ̄^j ∧ ν`.
fn wedge_bar<S: LinScalar>(j: usize, nu: &[S]) -> Vec<S> {
    let mut out: Vec<S> = nu.iter().map(|x| x.zero_like()).collect();
    for (s, v) in nu.iter().enumerate() {
        if s & (1 << j) == 0 {
            out[s | (1 << j)] = out[s | (1 << j)].clone() + v.scale_re(pass_sign(s, j));
        }
    }
    out
}

/// Contraction with the functional `θ̄^j ↦ v_j`.
fn contract<S: LinScalar>(v: &[S], nu: &[S]) -> Vec<S> {
    let mut out: Vec<S> = nu.iter().map(|x| x.zero_like()).collect();
    for (s, val) in nu.iter().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            if s & (1 << j) != 0 {
                let t = s & !(1 << j);
                out[t] = out[t].clone() + (vj.clone() * val.clone()).scale_re(pass_sign(s, j));
            }
        }
    }
    out
}

/// `√2 (ε(α^{0,1}) − ι(α^{1,0}))ν` with `a01[j] = α(Z̄_j)` and contraction
/// values `v[j] = ι(α^{1,0})θ̄^j`.
fn clifford_generic<S: LinScalar>(a01: &[S], v: &[S], nu: &[S]) -> Vec<S> {
    let mut out = contract(v, nu).into_iter().map(|x| -x).collect::<Vec<S>>();
    for (j, aj) in a01.iter().enumerate() {
        let w = wedge_bar(j, nu);
        for (o, x) in out.iter_mut().zip(w) {
            *o = o.clone() + aj.clone() * x;
        }
    }
    out.into_iter().map(|x| x.scale_re(SQRT_2)).collect()
}

/// Contraction values `ι(α^{1,0})θ̄^j = Σ_i (h⁻¹)_{ji} α(Z_i)`.
fn contraction_values<S: LinScalar>(hinv: &[Vec<S>], a10: &[S]) -> Vec<S> {
    hinv.iter()
        .map(|row| {
            row.iter()
                .zip(a10)
                .fold(a10[0].zero_like(), |acc, (h, a)| acc + h.clone() * a.clone())
        })
        .collect()
}

/// A covector of `E*` through its values on the frame, with the contraction
/// values fixed by the Levi metric.
#[derive(Clone, Debug)]
pub struct CliffordElement {
    /// `α(Z_i)`.
    pub a10: Vec<Complex64>,
    /// `α(Z̄_i)`.
    pub a01: Vec<Complex64>,
    contraction: Vec<Complex64>,
}

impl CliffordElement {
    pub fn new(a10: Vec<Complex64>, a01: Vec<Complex64>, hinv: &[Vec<Complex64>]) -> Self {
        let contraction = contraction_values(hinv, &a10);
        Self { a10, a01, contraction }
    }

    /// A real covector: `α(Z̄) = conj(α(Z))`.
    pub fn real(a10: Vec<Complex64>, hinv: &[Vec<Complex64>]) -> Self {
        let a01 = a10.iter().map(|z| z.conj()).collect();
        Self::new(a10, a01, hinv)
    }
}

pub fn clifford_action(alpha: &CliffordElement, nu: &SpinorValue) -> SpinorValue {
    SpinorValue::new(nu.n, clifford_generic(&alpha.a01, &alpha.contraction, &nu.comps))
}

/// Dual metric `G*(α,β)` on real covectors of `E`, computed from the real
/// Webster metric `G(X,Y) = dθ(X,JY)` on the basis `X_i = Re Z_i`, `Y_i = −Im Z_i`.
pub fn dual_webster_metric(frame: &CRFrame, p: &ChartPoint, alpha: &[Complex64], beta: &[Complex64]) -> Result<f64> {
    let n = frame.n();
    let jm = frame.j_matrix(p)?;
    let mut basis = vec![];
    for z in &frame.z {
        basis.push(z.re.eval(p));
    }
    for z in &frame.z {
        basis.push(z.im.eval(p).iter().map(|x| -x).collect::<Vec<_>>());
    }
    let g = DMatrix::from_fn(2 * n, 2 * n, |r, c| frame.model.webster_metric(&jm, &basis[r], &basis[c], p));
    let ginv = g.try_inverse().ok_or_else(|| Error::BadFrame("singular Webster metric".into()))?;
    // α(X_i) = Re α(Z_i), α(Y_i) = −Im α(Z_i) for real α.
    let real_vals = |a: &[Complex64]| {
        DVector::from_iterator(2 * n, a.iter().map(|z| z.re).chain(a.iter().map(|z| -z.im)))
    };
    let (va, vb) = (real_vals(alpha), real_vals(beta));
    Ok((va.transpose() * ginv * vb)[(0, 0)])
}

/// Max over components of `{c(α),c(β)}ν + 2G*(α,β)ν`.
pub fn anticommutator_residual(
    frame: &CRFrame,
    p: &ChartPoint,
    alpha: &[Complex64],
    beta: &[Complex64],
    nu: &SpinorValue,
) -> Result<f64> {
    let hinv = frame.at(p)?.h_inverse()?;
    let a = CliffordElement::real(alpha.to_vec(), &hinv);
    let b = CliffordElement::real(beta.to_vec(), &hinv);
    let ab = clifford_action(&a, &clifford_action(&b, nu));
    let ba = clifford_action(&b, &clifford_action(&a, nu));
    let g = dual_webster_metric(frame, p, alpha, beta)?;
    Ok(ab
        .comps
        .iter()
        .zip(&ba.comps)
        .zip(&nu.comps)
        .map(|((x, y), v)| (x + y + 2.0 * g * v).norm())
        .fold(0.0, f64::max))
}

/// Spinor connection `∇_X θ̄^j = −Σ_i B[j][i] θ̄^i`, extended as a derivation.
fn spinor_connection(b: &[Vec<Complex64>], nu: &[Complex64]) -> Vec<Complex64> {
    let n = b.len();
    let mut out = vec![c0(); nu.len()];
    for (s, val) in nu.iter().enumerate() {
        if *val == c0() {
            continue;
        }
        let factors: Vec<usize> = (0..n).filter(|j| s & (1 << j) != 0).collect();
        for (pos, &j) in factors.iter().enumerate() {
            for i in 0..n {
                let mut f = factors.clone();
                f[pos] = i;
                if let Some((mask, sign)) = ordered_mask(&f) {
                    out[mask] -= b[j][i] * val * sign;
                }
            }
        }
    }
    out
}

/// Bitmask and reordering sign of `θ̄^{f_0} ∧ θ̄^{f_1} ∧ …`.
fn ordered_mask(f: &[usize]) -> Option<(usize, f64)> {
    let mut v = f.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some((v.iter().fold(0, |m, j| m | (1 << j)), sign))
}

/// A spinor field: one complex function per basis monomial `θ̄^S`.
pub type SpinorField = Vec<CField>;

fn spinor_jets(s: &SpinorField, p: &ChartPoint) -> Vec<CJet> {
    s.iter().map(|f| f.eval_jet(&p.coords)).collect()
}

/// `∇_X ν` at `p` for a spinor given by jets.
fn covariant_spinor(fp: &FramePoint, tw: &TWConnection, x: &[Complex64], nu: &[CJet]) -> Vec<Complex64> {
    let b = tw.zbar_block(fp, x);
    let vals = values(nu);
    let conn = spinor_connection(&b, &vals);
    nu.iter().zip(conn).map(|(j, c)| j.directional(x) + c).collect()
}

/// `[∇_X, c(α)]ν − c(∇_X α)ν` at `p` for a real 1-form `α` and spinor field `ν`.
pub fn cr_clifford_residual(
    frame: &CRFrame,
    fp: &FramePoint,
    tw: &TWConnection,
    alpha: &[ScalarField],
    x: &[Complex64],
    nu: &SpinorField,
) -> Result<f64> {
    let p = &fp.p;
    let n = fp.n;
    let a_j: Vec<CJet> = alpha.iter().map(|f| f.eval_jet(&p.coords).to_complex()).collect();
    let pair = |v: &[CJet]| {
        v.iter().zip(&a_j).fold(a_j[0].zero_like(), |acc, (x, y)| acc + x.clone() * y.clone())
    };
    let on_frame: Vec<CJet> = (0..2 * n).map(|a| pair(&fp.jets[a])).collect();
    let hinv_j = invert_dense(&fp.h).ok_or_else(|| Error::BadFrame("degenerate Levi form".into()))?;
    let contraction = contraction_values(&hinv_j, &on_frame[..n]);
    let nu_j = spinor_jets(nu, p);
    let c_nu = clifford_generic(&on_frame[n..], &contraction, &nu_j);

    let lhs1 = covariant_spinor(fp, tw, x, &c_nu);
    let nabla_nu = covariant_spinor(fp, tw, x, &nu_j);
    let hinv = fp.h_inverse()?;
    let a_vals = values(&on_frame);
    let alpha_el = CliffordElement::new(a_vals[..n].to_vec(), a_vals[n..].to_vec(), &hinv);
    let lhs2 = clifford_action(&alpha_el, &SpinorValue::new(n, nabla_nu));

    // (∇_X α)(e_b) = X(α(e_b)) − Σ_c Γ_X[b][c] α(e_c), with α(ξ) irrelevant to c(·).
    let gx = tw.along(fp, x);
    let nab_alpha: Vec<Complex64> = (0..2 * n)
        .map(|b| {
            on_frame[b].directional(x) - (0..2 * n).map(|c| gx[b][c] * a_vals[c]).sum::<Complex64>()
        })
        .collect();
    let d_el = CliffordElement::new(nab_alpha[..n].to_vec(), nab_alpha[n..].to_vec(), &hinv);
    let rhs = clifford_action(&d_el, &SpinorValue::new(n, values(&nu_j)));
    let _ = frame;
    Ok(lhs1
        .iter()
        .zip(&lhs2.comps)
        .zip(&rhs.comps)
        .map(|((a, b), c)| (a - b - c).norm())
        .fold(0.0, f64::max))
}

/// `D ν = Σ_i c(θ^i)∇_{Z_i}ν + c(θ̄^i)∇_{Z̄_i}ν` at `p`.
pub fn dirac_pointwise(fp: &FramePoint, tw: &TWConnection, nu: &SpinorField) -> Result<SpinorValue> {
    let n = fp.n;
    let hinv = fp.h_inverse()?;
    let nu_j = spinor_jets(nu, &fp.p);
    let mut out = SpinorValue::zero(n);
    for a in 0..2 * n {
        let nab = SpinorValue::new(n, covariant_spinor(fp, tw, &fp.vectors[a], &nu_j));
        let mut a10 = vec![c0(); n];
        let mut a01 = vec![c0(); n];
        if a < n {
            a10[a] = Complex64::new(1.0, 0.0);
        } else {
            a01[a - n] = Complex64::new(1.0, 0.0);
        }
        let c = clifford_action(&CliffordElement::new(a10, a01, &hinv), &nab);
        for (o, v) in out.comps.iter_mut().zip(c.comps) {
            *o += v;
        }
    }
    Ok(out)
}

/// Directional derivative of each spinor component along frame field `k`
/// computed from the symbolic frame.
fn symbolic_derivatives(frame: &CRFrame, k: usize, nu: &SpinorField, p: &ChartPoint) -> Vec<Complex64> {
    let n = frame.n();
    let v = if k < n { frame.z[k].clone() } else { frame.z[k - n].conj() };
    nu.iter().map(|f| v.apply(f).eval(&p.coords)).collect()
}

/// `∂̄_b ν = Σ_i θ̄^i ∧ ∇_{Z̄_i} ν` at `p`.
pub fn dbar_b_apply(frame: &CRFrame, fp: &FramePoint, tw: &TWConnection, nu: &SpinorField) -> SpinorValue {
    let n = fp.n;
    let vals: Vec<Complex64> = nu.iter().map(|f| f.eval(&fp.p.coords)).collect();
    let mut out = vec![c0(); 1 << n];
    for i in 0..n {
        let d = symbolic_derivatives(frame, n + i, nu, &fp.p);
        let b = tw.zbar_block(fp, &fp.vectors[n + i]);
        let conn = spinor_connection(&b, &vals);
        let nab: Vec<Complex64> = d.iter().zip(conn).map(|(a, c)| a + c).collect();
        for (o, w) in out.iter_mut().zip(wedge_bar(i, &nab)) {
            *o += w;
        }
    }
    SpinorValue::new(n, out)
}

/// `∂̄_b* γ = −Σ_{ij} (h⁻¹)_{ji} ι(Z̄_j) ∇_{Z_i} γ` at `p`.
pub fn dbar_b_formal_adjoint_apply(
    frame: &CRFrame,
    fp: &FramePoint,
    tw: &TWConnection,
    gamma: &SpinorField,
) -> Result<SpinorValue> {
    let n = fp.n;
    let hinv = fp.h_inverse()?;
    let vals: Vec<Complex64> = gamma.iter().map(|f| f.eval(&fp.p.coords)).collect();
    let mut out = vec![c0(); 1 << n];
    for i in 0..n {
        let d = symbolic_derivatives(frame, i, gamma, &fp.p);
        let b = tw.zbar_block(fp, &fp.vectors[i]);
        let conn = spinor_connection(&b, &vals);
        let nab: Vec<Complex64> = d.iter().zip(conn).map(|(a, c)| a + c).collect();
        for j in 0..n {
            let mut sel = vec![c0(); n];
            sel[j] = Complex64::new(1.0, 0.0);
            let contracted = contract(&sel, &nab);
            for (o, w) in out.iter_mut().zip(contracted) {
                *o -= hinv[j][i] * w;
            }
        }
    }
    Ok(SpinorValue::new(n, out))
}

/// `√2(∂̄_b + ∂̄_b*)ν` at `p`.
pub fn dirac_by_dbar(frame: &CRFrame, fp: &FramePoint, tw: &TWConnection, nu: &SpinorField) -> Result<SpinorValue> {
    let a = dbar_b_apply(frame, fp, tw, nu);
    let b = dbar_b_formal_adjoint_apply(frame, fp, tw, nu)?;
    Ok(SpinorValue::new(
        fp.n,
        a.comps.iter().zip(&b.comps).map(|(x, y)| (x + y) * SQRT_2).collect(),
    ))
}

/// Ambient coordinates `(z, w)` of S³ as functions of the Hopf chart.
pub fn s3_ambient() -> (CField, CField) {
    let v = ScalarField::var;
    let z = CField::expi(&v(1)) * CField::real(v(0).cos());
    let w = CField::expi(&v(2)) * CField::real(v(0).sin());
    (z, w)
}
