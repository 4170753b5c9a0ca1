//! Contact model manifolds: Reeb field, Λ#, Jacobi bracket and Hamiltonian fields.
//!
//! Conventions: `Ω = −dθ`, and a 2-form acts on vectors by
//! `dθ(X,Y) = Σ ω_ij X^i Y^j` with `ω_ij` the antisymmetric coefficient
//! matrix (no factor ½).

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::ScalarField;
use crate::forms::{
    apply_at, bracket_at, exterior_derivative, lie_derivative_1form_at, values, wedge, Chart,
    ChartPoint, KForm,
};
use crate::jet::{solve_dense, Jet2};

/// Contact-condition threshold on the top coefficient of `θ∧(dθ)ⁿ`.
pub const CONTACT_MIN: f64 = 1e-6;
/// Condition number above which a Reeb/Λ# solve is reported as ill-conditioned.
pub const COND_WARN: f64 = 1e8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Heisenberg,
    S3Hopf,
    Torus(u32),
}

#[derive(Clone, Debug)]
pub struct ContactModel {
    pub name: String,
    pub kind: ModelKind,
    /// Half rank of the contact distribution.
    pub n: usize,
    pub chart: Chart,
    pub theta: KForm,
    pub dtheta: KForm,
}

fn whole_line() -> (f64, f64) {
    (f64::NEG_INFINITY, f64::INFINITY)
}

impl ContactModel {
    fn build(name: String, kind: ModelKind, chart: Chart, theta: KForm) -> Self {
        let dtheta = exterior_derivative(&theta);
        let n = (chart.dim() - 1) / 2;
        Self { name, kind, n, chart, theta, dtheta }
    }

    /// `θ = dz − y dx` on ℝ³ with coordinates `(x, y, z)`.
    pub fn heisenberg() -> Self {
        let theta = KForm::coordinate(3, 2) - KForm::coordinate(3, 0).scale(&ScalarField::var(1));
        let chart = Chart { domain: vec![whole_line(); 3], sample: vec![(-2.0, 2.0); 3] };
        Self::build("heisenberg".into(), ModelKind::Heisenberg, chart, theta)
    }

    /// `θ = cos²η dφ₁ + sin²η dφ₂` in Hopf coordinates `(η, φ₁, φ₂)`,
    /// where `z = cos η e^{iφ₁}`, `w = sin η e^{iφ₂}`.
    pub fn s3_hopf() -> Self {
        let eta = ScalarField::var(0);
        let theta = KForm::coordinate(3, 1).scale(&eta.cos().powi(2))
            + KForm::coordinate(3, 2).scale(&eta.sin().powi(2));
        let chart = Chart {
            domain: vec![(0.0, FRAC_PI_2), whole_line(), whole_line()],
            sample: vec![(0.1, FRAC_PI_2 - 0.1), (0.0, 2.0 * PI), (0.0, 2.0 * PI)],
        };
        Self::build("s3_hopf".into(), ModelKind::S3Hopf, chart, theta)
    }

    /// `θ = cos(nt) dx + sin(nt) dy` on the 3-torus with coordinates `(x, y, t)`.
    pub fn t3(twist: u32) -> Result<Self> {
        if twist == 0 {
            return Err(Error::UnknownModel("t3_0".into()));
        }
        let nt = ScalarField::var(2) * twist as f64;
        let theta = KForm::coordinate(3, 0).scale(&nt.cos()) + KForm::coordinate(3, 1).scale(&nt.sin());
        let chart = Chart { domain: vec![whole_line(); 3], sample: vec![(0.0, 2.0 * PI); 3] };
        Ok(Self::build(format!("t3_{twist}"), ModelKind::Torus(twist), chart, theta))
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "heisenberg" => Ok(Self::heisenberg()),
            "s3_hopf" | "s3" => Ok(Self::s3_hopf()),
            _ => match name.strip_prefix("t3_").and_then(|s| s.parse::<u32>().ok()) {
                Some(k) if k >= 1 => Self::t3(k),
                _ => Err(Error::UnknownModel(name.into())),
            },
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["heisenberg", "s3_hopf", "t3_1"]
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `θ∧(dθ)ⁿ/n!`.
    pub fn volume_form(&self) -> KForm {
        let mut w = self.theta.clone();
        let mut fact = 1.0;
        for k in 0..self.n {
            w = wedge(&w, &self.dtheta);
            fact *= (k + 1) as f64;
        }
        w.scale(&ScalarField::constant(1.0 / fact))
    }

    /// Top coefficient of `θ∧(dθ)ⁿ` at `p`.
    pub fn contact_volume(&self, p: &ChartPoint) -> f64 {
        let idx: Vec<usize> = (0..self.dim()).collect();
        let mut w = self.theta.clone();
        for _ in 0..self.n {
            w = wedge(&w, &self.dtheta);
        }
        w.get(&idx).eval(&p.coords)
    }

    pub fn is_contact_at(&self, p: &ChartPoint) -> bool {
        self.contact_volume(p).abs() >= CONTACT_MIN
    }

    pub fn theta_jet(&self, p: &ChartPoint) -> Vec<Jet2> {
        (0..self.dim()).map(|i| self.theta.get(&[i]).eval_jet(&p.coords)).collect()
    }

    /// Antisymmetric coefficient matrix `ω_ij` of `dθ`, as jets.
    pub fn dtheta_jet(&self, p: &ChartPoint) -> Vec<Vec<Jet2>> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..d).map(|j| self.dtheta.get(&[i, j]).eval_jet(&p.coords)).collect())
            .collect()
    }

    pub fn theta_at(&self, p: &ChartPoint, v: &[f64]) -> f64 {
        self.theta.eval_on_real(&[v.to_vec()], p)
    }

    pub fn dtheta_at(&self, p: &ChartPoint, x: &[f64], y: &[f64]) -> f64 {
        self.dtheta.eval_on_real(&[x.to_vec(), y.to_vec()], p)
    }

    /// `Ω(X,Y) = −dθ(X,Y)`.
    pub fn omega_at(&self, p: &ChartPoint, x: &[f64], y: &[f64]) -> f64 {
        -self.dtheta_at(p, x, y)
    }

    /// Matrix `A_ji = ω_ij + θ_i θ_j` shared by the Reeb and Λ# solves.
    fn system(&self, p: &ChartPoint) -> Vec<Vec<Jet2>> {
        let th = self.theta_jet(p);
        let om = self.dtheta_jet(p);
        let d = self.dim();
        (0..d)
            .map(|j| (0..d).map(|i| om[i][j].clone() + th[i].clone() * th[j].clone()).collect())
            .collect()
    }

    /// 2-norm condition number of the Reeb/Λ# system at `p`.
    pub fn condition(&self, p: &ChartPoint) -> f64 {
        let a = self.system(p);
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |r, c| a[r][c].value);
        let sv = m.singular_values();
        sv.max() / sv.min()
    }

    fn solve(&self, p: &ChartPoint, rhs: Vec<Jet2>) -> Result<Vec<Jet2>> {
        if !self.is_contact_at(p) {
            return Err(Error::Degenerate(p.coords.clone()));
        }
        solve_dense(self.system(p), rhs).ok_or_else(|| Error::Degenerate(p.coords.clone()))
    }

    /// Reeb field as jets: `θ(ξ) = 1`, `ι(ξ)dθ = 0`.
    pub fn reeb_jet(&self, p: &ChartPoint) -> Result<Vec<Jet2>> {
        self.chart.check(p)?;
        self.solve(p, self.theta_jet(p))
    }

    pub fn reeb_field(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        Ok(values(&self.reeb_jet(p)?))
    }

    /// `Λ#(η)` as jets, for a 1-form given by its coefficient jets.
    pub fn sharp_jet(&self, p: &ChartPoint, eta: &[Jet2]) -> Result<Vec<Jet2>> {
        let xi = self.reeb_jet(p)?;
        let th = self.theta_jet(p);
        let eta_xi = dot(eta, &xi);
        let rhs = (0..self.dim())
            .map(|j| -eta[j].clone() + eta_xi.clone() * th[j].clone())
            .collect();
        self.solve(p, rhs)
    }

    pub fn sharp_lambda(&self, eta: &KForm, p: &ChartPoint) -> Result<Vec<f64>> {
        if eta.degree != 1 {
            return Err(Error::Degree("Λ# takes a 1-form".into()));
        }
        let ej: Vec<Jet2> = (0..self.dim()).map(|i| eta.get(&[i]).eval_jet(&p.coords)).collect();
        Ok(values(&self.sharp_jet(p, &ej)?))
    }

    /// Jets of `df` from symbolic first derivatives, so they carry full second order.
    pub fn differential_jet(&self, f: &ScalarField, p: &ChartPoint) -> Vec<Jet2> {
        (0..self.dim()).map(|i| f.diff(i).eval_jet(&p.coords)).collect()
    }

    /// `{f,g} = Λ(df,dg) + f ξ·g − g ξ·f` as an exact second-order jet.
    pub fn jacobi_bracket_jet(&self, f: &ScalarField, g: &ScalarField, p: &ChartPoint) -> Result<Jet2> {
        let df = self.differential_jet(f, p);
        let dg = self.differential_jet(g, p);
        let xi = self.reeb_jet(p)?;
        let v = self.sharp_jet(p, &df)?;
        let fj = f.eval_jet(&p.coords);
        let gj = g.eval_jet(&p.coords);
        Ok(dot(&dg, &v) + fj * dot(&dg, &xi) - gj * dot(&df, &xi))
    }

    pub fn jacobi_bracket(&self, f: &ScalarField, g: &ScalarField, p: &ChartPoint) -> Result<f64> {
        Ok(self.jacobi_bracket_jet(f, g, p)?.value)
    }

    /// Value of `{f,g}` when `f`, `g` are only known as jets at `p`.
    pub fn bracket_of_jets(&self, f: &Jet2, g: &Jet2, p: &ChartPoint) -> Result<f64> {
        let xi = self.reeb_field(p)?;
        let v = self.sharp_values(p, &f.grad)?;
        Ok(g.directional(&v) + f.value * g.directional(&xi) - g.value * f.directional(&xi))
    }

    fn sharp_values(&self, p: &ChartPoint, eta: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let ej: Vec<Jet2> = eta.iter().map(|e| Jet2::constant(*e, d)).collect();
        Ok(values(&self.sharp_jet(p, &ej)?))
    }

    /// `X_f = Λ#(df) + f ξ` as jets.
    pub fn hamiltonian_jet(&self, f: &ScalarField, p: &ChartPoint) -> Result<Vec<Jet2>> {
        let df = self.differential_jet(f, p);
        let xi = self.reeb_jet(p)?;
        let v = self.sharp_jet(p, &df)?;
        let fj = f.eval_jet(&p.coords);
        Ok(v.into_iter().zip(xi).map(|(a, b)| a + fj.clone() * b).collect())
    }

    pub fn hamiltonian_vf(&self, f: &ScalarField, p: &ChartPoint) -> Result<Vec<f64>> {
        Ok(values(&self.hamiltonian_jet(f, p)?))
    }

    /// Value of `X_f` when `f` is only known as a jet at `p`.
    pub fn hamiltonian_of_jet(&self, f: &Jet2, p: &ChartPoint) -> Result<Vec<f64>> {
        let xi = self.reeb_field(p)?;
        let v = self.sharp_values(p, &f.grad)?;
        Ok(v.iter().zip(&xi).map(|(a, b)| a + f.value * b).collect())
    }

    /// `g_θ(X,Y) = dθ(X,JY) + θ(X)θ(Y)` for a real endomorphism `J` of `E`
    /// given as a matrix in chart coordinates.
    pub fn webster_metric(&self, j: &[Vec<f64>], x: &[f64], y: &[f64], p: &ChartPoint) -> f64 {
        let jy: Vec<f64> = j.iter().map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
        self.dtheta_at(p, x, &jy) + self.theta_at(p, x) * self.theta_at(p, y)
    }

    /// Functions whose Reeb derivative vanishes identically; polynomials in
    /// these generate test elements of the ξ-invariant subalgebra.
    pub fn invariant_coordinates(&self) -> Vec<ScalarField> {
        let v = ScalarField::var;
        match self.kind {
            ModelKind::Heisenberg => vec![v(0), v(1)],
            ModelKind::S3Hopf => vec![v(0), (v(1) - v(2)).cos(), (v(1) - v(2)).sin()],
            ModelKind::Torus(k) => {
                let nt = v(2) * k as f64;
                vec![v(2).cos(), v(2).sin(), -(nt.sin() * v(0)) + nt.cos() * v(1)]
            }
        }
    }

    /// Membership of `f` in the ξ-invariant subalgebra over `points`.
    pub fn pb_membership(&self, f: &ScalarField, points: &[ChartPoint]) -> Result<PbMembership> {
        let mut out = PbMembership { member: true, xi_residual: 0.0, characterization_residual: 0.0 };
        for p in points {
            let xi = self.reeb_field(p)?;
            let fj = f.eval_jet(&p.coords);
            out.xi_residual = out.xi_residual.max(fj.directional(&xi).abs());
        }
        out.member = out.xi_residual <= PB_TOL;
        if out.member {
            for p in points {
                out.characterization_residual =
                    out.characterization_residual.max(self.omega_contraction_residual(f, p)?);
            }
            out.member = out.characterization_residual <= PB_TOL;
        }
        Ok(out)
    }

    /// `max_j |ι(X_f)Ω − df + (ξ·f)θ|_j` at `p`.
    pub fn omega_contraction_residual(&self, f: &ScalarField, p: &ChartPoint) -> Result<f64> {
        let xf = self.hamiltonian_vf(f, p)?;
        let xi = self.reeb_field(p)?;
        let fj = f.eval_jet(&p.coords);
        let xif = fj.directional(&xi);
        let th = values(&self.theta_jet(p));
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for j in 0..d {
            let e: Vec<f64> = (0..d).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
            let r = self.omega_at(p, &xf, &e) - fj.grad[j] + xif * th[j];
            worst = worst.max(r.abs());
        }
        Ok(worst)
    }

    /// Residuals of the four identities satisfied by Hamiltonian fields:
    /// `X_{f,g} = [X_f,X_g]`, `X_f·g = {f,g} + g ξ·f`,
    /// `ι(X_f)Ω = df − (ξ·f)θ`, `L(X_f)θ = (ξ·f)θ`.
    pub fn hamiltonian_identities(&self, f: &ScalarField, g: &ScalarField, p: &ChartPoint) -> Result<[f64; 4]> {
        let xf = self.hamiltonian_jet(f, p)?;
        let xg = self.hamiltonian_jet(g, p)?;
        let fg = self.jacobi_bracket_jet(f, g, p)?;
        let x_fg = self.hamiltonian_of_jet(&fg, p)?;
        let comm = bracket_at(&xf, &xg);
        let r1 = max_diff(&x_fg, &comm);

        let xi = self.reeb_field(p)?;
        let fj = f.eval_jet(&p.coords);
        let gj = g.eval_jet(&p.coords);
        let xif = fj.directional(&xi);
        let r2 = (apply_at(&xf, &gj).value - fg.value - gj.value * xif).abs();

        let r3 = self.omega_contraction_residual(f, p)?;

        let th = self.theta_jet(p);
        let lie = lie_derivative_1form_at(&xf, &th);
        let r4 = lie.iter().zip(&th).map(|(l, t)| (l - xif * t.value).abs()).fold(0.0, f64::max);
        Ok([r1, r2, r3, r4])
    }

    /// `{{f,g},h} + {{g,h},f} + {{h,f},g}` at `p`.
    pub fn jacobi_cyclic(&self, f: &ScalarField, g: &ScalarField, h: &ScalarField, p: &ChartPoint) -> Result<f64> {
        let hj = h.eval_jet(&p.coords);
        let fj = f.eval_jet(&p.coords);
        let gj = g.eval_jet(&p.coords);
        let a = self.bracket_of_jets(&self.jacobi_bracket_jet(f, g, p)?, &hj, p)?;
        let b = self.bracket_of_jets(&self.jacobi_bracket_jet(g, h, p)?, &fj, p)?;
        let c = self.bracket_of_jets(&self.jacobi_bracket_jet(h, f, p)?, &gj, p)?;
        Ok(a + b + c)
    }

    /// For ξ-invariant `f`: `max(|L(X_f)θ|, |[X_f, ξ]|)` at `p`.
    pub fn symmetry_residual(&self, f: &ScalarField, p: &ChartPoint) -> Result<f64> {
        let xf = self.hamiltonian_jet(f, p)?;
        let xi = self.reeb_jet(p)?;
        let th = self.theta_jet(p);
        let lie = lie_derivative_1form_at(&xf, &th);
        let br = bracket_at(&xf, &xi);
        Ok(lie.iter().chain(&br).map(|x| x.abs()).fold(0.0, f64::max))
    }
}

pub const PB_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct PbMembership {
    pub member: bool,
    pub xi_residual: f64,
    pub characterization_residual: f64,
}

fn dot(a: &[Jet2], b: &[Jet2]) -> Jet2 {
    let mut acc = a[0].zero_like();
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.clone() * y.clone();
    }
    acc
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn p(c: &[f64]) -> ChartPoint {
        ChartPoint::new(c.to_vec())
    }

    fn v(i: usize) -> ScalarField {
        ScalarField::var(i)
    }

    #[test]
    fn heisenberg_reeb_is_dz() {
        let m = ContactModel::heisenberg();
        let xi = m.reeb_field(&p(&[0.3, -1.2, 0.8])).unwrap();
        assert!(max_diff(&xi, &[0.0, 0.0, 1.0]) < 1e-14);
    }

    #[test]
    fn hopf_reeb_is_diagonal() {
        let m = ContactModel::s3_hopf();
        let xi = m.reeb_field(&p(&[0.6, 1.0, 2.0])).unwrap();
        assert!(max_diff(&xi, &[0.0, 1.0, 1.0]) < 1e-12);
    }

    #[test]
    fn torus_reeb_matches_hand_formula() {
        let m = ContactModel::t3(1).unwrap();
        for t in [0.0, 0.7, 2.5] {
            let xi = m.reeb_field(&p(&[0.1, 0.2, t])).unwrap();
            assert!(max_diff(&xi, &[t.cos(), t.sin(), 0.0]) < 1e-12);
        }
        assert!((m.contact_volume(&p(&[0.0, 0.0, 0.4])) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn heisenberg_sharp_examples() {
        let m = ContactModel::heisenberg();
        let q = p(&[0.5, 1.5, -0.3]);
        let a = m.sharp_lambda(&KForm::coordinate(3, 0), &q).unwrap();
        assert!(max_diff(&a, &[0.0, 1.0, 0.0]) < 1e-14);
        let b = m.sharp_lambda(&KForm::coordinate(3, 1), &q).unwrap();
        assert!(max_diff(&b, &[-1.0, 0.0, -1.5]) < 1e-14);
        let c = m.sharp_lambda(&m.theta, &q).unwrap();
        assert!(c.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn bracket_examples() {
        let m = ContactModel::heisenberg();
        let q = p(&[0.5, 1.5, -0.3]);
        assert!((m.jacobi_bracket(&v(0), &v(1), &q).unwrap() - 1.0).abs() < 1e-14);
        assert!((m.jacobi_bracket(&ScalarField::one(), &v(2), &q).unwrap() - 1.0).abs() < 1e-14);
        let f = v(0) * v(2).sin();
        assert!(m.jacobi_bracket(&f, &f, &q).unwrap().abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_examples() {
        let m = ContactModel::heisenberg();
        let q = p(&[0.5, 1.5, -0.3]);
        assert!(max_diff(&m.hamiltonian_vf(&v(0), &q).unwrap(), &[0.0, 1.0, 0.5]) < 1e-14);
        assert!(max_diff(&m.hamiltonian_vf(&ScalarField::one(), &q).unwrap(), &[0.0, 0.0, 1.0]) < 1e-14);
        let s3 = ContactModel::s3_hopf();
        let q = p(&[0.7, 0.2, 1.1]);
        let xf = s3.hamiltonian_vf(&v(0).cos().powi(2), &q).unwrap();
        assert!(max_diff(&xf, &[0.0, 1.0, 0.0]) < 1e-12);
    }

    #[test]
    fn webster_metric_on_reeb() {
        let m = ContactModel::heisenberg();
        let q = p(&[0.5, 1.5, -0.3]);
        let zero = vec![vec![0.0; 3]; 3];
        let xi = m.reeb_field(&q).unwrap();
        assert!((m.webster_metric(&zero, &xi, &xi, &q) - 1.0).abs() < 1e-14);
        let e = [1.0, 0.0, 1.5];
        assert!(m.webster_metric(&zero, &xi, &e, &q).abs() < 1e-14);
    }

    #[test]
    fn pb_examples() {
        let m = ContactModel::heisenberg();
        let pts = sampling::points(&mut sampling::rng(3), &m.chart, 10);
        assert!(m.pb_membership(&v(0), &pts).unwrap().member);
        assert!(!m.pb_membership(&v(2), &pts).unwrap().member);
        let t = ContactModel::t3(1).unwrap();
        let pts = sampling::points(&mut sampling::rng(3), &t.chart, 10);
        // ξ = cos t ∂x + sin t ∂y never differentiates in t.
        assert!(t.pb_membership(&v(2).sin(), &pts).unwrap().member);
        assert!(!t.pb_membership(&v(0), &pts).unwrap().member);
        assert!(t.pb_membership(&ScalarField::constant(2.0), &pts).unwrap().member);
    }

    #[test]
    fn invariant_coordinates_are_invariant() {
        for m in [ContactModel::heisenberg(), ContactModel::s3_hopf(), ContactModel::t3(2).unwrap()] {
            let pts = sampling::points(&mut sampling::rng(9), &m.chart, 10);
            for f in m.invariant_coordinates() {
                assert!(m.pb_membership(&f, &pts).unwrap().member, "{}", m.name);
            }
        }
    }

    #[test]
    fn unknown_model_rejected() {
        assert!(ContactModel::by_name("t3_0").is_err());
        assert!(ContactModel::by_name("lens").is_err());
        assert_eq!(ContactModel::by_name("t3_4").unwrap().kind, ModelKind::Torus(4));
    }

    #[test]
    fn hamiltonian_identities_on_samples() {
        for m in [ContactModel::heisenberg(), ContactModel::s3_hopf(), ContactModel::t3(1).unwrap()] {
            let mut rng = sampling::rng(11);
            for _ in 0..5 {
                let f = sampling::field(&mut rng, 3);
                let g = sampling::field(&mut rng, 3);
                let q = sampling::point(&mut rng, &m.chart);
                let r = m.hamiltonian_identities(&f, &g, &q).unwrap();
                assert!(r.iter().all(|x| *x < 1e-8), "{} {r:?}", m.name);
            }
        }
    }
}
