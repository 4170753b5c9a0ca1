//! Contact torus actions, momentum maps and the quantum operators `A_X`.

use num_complex::Complex64;

use crate::contact::{max_diff, ContactModel, ModelKind};
use crate::error::{Error, Result};
use crate::expr::{CField, ScalarField};
use crate::forms::{lie_bracket, lie_derivative, ChartPoint, VectorField};
use crate::jet::{solve_dense, CJet};
use crate::quadrature::S3Quadrature;

/// Residual bound for an action to count as θ-preserving.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Lower bound on `|Φ|` for transversality.
pub const TRANSVERSE_MIN: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct LieAction {
    pub name: String,
    pub generators: Vec<VectorField>,
    /// `c[i][j][k]` with `[X_i, X_j] = Σ_k c[i][j][k] X_k`.
    pub structure_constants: Vec<Vec<Vec<f64>>>,
}

impl LieAction {
    /// Build an action, checking `L(X)θ = 0` and the structure constants at `points`.
    pub fn new(
        model: &ContactModel,
        name: &str,
        generators: Vec<VectorField>,
        structure_constants: Vec<Vec<Vec<f64>>>,
        points: &[ChartPoint],
    ) -> Result<Self> {
        for x in &generators {
            let l = lie_derivative(x, &model.theta);
            let worst = points.iter().map(|p| l.max_abs(p)).fold(0.0, f64::max);
            if worst > INVARIANCE_TOL {
                return Err(Error::NotContact(name.into(), worst));
            }
        }
        let action = Self { name: name.into(), generators, structure_constants };
        let worst = points
            .iter()
            .map(|p| action.structure_residual(p))
            .fold(0.0, f64::max);
        if worst > INVARIANCE_TOL {
            return Err(Error::Config(format!(
                "structure constants of `{name}` off by {worst:.3e}"
            )));
        }
        Ok(action)
    }

    pub fn abelian(model: &ContactModel, name: &str, generators: Vec<VectorField>, points: &[ChartPoint]) -> Result<Self> {
        let r = generators.len();
        Self::new(model, name, generators, vec![vec![vec![0.0; r]; r]; r], points)
    }

    pub fn names_for(model: &ContactModel) -> &'static [&'static str] {
        match model.kind {
            ModelKind::Heisenberg => &["heisenberg_z", "heisenberg_x", "heisenberg_xz"],
            ModelKind::S3Hopf => &["s3_t2", "s3_diagonal", "s3_phi1"],
            ModelKind::Torus(_) => &["t3_xy"],
        }
    }

    /// Registered action by name, validated on a fixed grid of sample points.
    pub fn by_name(model: &ContactModel, name: &str) -> Result<Self> {
        let pts = crate::sampling::points(&mut crate::sampling::rng(0), &model.chart, 16);
        let e = |i| VectorField::coordinate(3, i);
        let gens = match (&model.kind, name) {
            (ModelKind::Heisenberg, "heisenberg_z") => vec![e(2)],
            (ModelKind::Heisenberg, "heisenberg_x") => vec![e(0)],
            (ModelKind::Heisenberg, "heisenberg_xz") => vec![e(0), e(2)],
            (ModelKind::S3Hopf, "s3_t2") => vec![e(1), e(2)],
            (ModelKind::S3Hopf, "s3_diagonal") => vec![e(1) + e(2)],
            (ModelKind::S3Hopf, "s3_phi1") => vec![e(1)],
            (ModelKind::Torus(_), "t3_xy") => vec![e(0), e(1)],
            (ModelKind::Torus(_), "t3_t") => vec![e(2)],
            _ => return Err(Error::UnknownAction(name.into(), model.name.clone())),
        };
        Self::abelian(model, name, gens, &pts)
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    fn structure_residual(&self, p: &ChartPoint) -> f64 {
        let r = self.rank();
        let mut worst: f64 = 0.0;
        for i in 0..r {
            for j in 0..r {
                let lhs = lie_bracket(&self.generators[i], &self.generators[j]).eval(p);
                let mut rhs = vec![0.0; lhs.len()];
                for k in 0..r {
                    let g = self.generators[k].eval(p);
                    for (a, b) in rhs.iter_mut().zip(g) {
                        *a += self.structure_constants[i][j][k] * b;
                    }
                }
                worst = worst.max(max_diff(&lhs, &rhs));
            }
        }
        worst
    }

    /// `Φ^{X_i} = θ(X_i)` as a field.
    pub fn momentum(&self, model: &ContactModel, i: usize) -> ScalarField {
        let x = &self.generators[i];
        (0..model.dim()).fold(ScalarField::zero(), |acc, j| acc + model.theta.get(&[j]) * x.comps[j].clone())
    }
}

pub fn momentum_component(model: &ContactModel, action: &LieAction, i: usize, p: &ChartPoint) -> f64 {
    action.momentum(model, i).eval(&p.coords)
}

/// `max_p |{Φ^i, Φ^j} − Σ_k c^k_ij Φ^k|`.
pub fn homomorphism_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    j: usize,
    points: &[ChartPoint],
) -> Result<f64> {
    let fi = action.momentum(model, i);
    let fj = action.momentum(model, j);
    let mut worst: f64 = 0.0;
    for p in points {
        let lhs = model.jacobi_bracket(&fi, &fj, p)?;
        let rhs: f64 = (0..action.rank())
            .map(|k| action.structure_constants[i][j][k] * momentum_component(model, action, k, p))
            .sum();
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub field_residual: f64,
    pub reeb_derivative: f64,
}

/// `max_p |X_{Φ^i} − X_i|` together with `max_p |ξ·Φ^i|`.
pub fn hamiltonian_recovery_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    points: &[ChartPoint],
) -> Result<Recovery> {
    let phi = action.momentum(model, i);
    let mut out = Recovery { field_residual: 0.0, reeb_derivative: 0.0 };
    for p in points {
        let xf = model.hamiltonian_vf(&phi, p)?;
        let gen = action.generators[i].eval(p);
        out.field_residual = out.field_residual.max(max_diff(&xf, &gen));
        let xi = model.reeb_field(p)?;
        out.reeb_derivative = out.reeb_derivative.max(phi.eval_jet(&p.coords).directional(&xi).abs());
    }
    Ok(out)
}

/// `max_p |dΦ^i − ι(X_i)Ω|`.
pub fn momentum_differential_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    points: &[ChartPoint],
) -> f64 {
    let phi = action.momentum(model, i);
    let d = model.dim();
    let mut worst: f64 = 0.0;
    for p in points {
        let grad = phi.eval_jet(&p.coords).grad;
        let x = action.generators[i].eval(p);
        for (j, gj) in grad.iter().enumerate() {
            let e: Vec<f64> = (0..d).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
            worst = worst.max((gj - model.omega_at(p, &x, &e)).abs());
        }
    }
    worst
}

/// `max_p |{Φ^i, Φ^j} − Ω(X_j, X_i)|`.
pub fn bracket_omega_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    j: usize,
    points: &[ChartPoint],
) -> Result<f64> {
    let fi = action.momentum(model, i);
    let fj = action.momentum(model, j);
    let mut worst: f64 = 0.0;
    for p in points {
        let b = model.jacobi_bracket(&fi, &fj, p)?;
        let xi = action.generators[i].eval(p);
        let xj = action.generators[j].eval(p);
        worst = worst.max((b - model.omega_at(p, &xj, &xi)).abs());
    }
    Ok(worst)
}

/// True iff `|Φ(p)| ≥ TRANSVERSE_MIN` at every point, i.e. some generator
/// combination leaves the contact distribution.
pub fn transversality_check(model: &ContactModel, action: &LieAction, points: &[ChartPoint]) -> bool {
    if action.rank() == 0 {
        return false;
    }
    let phis: Vec<ScalarField> = (0..action.rank()).map(|i| action.momentum(model, i)).collect();
    points.iter().all(|p| {
        let norm = phis.iter().map(|f| f.eval(&p.coords).powi(2)).sum::<f64>().sqrt();
        norm >= TRANSVERSE_MIN
    })
}

// Quantum bundle: trivial line bundle with ∇ = d − iθ and h(s₁,s₂) = s₁ conj(s₂).

/// `∇_X s = X·s − iθ(X)s`.
pub fn covariant_derivative(model: &ContactModel, x: &VectorField, s: &CField) -> CField {
    let theta_x = (0..model.dim()).fold(ScalarField::zero(), |acc, j| acc + model.theta.get(&[j]) * x.comps[j].clone());
    let xs = (0..model.dim()).fold(CField::zero(), |acc, j| acc + CField::real(x.comps[j].clone()) * s.diff(j));
    xs - CField::new(ScalarField::zero(), theta_x) * s.clone()
}

/// `A_X s = −∇_{X} s + iΦ^X s`.
pub fn quantum_operator(model: &ContactModel, action: &LieAction, i: usize, s: &CField) -> CField {
    let phi = action.momentum(model, i);
    -covariant_derivative(model, &action.generators[i], s) + CField::new(ScalarField::zero(), phi) * s.clone()
}

pub fn quantum_operator_apply(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    s: &CField,
    p: &ChartPoint,
) -> Complex64 {
    quantum_operator(model, action, i, s).eval(&p.coords)
}

/// `|⟨A s₁, s₂⟩ + ⟨s₁, A s₂⟩|` over S³ against the contact volume `θ∧dθ`.
pub fn skew_hermitian_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    s1: &CField,
    s2: &CField,
    quad: &S3Quadrature,
) -> f64 {
    let a1 = quantum_operator(model, action, i, s1);
    let a2 = quantum_operator(model, action, i, s2);
    // Density of |θ∧dθ| against the round volume `½ sin 2η dη dφ₁ dφ₂`.
    let mu = |p: &ChartPoint| 2.0 * model.contact_volume(p).abs() / (2.0 * p.coords[0]).sin();
    let inner = |a: &CField, b: &CField| {
        quad.integrate_complex(|p| a.eval(&p.coords) * b.eval(&p.coords).conj() * mu(p))
    };
    (inner(&a1, s2) + inner(s1, &a2)).norm()
}

/// `|X·h(s₁,s₂) − h(∇_X s₁, s₂) − h(s₁, ∇_X s₂)|` at `p`.
pub fn metric_compatibility_residual(
    model: &ContactModel,
    x: &VectorField,
    s1: &CField,
    s2: &CField,
    p: &ChartPoint,
) -> f64 {
    let h = s1.clone() * s2.conj();
    let xh = (0..model.dim()).fold(CField::zero(), |acc, j| acc + CField::real(x.comps[j].clone()) * h.diff(j));
    let lhs = xh.eval(&p.coords);
    let n1 = covariant_derivative(model, x, s1).eval(&p.coords);
    let n2 = covariant_derivative(model, x, s2).eval(&p.coords);
    let v1 = s1.eval(&p.coords);
    let v2 = s2.eval(&p.coords);
    (lhs - n1 * v2.conj() - v1 * n2.conj()).norm()
}

/// Curvature of `∇` on coordinate fields: `F_ij = ([∇_i, ∇_j] s)/s` at `p`.
pub fn curvature_matrix(model: &ContactModel, s: &CField, p: &ChartPoint) -> Vec<Vec<Complex64>> {
    let d = model.dim();
    let sj: CJet = s.eval_jet(&p.coords);
    let th = model.theta_jet(p);
    let i_unit = Complex64::new(0.0, 1.0);
    // ∇_j s as a jet with exact value and gradient.
    let nab: Vec<CJet> = (0..d)
        .map(|j| sj.partial(j) - th[j].to_complex() * sj.clone() * sj.const_like(i_unit))
        .collect();
    let second = |a: usize, b: usize| nab[b].grad[a] - i_unit * th[a].value * nab[b].value;
    (0..d)
        .map(|a| (0..d).map(|b| (second(a, b) - second(b, a)) / sj.value).collect())
        .collect()
}

/// The constant `c` with `F = c Ω`, plus the worst deviation from proportionality.
pub fn curvature_constant(model: &ContactModel, s: &CField, points: &[ChartPoint]) -> (Complex64, f64) {
    let d = model.dim();
    let mut c = None;
    let mut dev: f64 = 0.0;
    for p in points {
        let f = curvature_matrix(model, s, p);
        let om = model.dtheta_jet(p);
        for a in 0..d {
            for b in 0..d {
                let omega_ab = -om[a][b].value;
                if omega_ab.abs() > 1e-3 {
                    let ratio = f[a][b] / omega_ab;
                    let base = *c.get_or_insert(ratio);
                    dev = dev.max((ratio - base).norm());
                } else {
                    dev = dev.max(f[a][b].norm());
                }
            }
        }
    }
    (c.unwrap_or_default(), dev)
}

/// `|[A_i, A_j] s|` at `p`.
pub fn quantum_commutator_residual(
    model: &ContactModel,
    action: &LieAction,
    i: usize,
    j: usize,
    s: &CField,
    p: &ChartPoint,
) -> f64 {
    let aij = quantum_operator(model, action, i, &quantum_operator(model, action, j, s));
    let aji = quantum_operator(model, action, j, &quantum_operator(model, action, i, s));
    (aij - aji).eval(&p.coords).norm()
}

// Boothby-Wang picture of S³ over S², base chart (η, χ) with χ = φ₁ − φ₂.

/// Pull a base function back along the Hopf projection.
pub fn pullback_to_s3(f_base: &ScalarField) -> ScalarField {
    let v = ScalarField::var;
    f_base.substitute(&[v(0), v(1) - v(2)])
}

/// Base symplectic form `ω_B = sin 2η dη∧dχ`, as a coefficient matrix.
fn base_symplectic(eta: f64) -> [[f64; 2]; 2] {
    let s = (2.0 * eta).sin();
    [[0.0, s], [-s, 0.0]]
}

/// Base Hamiltonian field `ι(X_f)ω_B = df` at base point `(η, χ)`.
pub fn base_hamiltonian(f_base: &ScalarField, eta: f64, chi: f64) -> Result<[f64; 2]> {
    let g = f_base.eval_jet(&[eta, chi]).grad;
    let w = base_symplectic(eta);
    // (ι(X)ω)_j = Σ_i X^i ω_ij
    let a = vec![vec![w[0][0], w[1][0]], vec![w[0][1], w[1][1]]];
    let x = solve_dense(a, g).ok_or(Error::Singular)?;
    Ok([x[0], x[1]])
}

/// `X_f^hor + (π*f) ξ` at a point of S³.
pub fn boothby_wang_lift(model: &ContactModel, f_base: &ScalarField, p: &ChartPoint) -> Result<Vec<f64>> {
    if model.kind != ModelKind::S3Hopf {
        return Err(Error::UnknownModel(format!("{} has no Boothby-Wang base", model.name)));
    }
    model.chart.check(p)?;
    let (eta, chi) = (p.coords[0], p.coords[1] - p.coords[2]);
    let xb = base_hamiltonian(f_base, eta, chi)?;
    // Horizontal lift: π_* V = X_B and θ(V) = 0.
    let th: Vec<f64> = crate::forms::values(&model.theta_jet(p));
    let a = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, -1.0], th];
    let v = solve_dense(a, vec![xb[0], xb[1], 0.0]).ok_or(Error::Singular)?;
    let f = f_base.eval(&[eta, chi]);
    let xi = model.reeb_field(p)?;
    Ok(v.iter().zip(&xi).map(|(a, b)| a + f * b).collect())
}

/// `|lift − X_{π*f}|` at `p`.
pub fn boothby_wang_residual(model: &ContactModel, f_base: &ScalarField, p: &ChartPoint) -> Result<f64> {
    let lift = boothby_wang_lift(model, f_base, p)?;
    let ham = model.hamiltonian_vf(&pullback_to_s3(f_base), p)?;
    Ok(max_diff(&lift, &ham))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling;

    fn v(i: usize) -> ScalarField {
        ScalarField::var(i)
    }

    fn sample(model: &ContactModel, n: usize) -> Vec<ChartPoint> {
        sampling::points(&mut sampling::rng(21), &model.chart, n)
    }

    #[test]
    fn hopf_torus_momenta() {
        let m = ContactModel::s3_hopf();
        let a = LieAction::by_name(&m, "s3_t2").unwrap();
        for p in sample(&m, 10) {
            let eta = p.coords[0];
            assert!((momentum_component(&m, &a, 0, &p) - eta.cos().powi(2)).abs() < 1e-14);
            assert!((momentum_component(&m, &a, 1, &p) - eta.sin().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn heisenberg_z_momentum_is_one() {
        let m = ContactModel::heisenberg();
        let a = LieAction::by_name(&m, "heisenberg_z").unwrap();
        assert_eq!(momentum_component(&m, &a, 0, &ChartPoint::new(vec![0.2, 0.3, 0.4])), 1.0);
    }

    #[test]
    fn torus_t_translation_rejected() {
        let m = ContactModel::t3(1).unwrap();
        assert!(matches!(LieAction::by_name(&m, "t3_t"), Err(Error::NotContact(..))));
        assert!(LieAction::by_name(&m, "t3_xy").is_ok());
    }

    #[test]
    fn homomorphism_and_recovery() {
        for m in [ContactModel::heisenberg(), ContactModel::s3_hopf(), ContactModel::t3(1).unwrap()] {
            let pts = sample(&m, 10);
            for name in LieAction::names_for(&m) {
                let a = LieAction::by_name(&m, name).unwrap();
                for i in 0..a.rank() {
                    for j in 0..a.rank() {
                        assert!(homomorphism_residual(&m, &a, i, j, &pts).unwrap() < 1e-8);
                        assert!(bracket_omega_residual(&m, &a, i, j, &pts).unwrap() < 1e-8);
                    }
                    let r = hamiltonian_recovery_residual(&m, &a, i, &pts).unwrap();
                    assert!(r.field_residual < 1e-8 && r.reeb_derivative < 1e-8, "{name} {r:?}");
                    assert!(momentum_differential_residual(&m, &a, i, &pts) < 1e-8);
                }
            }
        }
    }

    #[test]
    fn quantum_operator_on_constant() {
        let m = ContactModel::heisenberg();
        let a = LieAction::by_name(&m, "heisenberg_z").unwrap();
        let one = CField::real(ScalarField::one());
        let val = quantum_operator_apply(&m, &a, 0, &one, &ChartPoint::new(vec![0.0; 3]));
        assert!((val - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn quantum_operators_skew_and_commuting() {
        let m = ContactModel::s3_hopf();
        let a = LieAction::by_name(&m, "s3_t2").unwrap();
        let quad = S3Quadrature::new(12, 12);
        let s1 = CField::expi(&v(1)) * CField::real(v(0).cos() * v(0).sin());
        let s2 = CField::expi(&(v(1) - v(2) * 2.0)) + CField::real(v(0).cos().powi(2));
        for i in 0..2 {
            assert!(skew_hermitian_residual(&m, &a, i, &s1, &s2, &quad) < 1e-10);
            assert!(skew_hermitian_residual(&m, &a, i, &s1, &s1, &quad) < 1e-10);
        }
        let p = ChartPoint::new(vec![0.5, 0.3, 1.2]);
        assert!(quantum_commutator_residual(&m, &a, 0, 1, &s2, &p) < 1e-12);
    }

    #[test]
    fn curvature_is_i_omega() {
        for m in [ContactModel::heisenberg(), ContactModel::s3_hopf()] {
            let s = CField::expi(&(v(0) * v(1))) + CField::real(v(2).cos() + 2.0);
            let (c, dev) = curvature_constant(&m, &s, &sample(&m, 5));
            assert!((c - Complex64::new(0.0, 1.0)).norm() < 1e-10, "{c}");
            assert!(dev < 1e-10);
        }
    }

    #[test]
    fn bundle_metric_compatible() {
        let m = ContactModel::s3_hopf();
        let s1 = CField::expi(&v(1)) * CField::real(v(0).sin());
        let s2 = CField::new(v(2).cos(), v(0));
        let x = VectorField::new(vec![v(1), v(0).cos(), ScalarField::one()]);
        for p in sample(&m, 5) {
            assert!(metric_compatibility_residual(&m, &x, &s1, &s2, &p) < 1e-12);
        }
    }

    #[test]
    fn transversality() {
        let m = ContactModel::s3_hopf();
        let pts = sample(&m, 20);
        let t2 = LieAction::by_name(&m, "s3_t2").unwrap();
        assert!(transversality_check(&m, &t2, &pts));
        let phi1 = LieAction::by_name(&m, "s3_phi1").unwrap();
        assert!(transversality_check(&m, &phi1, &pts));
        let pole = vec![ChartPoint::new(vec![std::f64::consts::FRAC_PI_2, 0.0, 0.0])];
        assert!(!transversality_check(&m, &phi1, &pole));
        let trivial = LieAction::abelian(&m, "trivial", vec![VectorField::zero(3)], &pts).unwrap();
        assert!(!transversality_check(&m, &trivial, &pts));
    }

    #[test]
    fn boothby_wang_examples() {
        let m = ContactModel::s3_hopf();
        let p = ChartPoint::new(vec![0.4, 1.0, 2.5]);
        let lift = boothby_wang_lift(&m, &ScalarField::constant(3.0), &p).unwrap();
        assert!(max_diff(&lift, &[0.0, 3.0, 3.0]) < 1e-14);
        let height = (v(0) * 2.0).cos();
        assert!(boothby_wang_residual(&m, &height, &p).unwrap() < 1e-12);
        let mut rng = sampling::rng(4);
        for q in sample(&m, 10) {
            let f = sampling::field(&mut rng, 2);
            assert!(boothby_wang_residual(&m, &f, &q).unwrap() < 1e-8);
        }
    }
}
