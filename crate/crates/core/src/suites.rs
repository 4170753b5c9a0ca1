//! Property suites shared by the command line and the acceptance run.
//!
//! Each suite samples with a fixed seed, evaluates residuals pointwise and
//! reports the worst value per check against a named tolerance.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::contact::ContactModel;
use crate::cr::{
    anticommutator_residual, cr_clifford_residual, dbar_b_formal_adjoint_apply, dirac_by_dbar, dirac_pointwise,
    tw_solve, CRFrame, SpinorField, SpinorValue,
};
use crate::expr::{CField, ScalarField};
use crate::forms::{exterior_derivative, interior_product, lie_derivative, lie_derivative_1form_at, wedge, ChartPoint, KForm};
use crate::quadrature::S3Quadrature;
use crate::sampling::{self, SuiteRng};
use crate::spectral;
use crate::symmetry::{
    bracket_omega_residual, boothby_wang_residual, curvature_constant, hamiltonian_recovery_residual,
    homomorphism_residual, momentum_differential_residual, quantum_commutator_residual, skew_hermitian_residual,
    LieAction,
};
use crate::Result;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    /// Worst residual, or the smallest value for lower-bound checks.
    pub value: f64,
    pub tolerance: f64,
    /// `value ≥ tolerance` is required instead of `value ≤ tolerance`.
    pub lower_bound: bool,
    pub samples: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub model: String,
    pub checks: Vec<Check>,
    pub notices: Vec<String>,
}

impl SuiteReport {
    fn new(suite: &str, model: &str) -> Self {
        Self { suite: suite.into(), model: model.into(), checks: vec![], notices: vec![] }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, opts: &SuiteOptions, name: &str, default_tol: f64, value: f64, samples: usize) {
        let tolerance = opts.tol(name, default_tol);
        // NaN never passes.
        let pass = value <= tolerance;
        self.checks.push(Check { name: name.into(), value, tolerance, lower_bound: false, samples, pass });
    }

    fn push_lower(&mut self, opts: &SuiteOptions, name: &str, default_tol: f64, value: f64, samples: usize) {
        let tolerance = opts.tol(name, default_tol);
        let pass = value >= tolerance;
        self.checks.push(Check { name: name.into(), value, tolerance, lower_bound: true, samples, pass });
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub seed: u64,
    pub samples: usize,
    /// Overrides by check name; the key `all` applies to every check.
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 7, samples: 30, tolerances: BTreeMap::new() }
    }
}

impl SuiteOptions {
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).or_else(|| self.tolerances.get("all")).copied().unwrap_or(default)
    }

    fn rng(&self, salt: u64) -> SuiteRng {
        sampling::rng(self.seed.wrapping_mul(1_000_003).wrapping_add(salt))
    }
}

fn points(model: &ContactModel, rng: &mut SuiteRng, n: usize) -> Vec<ChartPoint> {
    sampling::points(rng, &model.chart, n)
}

fn max_component(w: &KForm, p: &ChartPoint) -> f64 {
    w.max_abs(p)
}

/// d∘d, ιι, wedge associativity and the Cartan cross-checks on the model chart.
pub fn jet_calculus(model: &ContactModel, opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("jet_calculus", &model.name);
    let mut rng = opts.rng(1);
    let dim = model.dim();
    let n = opts.samples.max(50);
    let (mut dd, mut ii, mut assoc, mut cartan_fn, mut cartan_1) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..n {
        let p = sampling::point(&mut rng, &model.chart);
        let f = sampling::field(&mut rng, dim);
        let w1 = sampling::kform(&mut rng, dim, 1);
        let w2 = sampling::kform(&mut rng, dim, 2);
        let x = sampling::vector_field(&mut rng, dim);
        dd = dd.max(max_component(&exterior_derivative(&exterior_derivative(&KForm::function(dim, f.clone()))), &p));
        dd = dd.max(max_component(&exterior_derivative(&exterior_derivative(&w1)), &p));
        // Exact identities: the float residual is roundoff, so it is measured
        // relative to the size of the inputs.
        let xx = interior_product(&x, &interior_product(&x, &w2)?)?;
        let xnorm = x.eval(&p).iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        ii = ii.max(max_component(&xx, &p) / (xnorm * xnorm * w2.max_abs(&p).max(1.0)));
        let a = sampling::kform(&mut rng, dim, 1);
        let b = sampling::kform(&mut rng, dim, 1);
        let lhs = wedge(&wedge(&a, &b), &w1);
        let rhs = wedge(&a, &wedge(&b, &w1));
        let scale = a.max_abs(&p).max(1.0) * b.max_abs(&p).max(1.0) * w1.max_abs(&p).max(1.0);
        assoc = assoc.max(max_component(&(lhs - rhs), &p) / scale);
        let lf = lie_derivative(&x, &KForm::function(dim, f.clone()));
        cartan_fn = cartan_fn.max((lf.get(&[]).eval(&p.coords) - x.apply(&f).eval(&p.coords)).abs());
        // Cartan on 1-forms against the coordinate formula.
        let l1 = lie_derivative(&x, &w1);
        let xj = x.eval_jet(&p);
        let aj: Vec<_> = (0..dim).map(|i| w1.get(&[i]).eval_jet(&p.coords)).collect();
        let coord = lie_derivative_1form_at(&xj, &aj);
        for (i, c) in coord.iter().enumerate() {
            cartan_1 = cartan_1.max((l1.get(&[i]).eval(&p.coords) - c).abs());
        }
    }
    rep.push(opts, "d_squared", 1e-10, dd, n);
    rep.push(opts, "interior_twice", 1e-12, ii, n);
    rep.push(opts, "wedge_associativity", 1e-12, assoc, n);
    rep.push(opts, "cartan_functions", 1e-12, cartan_fn, n);
    rep.push(opts, "cartan_one_forms", 1e-10, cartan_1, n);
    Ok(rep)
}

fn invariant_function(model: &ContactModel, rng: &mut SuiteRng) -> ScalarField {
    let inv = model.invariant_coordinates();
    sampling::polynomial(rng, inv.len(), 3).substitute(&inv)
}

/// Reeb field, Hamiltonian-field identities, Jacobi identity and the ξ-invariant subalgebra.
pub fn contact_core(model: &ContactModel, opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("contact_core", &model.name);
    let mut rng = opts.rng(2);
    let dim = model.dim();
    let n = opts.samples;
    let pts = points(model, &mut rng, n);

    let mut reeb: f64 = 0.0;
    let mut contact = f64::INFINITY;
    for p in &pts {
        let xi = model.reeb_field(p)?;
        reeb = reeb.max((model.theta_at(p, &xi) - 1.0).abs());
        for k in 0..dim {
            let e: Vec<f64> = (0..dim).map(|j| if j == k { 1.0 } else { 0.0 }).collect();
            reeb = reeb.max(model.dtheta_at(p, &xi, &e).abs());
        }
        contact = contact.min(model.contact_volume(p).abs());
    }
    rep.push(opts, "reeb_defining", 1e-10, reeb, n);
    rep.push_lower(opts, "contact_volume", 1e-6, contact, n);

    let mut items = [0.0_f64; 4];
    let mut anti: f64 = 0.0;
    for _ in 0..n {
        let f = sampling::field(&mut rng, dim);
        let g = sampling::field(&mut rng, dim);
        for p in &pts {
            let r = model.hamiltonian_identities(&f, &g, p)?;
            for k in 0..4 {
                items[k] = items[k].max(r[k]);
            }
        }
        let p = &pts[rng.gen_range(0..pts.len())];
        anti = anti.max((model.jacobi_bracket(&f, &g, p)? + model.jacobi_bracket(&g, &f, p)?).abs());
    }
    for (k, r) in items.iter().enumerate() {
        rep.push(opts, &format!("hamiltonian_item_{}", k + 1), 1e-8, *r, n * n);
    }
    rep.push(opts, "antisymmetry", 1e-10, anti, n);

    let mut jac: f64 = 0.0;
    for _ in 0..n {
        let f = sampling::polynomial(&mut rng, dim, 3);
        let g = sampling::polynomial(&mut rng, dim, 3);
        let h = sampling::polynomial(&mut rng, dim, 3);
        for p in pts.iter().take(3) {
            jac = jac.max(model.jacobi_cyclic(&f, &g, &h, p)?.abs());
        }
    }
    rep.push(opts, "jacobi_cyclic", 1e-7, jac, n);

    let (mut premise, mut closure, mut sym) = (0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..n {
        let f = invariant_function(model, &mut rng);
        let g = invariant_function(model, &mut rng);
        for p in pts.iter().take(5) {
            let xi = model.reeb_field(p)?;
            premise = premise.max(f.eval_jet(&p.coords).directional(&xi).abs());
            closure = closure.max(model.jacobi_bracket_jet(&f, &g, p)?.directional(&xi).abs());
            sym = sym.max(model.symmetry_residual(&f, p)?);
        }
    }
    rep.push(opts, "invariant_premise", 1e-10, premise, n);
    rep.push(opts, "invariant_bracket_closure", 1e-7, closure, n);
    rep.push(opts, "infinitesimal_symmetry", 1e-8, sym, n);
    Ok(rep)
}

/// Momentum map identities for every registered action, the quantum bundle
/// and, on S³, the Boothby-Wang lift.
pub fn symmetry_momentum(model: &ContactModel, opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("symmetry_momentum", &model.name);
    let mut rng = opts.rng(3);
    let dim = model.dim();
    let n = opts.samples;
    let pts = points(model, &mut rng, n);
    let (mut invariance, mut hom, mut rec, mut xi_phi, mut dphi, mut bom, mut comm) =
        (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut pb_fail = 0.0_f64;
    for name in LieAction::names_for(model) {
        let a = LieAction::by_name(model, name)?;
        for i in 0..a.rank() {
            for p in &pts {
                let xj = a.generators[i].eval_jet(p);
                let lie = lie_derivative_1form_at(&xj, &model.theta_jet(p));
                invariance = invariance.max(lie.iter().fold(0.0, |m, v| m.max(v.abs())));
            }
            for j in 0..a.rank() {
                hom = hom.max(homomorphism_residual(model, &a, i, j, &pts)?);
                bom = bom.max(bracket_omega_residual(model, &a, i, j, &pts)?);
            }
            let r = hamiltonian_recovery_residual(model, &a, i, &pts)?;
            rec = rec.max(r.field_residual);
            xi_phi = xi_phi.max(r.reeb_derivative);
            dphi = dphi.max(momentum_differential_residual(model, &a, i, &pts));
            let pb = model.pb_membership(&a.momentum(model, i), &pts)?;
            if !pb.member {
                pb_fail = 1.0;
            }
        }
        for i in 0..a.rank() {
            for j in 0..a.rank() {
                let commuting = a.structure_constants[i][j].iter().all(|c| *c == 0.0);
                if commuting && i != j {
                    let s = CField::new(sampling::field(&mut rng, dim), sampling::field(&mut rng, dim));
                    for p in pts.iter().take(5) {
                        comm = comm.max(quantum_commutator_residual(model, &a, i, j, &s, p));
                    }
                }
            }
        }
    }
    rep.push(opts, "action_invariance", 1e-8, invariance, n);
    rep.push(opts, "homomorphism", 1e-8, hom, n);
    rep.push(opts, "hamiltonian_recovery", 1e-8, rec, n);
    rep.push(opts, "reeb_derivative_of_momentum", 1e-8, xi_phi, n);
    rep.push(opts, "momentum_differential", 1e-8, dphi, n);
    rep.push(opts, "bracket_of_momenta", 1e-8, bom, n);
    rep.push(opts, "momentum_in_invariant_subalgebra", 0.5, pb_fail, n);
    rep.push(opts, "quantum_commutator", 1e-7, comm, 5);

    let s = CField::new(sampling::field(&mut rng, dim), sampling::field(&mut rng, dim));
    let (c, dev) = curvature_constant(model, &s, &pts[..pts.len().min(5)]);
    rep.push(opts, "curvature_proportional_to_omega", 1e-10, dev, 5);
    rep.notices.push(format!("curvature of d - i theta equals c * Omega with c = {:.12}{:+.12}i", c.re, c.im));

    if model.name == "s3_hopf" {
        let quad = S3Quadrature::new(12, 12);
        let v = ScalarField::var;
        let s1 = CField::expi(&v(1)) * CField::real(v(0).cos() * v(0).sin());
        let s2 = CField::expi(&(v(1) - v(2) * 2.0)) + CField::real(v(0).cos().powi(2));
        let a = LieAction::by_name(model, "s3_t2")?;
        let skew = (0..2).fold(0.0_f64, |m, i| m.max(skew_hermitian_residual(model, &a, i, &s1, &s2, &quad)));
        rep.push(opts, "quantum_skew_hermitian", 1e-10, skew, 2);
        let mut bw: f64 = 0.0;
        let count = opts.samples.max(20);
        for _ in 0..count {
            let f = sampling::field(&mut rng, 2);
            let p = sampling::point(&mut rng, &model.chart);
            bw = bw.max(boothby_wang_residual(model, &f, &p)?);
        }
        rep.push(opts, "boothby_wang_lift", 1e-8, bw, count);
    }
    Ok(rep)
}

fn random_complex(rng: &mut SuiteRng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_spinor_field(rng: &mut SuiteRng, dim: usize, size: usize) -> SpinorField {
    (0..size).map(|_| CField::new(sampling::field(rng, dim), sampling::field(rng, dim))).collect()
}

/// Levi form, Tanaka-Webster certification, Clifford relations and the two
/// Dirac paths. Models without a CR frame produce a notice and no checks.
pub fn cr_structure(model: &ContactModel, opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("cr_structure", &model.name);
    let frame = match CRFrame::for_model(model) {
        Ok(f) => f,
        Err(e) => {
            rep.notices.push(format!("CR suites skipped: {e}"));
            return Ok(rep);
        }
    };
    let mut rng = opts.rng(4);
    let dim = model.dim();
    let n = opts.samples.max(20);
    let pts = points(model, &mut rng, n);
    let spinor_size = 1 << frame.n();

    let mut levi = f64::INFINITY;
    let (mut axioms, mut zbzb, mut flat, mut dbar) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut ratio = f64::INFINITY;
    let mut tws = vec![];
    for p in &pts {
        levi = levi.min(frame.levi_min_eigenvalue(p));
        let fp = frame.at(p)?;
        let tw = tw_solve(&fp)?;
        let r = tw.residuals(&fp, model);
        axioms = axioms.max(r.max()).max(tw.system_residual);
        zbzb = zbzb.max(r.torsion_zbar_zbar);
        ratio = ratio.min(tw.sigma_ratio);
        flat = flat.max(tw.max_abs());
        let f = CField::new(sampling::field(&mut rng, dim), sampling::field(&mut rng, dim));
        let a = frame.dbar_function(&f, p);
        let b = frame.dbar_function_by_projection(&f, p)?;
        dbar = dbar.max(a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
        tws.push((fp, tw));
    }
    rep.push_lower(opts, "levi_min_eigenvalue", 1e-6, levi, n);
    rep.push(opts, "tw_axioms", 1e-8, axioms, n);
    rep.push(opts, "tw_torsion_antiholomorphic", 1e-8, zbzb, n);
    rep.push_lower(opts, "tw_rank_certificate", crate::cr::RANK_RATIO, ratio, n);
    if model.name == "heisenberg" {
        rep.push(opts, "tw_flat", 1e-10, flat, n);
    }
    rep.push(opts, "dbar_dual_path", 1e-8, dbar, n);

    let trials = 100;
    let mut anti: f64 = 0.0;
    for t in 0..trials {
        let p = &pts[t % pts.len()];
        let k = frame.n();
        let a: Vec<Complex64> = (0..k).map(|_| random_complex(&mut rng)).collect();
        let b: Vec<Complex64> = (0..k).map(|_| random_complex(&mut rng)).collect();
        let nu = SpinorValue::new(k, (0..spinor_size).map(|_| random_complex(&mut rng)).collect());
        anti = anti.max(anticommutator_residual(&frame, p, &a, &b, &nu)?);
    }
    rep.push(opts, "clifford_anticommutator", 1e-10, anti, trials);

    let trials = 30;
    let (mut crc, mut dirac) = (0.0_f64, 0.0_f64);
    for t in 0..trials {
        let (fp, tw) = &tws[t % tws.len()];
        let alpha: Vec<ScalarField> = (0..dim).map(|_| sampling::field(&mut rng, dim)).collect();
        let x: Vec<Complex64> = (0..dim).map(|_| random_complex(&mut rng)).collect();
        let nu = random_spinor_field(&mut rng, dim, spinor_size);
        crc = crc.max(cr_clifford_residual(&frame, fp, tw, &alpha, &x, &nu)?);
        let a = dirac_pointwise(fp, tw, &nu)?;
        let b = dirac_by_dbar(&frame, fp, tw, &nu)?;
        let scale = a.comps.iter().map(|c| c.norm()).fold(1.0, f64::max);
        dirac = dirac.max(a.max_diff(&b) / scale);
    }
    rep.push(opts, "cr_clifford", 1e-8, crc, trials);
    rep.push(opts, "dirac_dual_path", 1e-7, dirac, trials);
    Ok(rep)
}

/// Matrix-level invariants of the truncated ∂̄_b complex on S³.
pub fn spectral_invariants(cap: u32, weights: &[i64], opts: &SuiteOptions) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new("spectral_index", "s3_hopf");
    let mut leak = 0usize;
    let mut rank_mismatch = 0usize;
    let mut lap: f64 = 0.0;
    let mut kernel_gap = 0usize;
    let mut containment: f64 = 0.0;
    let mut unstable = 0usize;
    for &n in weights {
        let kr = spectral::kohn_rossi_multiplicities(cap, n);
        let next = spectral::kohn_rossi_multiplicities(cap + 2, n);
        leak += kr.leakage;
        rank_mismatch += kr.rank.abs_diff(kr.exact_rank);
        if (kr.dim_h00, kr.dim_h01) != (next.dim_h00, next.dim_h01) {
            unstable += 1;
        }
        lap = lap.max(spectral::laplacian_gap(cap, n));
        if n >= 0 && cap as i64 >= n {
            kernel_gap += kr.dim_h00.abs_diff(n as usize + 1);
            let basis = spectral::enumerate_basis(cap, n);
            let op = spectral::assemble_dbar(&basis);
            for (j, m) in basis.monomials.iter().enumerate() {
                if m.c == 0 && m.d == 0 {
                    let col = op.entries.iter().map(|row| num_traits::ToPrimitive::to_f64(&row[j]).unwrap_or(f64::NAN).abs());
                    containment = containment.max(col.fold(0.0, f64::max));
                }
            }
        }
    }
    let count = weights.len();
    rep.push(opts, "weight_leakage", 0.0, leak as f64, count);
    rep.push(opts, "rank_exact_vs_float", 0.0, rank_mismatch as f64, count);
    rep.push(opts, "holomorphic_kernel_dimension", 0.0, kernel_gap as f64, count);
    rep.push(opts, "holomorphic_kernel_containment", 1e-8, containment, count);
    rep.push(opts, "laplacian_is_dirac_square", 1e-10, lap, count);
    rep.push(opts, "multiplicity_stability", 0.0, unstable as f64, count);

    // Gram adjoint against the local adjoint formula of the CR layer.
    let model = ContactModel::s3_hopf();
    let frame = CRFrame::for_model(&model)?;
    let mut rng = opts.rng(5);
    let pts = points(&model, &mut rng, 5);
    let mut adj: f64 = 0.0;
    let monos = [
        spectral::Monomial::new(0, 1, 0, 0),
        spectral::Monomial::new(1, 1, 0, 0),
        spectral::Monomial::new(0, 2, 1, 0),
        spectral::Monomial::new(1, 1, 0, 1),
        spectral::Monomial::new(0, 1, 0, 2),
    ];
    for m in monos {
        let poly = spectral::gram_adjoint_of(cap.max(m.degree() + 2), m);
        let gamma: SpinorField = vec![CField::zero(), m.field()];
        for p in &pts {
            let fp = frame.at(p)?;
            let tw = tw_solve(&fp)?;
            let local = dbar_b_formal_adjoint_apply(&frame, &fp, &tw, &gamma)?.comps[0];
            let gram = poly.eval(p);
            adj = adj.max((gram - local).norm() / local.norm().max(1e-300).max(gram.norm()));
        }
    }
    rep.push(opts, "adjoint_consistency", 1e-6, adj, monos.len() * pts.len());
    Ok(rep)
}

/// All suites applicable to a model, in a fixed order.
pub fn verify_model(model: &ContactModel, opts: &SuiteOptions) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        jet_calculus(model, opts)?,
        contact_core(model, opts)?,
        symmetry_momentum(model, opts)?,
        cr_structure(model, opts)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SuiteOptions {
        SuiteOptions { seed: 3, samples: 4, tolerances: BTreeMap::new() }
    }

    #[test]
    fn torus_skips_cr_with_notice() {
        let m = ContactModel::t3(1).unwrap();
        let r = cr_structure(&m, &quick()).unwrap();
        assert!(r.checks.is_empty());
        assert!(r.notices[0].contains("no CR frame registered"));
    }

    #[test]
    fn unreachable_tolerance_fails() {
        let m = ContactModel::heisenberg();
        let mut opts = quick();
        opts.tolerances.insert("all".into(), 1e-30);
        let r = contact_core(&m, &opts).unwrap();
        assert!(!r.pass());
        assert!(contact_core(&m, &quick()).unwrap().pass());
    }

    #[test]
    fn spinor_convention_holds_in_suite() {
        let m = ContactModel::s3_hopf();
        let r = cr_structure(&m, &quick()).unwrap();
        assert!(r.pass(), "{:?}", r.checks);
    }

    #[test]
    fn spectral_suite_small() {
        let r = spectral_invariants(6, &[-2, 0, 3], &quick()).unwrap();
        assert!(r.pass(), "{:?}", r.checks);
    }
}
