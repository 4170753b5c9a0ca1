use approx::assert_relative_eq;
use proptest::prelude::*;

use contactq::contact::ContactModel;
use contactq::forms::{exterior_derivative, interior_product, lie_derivative, wedge, KForm};
use contactq::jet::Jet2;
use contactq::sampling;
use contactq::spectral::{self, Monomial, Poly};

fn model(k: usize) -> ContactModel {
    match k % 3 {
        0 => ContactModel::heisenberg(),
        1 => ContactModel::s3_hopf(),
        _ => ContactModel::t3(1).unwrap(),
    }
}

fn monomial() -> impl Strategy<Value = Monomial> {
    (0u32..4, 0u32..4, 0u32..4, 0u32..4).prop_map(|(a, b, c, d)| Monomial::new(a, b, c, d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_of_d_vanishes(seed in any::<u64>(), k in 0usize..3) {
        let m = model(k);
        let mut rng = sampling::rng(seed);
        let w = sampling::kform(&mut rng, 3, 1);
        let p = sampling::point(&mut rng, &m.chart);
        prop_assert!(exterior_derivative(&exterior_derivative(&w)).max_abs(&p) <= 1e-10);
    }

    #[test]
    fn cartan_on_two_forms_is_closed_under_d(seed in any::<u64>(), k in 0usize..3) {
        // L_X commutes with d.
        let m = model(k);
        let mut rng = sampling::rng(seed);
        let x = sampling::vector_field(&mut rng, 3);
        let w = sampling::kform(&mut rng, 3, 1);
        let p = sampling::point(&mut rng, &m.chart);
        let a = lie_derivative(&x, &exterior_derivative(&w));
        let b = exterior_derivative(&lie_derivative(&x, &w));
        let scale = a.max_abs(&p).max(1.0);
        prop_assert!((a - b).max_abs(&p) <= 1e-10 * scale);
    }

    #[test]
    fn interior_product_is_an_antiderivation(seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let x = sampling::vector_field(&mut rng, 3);
        let a = sampling::kform(&mut rng, 3, 1);
        let b = sampling::kform(&mut rng, 3, 1);
        let p = ContactModel::heisenberg().chart.sample.iter().map(|(l, h)| 0.5 * (l + h) + 0.3).collect();
        let p = contactq::forms::ChartPoint::new(p);
        let lhs = interior_product(&x, &wedge(&a, &b)).unwrap();
        let rhs = wedge(&interior_product(&x, &a).unwrap(), &b) - wedge(&a, &interior_product(&x, &b).unwrap());
        let scale = lhs.max_abs(&p).max(1.0);
        prop_assert!((lhs - rhs).max_abs(&p) <= 1e-12 * scale);
    }

    #[test]
    fn wedge_of_one_form_with_itself_vanishes(seed in any::<u64>()) {
        let mut rng = sampling::rng(seed);
        let a = sampling::kform(&mut rng, 3, 1);
        let p = sampling::point(&mut rng, &ContactModel::heisenberg().chart);
        prop_assert!(wedge(&a, &a).max_abs(&p) <= 1e-12 * a.max_abs(&p).powi(2).max(1.0));
    }

    #[test]
    fn bracket_is_antisymmetric(seed in any::<u64>(), k in 0usize..3) {
        let m = model(k);
        let mut rng = sampling::rng(seed);
        let f = sampling::field(&mut rng, 3);
        let g = sampling::field(&mut rng, 3);
        let p = sampling::point(&mut rng, &m.chart);
        let a = m.jacobi_bracket(&f, &g, &p).unwrap();
        let b = m.jacobi_bracket(&g, &f, &p).unwrap();
        prop_assert!((a + b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn reeb_field_is_normalized_and_in_kernel(seed in any::<u64>(), k in 0usize..3) {
        let m = model(k);
        let mut rng = sampling::rng(seed);
        let p = sampling::point(&mut rng, &m.chart);
        let xi = m.reeb_field(&p).unwrap();
        prop_assert!((m.theta_at(&p, &xi) - 1.0).abs() <= 1e-12);
        for j in 0..3 {
            let e: Vec<f64> = (0..3).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
            prop_assert!(m.dtheta_at(&p, &xi, &e).abs() <= 1e-12);
        }
    }

    #[test]
    fn jet_product_rule(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let x = Jet2::variable(a, 0, 2);
        let y = Jet2::variable(b, 1, 2);
        let f = x.sin() * y.exp();
        assert_relative_eq!(f.grad[0], a.cos() * b.exp(), max_relative = 1e-14);
        assert_relative_eq!(f.grad[1], a.sin() * b.exp(), max_relative = 1e-14, epsilon = 1e-300);
        assert_relative_eq!(f.hess(0, 1), a.cos() * b.exp(), max_relative = 1e-14);
    }

    #[test]
    fn zbar_preserves_weight(m in monomial()) {
        let img = spectral::zbar_monomial(m);
        for k in img.0.keys() {
            prop_assert_eq!(k.weight(), m.weight() + 2);
            prop_assert_eq!(k.degree(), m.degree());
        }
    }

    #[test]
    fn rewriting_preserves_values(m in monomial(), eta in 0.2f64..1.3, p1 in -3.0f64..3.0, p2 in -3.0f64..3.0) {
        let p = contactq::forms::ChartPoint::new(vec![eta, p1, p2]);
        let c = Poly::monomial(m).canonical();
        prop_assert!(c.0.keys().all(|k| k.is_canonical()));
        prop_assert!((c.eval(&p) - m.eval(&p)).norm() <= 1e-12);
    }

    #[test]
    fn gram_is_hermitian_with_positive_pivots(n in -3i64..4, cap in 2u32..7) {
        let basis = spectral::enumerate_basis(cap, n);
        let g = spectral::gram_exact(&basis.monomials);
        for i in 0..g.len() {
            for j in 0..g.len() {
                prop_assert_eq!(&g[i][j], &g[j][i]);
            }
        }
        prop_assert!(spectral::ldl_exact(&g).is_some());
    }
}

#[test]
fn zero_form_of_constant_is_closed() {
    let w = KForm::function(3, contactq::expr::ScalarField::constant(2.0));
    let p = contactq::forms::ChartPoint::new(vec![0.1, 0.2, 0.3]);
    assert_eq!(exterior_derivative(&w).max_abs(&p), 0.0);
}
