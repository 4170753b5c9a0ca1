//! Seeded random points and fields for the property suites.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::ScalarField;
use crate::forms::{Chart, ChartPoint, KForm, VectorField};

pub type SuiteRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SuiteRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform point in the chart's sampling box.
pub fn point(rng: &mut SuiteRng, chart: &Chart) -> ChartPoint {
    ChartPoint::new(chart.sample.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect())
}

pub fn points(rng: &mut SuiteRng, chart: &Chart, count: usize) -> Vec<ChartPoint> {
    (0..count).map(|_| point(rng, chart)).collect()
}

fn coeff(rng: &mut SuiteRng) -> f64 {
    rng.gen_range(-1.0..1.0)
}

/// Random polynomial of total degree ≤ `deg` with a handful of terms.
pub fn polynomial(rng: &mut SuiteRng, dim: usize, deg: u32) -> ScalarField {
    let terms = rng.gen_range(2..=4);
    let mut f = ScalarField::constant(coeff(rng));
    for _ in 0..terms {
        let mut m = ScalarField::constant(coeff(rng));
        let d = rng.gen_range(1..=deg.max(1));
        for _ in 0..d {
            m = m * ScalarField::var(rng.gen_range(0..dim));
        }
        f = f + m;
    }
    f
}

/// Random mix of polynomial and trigonometric terms.
pub fn field(rng: &mut SuiteRng, dim: usize) -> ScalarField {
    let mut f = polynomial(rng, dim, 3);
    let trig = rng.gen_range(1..=2);
    for _ in 0..trig {
        let arg = ScalarField::var(rng.gen_range(0..dim)) * rng.gen_range(-2.0..2.0)
            + ScalarField::constant(coeff(rng));
        let t = if rng.gen_bool(0.5) { arg.sin() } else { arg.cos() };
        let w = ScalarField::var(rng.gen_range(0..dim)) * coeff(rng) + ScalarField::constant(coeff(rng));
        f = f + t * w;
    }
    if rng.gen_bool(0.3) {
        f = f + (ScalarField::var(rng.gen_range(0..dim)) * 0.3).exp() * coeff(rng);
    }
    f
}

pub fn vector_field(rng: &mut SuiteRng, dim: usize) -> VectorField {
    VectorField::new((0..dim).map(|_| field(rng, dim)).collect())
}

pub fn kform(rng: &mut SuiteRng, dim: usize, degree: usize) -> KForm {
    let mut w = KForm::zero(dim, degree);
    let mut idx: Vec<usize> = (0..degree).collect();
    loop {
        w.add_term(idx.clone(), 1.0, field(rng, dim));
        // Next strictly increasing tuple.
        let mut k = degree;
        loop {
            if k == 0 {
                return w;
            }
            k -= 1;
            if idx[k] < dim - degree + k {
                idx[k] += 1;
                for m in k + 1..degree {
                    idx[m] = idx[m - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_streams_repeat() {
        let chart = Chart { domain: vec![(-3.0, 3.0); 3], sample: vec![(-2.0, 2.0); 3] };
        let a = points(&mut rng(5), &chart, 4);
        let b = points(&mut rng(5), &chart, 4);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| chart.contains(p)));
    }

    #[test]
    fn kform_fills_every_slot() {
        assert_eq!(kform(&mut rng(1), 3, 2).comps.len(), 3);
        assert_eq!(kform(&mut rng(1), 3, 0).comps.len(), 1);
        assert_eq!(kform(&mut rng(1), 3, 3).comps.len(), 1);
    }
}
