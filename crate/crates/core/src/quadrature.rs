//! Product quadrature on S³ in Hopf coordinates.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::forms::ChartPoint;

/// Gauss-Legendre in `u = cos 2η` times trapezoid in `φ₁`, `φ₂`.
///
/// Weights integrate against the round volume `¼ du dφ₁ dφ₂`, total `2π²`.
#[derive(Clone, Debug)]
pub struct S3Quadrature {
    nodes: Vec<(ChartPoint, f64)>,
}

pub const ROUND_VOLUME: f64 = 2.0 * PI * PI;

impl S3Quadrature {
    pub fn new(gl_order: usize, phi_points: usize) -> Self {
        let gl = GaussLegendre::new(NonZeroUsize::new(gl_order.max(1)).unwrap());
        let m = phi_points.max(1);
        let h = 2.0 * PI / m as f64;
        let mut nodes = Vec::with_capacity(gl_order * m * m);
        for &(u, w) in gl.iter() {
            let eta = 0.5 * u.acos();
            for a in 0..m {
                for b in 0..m {
                    let p = ChartPoint::new(vec![eta, a as f64 * h, b as f64 * h]);
                    nodes.push((p, 0.25 * w * h * h));
                }
            }
        }
        Self { nodes }
    }

    pub fn nodes(&self) -> &[(ChartPoint, f64)] {
        &self.nodes
    }

    pub fn integrate(&self, f: impl Fn(&ChartPoint) -> f64) -> f64 {
        self.nodes.iter().map(|(p, w)| w * f(p)).sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(&ChartPoint) -> Complex64) -> Complex64 {
        self.nodes.iter().map(|(p, w)| f(p) * *w).sum()
    }
}

impl Default for S3Quadrature {
    fn default() -> Self {
        Self::new(32, 32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_volume() {
        let q = S3Quadrature::new(8, 4);
        assert!((q.integrate(|_| 1.0) - ROUND_VOLUME).abs() < 1e-12);
    }

    #[test]
    fn moments_of_z() {
        // |z|² = cos²η integrates to π², |z|⁴ to 2π²/3.
        let q = S3Quadrature::default();
        let z2 = q.integrate(|p| p.coords[0].cos().powi(2));
        assert!((z2 - PI * PI).abs() < 1e-12);
        let z4 = q.integrate(|p| p.coords[0].cos().powi(4));
        assert!((z4 - ROUND_VOLUME / 3.0).abs() < 1e-12);
    }
}
