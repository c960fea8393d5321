//! Drift, diffusion, and normalization data for the Fokker-Planck benchmark.
//!
//! The drift pulls particles toward a ring of radius `ring_radius` around a
//! center that moves along the diagonal as `e^{-t}`; the stationary shape in
//! the moving frame is the ring density `exp(-2 g^2 / sigma^2) / K` with
//! `g = |x - c|^2 - r^2`.

use crate::domain::BoxDomain;
use crate::numerics::trapezoid_2d;

#[derive(Debug, Clone)]
pub struct FokkerPlanckAux {
    pub sigma: f64,
    pub ring_radius: f64,
    /// Scalar diffusion `D = sigma^2 / 2`.
    pub diffusion: f64,
    /// Normalizer `K` of the initial/analytic density.
    pub normalizer: f64,
}

/// `K = integral of exp(-(2/sigma^2) ((x-1)^2 + (y-1)^2 - r^2)^2)` by the
/// composite trapezoid rule on `quad_box` with `n_grid` nodes per axis.
pub fn fokker_planck_normalizer(
    sigma: f64,
    ring_radius: f64,
    quad_box: &BoxDomain,
    n_grid: usize,
) -> f64 {
    assert_eq!(quad_box.dim(), 2);
    let c = 2.0 / (sigma * sigma);
    let r2 = ring_radius * ring_radius;
    trapezoid_2d(
        [quad_box.lo()[0], quad_box.lo()[1]],
        [quad_box.hi()[0], quad_box.hi()[1]],
        n_grid,
        |x, y| {
            let g = (x - 1.0) * (x - 1.0) + (y - 1.0) * (y - 1.0) - r2;
            (-c * g * g).exp()
        },
    )
}

impl FokkerPlanckAux {
    /// Builds the benchmark coefficients; `K` uses the default quadrature box
    /// `[-1, 3]^2` with 2001 nodes per axis.
    pub fn new(sigma: f64, ring_radius: f64) -> Self {
        let quad_box = BoxDomain::cube(-1.0, 3.0, 2).unwrap();
        let normalizer = fokker_planck_normalizer(sigma, ring_radius, &quad_box, 2001);
        FokkerPlanckAux {
            sigma,
            ring_radius,
            diffusion: 0.5 * sigma * sigma,
            normalizer,
        }
    }

    /// Drift vector `f(x, y, t)`.
    pub fn drift(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let c = (-t).exp();
        let (xi, psi) = (x - c, y - c);
        let g = xi * xi + psi * psi - self.ring_radius * self.ring_radius;
        [-4.0 * xi * g - c, -4.0 * psi * g - c]
    }

    /// Closed-form divergence of the drift.
    pub fn drift_divergence(&self, x: f64, y: f64, t: f64) -> f64 {
        let c = (-t).exp();
        let (xi, psi) = (x - c, y - c);
        let r2 = self.ring_radius * self.ring_radius;
        -8.0 * (2.0 * xi * xi + 2.0 * psi * psi - r2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_matches_finite_differences() {
        let aux = FokkerPlanckAux::new(0.1, 0.5);
        let h = 1e-6;
        for &(x, y, t) in &[(1.0, 1.0, 0.0), (0.7, 1.3, 0.4), (0.3, 0.5, 1.0)] {
            let fd = (aux.drift(x + h, y, t)[0] - aux.drift(x - h, y, t)[0]) / (2.0 * h)
                + (aux.drift(x, y + h, t)[1] - aux.drift(x, y - h, t)[1]) / (2.0 * h);
            let exact = aux.drift_divergence(x, y, t);
            assert!(
                (fd - exact).abs() < 1e-6 * (1.0 + exact.abs()),
                "at ({x},{y},{t}): fd {fd} vs {exact}"
            );
        }
    }

    #[test]
    fn drift_at_initial_center() {
        let aux = FokkerPlanckAux::new(0.1, 0.5);
        let f = aux.drift(1.0, 1.0, 0.0);
        assert!((f[0] + 1.0).abs() < 1e-14);
        assert!((f[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn normalizer_positive_and_grid_converged() {
        let quad_box = BoxDomain::cube(-1.0, 3.0, 2).unwrap();
        let k1 = fokker_planck_normalizer(0.1, 0.5, &quad_box, 2001);
        let k2 = fokker_planck_normalizer(0.1, 0.5, &quad_box, 4001);
        assert!(k1 > 0.0);
        assert!((k2 - k1).abs() / k1 < 1e-8, "k1={k1} k2={k2}");
    }

    #[test]
    fn normalizer_support_concentrated() {
        let wide = BoxDomain::cube(-1.0, 3.0, 2).unwrap();
        let tight = BoxDomain::cube(0.0, 2.0, 2).unwrap();
        let kw = fokker_planck_normalizer(0.1, 0.5, &wide, 2001);
        let kt = fokker_planck_normalizer(0.1, 0.5, &tight, 2001);
        assert!((kw - kt).abs() / kw < 1e-10, "kw={kw} kt={kt}");
    }

    #[test]
    fn normalizer_large_sigma_limit_is_box_area() {
        let quad_box = BoxDomain::cube(-1.0, 3.0, 2).unwrap();
        let k = fokker_planck_normalizer(1e9, 0.5, &quad_box, 501);
        assert!((k - 16.0).abs() < 1e-6, "k={k}");
    }

    #[test]
    fn normalizer_regression_value() {
        // Frozen from the quadrature above (sigma = 0.1, r = 0.5); guards the
        // integrand and grid against accidental changes.
        let aux = FokkerPlanckAux::new(0.1, 0.5);
        assert!(
            (aux.normalizer - 0.393_740_135_776_799_6).abs() < 1e-12,
            "K = {}",
            aux.normalizer
        );
    }
}
