//! The limit problem for the normalized induced field.
//!
//! `F(H) = ½((1−α)|H₃| + α‖H‖_g + |H − H_ex|²)` is minimized over constant
//! fields. Its minimizer is the point of `K + H_ex` nearest to the origin, where
//! `K` is a vertical cylinder of height `1−α` and radius `α/(2λ)` capped by two
//! half-ellipsoids. [`body`] holds `K` and the exact projection, [`oracle`] a
//! derivative-free direct minimizer of `F` used to cross-check it, and [`phase`]
//! the regime classifier and sweeps.

pub mod body;
pub mod oracle;
pub mod phase;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{norm_g, AnisotropyMetric, FieldVector};

pub use body::{project_onto_k_shifted, ConvexBodyK};
pub use oracle::minimize_f_oracle;
pub use phase::{
    classify, critical_field_by_bisection, phase_diagram_sweep, write_sweep_csv, PhaseResult,
    Regime, SweepRow,
};

/// Parameters of the limit energy: layer-spacing exponent `α` (`s = ε^α`),
/// anisotropy and the normalized applied field `H_ex`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    alpha: f64,
    metric: AnisotropyMetric,
    h_ex: FieldVector,
}

impl LimitParams {
    pub fn new(alpha: f64, metric: AnisotropyMetric, h_ex: FieldVector) -> Result<Self> {
        validate_alpha(alpha)?;
        let h_ex = h_ex.validated()?;
        Ok(Self { alpha, metric, h_ex })
    }

    /// Applied field of magnitude `magnitude` at angle `theta` above the planes,
    /// `H_ex = |H_ex| (cos θ, 0, sin θ)`.
    pub fn at_angle(alpha: f64, metric: AnisotropyMetric, theta: f64, magnitude: f64) -> Result<Self> {
        Self::new(alpha, metric, applied_field(theta, magnitude))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn metric(&self) -> AnisotropyMetric {
        self.metric
    }

    pub fn lambda(&self) -> f64 {
        self.metric.lambda()
    }

    pub fn h_ex(&self) -> FieldVector {
        self.h_ex
    }

    pub fn with_h_ex(&self, h_ex: FieldVector) -> Result<Self> {
        Self::new(self.alpha, self.metric, h_ex)
    }

    /// Cap offset `(1−α)/2`.
    pub fn z0(&self) -> f64 {
        0.5 * (1.0 - self.alpha)
    }

    /// Cylinder radius `α/(2λ)`.
    pub fn radius(&self) -> f64 {
        0.5 * self.alpha / self.metric.lambda()
    }

    /// Vertical semi-axis of the caps, `α/2`.
    pub fn cap_semi_axis(&self) -> f64 {
        0.5 * self.alpha
    }

    pub fn body(&self) -> ConvexBodyK {
        ConvexBodyK::from_params(self)
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn applied_field(theta: f64, magnitude: f64) -> FieldVector {
    FieldVector::new(magnitude * theta.cos(), 0.0, magnitude * theta.sin())
}

/// The limit energy `F(H)`.
pub fn eval_f(h: FieldVector, p: &LimitParams) -> f64 {
    let a = p.alpha;
    0.5 * ((1.0 - a) * h.h3.abs() + a * norm_g(h, &p.metric) + (h - p.h_ex).norm_sq())
}

/// Support function of `K`: `σ_K(V) = ((1−α)/2)|V₃| + (α/2)‖V‖_g`.
pub fn support_function(v: FieldVector, p: &LimitParams) -> f64 {
    0.5 * (1.0 - p.alpha) * v.h3.abs() + 0.5 * p.alpha * norm_g(v, &p.metric)
}

/// Closed-form lower critical field for an applied field at angle `theta`
/// from the planes.
pub fn hc1(theta: f64, alpha: f64, metric: &AnisotropyMetric) -> Result<f64> {
    validate_alpha(alpha)?;
    if !(theta.is_finite() && (-1e-15..=FRAC_PI_2 + 1e-15).contains(&theta)) {
        return Err(Error::InvalidParameter(format!("theta must lie in [0, pi/2], got {theta}")));
    }
    let lambda = metric.lambda();
    let (sin, cos) = theta.sin_cos();
    // tan θ ≤ λ(1−α)/α without dividing by cos θ
    if alpha * sin <= lambda * (1.0 - alpha) * cos {
        return Ok(alpha / (2.0 * lambda * cos));
    }
    let lc = lambda * cos;
    let radicand = alpha * alpha * sin * sin - (1.0 - 2.0 * alpha) * lc * lc;
    if radicand < -1e-12 {
        return Err(Error::Consistency(format!(
            "negative radicand {radicand:e} on the cap branch of hc1"
        )));
    }
    Ok(((1.0 - alpha) * sin + radicand.max(0.0).sqrt()) / (2.0 * (lc * lc + sin * sin)))
}

/// Angle at which the critical field switches from the cylinder branch to the
/// cap branch, `arctan(λ(1−α)/α)`.
pub fn lock_in_angle(alpha: f64, metric: &AnisotropyMetric) -> f64 {
    (metric.lambda() * (1.0 - alpha) / alpha).atan()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(alpha: f64, lambda: f64, h_ex: FieldVector) -> LimitParams {
        LimitParams::new(alpha, AnisotropyMetric::new(lambda).unwrap(), h_ex).unwrap()
    }

    #[test]
    fn eval_f_examples() {
        let p = params(0.3, 2.0, FieldVector::ZERO);
        assert_eq!(eval_f(FieldVector::ZERO, &p), 0.0);
        let hex = FieldVector::new(1.0, -2.0, 0.5);
        let p = params(0.3, 2.0, hex);
        assert!((eval_f(FieldVector::ZERO, &p) - 0.5 * hex.norm_sq()).abs() < 1e-15);
        let p = params(0.5, 1.0, FieldVector::ZERO);
        assert!((eval_f(FieldVector::new(0.0, 0.0, 1.0), &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        let m = AnisotropyMetric::isotropic();
        assert!(LimitParams::new(0.0, m, FieldVector::ZERO).is_err());
        assert!(LimitParams::new(1.0, m, FieldVector::ZERO).is_err());
        assert!(LimitParams::new(1.5, m, FieldVector::ZERO).is_err());
        assert!(LimitParams::new(0.5, m, FieldVector::new(f64::NAN, 0.0, 0.0)).is_err());
        let p = params(0.4, 2.0, FieldVector::ZERO);
        assert!((p.z0() - 0.3).abs() < 1e-16);
        assert!((p.radius() - 0.1).abs() < 1e-16);
        assert!((p.cap_semi_axis() - 0.2).abs() < 1e-16);
    }

    #[test]
    fn hc1_examples() {
        let iso = AnisotropyMetric::isotropic();
        assert!((hc1(0.0, 0.5, &iso).unwrap() - 0.25).abs() < 1e-15);
        for alpha in [0.05, 0.3, 0.5, 0.8, 0.95] {
            for lambda in [0.2, 1.0, 5.0] {
                let m = AnisotropyMetric::new(lambda).unwrap();
                assert!((hc1(PI / 2.0, alpha, &m).unwrap() - 0.5).abs() < 1e-12);
                assert!((hc1(0.0, alpha, &m).unwrap() - alpha / (2.0 * lambda)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hc1_continuous_at_branch_split() {
        for (alpha, lambda) in [(0.5, 1.0), (0.2, 3.0), (0.9, 0.4), (0.3, 0.25)] {
            let m = AnisotropyMetric::new(lambda).unwrap();
            let th = lock_in_angle(alpha, &m);
            let below = hc1(th - 1e-11, alpha, &m).unwrap();
            let above = hc1(th + 1e-11, alpha, &m).unwrap();
            assert!((below - above).abs() < 1e-9, "{below} vs {above}");
        }
    }

    #[test]
    fn hc1_rejects_out_of_range() {
        let iso = AnisotropyMetric::isotropic();
        assert!(hc1(-0.1, 0.5, &iso).is_err());
        assert!(hc1(2.0, 0.5, &iso).is_err());
        assert!(hc1(0.3, 1.2, &iso).is_err());
    }

    #[test]
    fn hc1_matches_membership_of_applied_field_in_k() {
        // H* = 0 iff H_ex ∈ K, so H_c1(θ) is the distance from 0 to ∂K along the ray.
        for (alpha, lambda) in [(0.5, 1.0), (0.2, 3.0), (0.7, 0.5)] {
            let m = AnisotropyMetric::new(lambda).unwrap();
            for k in 0..=20 {
                let theta = FRAC_PI_2 * k as f64 / 20.0;
                let h = hc1(theta, alpha, &m).unwrap();
                let body = params(alpha, lambda, FieldVector::ZERO).body();
                assert!(body.contains(applied_field(theta, h * (1.0 - 1e-9))));
                assert!(!body.contains(applied_field(theta, h * (1.0 + 1e-9))));
            }
        }
    }

    #[test]
    fn f_is_convex_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let p = params(
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.2..5.0),
                FieldVector::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
            );
            let a = FieldVector::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let b = FieldVector::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let mid = 0.5 * (a + b);
            assert!(eval_f(mid, &p) <= 0.5 * (eval_f(a, &p) + eval_f(b, &p)) + 1e-12);
        }
    }
}
