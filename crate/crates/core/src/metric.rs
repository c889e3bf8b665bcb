//! Anisotropic metric `g = diag(1, 1, λ²)` and the two norms it induces on
//! constant 2-forms.
//!
//! A 2-form `H₁ dx²∧dx³ + H₂ dx³∧dx¹ + H₃ dx¹∧dx²` is stored as the vector
//! `(H₁, H₂, H₃)`; all metric algebra reduces to closed-form component formulas.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropyMetric {
    lambda: f64,
}

impl AnisotropyMetric {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    pub fn isotropic() -> Self {
        Self { lambda: 1.0 }
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Metric inner product `g(X, Y)` of two vectors.
    pub fn inner(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        x[0] * y[0] + x[1] * y[1] + self.lambda * self.lambda * x[2] * y[2]
    }

    /// Metric length `|X|_g`.
    pub fn vector_norm(&self, x: [f64; 3]) -> f64 {
        x[0].hypot(x[1]).hypot(self.lambda * x[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldVector {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl FieldVector {
    pub const ZERO: FieldVector = FieldVector { h1: 0.0, h2: 0.0, h3: 0.0 };

    #[inline]
    pub const fn new(h1: f64, h2: f64, h3: f64) -> Self {
        Self { h1, h2, h3 }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.h1, self.h2, self.h3]
    }

    pub fn is_finite(&self) -> bool {
        self.h1.is_finite() && self.h2.is_finite() && self.h3.is_finite()
    }

    pub fn validated(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::InvalidParameter(format!("field vector {self:?} is not finite")))
        }
    }

    #[inline]
    pub fn dot(self, other: Self) -> f64 {
        self.h1 * other.h1 + self.h2 * other.h2 + self.h3 * other.h3
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.h2 * o.h3 - self.h3 * o.h2,
            self.h3 * o.h1 - self.h1 * o.h3,
            self.h1 * o.h2 - self.h2 * o.h1,
        )
    }

    /// Euclidean length.
    pub fn norm(self) -> f64 {
        self.h1.hypot(self.h2).hypot(self.h3)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Length of the horizontal part `(H₁, H₂)`.
    pub fn horizontal_norm(self) -> f64 {
        self.h1.hypot(self.h2)
    }

    /// Evaluates the 2-form on a pair of vectors: `H(X, Y) = H · (X × Y)`.
    pub fn eval_form(self, x: [f64; 3], y: [f64; 3]) -> f64 {
        self.dot(Self::from_array(x).cross(Self::from_array(y)))
    }

    pub fn max_abs_diff(self, other: Self) -> f64 {
        (self.h1 - other.h1)
            .abs()
            .max((self.h2 - other.h2).abs())
            .max((self.h3 - other.h3).abs())
    }
}

impl Add for FieldVector {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.h1 + o.h1, self.h2 + o.h2, self.h3 + o.h3)
    }
}

impl Sub for FieldVector {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.h1 - o.h1, self.h2 - o.h2, self.h3 - o.h3)
    }
}

impl Neg for FieldVector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.h1, -self.h2, -self.h3)
    }
}

impl Mul<FieldVector> for f64 {
    type Output = FieldVector;
    fn mul(self, v: FieldVector) -> FieldVector {
        FieldVector::new(self * v.h1, self * v.h2, self * v.h3)
    }
}

/// `‖H‖_g = λ⁻¹ √(H₁² + H₂² + λ²H₃²)`.
pub fn norm_g(h: FieldVector, m: &AnisotropyMetric) -> f64 {
    let l = m.lambda();
    h.h1.hypot(h.h2).hypot(l * h.h3) / l
}

/// `‖H‖_{g⁻¹} = √(λ²(H₁² + H₂²) + H₃²)`.
pub fn norm_g_inv(h: FieldVector, m: &AnisotropyMetric) -> f64 {
    let l = m.lambda();
    (l * h.h1).hypot(l * h.h2).hypot(h.h3)
}

/// `(H₁, H₂, 0)`.
pub fn horizontal_part(h: FieldVector) -> FieldVector {
    FieldVector::new(h.h1, h.h2, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(l: f64) -> AnisotropyMetric {
        AnisotropyMetric::new(l).unwrap()
    }

    #[test]
    fn norm_g_examples() {
        assert_eq!(norm_g(FieldVector::ZERO, &m(2.0)), 0.0);
        for l in [0.1, 1.0, 3.7, 250.0] {
            assert!((norm_g(FieldVector::new(0.0, 0.0, 1.0), &m(l)) - 1.0).abs() < 1e-15);
        }
        assert!((norm_g(FieldVector::new(3.0, 4.0, 0.0), &m(2.0)) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn norm_g_inv_examples() {
        for l in [0.1, 1.0, 3.7] {
            assert!((norm_g_inv(FieldVector::new(0.0, 0.0, 1.0), &m(l)) - 1.0).abs() < 1e-15);
        }
        assert!((norm_g_inv(FieldVector::new(1.0, 0.0, 0.0), &m(3.0)) - 3.0).abs() < 1e-15);
        let h = FieldVector::new(0.3, -1.2, 2.0);
        assert!((norm_g_inv(h, &m(1.0)) - h.norm()).abs() < 1e-15);
    }

    #[test]
    fn horizontal_part_examples() {
        assert_eq!(horizontal_part(FieldVector::new(1.0, 2.0, 3.0)), FieldVector::new(1.0, 2.0, 0.0));
        assert_eq!(horizontal_part(FieldVector::new(0.0, 0.0, 5.0)), FieldVector::ZERO);
        let h = FieldVector::new(-4.0, 0.5, 0.0);
        assert_eq!(horizontal_part(horizontal_part(h)), h);
    }

    #[test]
    fn extreme_lambda_does_not_overflow() {
        let h = FieldVector::new(1e200, 1e200, 1e200);
        assert!(norm_g(h, &m(1e-3)).is_finite());
        assert!(norm_g_inv(h, &m(1e3)).is_finite());
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(AnisotropyMetric::new(0.0).is_err());
        assert!(AnisotropyMetric::new(-1.0).is_err());
        assert!(AnisotropyMetric::new(f64::NAN).is_err());
        assert!(AnisotropyMetric::new(f64::INFINITY).is_err());
    }

    #[test]
    fn norm_g_is_the_form_norm_sup() {
        // ‖H‖_g = sup H(X,Y)/(|X|_g|Y|_g): a random search never exceeds it and gets close.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let metric = m(2.5);
        let h = FieldVector::new(0.7, -0.4, 1.3);
        let nh = norm_g(h, &metric);
        let mut best: f64 = 0.0;
        for _ in 0..200_000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let r = h.eval_form(x, y) / (metric.vector_norm(x) * metric.vector_norm(y));
            assert!(r <= nh * (1.0 + 1e-12));
            best = best.max(r);
        }
        assert!(best > 0.97 * nh);
    }

    fn arb_vec() -> impl Strategy<Value = FieldVector> {
        (-1e3..1e3f64, -1e3..1e3f64, -1e3..1e3f64).prop_map(|(a, b, c)| FieldVector::new(a, b, c))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn norms_are_norms(a in arb_vec(), b in arb_vec(), c in -50.0..50.0f64, l in 1e-3..1e3f64) {
            let metric = m(l);
            for norm in [norm_g, norm_g_inv] {
                let na = norm(a, &metric);
                let nb = norm(b, &metric);
                let nab = norm(a + b, &metric);
                prop_assert!(nab <= (na + nb) * (1.0 + 1e-12));
                let nca = norm(c * a, &metric);
                prop_assert!((nca - c.abs() * na).abs() <= 1e-12 * (1.0 + nca));
            }
        }

        #[test]
        fn isotropic_norms_are_euclidean(a in arb_vec()) {
            let iso = AnisotropyMetric::isotropic();
            let e = a.norm();
            prop_assert!((norm_g(a, &iso) - e).abs() <= 1e-15 * (1.0 + e));
            prop_assert!((norm_g_inv(a, &iso) - e).abs() <= 1e-15 * (1.0 + e));
        }

        #[test]
        fn product_of_norms_dominates_square(a in arb_vec(), l in 1e-2..1e2f64) {
            let metric = m(l);
            let lhs = norm_g(a, &metric) * norm_g_inv(a, &metric);
            prop_assert!(lhs >= a.norm_sq() * (1.0 - 1e-12));
        }
    }
}
