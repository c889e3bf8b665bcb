use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::metric::{AnisotropyMetric, FieldVector};

fn g_inner(m: &AnisotropyMetric, u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let l = m.lambda();
    u.x * v.x + u.y * v.y + l * l * u.z * v.z
}

fn to_vec(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

pub(crate) fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [[m[(0, 0)], m[(0, 1)], m[(0, 2)]], [m[(1, 0)], m[(1, 1)], m[(1, 2)]], [m[(2, 0)], m[(2, 1)], m[(2, 2)]]]
}

pub(crate) fn from_array(a: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| a[i][j])
}

/// A `g`-orthogonal basis with equal `g`-norms, `b₃` spanning the kernel of
/// the target 2-form `h` and `h(b₁, b₂) = 2πα`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnisotropicBasis {
    pub b1: [f64; 3],
    pub b2: [f64; 3],
    pub b3: [f64; 3],
}

impl AnisotropicBasis {
    pub fn vectors(&self) -> [Vector3<f64>; 3] {
        [Vector3::from(self.b1), Vector3::from(self.b2), Vector3::from(self.b3)]
    }

    /// Matrix with the basis vectors as columns.
    pub fn matrix(&self) -> Matrix3<f64> {
        let [a, b, c] = self.vectors();
        Matrix3::from_columns(&[a, b, c])
    }

    /// `Φ₀`, the linear map sending `b_i` to `e_i`.
    pub fn phi0(&self) -> Matrix3<f64> {
        self.matrix().try_inverse().expect("basis is nondegenerate")
    }

    /// Largest violation among the defining relations, relative to the scale
    /// of each quantity.
    pub fn defect(&self, h: FieldVector, alpha: f64, m: &AnisotropyMetric) -> f64 {
        let v = self.vectors();
        let n2 = g_inner(m, &v[0], &v[0]);
        let mut worst: f64 = 0.0;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            worst = worst.max(g_inner(m, &v[i], &v[j]).abs() / n2);
        }
        for vi in &v[1..] {
            worst = worst.max((g_inner(m, vi, vi) - n2).abs() / n2);
        }
        let hv = Vector3::new(h.h1, h.h2, h.h3);
        let b3n = v[2].norm();
        for e in [Vector3::x(), Vector3::y(), Vector3::z()] {
            worst = worst.max(hv.dot(&v[2].cross(&e)).abs() / (hv.norm() * b3n));
        }
        let hb = hv.dot(&v[0].cross(&v[1]));
        worst.max((hb - 2.0 * PI * alpha).abs() / (2.0 * PI * alpha))
    }
}

/// Builds the basis of the anisotropic rescaling for a target field `h` with
/// `h₃ ≠ 0`.
pub fn build_basis(h: FieldVector, alpha: f64, m: &AnisotropyMetric) -> Result<AnisotropicBasis> {
    crate::limit::validate_alpha(alpha)?;
    h.validated()?;
    if h.h3 == 0.0 || h.h3.abs() <= 1e-14 * h.norm() {
        return Err(Error::OutOfScope(
            "target field is parallel to the planes (h3 = 0); this construction needs a vertical component".into(),
        ));
    }
    let hv = Vector3::new(h.h1, h.h2, h.h3);
    let mut b3 = hv;
    if b3.z < 0.0 {
        b3 = -b3;
    }
    let reduce = |v: Vector3<f64>, against: &[Vector3<f64>]| {
        let mut w = v;
        for a in against {
            w -= a * (g_inner(m, &w, a) / g_inner(m, a, a));
        }
        w
    };
    // e₁ and e₂ are never both in the span of b₃ because b₃ is not horizontal.
    let c1 = reduce(Vector3::x(), &[b3]);
    let c2 = reduce(Vector3::y(), &[b3]);
    let (s1, s2) = if g_inner(m, &c1, &c1) >= g_inner(m, &c2, &c2) { (Vector3::x(), Vector3::y()) } else { (Vector3::y(), Vector3::x()) };
    let b1 = reduce(s1, &[b3]);
    let b2 = reduce(s2, &[b3, b1]);
    let unit = |v: Vector3<f64>| v / g_inner(m, &v, &v).sqrt();
    let (b1, mut b2, b3) = (unit(b1), unit(b2), unit(b3));
    let mut pairing = hv.dot(&b1.cross(&b2));
    if pairing < 0.0 {
        b2 = -b2;
        pairing = -pairing;
    }
    let kappa = (2.0 * PI * alpha / pairing).sqrt();
    Ok(AnisotropicBasis { b1: to_vec(&(b1 * kappa)), b2: to_vec(&(b2 * kappa)), b3: to_vec(&(b3 * kappa)) })
}

/// Rational approximation of the rescaling so that the configuration is
/// periodic on the lattice cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodization {
    pub s: f64,
    /// `|ln s|^{1/2}`.
    pub scale: f64,
    /// Coordinates of the cell periods under `Φ̂_s = |ln s|^{1/2} Φ₀`.
    pub scaled_coords: [[f64; 3]; 3],
    /// The same with the first two rows rounded to integers.
    pub integer_coords: [[f64; 3]; 3],
    pub phi_hat: [[f64; 3]; 3],
    pub phi_s: [[f64; 3]; 3],
    pub psi_s: [[f64; 3]; 3],
    /// Operator norm of `Ψ_s − I`.
    pub psi_distance: f64,
    /// Below this `s` the rounding cannot make `Ψ_s` singular.
    pub s_threshold: f64,
    /// Flux quanta of the periodized field through the three cell faces.
    pub flux_quanta: [i64; 3],
}

impl Periodization {
    pub fn phi_s_matrix(&self) -> Matrix3<f64> {
        from_array(&self.phi_s)
    }

    /// Average field `2π r₁ × r₂` of the periodized configuration, `r_i` the
    /// rows of `Φ_s`.
    pub fn field(&self) -> FieldVector {
        let p = self.phi_s_matrix();
        let r1 = Vector3::new(p[(0, 0)], p[(0, 1)], p[(0, 2)]);
        let r2 = Vector3::new(p[(1, 0)], p[(1, 1)], p[(1, 2)]);
        let c = r1.cross(&r2) * (2.0 * PI);
        FieldVector::new(c.x, c.y, c.z)
    }

    /// The perturbed basis `Ψ_s⁻¹ b_i`, mapped by `Φ_s` to `|ln s|^{1/2} e_i`.
    pub fn perturbed_basis(&self, basis: &AnisotropicBasis) -> [Vector3<f64>; 3] {
        let inv = from_array(&self.psi_s).try_inverse().expect("Ψ_s is invertible");
        basis.vectors().map(|b| inv * b)
    }
}

/// Periodizes `Φ̂_s` on the orthogonal cell with periods `periods`.
pub fn periodize(basis: &AnisotropicBasis, s: f64, periods: [f64; 3]) -> Result<Periodization> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!("s must lie in (0, 1), got {s}")));
    }
    if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::InvalidParameter(format!("cell periods must be positive, got {periods:?}")));
    }
    let scale = s.ln().abs().sqrt();
    let phi_hat = basis.phi0() * scale;
    let d = Matrix3::from_diagonal(&Vector3::from(periods));
    let t = phi_hat * d;
    let mut ti = t;
    for i in 0..2 {
        for j in 0..3 {
            ti[(i, j)] = t[(i, j)].round();
        }
    }
    let plane_det = ti[(0, 0)] * ti[(1, 1)] - ti[(0, 1)] * ti[(1, 0)];
    let dinv = Matrix3::from_diagonal(&Vector3::from(periods.map(|p| 1.0 / p)));
    let phi_s = ti * dinv;
    if plane_det == 0.0 || phi_s.determinant().abs() <= 1e-12 * phi_hat.determinant().abs() {
        return Err(Error::Periodization(format!(
            "the rounded coordinate matrix is singular for s = {s}; decrease s or enlarge the cell"
        )));
    }
    let psi = phi_hat.try_inverse().expect("Φ̂_s is invertible") * phi_s;
    let psi_distance = (psi - Matrix3::identity()).svd(false, false).singular_values.max();

    // ‖Ψ_s − I‖ ≤ |ln s|^{-1/2} ‖B‖ ‖E D⁻¹‖ with |E_ij| ≤ ½ on two rows.
    let b_norm = basis.matrix().svd(false, false).singular_values.max();
    let c = b_norm * 0.5 * 6f64.sqrt() * periods.iter().map(|p| 1.0 / p).fold(0.0, f64::max);
    let s_threshold = (-(2.0 * c).powi(2)).exp();

    let flux = [ti[(0, 1)] * ti[(1, 2)] - ti[(0, 2)] * ti[(1, 1)], ti[(0, 2)] * ti[(1, 0)] - ti[(0, 0)] * ti[(1, 2)], plane_det];
    Ok(Periodization {
        s,
        scale,
        scaled_coords: to_array(&t),
        integer_coords: to_array(&ti),
        phi_hat: to_array(&phi_hat),
        phi_s: to_array(&phi_s),
        psi_s: to_array(&psi),
        psi_distance,
        s_threshold,
        flux_quanta: flux.map(|v| v.round() as i64),
    })
}
