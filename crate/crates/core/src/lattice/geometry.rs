use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limit::validate_alpha;
use crate::metric::FieldVector;

/// Relative tolerance on flux quantization of the average field.
const QUANTIZATION_TOL: f64 = 1e-9;

/// Period cell `[0, Lx) × [0, Ly) × [0, L)` with `N` planes at `z_n = n·s`,
/// `s = L/N`, an `M × M` in-plane grid and `Kz` vertical links per gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeGeometry {
    pub n_planes: usize,
    pub m: usize,
    pub kz: usize,
    pub lx: f64,
    pub ly: f64,
    pub l: f64,
}

impl LatticeGeometry {
    pub fn new(n_planes: usize, m: usize, kz: usize, lx: f64, ly: f64, l: f64) -> Result<Self> {
        let g = Self { n_planes, m, kz, lx, ly, l };
        g.validate()?;
        Ok(g)
    }

    /// Geometry with `N` planes at spacing `s`.
    pub fn with_spacing(n_planes: usize, m: usize, kz: usize, lx: f64, ly: f64, s: f64) -> Result<Self> {
        Self::new(n_planes, m, kz, lx, ly, s * n_planes as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_planes == 0 || self.m == 0 || self.kz == 0 {
            return Err(Error::InvalidParameter(format!(
                "N, M and Kz must be positive, got N={} M={} Kz={}",
                self.n_planes, self.m, self.kz
            )));
        }
        for (name, v) in [("Lx", self.lx), ("Ly", self.ly), ("L", self.l)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.l / self.n_planes as f64
    }
    #[inline]
    pub fn ax(&self) -> f64 {
        self.lx / self.m as f64
    }
    #[inline]
    pub fn ay(&self) -> f64 {
        self.ly / self.m as f64
    }
    #[inline]
    pub fn az(&self) -> f64 {
        self.s() / self.kz as f64
    }
    /// Number of vertical grid levels, `N·Kz`.
    #[inline]
    pub fn nz(&self) -> usize {
        self.n_planes * self.kz
    }
    #[inline]
    pub fn plane_sites(&self) -> usize {
        self.m * self.m
    }
    pub fn n_sites(&self) -> usize {
        self.n_planes * self.plane_sites()
    }
    pub fn n_cells(&self) -> usize {
        self.nz() * self.plane_sites()
    }
    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.l
    }
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.ax()
    }
    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.ay()
    }
    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        k as f64 * self.az()
    }
    #[inline]
    pub fn plane_z(&self, n: usize) -> f64 {
        n as f64 * self.s()
    }
    /// Index of site `(i, j)` within a plane or level.
    #[inline]
    pub fn idx2(&self, i: usize, j: usize) -> usize {
        j * self.m + i
    }
    #[inline]
    pub fn site(&self, n: usize, i: usize, j: usize) -> usize {
        n * self.plane_sites() + self.idx2(i, j)
    }
    #[inline]
    pub fn cell(&self, k: usize, i: usize, j: usize) -> usize {
        k * self.plane_sites() + self.idx2(i, j)
    }

    /// Average field `h̄` with fluxes `2π·(m1, m2, m3)` through the three
    /// coordinate faces of the cell.
    pub fn quantized_field(&self, m1: i64, m2: i64, m3: i64) -> FieldVector {
        FieldVector::new(
            2.0 * PI * m1 as f64 / (self.l * self.ly),
            2.0 * PI * m2 as f64 / (self.l * self.lx),
            2.0 * PI * m3 as f64 / (self.lx * self.ly),
        )
    }

    /// Face fluxes of `h̄` in units of `2π`: `(h̄₁ L Ly, h̄₂ L Lx, h̄₃ Lx Ly) / 2π`.
    pub fn flux_quanta(&self, h_bar: FieldVector) -> [f64; 3] {
        [
            h_bar.h1 * self.l * self.ly / (2.0 * PI),
            h_bar.h2 * self.l * self.lx / (2.0 * PI),
            h_bar.h3 * self.lx * self.ly / (2.0 * PI),
        ]
    }

    /// The Floquet phases are single valued only when every face flux of `h̄`
    /// is a multiple of `2π`.
    pub fn check_admissible(&self, h_bar: FieldVector) -> Result<()> {
        for (face, q) in ["yz", "zx", "xy"].iter().zip(self.flux_quanta(h_bar)) {
            if !q.is_finite() || (q - q.round()).abs() > QUANTIZATION_TOL * (1.0 + q.abs()) {
                return Err(Error::Inadmissible(format!(
                    "flux of the average field through the {face} face is {q} flux quanta, not an integer"
                )));
            }
        }
        Ok(())
    }

    /// Link phase of `Ā` along the x-link leaving the site at `(y, z)`.
    #[inline]
    pub fn abar_x_phase(&self, h: FieldVector, y: f64, z: f64) -> f64 {
        0.5 * (h.h2 * z - h.h3 * y) * self.ax()
    }
    #[inline]
    pub fn abar_y_phase(&self, h: FieldVector, x: f64, z: f64) -> f64 {
        0.5 * (h.h3 * x - h.h1 * z) * self.ay()
    }
    #[inline]
    pub fn abar_z_phase(&self, h: FieldVector, x: f64, y: f64) -> f64 {
        0.5 * (h.h1 * y - h.h2 * x) * self.az()
    }

    /// `u(x + v₁) = u(x)·floquet_x(y, z)`.
    #[inline]
    pub fn floquet_x(&self, h: FieldVector, y: f64, z: f64) -> Complex64 {
        Complex64::from_polar(1.0, -0.5 * (h.h2 * z - h.h3 * y) * self.lx)
    }
    #[inline]
    pub fn floquet_y(&self, h: FieldVector, x: f64, z: f64) -> Complex64 {
        Complex64::from_polar(1.0, -0.5 * (h.h3 * x - h.h1 * z) * self.ly)
    }
    /// `u_{n+N}(x) = u_n(x)·floquet_z(x, y)`.
    #[inline]
    pub fn floquet_z(&self, h: FieldVector, x: f64, y: f64) -> Complex64 {
        Complex64::from_polar(1.0, -0.5 * (h.h1 * y - h.h2 * x) * self.l)
    }
}

/// Physical parameters of the discrete energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub lambda: f64,
    pub alpha: f64,
    /// Applied field in lattice units (not normalized by `|ln ε|`).
    pub h_ex: FieldVector,
}

impl ModelParams {
    pub fn new(epsilon: f64, lambda: f64, alpha: f64, h_ex: FieldVector) -> Result<Self> {
        let p = Self { epsilon, lambda, alpha, h_ex };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        validate_alpha(self.alpha)?;
        self.h_ex.validated()?;
        Ok(())
    }

    /// Checks the asymptotic coupling `s = ε^α` for the given geometry.
    pub fn check_asymptotic(&self, geom: &LatticeGeometry) -> Result<()> {
        let s = geom.s();
        let target = self.epsilon.powf(self.alpha);
        if (s - target).abs() > 1e-9 * target.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "layer spacing s = {s} differs from epsilon^alpha = {target}"
            )));
        }
        Ok(())
    }

    /// `|ln ε|`, the scale of applied fields and of the energy per unit volume.
    pub fn log_scale(&self) -> f64 {
        self.epsilon.ln().abs()
    }

    /// Energy divided by `|Ω| ln²ε`.
    pub fn normalize_energy(&self, energy: f64, geom: &LatticeGeometry) -> f64 {
        let l = self.log_scale();
        energy / (geom.volume() * l * l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_spacings() {
        let g = LatticeGeometry::new(4, 16, 4, 2.0, 3.0, 1.0).unwrap();
        assert_eq!(g.s(), 0.25);
        assert_eq!(g.s() * g.n_planes as f64, g.l);
        assert_eq!(g.ax(), 0.125);
        assert_eq!(g.ay(), 0.1875);
        assert_eq!(g.az(), 0.0625);
        assert_eq!(g.nz(), 16);
    }

    #[test]
    fn rejects_degenerate_geometry() {
        assert!(LatticeGeometry::new(0, 16, 4, 1.0, 1.0, 1.0).is_err());
        assert!(LatticeGeometry::new(2, 16, 0, 1.0, 1.0, 1.0).is_err());
        assert!(LatticeGeometry::new(2, 16, 4, -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn admissibility() {
        let g = LatticeGeometry::new(4, 8, 2, 1.5, 2.0, 1.0).unwrap();
        assert!(g.check_admissible(g.quantized_field(1, -2, 3)).is_ok());
        let q = g.flux_quanta(g.quantized_field(1, -2, 3));
        assert!((q[0] - 1.0).abs() < 1e-12 && (q[1] + 2.0).abs() < 1e-12 && (q[2] - 3.0).abs() < 1e-12);
        assert!(g.check_admissible(FieldVector::new(0.0, 0.0, 1.0)).is_err());
        assert!(g.check_admissible(FieldVector::new(0.3, 0.0, 0.0)).is_err());
    }

    #[test]
    fn model_params_validation() {
        assert!(ModelParams::new(0.1, 1.0, 0.5, FieldVector::ZERO).is_ok());
        assert!(ModelParams::new(0.0, 1.0, 0.5, FieldVector::ZERO).is_err());
        assert!(ModelParams::new(0.1, 1.0, 1.5, FieldVector::ZERO).is_err());
        let p = ModelParams::new(0.01, 1.0, 0.5, FieldVector::ZERO).unwrap();
        let g = LatticeGeometry::with_spacing(2, 8, 1, 1.0, 1.0, 0.1).unwrap();
        assert!(p.check_asymptotic(&g).is_ok());
        let g = LatticeGeometry::with_spacing(2, 8, 1, 1.0, 1.0, 0.2).unwrap();
        assert!(p.check_asymptotic(&g).is_err());
    }

    #[test]
    fn floquet_cocycle_closes_for_quantized_fields() {
        // Translating by v1 then v2 must agree with v2 then v1.
        let g = LatticeGeometry::new(3, 8, 2, 1.3, 0.7, 0.9).unwrap();
        let h = g.quantized_field(2, -1, 3);
        let (x, y, z) = (0.31, 0.17, 0.42);
        let a = g.floquet_y(h, x, z) * g.floquet_x(h, y + g.ly, z);
        let b = g.floquet_x(h, y, z) * g.floquet_y(h, x + g.lx, z);
        assert!((a - b).norm() < 1e-12);
        let a = g.floquet_z(h, x, y) * g.floquet_x(h, y, z + g.l);
        let b = g.floquet_x(h, y, z) * g.floquet_z(h, x + g.lx, y);
        assert!((a - b).norm() < 1e-12);
    }
}
