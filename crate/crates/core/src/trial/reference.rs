//! The periodic vortex-lattice reference configuration on the unit torus.
//!
//! With `Θ(z) = θ₁(πz | τ = i)` the function `f = log|Θ(x + iy)| − πy²` is
//! periodic with `Δf = 2π(δ − 1)` (one charge per cell), and the phase with
//! `dφ = *df + 2π x dy` is `φ = arg Θ + 2πxy`. The spectral solver below is an
//! independent discretization of the same cell problem.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};

const NOME: f64 = 0.043_213_918_263_772_25; // e^{-π}
const THETA_TERMS: i32 = 8;

/// `θ₁(πz | i)` for `|Im z| ≤ ½`.
fn theta_reduced(z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..THETA_TERMS {
        let k = f64::from(2 * n + 1);
        let w = NOME.powf((f64::from(n) + 0.5).powi(2));
        let term = (z * (k * PI)).sin() * w;
        acc += if n % 2 == 0 { term } else { -term };
    }
    2.0 * acc
}

/// `arg Θ(x + iy)`, using the quasi-periodicity
/// `Θ(z + m₁ + i m₂) = (−1)^{m₁+m₂} e^{m₂π} e^{−2πi m₂ z} Θ(z)` (up to a
/// positive factor) to keep the series well conditioned.
pub fn theta_arg(x: f64, y: f64) -> f64 {
    let m1 = x.round();
    let m2 = y.round();
    let (xr, yr) = (x - m1, y - m2);
    let base = theta_reduced(Complex64::new(xr, yr)).arg();
    base + (m1 + m2) * PI - 2.0 * PI * m2 * xr
}

/// `log|Θ(x + iy)| − πy²`, periodic with period 1 in both variables.
pub fn reference_potential(x: f64, y: f64) -> f64 {
    let xr = x - x.round();
    let yr = y - y.round();
    theta_reduced(Complex64::new(xr, yr)).norm().ln() - PI * yr * yr
}

/// Phase `φ = arg Θ + 2πxy` of the reference configuration, in the gauge
/// `B = 2π x dy`.
pub fn reference_phase(x: f64, y: f64) -> f64 {
    theta_arg(x, y) + 2.0 * PI * x * y
}

/// Discrete solution of the cell problem on an `n × n` grid of the unit torus,
/// with the charge at grid point `(0, 0)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSolution {
    pub resolution: usize,
    /// `f[j * n + i]` at `(i/n, j/n)`, zero mean.
    pub f: Vec<f64>,
}

impl ReferenceSolution {
    pub fn h(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    #[inline]
    pub fn at(&self, i: i64, j: i64) -> f64 {
        let n = self.resolution as i64;
        self.f[(j.rem_euclid(n) * n + i.rem_euclid(n)) as usize]
    }

    /// Discrete gradient on the link from `(i, j)` in direction `x` or `y`.
    pub fn grad(&self, i: i64, j: i64) -> [f64; 2] {
        let h = self.h();
        [(self.at(i + 1, j) - self.at(i, j)) / h, (self.at(i, j + 1) - self.at(i, j)) / h]
    }

    /// `j = *df` on the dual links crossing the primal links at `(i, j)`:
    /// `j_x = −∂_y f`, `j_y = ∂_x f`.
    pub fn current(&self, i: i64, j: i64) -> [f64; 2] {
        let g = self.grad(i, j);
        [-g[1], g[0]]
    }

    /// Five-point Laplacian at `(i, j)`.
    pub fn laplacian(&self, i: i64, j: i64) -> f64 {
        let h = self.h();
        (self.at(i + 1, j) + self.at(i - 1, j) + self.at(i, j + 1) + self.at(i, j - 1) - 4.0 * self.at(i, j)) / (h * h)
    }

    /// Largest deviation of `Δf` from `2π(δ − 1)` over the grid, excluding
    /// the charge site when `skip_charge` is set.
    pub fn residual(&self, skip_charge: bool) -> f64 {
        let n = self.resolution as i64;
        let h = self.h();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                let at_charge = i == 0 && j == 0;
                if at_charge && skip_charge {
                    continue;
                }
                let delta = if at_charge { 1.0 / (h * h) } else { 0.0 };
                worst = worst.max((self.laplacian(i, j) - 2.0 * PI * (delta - 1.0)).abs());
            }
        }
        worst
    }

    /// Circulation of `j + B` (with `B = 2π x dy`) around the dual contour
    /// enclosing the grid points `i0..=i1 × j0..=j1`, counter-clockwise.
    pub fn circulation(&self, i0: i64, j0: i64, i1: i64, j1: i64) -> f64 {
        let h = self.h();
        let mut flux = 0.0;
        for j in j0..=j1 {
            flux += self.grad(i1, j)[0] * h - self.grad(i0 - 1, j)[0] * h;
        }
        for i in i0..=i1 {
            flux += self.grad(i, j1)[1] * h - self.grad(i, j0 - 1)[1] * h;
        }
        let area = ((i1 - i0 + 1) * (j1 - j0 + 1)) as f64 * h * h;
        flux + 2.0 * PI * area
    }
}

/// Solves `Δf = 2π(δ − 1)` spectrally with the five-point Laplacian and a unit
/// grid charge `1/h²` at the origin; the zero mode is set to 0.
pub fn solve_cell_problem(resolution: usize) -> Result<ReferenceSolution> {
    if resolution < 32 || resolution % 2 != 0 {
        return Err(Error::InvalidParameter(format!("resolution must be even and at least 32, got {resolution}")));
    }
    let n = resolution;
    let h = 1.0 / n as f64;
    let mut data: Vec<Complex64> = vec![Complex64::new(-2.0 * PI, 0.0); n * n];
    data[0] += 2.0 * PI / (h * h);

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    fft2(&mut data, n, &*fwd);
    for k2 in 0..n {
        for k1 in 0..n {
            let idx = k2 * n + k1;
            if k1 == 0 && k2 == 0 {
                data[idx] = Complex64::new(0.0, 0.0);
                continue;
            }
            let s1 = (PI * k1 as f64 / n as f64).sin();
            let s2 = (PI * k2 as f64 / n as f64).sin();
            let symbol = -4.0 / (h * h) * (s1 * s1 + s2 * s2);
            data[idx] /= symbol;
        }
    }
    fft2(&mut data, n, &*inv);
    let scale = 1.0 / (n * n) as f64;
    Ok(ReferenceSolution { resolution: n, f: data.iter().map(|z| z.re * scale).collect() })
}

fn fft2(data: &mut [Complex64], n: usize, fft: &dyn rustfft::Fft<f64>) {
    for row in data.chunks_exact_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        for j in 0..n {
            col[j] = data[j * n + i];
        }
        fft.process(&mut col);
        for j in 0..n {
            data[j * n + i] = col[j];
        }
    }
}
