use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::geometry::LatticeGeometry;
use super::state::LatticeState;
use crate::error::{Error, Result};

/// A periodic real scalar on the `M × M × N·Kz` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFunction {
    values: Vec<f64>,
}

impl GaugeFunction {
    pub fn from_values(geom: &LatticeGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geom.n_cells() {
            return Err(Error::DimensionMismatch(format!(
                "gauge function has {} values, grid has {}",
                values.len(),
                geom.n_cells()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("gauge function has non-finite values".into()));
        }
        Ok(Self { values })
    }

    /// Samples `f` on the grid. `f` must be periodic with the cell periods,
    /// which is checked at every grid point.
    pub fn from_fn(geom: &LatticeGeometry, f: impl Fn(f64, f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(geom.n_cells());
        for k in 0..geom.nz() {
            for j in 0..geom.m {
                for i in 0..geom.m {
                    let (x, y, z) = (geom.x(i), geom.y(j), geom.z(k));
                    let v = f(x, y, z);
                    for (label, w) in [("x", f(x + geom.lx, y, z)), ("y", f(x, y + geom.ly, z)), ("z", f(x, y, z + geom.l))] {
                        if (w - v).abs() > 1e-9 * (1.0 + v.abs()) {
                            return Err(Error::NonPeriodic(format!(
                                "gauge function is not periodic in {label} at ({x}, {y}, {z}): {v} vs {w}"
                            )));
                        }
                    }
                    values.push(v);
                }
            }
        }
        Self::from_values(geom, values)
    }

    pub fn constant(geom: &LatticeGeometry, c: f64) -> Self {
        Self { values: vec![c; geom.n_cells()] }
    }

    /// Random trigonometric polynomial with a few low modes.
    pub fn random_smooth(geom: &LatticeGeometry, seed: u64, amplitude: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<([f64; 3], f64, f64)> = (0..6)
            .map(|_| {
                let k = [rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64, rng.gen_range(-2..=2) as f64];
                (k, rng.gen_range(-amplitude..amplitude), rng.gen_range(0.0..2.0 * PI))
            })
            .collect();
        let f = |x: f64, y: f64, z: f64| {
            modes
                .iter()
                .map(|(k, a, ph)| a * (2.0 * PI * (k[0] * x / geom.lx + k[1] * y / geom.ly + k[2] * z / geom.l) + ph).cos())
                .sum::<f64>()
        };
        Self::from_fn(geom, f).expect("trigonometric polynomial is periodic")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `u_n → u_n e^{iγ(·, z_n)}` and `A₀ → A₀ + dγ` on every link.
pub fn gauge_transform(state: &LatticeState, geom: &LatticeGeometry, gamma: &GaugeFunction) -> Result<LatticeState> {
    state.check_dims(geom)?;
    if gamma.values.len() != geom.n_cells() {
        return Err(Error::DimensionMismatch("gauge function does not match the grid".into()));
    }
    let g = &gamma.values;
    let m = geom.m;
    let nz = geom.nz();
    let mut out = state.clone();
    for n in 0..geom.n_planes {
        for j in 0..m {
            for i in 0..m {
                let site = geom.site(n, i, j);
                out.u[site] = state.u[site] * Complex64::from_polar(1.0, g[geom.cell(n * geom.kz, i, j)]);
            }
        }
    }
    let (ax, ay, az) = (geom.ax(), geom.ay(), geom.az());
    for k in 0..nz {
        for j in 0..m {
            for i in 0..m {
                let c = geom.cell(k, i, j);
                out.a0[0][c] += (g[geom.cell(k, (i + 1) % m, j)] - g[c]) / ax;
                out.a0[1][c] += (g[geom.cell(k, i, (j + 1) % m)] - g[c]) / ay;
                out.a0[2][c] += (g[geom.cell((k + 1) % nz, i, j)] - g[c]) / az;
            }
        }
    }
    Ok(out)
}
