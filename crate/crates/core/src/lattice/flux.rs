use std::f64::consts::PI;

use num_complex::Complex64;

use super::geometry::LatticeGeometry;
use super::state::LatticeState;
use crate::error::{Error, Result};

/// Minimum modulus required on the cell boundary for the degree to be defined.
pub const DEGREE_MIN_MODULUS: f64 = 0.1;

fn check_plane(state: &LatticeState, geom: &LatticeGeometry, n: usize) -> Result<()> {
    state.check_dims(geom)?;
    if n >= geom.n_planes {
        return Err(Error::InvalidParameter(format!("plane index {n} out of range 0..{}", geom.n_planes)));
    }
    Ok(())
}

/// Circulations of `Ā + A₀` around every plaquette of plane `n`.
fn plaquette_circulations(state: &LatticeState, geom: &LatticeGeometry, n: usize) -> Vec<f64> {
    let m = geom.m;
    let (ax, ay) = (geom.ax(), geom.ay());
    let h = state.h_bar;
    let z = geom.plane_z(n);
    let k = n * geom.kz;
    let a0x = |i: usize, j: usize| state.a0[0][geom.cell(k, i % m, j % m)] * ax;
    let a0y = |i: usize, j: usize| state.a0[1][geom.cell(k, i % m, j % m)] * ay;
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let bar = geom.abar_x_phase(h, geom.y(j), z) + geom.abar_y_phase(h, geom.x(i + 1), z)
                - geom.abar_x_phase(h, geom.y(j + 1), z)
                - geom.abar_y_phase(h, geom.x(i), z);
            let fluct = a0x(i, j) + a0y(i + 1, j) - a0x(i, j + 1) - a0y(i, j);
            out.push(bar + fluct);
        }
    }
    out
}

/// Flux through plane `n` in units of `2π`.
pub fn plane_flux(state: &LatticeState, geom: &LatticeGeometry, n: usize) -> Result<f64> {
    check_plane(state, geom, n)?;
    Ok(plaquette_circulations(state, geom, n).iter().sum::<f64>() / (2.0 * PI))
}

/// Gauge-invariant winding of each plaquette of plane `n`, indexed like sites.
pub fn plaquette_windings(state: &LatticeState, geom: &LatticeGeometry, n: usize) -> Result<Vec<i64>> {
    check_plane(state, geom, n)?;
    let m = geom.m;
    let (ax, ay) = (geom.ax(), geom.ay());
    let h = state.h_bar;
    let z = geom.plane_z(n);
    let base = geom.cell(n * geom.kz, 0, 0);
    // Exact zeros carry no phase; any fixed choice keeps the windings integral.
    let u: Vec<Complex64> = state.plane(geom, n).iter().map(|z| if z.norm_sqr() > 0.0 { *z } else { Complex64::new(1.0, 0.0) }).collect();
    let one = Complex64::new(1.0, 0.0);
    let mut dx = vec![0.0; m * m];
    let mut dy = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            let (x, y) = (geom.x(i), geom.y(j));
            let (ux, fx) = if i + 1 == m { (u[j * m], geom.floquet_x(h, y, z)) } else { (u[idx + 1], one) };
            let (uy, fy) = if j + 1 == m { (u[i], geom.floquet_y(h, x, z)) } else { (u[idx + m], one) };
            let cx = fx * Complex64::from_polar(1.0, -(geom.abar_x_phase(h, y, z) + state.a0[0][base + idx] * ax));
            let cy = fy * Complex64::from_polar(1.0, -(geom.abar_y_phase(h, x, z) + state.a0[1][base + idx] * ay));
            dx[idx] = (ux * cx * u[idx].conj()).arg();
            dy[idx] = (uy * cy * u[idx].conj()).arg();
        }
    }
    let circ = plaquette_circulations(state, geom, n);
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            let w = (dx[idx] + dy[j * m + (i + 1) % m] - dx[((j + 1) % m) * m + i] - dy[idx] + circ[idx]) / (2.0 * PI);
            if (w - w.round()).abs() > 1e-6 {
                return Err(Error::Consistency(format!("plaquette ({i}, {j}) winding {w} is not an integer")));
            }
            out.push(w.round() as i64);
        }
    }
    Ok(out)
}

/// Degree of `u_n/|u_n|` around the boundary of a period cell of plane `n`,
/// computed as the sum of plaquette windings. The cell may be any lattice
/// translate of the fundamental one; a grid row and column on which
/// `|u_n| > 0.1` must exist to serve as its boundary.
pub fn plane_degree(state: &LatticeState, geom: &LatticeGeometry, n: usize) -> Result<i64> {
    check_plane(state, geom, n)?;
    let m = geom.m;
    let u = state.plane(geom, n);
    let row_min = |j: usize| (0..m).map(|i| u[j * m + i].norm()).fold(f64::INFINITY, f64::min);
    let col_min = |i: usize| (0..m).map(|j| u[j * m + i].norm()).fold(f64::INFINITY, f64::min);
    let best_row = (0..m).map(row_min).fold(0.0, f64::max);
    let best_col = (0..m).map(col_min).fold(0.0, f64::max);
    let boundary_min = best_row.min(best_col);
    if boundary_min <= DEGREE_MIN_MODULUS {
        return Err(Error::ModulusTooSmall { min_modulus: boundary_min });
    }
    Ok(plaquette_windings(state, geom, n)?.iter().sum())
}
