//! Continuous interpolation of a layered configuration between its planes,
//! the comparison functional built from it, and pointwise checks relating the
//! two to the lattice energy.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lattice::{josephson_phase, ld_energy, LatticeGeometry, LatticeState, ModelParams};

/// `Ψ` sampled on the 3D grid, indexed like the cells of `A₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedField {
    pub psi: Vec<Complex64>,
    /// `t(z)` per grid level; plane levels carry `t = 1`.
    pub t_of_z: Vec<f64>,
}

fn vertical_link(state: &LatticeState, geom: &LatticeGeometry, k: usize, i: usize, j: usize) -> f64 {
    geom.abar_z_phase(state.h_bar, geom.x(i), geom.y(j)) + state.a0[2][geom.cell(k, i, j)] * geom.az()
}

/// Upper plane of gap `gap` (1-based) with the Floquet factor applied for the wrapping gap.
fn upper_plane(state: &LatticeState, geom: &LatticeGeometry, gap: usize, i: usize, j: usize) -> Complex64 {
    let n = gap % geom.n_planes;
    let u = state.u[geom.site(n, i, j)];
    if gap == geom.n_planes {
        u * geom.floquet_z(state.h_bar, geom.x(i), geom.y(j))
    } else {
        u
    }
}

/// `u_n − u_{n−1} e^{i∫A_z}` at a site of gap `gap`.
fn gap_difference(state: &LatticeState, geom: &LatticeGeometry, gap: usize, i: usize, j: usize) -> Complex64 {
    let phi = josephson_phase(state, geom, gap, i, j);
    upper_plane(state, geom, gap, i, j) - state.u[geom.site(gap - 1, i, j)] * Complex64::from_polar(1.0, phi)
}

pub fn interpolate(state: &LatticeState, geom: &LatticeGeometry) -> Result<InterpolatedField> {
    state.check_dims(geom)?;
    let (m, kz) = (geom.m, geom.kz);
    let m2 = geom.plane_sites();
    let mut psi = vec![Complex64::new(0.0, 0.0); geom.n_cells()];
    psi.par_chunks_mut(kz * m2).enumerate().for_each(|(g0, slab)| {
        let gap = g0 + 1;
        for j in 0..m {
            for i in 0..m {
                let top = upper_plane(state, geom, gap, i, j);
                let bot = state.u[geom.site(gap - 1, i, j)];
                let phi = josephson_phase(state, geom, gap, i, j);
                let low = bot * Complex64::from_polar(1.0, phi);
                // ∫_z^{z_n} A_z accumulated downward from the upper plane.
                let mut rest = 0.0;
                for q in (0..kz).rev() {
                    rest += vertical_link(state, geom, g0 * kz + q, i, j);
                    let t = q as f64 / kz as f64;
                    let v = if q == 0 { bot } else { (t * top + (1.0 - t) * low) * Complex64::from_polar(1.0, -rest) };
                    slab[q * m2 + j * m + i] = v;
                }
            }
        }
    });
    let t_of_z = (0..geom.nz()).map(|k| if k % kz == 0 { 1.0 } else { (k % kz) as f64 / kz as f64 }).collect();
    Ok(InterpolatedField { psi, t_of_z })
}

/// Largest deviation between `|(∂_z − iA_z)Ψ|²` on each vertical link and
/// `|u_n − u_{n−1}e^{i∫A_z}|²/s²`, together with the largest value of the latter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZDerivCheck {
    pub residual: f64,
    pub scale: f64,
    pub location: [usize; 3],
}

pub fn check_zderiv_identity(state: &LatticeState, geom: &LatticeGeometry) -> Result<ZDerivCheck> {
    let field = interpolate(state, geom)?;
    let (m, kz, nz) = (geom.m, geom.kz, geom.nz());
    let (s, az) = (geom.s(), geom.az());
    let h = state.h_bar;
    let per_level: Vec<(f64, f64, [usize; 3])> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let gap = k / kz + 1;
            let kp = (k + 1) % nz;
            let mut best = (0.0, 0.0, [k, 0, 0]);
            for j in 0..m {
                for i in 0..m {
                    let mut up = field.psi[geom.cell(kp, i, j)];
                    if kp == 0 {
                        up *= geom.floquet_z(h, geom.x(i), geom.y(j));
                    }
                    let th = vertical_link(state, geom, k, i, j);
                    let lhs = ((up * Complex64::from_polar(1.0, -th) - field.psi[geom.cell(k, i, j)]) / az).norm_sqr();
                    let rhs = gap_difference(state, geom, gap, i, j).norm_sqr() / (s * s);
                    let r = (lhs - rhs).abs();
                    if r > best.0 {
                        best.0 = r;
                        best.2 = [k, i, j];
                    }
                    best.1 = f64::max(best.1, rhs);
                }
            }
            best
        })
        .collect();
    let mut out = ZDerivCheck { residual: 0.0, scale: 0.0, location: [0, 0, 0] };
    for (r, sc, loc) in per_level {
        if r > out.residual {
            out.residual = r;
            out.location = loc;
        }
        out.scale = out.scale.max(sc);
    }
    Ok(out)
}

/// Grid integral of `m_s` with `β = min(1, λ⁻²)`, using forward covariant
/// differences and the metric `g = diag(1, 1, λ²)` on 1-forms.
pub fn ms_energy(field: &InterpolatedField, state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams) -> Result<f64> {
    state.check_dims(geom)?;
    let (m, nz) = (geom.m, geom.nz());
    let (ax, ay, az, s) = (geom.ax(), geom.ay(), geom.az(), geom.s());
    let h = state.h_bar;
    let beta = f64::min(1.0, 1.0 / (p.lambda * p.lambda));
    let il2 = 1.0 / (p.lambda * p.lambda);
    let dv = ax * ay * az;
    let psi = &field.psi;
    let total: f64 = (0..nz)
        .into_par_iter()
        .map(|k| {
            let z = geom.z(k);
            let kp = (k + 1) % nz;
            let mut acc = 0.0;
            for j in 0..m {
                let y = geom.y(j);
                let jp = (j + 1) % m;
                for i in 0..m {
                    let x = geom.x(i);
                    let ip = (i + 1) % m;
                    let c = geom.cell(k, i, j);
                    let v = psi[c];
                    let fx = if ip == 0 { geom.floquet_x(h, y, z) } else { Complex64::new(1.0, 0.0) };
                    let fy = if jp == 0 { geom.floquet_y(h, x, z) } else { Complex64::new(1.0, 0.0) };
                    let fz = if kp == 0 { geom.floquet_z(h, x, y) } else { Complex64::new(1.0, 0.0) };
                    let (vx, vy, vz) = (psi[geom.cell(k, ip, j)] * fx, psi[geom.cell(k, i, jp)] * fy, psi[geom.cell(kp, i, j)] * fz);
                    let tx = geom.abar_x_phase(h, y, z) + state.a0[0][c] * ax;
                    let ty = geom.abar_y_phase(h, x, z) + state.a0[1][c] * ay;
                    let tz = vertical_link(state, geom, k, i, j);
                    let dx = (vx * Complex64::from_polar(1.0, -tx) - v) / ax;
                    let dy = (vy * Complex64::from_polar(1.0, -ty) - v) / ay;
                    let dz = (vz * Complex64::from_polar(1.0, -tz) - v) / az;
                    let cov = dx.norm_sqr() + dy.norm_sqr() + il2 * dz.norm_sqr();
                    let r = v.norm();
                    let gx = (vx.norm() - r) / ax;
                    let gy = (vy.norm() - r) / ay;
                    let gz = (vz.norm() - r) / az;
                    let grad_mod = gx * gx + gy * gy + il2 * gz * gz;
                    let w = 1.0 - r * r;
                    acc += 0.5 * (r * r * cov + w * (0.5 * grad_mod + 2.0 * beta / (s * s) * w * w));
                }
            }
            acc * dv
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(total)
}

/// Worst margin of one pointwise inequality `rhs − lhs` over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseMargin {
    /// Coefficient of `|u_n − u_{n−1}e^{i∫A_z}|²` on the right-hand side.
    pub jump_coefficient: f64,
    pub worst_margin: f64,
    /// `[level, i, j]` of the worst margin.
    pub location: [usize; 3],
    /// Points with margin below `−tolerance`.
    pub violations: usize,
    pub tolerance: f64,
}

impl PointwiseMargin {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicMacReport {
    /// Set when the state has `|u| > 1 + 1e-6` somewhere and the checks were not run.
    pub skipped: Option<String>,
    pub max_modulus: f64,
    /// The quartic bound with jump coefficient ¼.
    pub gl2_quarter: Option<PointwiseMargin>,
    /// The same bound with jump coefficient ½.
    pub gl2_half: Option<PointwiseMargin>,
    pub ms_energy: f64,
    pub magnetic: f64,
    pub ld_energy: f64,
    /// `ld_energy − (ms_energy + magnetic)`; the aggregate bound holds when this is
    /// non-negative and otherwise needs at least `−aggregate_margin` of slack.
    pub aggregate_margin: f64,
}

pub const MODULUS_LIMIT: f64 = 1.0 + 1e-6;

fn gl2_margins(field: &InterpolatedField, state: &LatticeState, geom: &LatticeGeometry, coefficient: f64, tol: f64) -> PointwiseMargin {
    let (m, kz, nz) = (geom.m, geom.kz, geom.nz());
    let per_level: Vec<(f64, [usize; 3], usize)> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let gap = k / kz + 1;
            let t = k.rem_euclid(kz) as f64 / kz as f64;
            let mut worst = (f64::INFINITY, [k, 0, 0], 0);
            for j in 0..m {
                for i in 0..m {
                    let q = |u: Complex64| (1.0 - u.norm_sqr()).powi(2);
                    let top = upper_plane(state, geom, gap, i, j);
                    let bot = state.u[geom.site(gap - 1, i, j)];
                    let d = gap_difference(state, geom, gap, i, j);
                    let lhs = q(field.psi[geom.cell(k, i, j)]);
                    let rhs = 2.0 * (t * q(top) + (1.0 - t) * q(bot)) + coefficient * d.norm_sqr();
                    let margin = rhs - lhs;
                    if margin < -tol {
                        worst.2 += 1;
                    }
                    if margin < worst.0 {
                        worst.0 = margin;
                        worst.1 = [k, i, j];
                    }
                }
            }
            worst
        })
        .collect();
    let mut out = PointwiseMargin { jump_coefficient: coefficient, worst_margin: f64::INFINITY, location: [0, 0, 0], violations: 0, tolerance: tol };
    for (w, loc, v) in per_level {
        out.violations += v;
        if w < out.worst_margin {
            out.worst_margin = w;
            out.location = loc;
        }
    }
    out
}

pub fn check_micmac_inequalities(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams, tol: f64) -> Result<MicMacReport> {
    let field = interpolate(state, geom)?;
    let e = ld_energy(state, geom, p)?;
    let ms = ms_energy(&field, state, geom, p)?;
    let max_modulus = state.max_modulus();
    let mut report = MicMacReport {
        skipped: None,
        max_modulus,
        gl2_quarter: None,
        gl2_half: None,
        ms_energy: ms,
        magnetic: e.magnetic,
        ld_energy: e.total,
        aggregate_margin: e.total - (ms + e.magnetic),
    };
    if max_modulus > MODULUS_LIMIT {
        report.skipped = Some(format!("max |u| = {max_modulus} exceeds {MODULUS_LIMIT}; pointwise bounds need |u| <= 1"));
        return Ok(report);
    }
    report.gl2_quarter = Some(gl2_margins(&field, state, geom, 0.25, tol));
    report.gl2_half = Some(gl2_margins(&field, state, geom, 0.5, tol));
    Ok(report)
}
