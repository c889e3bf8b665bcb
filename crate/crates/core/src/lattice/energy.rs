use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{LatticeGeometry, ModelParams};
use super::state::LatticeState;
use crate::error::Result;

/// The discrete energy split into its groups.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// In-plane covariant Dirichlet term.
    pub kinetic: f64,
    /// Quartic potential `(1 − |u|²)²/(4ε²)`.
    pub condensation: f64,
    /// `kinetic + condensation`.
    pub in_plane: f64,
    pub josephson: f64,
    pub magnetic: f64,
    pub total: f64,
}

/// Gradient with respect to all degrees of freedom. For a complex site value
/// `u = a + ib` the entry is `∂E/∂a + i ∂E/∂b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub u: Vec<Complex64>,
    pub a0: [Vec<f64>; 3],
}

impl Gradient {
    pub fn zeros(geom: &LatticeGeometry) -> Self {
        let c = geom.n_cells();
        Self { u: vec![Complex64::new(0.0, 0.0); geom.n_sites()], a0: [vec![0.0; c], vec![0.0; c], vec![0.0; c]] }
    }

    pub fn sup_norm(&self) -> f64 {
        let su = self.u.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max);
        self.a0.iter().flatten().map(|v| v.abs()).fold(su, f64::max)
    }
}

struct Weights {
    wx: f64,
    wy: f64,
    wq: f64,
    wj: f64,
    dv: f64,
}

impl Weights {
    fn new(geom: &LatticeGeometry, p: &ModelParams) -> Self {
        let (ax, ay, s) = (geom.ax(), geom.ay(), geom.s());
        let area = s * ax * ay;
        Self {
            wx: 0.5 * area / (ax * ax),
            wy: 0.5 * area / (ay * ay),
            wq: area / (4.0 * p.epsilon * p.epsilon),
            wj: area / (2.0 * p.lambda * p.lambda * s * s),
            dv: ax * ay * geom.az(),
        }
    }
}

struct PlaneTerms {
    kinetic: f64,
    condensation: f64,
    gu: Vec<Complex64>,
    gax: Vec<f64>,
    gay: Vec<f64>,
}

fn plane_terms(state: &LatticeState, geom: &LatticeGeometry, w: &Weights, n: usize, grad: bool) -> PlaneTerms {
    let m = geom.m;
    let m2 = geom.plane_sites();
    let (ax, ay) = (geom.ax(), geom.ay());
    let h = state.h_bar;
    let z = geom.plane_z(n);
    let base = geom.cell(n * geom.kz, 0, 0);
    let a0x = &state.a0[0][base..base + m2];
    let a0y = &state.a0[1][base..base + m2];
    let u = state.plane(geom, n);
    let mut out = PlaneTerms {
        kinetic: 0.0,
        condensation: 0.0,
        gu: if grad { vec![Complex64::new(0.0, 0.0); m2] } else { Vec::new() },
        gax: if grad { vec![0.0; m2] } else { Vec::new() },
        gay: if grad { vec![0.0; m2] } else { Vec::new() },
    };
    let one = Complex64::new(1.0, 0.0);
    for j in 0..m {
        let y = geom.y(j);
        let thx_bar = geom.abar_x_phase(h, y, z);
        let fx = geom.floquet_x(h, y, z);
        for i in 0..m {
            let x = geom.x(i);
            let idx = j * m + i;
            let uc = u[idx];

            let (ip, f) = if i + 1 == m { (j * m, fx) } else { (idx + 1, one) };
            let c = f * Complex64::from_polar(1.0, -(thx_bar + a0x[idx] * ax));
            let d = u[ip] * c - uc;
            out.kinetic += w.wx * d.norm_sqr();
            if grad {
                out.gu[idx] -= 2.0 * w.wx * d;
                out.gu[ip] += 2.0 * w.wx * d * c.conj();
                out.gax[idx] += 2.0 * w.wx * ax * (d.conj() * uc).im;
            }

            let (jp, f) = if j + 1 == m { (i, geom.floquet_y(h, x, z)) } else { (idx + m, one) };
            let c = f * Complex64::from_polar(1.0, -(geom.abar_y_phase(h, x, z) + a0y[idx] * ay));
            let d = u[jp] * c - uc;
            out.kinetic += w.wy * d.norm_sqr();
            if grad {
                out.gu[idx] -= 2.0 * w.wy * d;
                out.gu[jp] += 2.0 * w.wy * d * c.conj();
                out.gay[idx] += 2.0 * w.wy * ay * (d.conj() * uc).im;
            }

            let r = uc.norm_sqr() - 1.0;
            out.condensation += w.wq * r * r;
            if grad {
                out.gu[idx] += 4.0 * w.wq * r * uc;
            }
        }
    }
    out
}

/// Josephson phase `Φ` across gap `g ∈ 1..=N` (between planes `g−1` and `g`)
/// above site `(i, j)`: the sum of the vertical link phases of `Ā + A₀`.
pub fn josephson_phase(state: &LatticeState, geom: &LatticeGeometry, gap: usize, i: usize, j: usize) -> f64 {
    let abar = geom.abar_z_phase(state.h_bar, geom.x(i), geom.y(j));
    let az = geom.az();
    let k0 = (gap - 1) * geom.kz;
    (k0..k0 + geom.kz).map(|k| abar + state.a0[2][geom.cell(k, i, j)] * az).sum()
}

struct GapTerms {
    energy: f64,
    /// `d = u_top − u_bottom e^{iΦ}` per site.
    d: Vec<Complex64>,
    phase: Vec<Complex64>,
    /// Derivative of the gap energy with respect to each vertical `A₀` link of the gap.
    ga: Vec<f64>,
}

fn gap_terms(state: &LatticeState, geom: &LatticeGeometry, w: &Weights, gap: usize, grad: bool) -> GapTerms {
    let m = geom.m;
    let np = geom.n_planes;
    let h = state.h_bar;
    let top = state.plane(geom, gap % np);
    let bot = state.plane(geom, gap - 1);
    let mut out = GapTerms {
        energy: 0.0,
        d: Vec::with_capacity(if grad { m * m } else { 0 }),
        phase: Vec::with_capacity(if grad { m * m } else { 0 }),
        ga: Vec::with_capacity(if grad { m * m } else { 0 }),
    };
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            let wrap = if gap == np { geom.floquet_z(h, geom.x(i), geom.y(j)) } else { Complex64::new(1.0, 0.0) };
            let ut = top[idx] * wrap;
            let e = Complex64::from_polar(1.0, josephson_phase(state, geom, gap, i, j));
            let d = ut - bot[idx] * e;
            out.energy += w.wj * d.norm_sqr();
            if grad {
                out.d.push(d);
                out.phase.push(e);
                out.ga.push(2.0 * w.wj * geom.az() * (d.conj() * ut).im);
            }
        }
    }
    out
}

fn magnetic_residuals(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams, k: usize) -> Vec<[f64; 3]> {
    let m = geom.m;
    let nz = geom.nz();
    let (ax, ay, az) = (geom.ax(), geom.ay(), geom.az());
    let h = state.h_bar - p.h_ex;
    let kp = (k + 1) % nz;
    let [a0x, a0y, a0z] = &state.a0;
    let mut r = Vec::with_capacity(m * m);
    for j in 0..m {
        let jp = (j + 1) % m;
        for i in 0..m {
            let ip = (i + 1) % m;
            let c = geom.cell(k, i, j);
            let bx = (a0y[c] - a0y[geom.cell(kp, i, j)]) / az + (a0z[geom.cell(k, i, jp)] - a0z[c]) / ay;
            let by = (a0z[c] - a0z[geom.cell(k, ip, j)]) / ax + (a0x[geom.cell(kp, i, j)] - a0x[c]) / az;
            let bz = (a0y[geom.cell(k, ip, j)] - a0y[c]) / ax - (a0x[geom.cell(k, i, jp)] - a0x[c]) / ay;
            r.push([h.h1 + bx, h.h2 + by, h.h3 + bz]);
        }
    }
    r
}

fn evaluate(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams, grad: bool) -> Result<(EnergyBreakdown, Option<Gradient>)> {
    state.check_dims(geom)?;
    p.validate()?;
    let w = Weights::new(geom, p);
    let np = geom.n_planes;
    let nz = geom.nz();
    let m2 = geom.plane_sites();

    let planes: Vec<PlaneTerms> = (0..np).into_par_iter().map(|n| plane_terms(state, geom, &w, n, grad)).collect();
    let gaps: Vec<GapTerms> = (1..=np).into_par_iter().map(|g| gap_terms(state, geom, &w, g, grad)).collect();
    let resid: Vec<Vec<[f64; 3]>> = (0..nz).into_par_iter().map(|k| magnetic_residuals(state, geom, p, k)).collect();

    let mut e = EnergyBreakdown::default();
    for t in &planes {
        e.kinetic += t.kinetic;
        e.condensation += t.condensation;
    }
    e.in_plane = e.kinetic + e.condensation;
    e.josephson = gaps.iter().map(|g| g.energy).sum();
    e.magnetic = 0.5 * w.dv * resid.iter().flatten().map(|r| r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sum::<f64>();
    e.total = e.in_plane + e.josephson + e.magnetic;
    if !grad {
        return Ok((e, None));
    }

    let mut g = Gradient::zeros(geom);
    let h = state.h_bar;
    g.u.par_chunks_mut(m2).enumerate().for_each(|(n, gu)| {
        gu.copy_from_slice(&planes[n].gu);
        // Plane n is the top of gap n (gap N when n = 0) and the bottom of gap n+1.
        let as_bottom = &gaps[n];
        let as_top = &gaps[if n == 0 { np - 1 } else { n - 1 }];
        for j in 0..geom.m {
            for i in 0..geom.m {
                let idx = geom.idx2(i, j);
                let wrap = if n == 0 { geom.floquet_z(h, geom.x(i), geom.y(j)).conj() } else { Complex64::new(1.0, 0.0) };
                gu[idx] += 2.0 * w.wj * as_top.d[idx] * wrap;
                gu[idx] -= 2.0 * w.wj * as_bottom.d[idx] * as_bottom.phase[idx].conj();
            }
        }
    });

    let (ax, ay, az) = (geom.ax(), geom.ay(), geom.az());
    let dv = w.dv;
    let m = geom.m;
    let [gx, gy, gz] = &mut g.a0;
    let levels = gx.par_chunks_mut(m2).zip(gy.par_chunks_mut(m2)).zip(gz.par_chunks_mut(m2)).enumerate();
    levels.for_each(|(k, ((gx, gy), gz))| {
        let r = &resid[k];
        let rb = &resid[(k + nz - 1) % nz];
        for j in 0..m {
            let jm = (j + m - 1) % m;
            for i in 0..m {
                let im = (i + m - 1) % m;
                let c = j * m + i;
                let cjm = jm * m + i;
                let cim = j * m + im;
                gx[c] = dv * (rb[c][1] / az - r[c][1] / az - r[cjm][2] / ay + r[c][2] / ay);
                gy[c] = dv * (r[c][0] / az - rb[c][0] / az + r[cim][2] / ax - r[c][2] / ax);
                gz[c] = dv * (r[cjm][0] / ay - r[c][0] / ay + r[c][1] / ax - r[cim][1] / ax);
            }
        }
        if k % geom.kz == 0 {
            let t = &planes[k / geom.kz];
            for c in 0..m2 {
                gx[c] += t.gax[c];
                gy[c] += t.gay[c];
            }
        }
        let gap = &gaps[k / geom.kz];
        for c in 0..m2 {
            gz[c] += gap.ga[c];
        }
    });
    Ok((e, Some(g)))
}

/// Discrete Lawrence–Doniach energy of `state` with its breakdown.
pub fn ld_energy(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams) -> Result<EnergyBreakdown> {
    Ok(evaluate(state, geom, p, false)?.0)
}

/// Energy together with its exact gradient.
pub fn ld_energy_and_gradient(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams) -> Result<(EnergyBreakdown, Gradient)> {
    let (e, g) = evaluate(state, geom, p, true)?;
    Ok((e, g.expect("gradient requested")))
}

/// In-plane energy attributed to each site of plane `n`: the quartic term plus
/// the two links leaving the site in the positive directions.
pub fn in_plane_density(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams, n: usize) -> Result<Vec<f64>> {
    state.check_dims(geom)?;
    let w = Weights::new(geom, p);
    let m = geom.m;
    let (ax, ay) = (geom.ax(), geom.ay());
    let h = state.h_bar;
    let z = geom.plane_z(n);
    let base = geom.cell(n * geom.kz, 0, 0);
    let u = state.plane(geom, n);
    let mut out = vec![0.0; m * m];
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            let (x, y) = (geom.x(i), geom.y(j));
            let ux = if i + 1 == m { u[j * m] * geom.floquet_x(h, y, z) } else { u[idx + 1] };
            let uy = if j + 1 == m { u[i] * geom.floquet_y(h, x, z) } else { u[idx + m] };
            let cx = Complex64::from_polar(1.0, -(geom.abar_x_phase(h, y, z) + state.a0[0][base + idx] * ax));
            let cy = Complex64::from_polar(1.0, -(geom.abar_y_phase(h, x, z) + state.a0[1][base + idx] * ay));
            let r = u[idx].norm_sqr() - 1.0;
            out[idx] = w.wx * (ux * cx - u[idx]).norm_sqr() + w.wy * (uy * cy - u[idx]).norm_sqr() + w.wq * r * r;
        }
    }
    Ok(out)
}
