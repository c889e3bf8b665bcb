use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{build_basis, periodize, AnisotropicBasis, Periodization};
use super::reference::theta_arg;
use crate::error::{Error, Result};
use crate::lattice::{in_plane_density, ld_energy, EnergyBreakdown, LatticeGeometry, LatticeState, ModelParams};
use crate::limit::{eval_f, LimitParams};
use crate::metric::{AnisotropyMetric, FieldVector};

/// Phase jumps larger than this in the annulus mean the core is not resolved.
const MAX_ANNULUS_PHASE: f64 = 3.0;

/// Every ingredient of a trial configuration, serializable for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecipe {
    /// Target field `h` in normalized units.
    pub target_h: FieldVector,
    pub alpha: f64,
    pub lambda: f64,
    pub s: f64,
    pub epsilon: f64,
    pub basis: AnisotropicBasis,
    pub periodization: Periodization,
    /// Average field of the lattice configuration, `2π r₁ × r₂`.
    pub h_bar: FieldVector,
    /// Radii of the cutoff `ρ_s` in reference coordinates.
    pub cutoff_radii: [f64; 2],
    /// Radius of the disks `D_s` carved around each vortex in the planes.
    pub disk_radius: f64,
    /// The core profile vanishes below the first radius and is 1 beyond the second.
    pub core_radii: [f64; 2],
    /// Selected slice offset `t ∈ [0, s)`, set by [`build_trial`].
    pub offset_t: Option<f64>,
    /// Constant `A₀ = −k` removing the constant Floquet phases, set by [`build_trial`].
    pub gauge_shift: Option<[f64; 3]>,
}

impl TrialRecipe {
    pub fn new(target_h: FieldVector, alpha: f64, lambda: f64, s: f64, epsilon: f64, geom: &LatticeGeometry) -> Result<Self> {
        geom.validate()?;
        if !(epsilon > 0.0 && epsilon < s / 4.0) {
            return Err(Error::InvalidParameter(format!("need 0 < epsilon < s/4, got epsilon = {epsilon}, s = {s}")));
        }
        if (geom.s() - s).abs() > 1e-12 * s {
            return Err(Error::InvalidParameter(format!("geometry spacing {} differs from recipe s = {s}", geom.s())));
        }
        let metric = AnisotropyMetric::new(lambda)?;
        let basis = build_basis(target_h, alpha, &metric)?;
        let periodization = periodize(&basis, s, [geom.lx, geom.ly, geom.l])?;
        let phi = periodization.phi_s_matrix();
        let q = Matrix2::new(phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
        let sigma_min = q.svd(false, false).singular_values.min();
        // The cutoff region must fit inside D_s once mapped back to the planes.
        let r = s * (sigma_min / 2.0).min(1.0);
        Ok(Self {
            target_h,
            alpha,
            lambda,
            s,
            epsilon,
            basis,
            h_bar: periodization.field(),
            periodization,
            cutoff_radii: [r, 2.0 * r],
            disk_radius: s,
            core_radii: [epsilon, 2.0 * epsilon],
            offset_t: None,
            gauge_shift: None,
        })
    }

    fn check(&self, geom: &LatticeGeometry, p: &ModelParams) -> Result<()> {
        if (geom.s() - self.s).abs() > 1e-12 * self.s {
            return Err(Error::InvalidParameter(format!("geometry spacing {} differs from recipe s = {}", geom.s(), self.s)));
        }
        if (p.epsilon - self.epsilon).abs() > 1e-12 * self.epsilon || (p.lambda - self.lambda).abs() > 1e-12 * self.lambda {
            return Err(Error::InvalidParameter("model parameters differ from the recipe".into()));
        }
        geom.check_admissible(self.h_bar)
    }
}

/// A vortex position in one plane and the reference lattice point it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VortexCenter {
    pub x: f64,
    pub y: f64,
    /// `π Φ_s(c)`, an integer pair.
    pub p: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetSample {
    pub t: f64,
    pub slice_energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trial {
    pub state: LatticeState,
    pub recipe: TrialRecipe,
    pub offset_scan: Vec<OffsetSample>,
    /// Centers inside the fundamental cell, per plane.
    pub centers: Vec<Vec<VortexCenter>>,
}

/// The mapped reference configuration at a fixed slice offset.
struct Slice<'a> {
    recipe: &'a TrialRecipe,
    geom: &'a LatticeGeometry,
    phi: Matrix3<f64>,
    q_inv: Matrix2<f64>,
    orientation: f64,
    t: f64,
    /// Constant `½ h̄ × (t e₃)`.
    c: Vector3<f64>,
    k: Vector3<f64>,
}

impl<'a> Slice<'a> {
    fn new(recipe: &'a TrialRecipe, geom: &'a LatticeGeometry, t: f64) -> Result<Self> {
        let phi = recipe.periodization.phi_s_matrix();
        let q = Matrix2::new(phi[(0, 0)], phi[(0, 1)], phi[(1, 0)], phi[(1, 1)]);
        let h = recipe.h_bar;
        let mut sl = Self {
            recipe,
            geom,
            phi,
            q_inv: q.try_inverse().ok_or_else(|| Error::Periodization("plane restriction of the map is singular".into()))?,
            orientation: q.determinant().signum(),
            t,
            c: Vector3::new(0.5 * t * h.h2, -0.5 * t * h.h1, 0.0),
            k: Vector3::zeros(),
        };
        sl.k = sl.floquet_constants()?;
        Ok(sl)
    }

    fn reference_xy(&self, x: f64, y: f64, z: f64) -> Vector2<f64> {
        let r = self.phi * Vector3::new(x, y, z + self.t);
        Vector2::new(r.x, r.y)
    }

    /// Phase of the mapped configuration in the gauge `A = ½ h̄ × x`, before
    /// the constant Floquet correction.
    fn raw_phase(&self, x: f64, y: f64, z: f64) -> f64 {
        let xr = self.reference_xy(x, y, z);
        theta_arg(xr.x, xr.y) + PI * xr.x * xr.y - self.c.dot(&Vector3::new(x, y, z))
    }

    /// Solves for the constant phases left over after matching the linear
    /// Floquet factors of the lattice, and returns `k` with `k·v_j = κ_j`.
    fn floquet_constants(&self) -> Result<Vector3<f64>> {
        let g = self.geom;
        let h = self.recipe.h_bar;
        let mut kappa: Option<[Complex64; 3]> = None;
        let mut used = 0;
        for a in 0..40 {
            let (fx, fy, fz) = ((0.137 + 0.261 * a as f64) % 1.0, (0.419 + 0.377 * a as f64) % 1.0, (0.05 + 0.193 * a as f64) % 1.0);
            let (x, y, z) = (fx * g.lx, fy * g.ly, fz * g.l);
            let near_zero = |x: f64, y: f64, z: f64| {
                let r = self.reference_xy(x, y, z);
                (r.x - r.x.round()).hypot(r.y - r.y.round()) < 0.1
            };
            if near_zero(x, y, z) {
                continue;
            }
            let base = self.raw_phase(x, y, z);
            let ratios = [
                Complex64::from_polar(1.0, self.raw_phase(x + g.lx, y, z) - base) * g.floquet_x(h, y, z).conj(),
                Complex64::from_polar(1.0, self.raw_phase(x, y + g.ly, z) - base) * g.floquet_y(h, x, z).conj(),
                Complex64::from_polar(1.0, self.raw_phase(x, y, z + g.l) - base) * g.floquet_z(h, x, y).conj(),
            ];
            match kappa {
                None => kappa = Some(ratios),
                Some(k) => {
                    for (a, b) in k.iter().zip(&ratios) {
                        if (a - b).norm() > 1e-8 {
                            return Err(Error::Consistency(format!(
                                "mapped configuration is not Floquet periodic on the cell ({} vs {})",
                                a, b
                            )));
                        }
                    }
                }
            }
            used += 1;
            if used == 5 {
                break;
            }
        }
        let k = kappa.ok_or_else(|| Error::Consistency("no sample point away from the vortex lines".into()))?;
        Ok(Vector3::new(k[0].arg() / g.lx, k[1].arg() / g.ly, k[2].arg() / g.l))
    }

    /// Vortex centers in plane `n`, including the periodic images around the
    /// cell, and the number lying in the cell itself.
    fn centers(&self, n: usize) -> Result<(Vec<VortexCenter>, usize)> {
        let g = self.geom;
        let z = g.plane_z(n);
        let corners = [(0.0, 0.0), (g.lx, 0.0), (0.0, g.ly), (g.lx, g.ly)].map(|(x, y)| self.reference_xy(x, y, z));
        let lo = corners.iter().fold(Vector2::repeat(f64::INFINITY), |a, c| a.inf(c));
        let hi = corners.iter().fold(Vector2::repeat(f64::NEG_INFINITY), |a, c| a.sup(c));
        let shift = self.reference_xy(0.0, 0.0, z);
        let mut inside = Vec::new();
        for p1 in (lo.x.floor() as i64 - 1)..=(hi.x.ceil() as i64 + 1) {
            for p2 in (lo.y.floor() as i64 - 1)..=(hi.y.ceil() as i64 + 1) {
                let p = Vector2::new(p1 as f64, p2 as f64);
                let c = self.q_inv * (p - shift);
                let tol = 1e-12 * (g.lx + g.ly);
                if c.x >= -tol && c.x < g.lx - tol && c.y >= -tol && c.y < g.ly - tol {
                    inside.push(VortexCenter { x: c.x, y: c.y, p: [p.x, p.y] });
                }
            }
        }
        let expected = self.recipe.periodization.flux_quanta[2].unsigned_abs() as usize;
        if inside.len() != expected {
            return Err(Error::Consistency(format!("found {} vortex centers in plane {n}, expected {expected}", inside.len())));
        }
        let count = inside.len();
        let mut all = inside.clone();
        for a in -1i64..=1 {
            for b in -1i64..=1 {
                if a == 0 && b == 0 {
                    continue;
                }
                let (dx, dy) = (a as f64 * g.lx, b as f64 * g.ly);
                for c in &inside {
                    let dp = self.reference_xy(c.x + dx, c.y + dy, z) - self.reference_xy(c.x, c.y, z);
                    all.push(VortexCenter { x: c.x + dx, y: c.y + dy, p: [c.p[0] + dp.x.round(), c.p[1] + dp.y.round()] });
                }
            }
        }
        Ok((all, count))
    }

    /// Linear phase matching `Ā` at the center, so the winding core carries no
    /// background current and stays Floquet periodic across the cell boundary.
    fn local_gauge(&self, c: &VortexCenter, x: f64, y: f64, z: f64) -> f64 {
        let h = self.recipe.h_bar;
        0.5 * ((h.h2 * z - h.h3 * c.y) * x + (h.h3 * c.x - h.h1 * z) * y)
    }

    /// Constant phase `ξ(c)` of the core: circular mean of the mismatch with
    /// the outer phase on the circle `|x − c| = s`.
    fn center_phase(&self, c: &VortexCenter, z: f64) -> f64 {
        let s = self.recipe.disk_radius;
        let n = 64;
        let sum: Complex64 = (0..n)
            .map(|a| {
                let th = 2.0 * PI * a as f64 / n as f64;
                let (x, y) = (c.x + s * th.cos(), c.y + s * th.sin());
                let m = self.raw_phase(x, y, z) - self.orientation * th - self.local_gauge(c, x, y, z);
                Complex64::from_polar(1.0, m)
            })
            .sum();
        sum.arg()
    }

    fn cutoff(&self, r: f64) -> f64 {
        let [r0, r1] = self.recipe.cutoff_radii;
        ((r - r0) / (r1 - r0)).clamp(0.0, 1.0)
    }

    fn core_profile(&self, r: f64) -> f64 {
        let [r0, r1] = self.recipe.core_radii;
        ((r - r0) / (r1 - r0)).clamp(0.0, 1.0)
    }

    /// Samples plane `n`. With `cores` the vortex disks are replaced by the
    /// two-dimensional core profile; otherwise the cutoff `ρ_s` is applied.
    fn sample_plane(&self, n: usize, cores: bool, out: &mut [Complex64]) -> Result<()> {
        let g = self.geom;
        let z = g.plane_z(n);
        let (centers, _) = self.centers(n)?;
        let xi: Vec<f64> = centers.iter().map(|c| self.center_phase(c, z)).collect();
        let s = self.recipe.disk_radius;
        let err = out.par_chunks_mut(g.m).enumerate().map(|(j, row)| -> Result<()> {
            let y = g.y(j);
            for (i, v) in row.iter_mut().enumerate() {
                let x = g.x(i);
                let raw = self.raw_phase(x, y, z);
                let gauge = Complex64::from_polar(1.0, -self.k.dot(&Vector3::new(x, y, z)));
                if !cores {
                    let xr = self.reference_xy(x, y, z);
                    let d = (xr.x - xr.x.round()).hypot(xr.y - xr.y.round());
                    *v = Complex64::from_polar(self.cutoff(d), raw) * gauge;
                    continue;
                }
                let (idx, r) = centers
                    .iter()
                    .enumerate()
                    .map(|(a, c)| (a, (x - c.x).hypot(y - c.y)))
                    .fold((0, f64::INFINITY), |b, a| if a.1 < b.1 { a } else { b });
                let u = if r < 2.0 * s {
                    let c = &centers[idx];
                    let theta = self.orientation * (y - c.y).atan2(x - c.x) + self.local_gauge(c, x, y, z);
                    if r < s {
                        Complex64::from_polar(self.core_profile(r), theta + xi[idx])
                    } else {
                        let delta = Complex64::from_polar(1.0, raw - theta - xi[idx]).arg();
                        if delta.abs() > MAX_ANNULUS_PHASE {
                            return Err(Error::Resolution(format!(
                                "phase mismatch {delta} in the annulus around ({}, {}); s is too large for this field",
                                c.x, c.y
                            )));
                        }
                        Complex64::from_polar(1.0, theta + xi[idx] + (r - s) / s * delta)
                    }
                } else {
                    Complex64::from_polar(1.0, raw)
                };
                *v = u * gauge;
            }
            Ok(())
        });
        err.collect::<Result<Vec<()>>>()?;
        Ok(())
    }

    fn state(&self, cores: bool) -> Result<LatticeState> {
        let g = self.geom;
        let mut st = LatticeState::uniform(g, Complex64::new(0.0, 0.0), self.recipe.h_bar);
        for (n, plane) in st.u.chunks_mut(g.plane_sites()).enumerate() {
            self.sample_plane(n, cores, plane)?;
        }
        for (c, a) in st.a0.iter_mut().enumerate() {
            a.fill(-self.k[c]);
        }
        Ok(st)
    }
}

fn check_disk_separation(centers: &[VortexCenter], s: f64) -> Result<()> {
    for (a, c) in centers.iter().enumerate() {
        for d in &centers[a + 1..] {
            if (c.x - d.x).hypot(c.y - d.y) < 4.0 * s {
                return Err(Error::Resolution(format!(
                    "vortex disks of radius 2s around ({}, {}) and ({}, {}) overlap",
                    c.x, c.y, d.x, d.y
                )));
            }
        }
    }
    Ok(())
}

/// Builds the trial configuration. The slice offset is the argmin, over `Kz`
/// equally spaced candidates in `[0, s)`, of the in-plane energy of the cut-off
/// configuration with `ε` replaced by `s`.
pub fn build_trial(recipe: &TrialRecipe, geom: &LatticeGeometry, p: &ModelParams) -> Result<Trial> {
    recipe.check(geom, p)?;
    let scan_params = ModelParams { epsilon: recipe.s, ..*p };
    let mut scan = Vec::with_capacity(geom.kz);
    for k in 0..geom.kz {
        let t = k as f64 * geom.az();
        let slice = Slice::new(recipe, geom, t)?;
        let e = ld_energy(&slice.state(false)?, geom, &scan_params)?;
        scan.push(OffsetSample { t, slice_energy: e.in_plane });
    }
    let best = scan
        .iter()
        .enumerate()
        .fold(0, |b, (i, o)| if o.slice_energy < scan[b].slice_energy { i } else { b });
    let t = scan[best].t;
    let slice = Slice::new(recipe, geom, t)?;
    let mut centers = Vec::with_capacity(geom.n_planes);
    for n in 0..geom.n_planes {
        let (all, count) = slice.centers(n)?;
        check_disk_separation(&all, recipe.disk_radius)?;
        centers.push(all[..count].to_vec());
    }
    let state = slice.state(true)?;
    let mut recipe = recipe.clone();
    recipe.offset_t = Some(t);
    recipe.gauge_shift = Some([slice.k.x, slice.k.y, slice.k.z]);
    Ok(Trial { state, recipe, offset_scan: scan, centers })
}

impl Trial {
    /// In-plane energy inside each disk `D_s`, divided by `s`, per plane and vortex.
    pub fn core_energies(&self, geom: &LatticeGeometry, p: &ModelParams) -> Result<Vec<Vec<f64>>> {
        let s = self.recipe.disk_radius;
        let mut out = Vec::with_capacity(geom.n_planes);
        for (n, centers) in self.centers.iter().enumerate() {
            let dens = in_plane_density(&self.state, geom, p, n)?;
            let mut per = vec![0.0; centers.len()];
            for j in 0..geom.m {
                for i in 0..geom.m {
                    let (x, y) = (geom.x(i), geom.y(j));
                    for (a, c) in centers.iter().enumerate() {
                        let dx = (x - c.x + 0.5 * geom.lx).rem_euclid(geom.lx) - 0.5 * geom.lx;
                        let dy = (y - c.y + 0.5 * geom.ly).rem_euclid(geom.ly) - 0.5 * geom.ly;
                        if dx.hypot(dy) < s {
                            per[a] += dens[geom.idx2(i, j)] / geom.s();
                        }
                    }
                }
            }
            out.push(per);
        }
        Ok(out)
    }
}

/// Energy of a configuration against the closed-form upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub energy: EnergyBreakdown,
    pub normalized_energy: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// `E/(|Ω| ln²ε)` against `½[(1−α)|h₃| + α‖h‖_g + |h − H_ex|²]` with
/// `H_ex = h_ex/|ln ε|`.
pub fn evaluate_against_bound(
    state: &LatticeState,
    geom: &LatticeGeometry,
    p: &ModelParams,
    target_h: FieldVector,
) -> Result<BoundReport> {
    let energy = ld_energy(state, geom, p)?;
    let normalized_energy = p.normalize_energy(energy.total, geom);
    let h_ex = (1.0 / p.log_scale()) * p.h_ex;
    let limit = LimitParams::new(p.alpha, AnisotropyMetric::new(p.lambda)?, h_ex)?;
    let bound = eval_f(target_h, &limit);
    Ok(BoundReport { energy, normalized_energy, bound, ratio: normalized_energy / bound })
}
