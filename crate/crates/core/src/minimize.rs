//! Descent on the discrete energy at fixed average field, and the outer search
//! over quantized flux sectors.
//!
//! Directions are preconditioned by the inverse site weights (`1/(s·ax·ay)` for
//! order parameters, `1/(ax·ay·az)` for `A₀`), so the stopping test compares
//! energy densities rather than raw partial derivatives.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{
    ld_energy, ld_energy_and_gradient, plane_degree, plane_flux, EnergyBreakdown, Gradient, LatticeGeometry,
    LatticeState, ModelParams,
};
use crate::metric::FieldVector;

const MAX_HALVINGS: usize = 60;
const ARMIJO_C: f64 = 1e-4;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    Fixed,
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Threshold on the preconditioned gradient sup-norm. `None` means `1e-6/ε²`.
    pub grad_tol: Option<f64>,
    pub step_rule: StepRule,
    /// Step for the fixed rule, and the first trial step for backtracking.
    /// `None` picks a step from the stiffest term.
    pub step: Option<f64>,
    /// Polak–Ribière conjugate directions on top of backtracking.
    pub conjugate: bool,
    pub seed: u64,
    /// Inclusive range of plane flux quanta for the outer search.
    pub flux_range: (i64, i64),
    /// Horizontal flux quanta `(m1, m2)` tried in every vertical sector.
    pub horizontal_grid: Vec<(i64, i64)>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            grad_tol: None,
            step_rule: StepRule::Backtracking,
            step: None,
            conjugate: true,
            seed: 0,
            flux_range: (0, 0),
            horizontal_grid: vec![(0, 0)],
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let Some(t) = self.grad_tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!("grad_tol must be positive, got {t}")));
            }
        }
        if let Some(t) = self.step {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!("step must be positive, got {t}")));
            }
        }
        if self.flux_range.0 > self.flux_range.1 {
            return Err(Error::InvalidParameter(format!("empty flux range {:?}", self.flux_range)));
        }
        if self.horizontal_grid.is_empty() {
            return Err(Error::InvalidParameter("horizontal grid is empty".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, p: &ModelParams) -> f64 {
        self.grad_tol.unwrap_or(1e-6 / (p.epsilon * p.epsilon))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterations,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub status: Status,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub energy: EnergyBreakdown,
    pub normalized_energy: f64,
    pub grad_norm: f64,
    pub grad_tol: f64,
    pub h_bar: FieldVector,
    pub plane_fluxes: Vec<f64>,
    /// `None` where the boundary modulus is too small for a degree.
    pub degrees: Vec<Option<i64>>,
    pub max_modulus: f64,
    pub min_modulus: f64,
}

#[derive(Debug, Clone)]
pub struct Minimized {
    pub state: LatticeState,
    pub report: ConvergenceReport,
}

/// A solver failure that still carries the last accepted iterate.
#[derive(Debug)]
pub struct MinimizeFailure {
    pub error: Error,
    pub partial: Option<Box<Minimized>>,
}

impl From<Error> for MinimizeFailure {
    fn from(error: Error) -> Self {
        Self { error, partial: None }
    }
}

impl From<MinimizeFailure> for Error {
    fn from(f: MinimizeFailure) -> Self {
        f.error
    }
}

fn weights(geom: &LatticeGeometry) -> (f64, f64) {
    (1.0 / (geom.s() * geom.ax() * geom.ay()), 1.0 / (geom.ax() * geom.ay() * geom.az()))
}

fn precondition(g: &Gradient, geom: &LatticeGeometry) -> Gradient {
    let (pu, pa) = weights(geom);
    Gradient {
        u: g.u.par_iter().map(|z| z * pu).collect(),
        a0: [0, 1, 2].map(|c| g.a0[c].par_iter().map(|v| v * pa).collect()),
    }
}

fn dot(a: &Gradient, b: &Gradient) -> f64 {
    let su: f64 = a
        .u
        .par_chunks(CHUNK)
        .zip(b.u.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.re * q.re + p.im * q.im).sum::<f64>())
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let sa: f64 = (0..3)
        .map(|c| {
            a.a0[c]
                .par_chunks(CHUNK)
                .zip(b.a0[c].par_chunks(CHUNK))
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                .collect::<Vec<_>>()
                .iter()
                .sum::<f64>()
        })
        .sum();
    su + sa
}

fn step_state(x: &LatticeState, d: &Gradient, t: f64) -> LatticeState {
    LatticeState {
        u: x.u.par_iter().zip(&d.u).map(|(a, b)| a + b * t).collect(),
        a0: [0, 1, 2].map(|c| x.a0[c].par_iter().zip(&d.a0[c]).map(|(a, b)| a + b * t).collect()),
        h_bar: x.h_bar,
    }
}

fn sup_norm(g: &Gradient) -> f64 {
    g.sup_norm()
}

/// Step scale from the stiffest term, in preconditioned units.
fn default_step(geom: &LatticeGeometry, p: &ModelParams) -> f64 {
    let a = geom.ax().min(geom.ay());
    let stiff = 4.0 / (a * a) + 2.0 / (p.epsilon * p.epsilon) + 2.0 / (p.lambda * geom.s()).powi(2) + 4.0 / geom.az().powi(2);
    0.5 / stiff
}

fn build_report(
    state: &LatticeState,
    geom: &LatticeGeometry,
    p: &ModelParams,
    status: Status,
    trace: Vec<f64>,
    energy: EnergyBreakdown,
    grad_norm: f64,
    grad_tol: f64,
) -> ConvergenceReport {
    let plane_fluxes = (0..geom.n_planes).map(|n| plane_flux(state, geom, n).unwrap_or(f64::NAN)).collect();
    let degrees = (0..geom.n_planes).map(|n| plane_degree(state, geom, n).ok()).collect();
    let max_modulus = state.max_modulus();
    if max_modulus > 1.0 + 1e-3 {
        log::warn!("max |u| = {max_modulus} exceeds 1 + 1e-3");
    }
    ConvergenceReport {
        status,
        iterations: trace.len().saturating_sub(1),
        normalized_energy: p.normalize_energy(energy.total, geom),
        energy_trace: trace,
        energy,
        grad_norm,
        grad_tol,
        h_bar: state.h_bar,
        plane_fluxes,
        degrees,
        max_modulus,
        min_modulus: state.min_modulus(),
    }
}

/// Minimizes over `(u, A₀)` with `h̄` held fixed.
pub fn minimize(
    state0: &LatticeState,
    geom: &LatticeGeometry,
    p: &ModelParams,
    opts: &MinimizeOptions,
) -> std::result::Result<Minimized, MinimizeFailure> {
    opts.validate()?;
    state0.check_dims(geom)?;
    geom.check_admissible(state0.h_bar)?;
    let tol = opts.tolerance(p);
    let base_step = opts.step.unwrap_or_else(|| default_step(geom, p));

    let mut x = state0.clone();
    let (mut e, mut g) = ld_energy_and_gradient(&x, geom, p)?;
    let mut pg = precondition(&g, geom);
    let mut dir = Gradient { u: pg.u.iter().map(|z| -z).collect(), a0: pg.a0.clone().map(|a| a.iter().map(|v| -v).collect()) };
    let mut trace = vec![e.total];
    let mut t = base_step;
    let mut status = Status::MaxIterations;

    for iter in 0..opts.max_iters {
        let gnorm = sup_norm(&pg);
        if gnorm <= tol {
            status = Status::Converged;
            break;
        }
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            // Not a descent direction: restart along the preconditioned gradient.
            dir = Gradient { u: pg.u.iter().map(|z| -z).collect(), a0: pg.a0.clone().map(|a| a.iter().map(|v| -v).collect()) };
            slope = dot(&g, &dir);
        }

        let (xn, en) = match opts.step_rule {
            StepRule::Fixed => {
                let xn = step_state(&x, &dir, base_step);
                let en = ld_energy(&xn, geom, p)?;
                if en.total > e.total {
                    let report = build_report(&x, geom, p, Status::Stalled, trace, e, gnorm, tol);
                    return Err(MinimizeFailure {
                        error: Error::Stalled { iteration: iter, halvings: 0 },
                        partial: Some(Box::new(Minimized { state: x, report })),
                    });
                }
                (xn, en)
            }
            StepRule::Backtracking => {
                let mut accepted = None;
                let mut tt = t;
                for _ in 0..=MAX_HALVINGS {
                    let xn = step_state(&x, &dir, tt);
                    let en = ld_energy(&xn, geom, p)?;
                    let predicted = ARMIJO_C * tt * slope;
                    let below_rounding = predicted.abs() < 1e-13 * e.total.abs();
                    if en.total <= e.total && (en.total <= e.total + predicted || below_rounding) {
                        accepted = Some((xn, en));
                        break;
                    }
                    tt *= 0.5;
                }
                match accepted {
                    Some(v) => {
                        t = (2.0 * tt).min(1e6 * base_step);
                        v
                    }
                    None => {
                        let report = build_report(&x, geom, p, Status::Stalled, trace, e, gnorm, tol);
                        return Err(MinimizeFailure {
                            error: Error::Stalled { iteration: iter, halvings: MAX_HALVINGS },
                            partial: Some(Box::new(Minimized { state: x, report })),
                        });
                    }
                }
            }
        };

        let (en2, gn) = ld_energy_and_gradient(&xn, geom, p)?;
        debug_assert!(en2.total == en.total);
        let pgn = precondition(&gn, geom);
        let beta = if opts.conjugate && opts.step_rule == StepRule::Backtracking {
            let num = dot(&gn, &pgn) - dot(&gn, &pg);
            let den = dot(&g, &pg);
            if den > 0.0 { (num / den).max(0.0) } else { 0.0 }
        } else {
            0.0
        };
        dir = Gradient {
            u: pgn.u.par_iter().zip(&dir.u).map(|(q, d)| -q + d * beta).collect(),
            a0: [0, 1, 2].map(|c| pgn.a0[c].par_iter().zip(&dir.a0[c]).map(|(q, d)| -q + d * beta).collect()),
        };
        x = xn;
        e = en;
        g = gn;
        pg = pgn;
        trace.push(e.total);
        log::debug!("iter {} energy {:.12e} grad {:.3e}", iter + 1, e.total, sup_norm(&pg));
    }

    let gnorm = sup_norm(&pg);
    if status == Status::MaxIterations && gnorm <= tol {
        status = Status::Converged;
    }
    let report = build_report(&x, geom, p, status, trace, e, gnorm, tol);
    Ok(Minimized { state: x, report })
}

/// Largest relative discrepancy between the analytic gradient and central
/// differences over `n_coords` random real coordinates.
pub fn finite_difference_check(
    state: &LatticeState,
    geom: &LatticeGeometry,
    p: &ModelParams,
    n_coords: usize,
    seed: u64,
) -> Result<f64> {
    let (_, grad) = ld_energy_and_gradient(state, geom, p)?;
    let nu = state.u.len();
    let nc = geom.n_cells();
    let total = 2 * nu + 3 * nc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_coords {
        let slot = rng.gen_range(0..total);
        let (value, analytic) = if slot < 2 * nu {
            let z = state.u[slot / 2];
            let gz = grad.u[slot / 2];
            if slot % 2 == 0 { (z.re, gz.re) } else { (z.im, gz.im) }
        } else {
            let r = slot - 2 * nu;
            (state.a0[r / nc][r % nc], grad.a0[r / nc][r % nc])
        };
        let h = 1e-6 * value.abs().max(1.0);
        let shifted = |delta: f64| -> Result<f64> {
            let mut s = state.clone();
            if slot < 2 * nu {
                let z = &mut s.u[slot / 2];
                *z += if slot % 2 == 0 { Complex64::new(delta, 0.0) } else { Complex64::new(0.0, delta) };
            } else {
                let r = slot - 2 * nu;
                s.a0[r / nc][r % nc] += delta;
            }
            Ok(ld_energy(&s, geom, p)?.total)
        };
        let fd = (shifted(h)? - shifted(-h)?) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / (1.0 + analytic.abs()));
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorSummary {
    /// Face flux quanta `(m1, m2, m3)` of `h̄`.
    pub flux: [i64; 3],
    pub h_bar: FieldVector,
    pub energy: f64,
    pub normalized_energy: f64,
    pub status: Status,
    pub warm_started: bool,
}

#[derive(Debug, Clone)]
pub struct FluxSearchResult {
    pub best: Minimized,
    pub best_flux: [i64; 3],
    pub sectors: Vec<SectorSummary>,
}

fn sector_seed(seed: u64, q: [i64; 3]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for v in q {
        h = (h ^ (v as u64)).wrapping_mul(0x1000_0000_01B3).rotate_left(17);
    }
    h
}

fn run_or_partial(state: &LatticeState, geom: &LatticeGeometry, p: &ModelParams, opts: &MinimizeOptions) -> Result<Minimized> {
    match minimize(state, geom, p, opts) {
        Ok(m) => Ok(m),
        Err(MinimizeFailure { partial: Some(m), error }) => {
            log::warn!("sector with h_bar {:?} stopped early: {error}", state.h_bar);
            Ok(*m)
        }
        Err(f) => Err(f.error),
    }
}

/// Minimizes in every sector `h̄ = quantized(m1, m2, m3)` with `m3` in the flux
/// range and `(m1, m2)` in the horizontal grid, each from random phases.
/// Warm starts are minimized in their own sector as additional candidates.
/// Sectors whose energies agree to `1e-9` relative are ordered by
/// `|m1| + |m2| + |m3|`.
pub fn outer_flux_search(
    geom: &LatticeGeometry,
    p: &ModelParams,
    opts: &MinimizeOptions,
    warm_starts: &[LatticeState],
) -> Result<FluxSearchResult> {
    opts.validate()?;
    let mut jobs: Vec<([i64; 3], LatticeState, bool)> = Vec::new();
    for m3 in opts.flux_range.0..=opts.flux_range.1 {
        for &(m1, m2) in &opts.horizontal_grid {
            let h = geom.quantized_field(m1, m2, m3);
            let q = [m1, m2, m3];
            jobs.push((q, LatticeState::random_phases(geom, h, sector_seed(opts.seed, q)), false));
        }
    }
    for w in warm_starts {
        w.check_dims(geom)?;
        geom.check_admissible(w.h_bar)?;
        let q = geom.flux_quanta(w.h_bar).map(|v| v.round() as i64);
        jobs.push((q, w.clone(), true));
    }
    let results: Vec<Result<Minimized>> = jobs.par_iter().map(|(_, s, _)| run_or_partial(s, geom, p, opts)).collect();

    let mut sectors = Vec::with_capacity(jobs.len());
    let mut best: Option<(usize, f64)> = None;
    let mut runs = Vec::with_capacity(jobs.len());
    for (idx, ((q, _, warm), r)) in jobs.iter().zip(results).enumerate() {
        let m = r?;
        let energy = m.report.energy.total;
        sectors.push(SectorSummary {
            flux: *q,
            h_bar: m.state.h_bar,
            energy,
            normalized_energy: m.report.normalized_energy,
            status: m.report.status,
            warm_started: *warm,
        });
        let size = |q: &[i64; 3]| q.iter().map(|v| v.abs()).sum::<i64>();
        best = match best {
            None => Some((idx, energy)),
            Some((bi, be)) => {
                let tie = (energy - be).abs() <= 1e-9 * be.abs().max(energy.abs()).max(1e-300);
                if (tie && size(q) < size(&jobs[bi].0)) || (!tie && energy < be) {
                    Some((idx, energy))
                } else {
                    Some((bi, be))
                }
            }
        };
        runs.push(m);
    }
    let (bi, _) = best.expect("at least one sector");
    let best_flux = jobs[bi].0;
    Ok(FluxSearchResult { best: runs.swap_remove(bi), best_flux, sectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (LatticeGeometry, ModelParams) {
        let g = LatticeGeometry::new(4, 16, 1, 1.0, 1.0, 1.0).unwrap();
        let p = ModelParams::new(0.3, 1.0, 0.5, FieldVector::ZERO).unwrap();
        (g, p)
    }

    #[test]
    fn ground_state_is_a_fixed_point() {
        let (g, p) = small();
        let s = LatticeState::uniform(&g, Complex64::new(1.0, 0.0), FieldVector::ZERO);
        let m = minimize(&s, &g, &p, &MinimizeOptions::default()).unwrap();
        assert_eq!(m.report.status, Status::Converged);
        assert_eq!(m.report.iterations, 0);
        assert_eq!(m.report.energy.total, 0.0);
    }

    #[test]
    fn relaxes_random_phases_to_the_ground_state() {
        let (g, p) = small();
        let s = LatticeState::random_phases(&g, FieldVector::ZERO, 17);
        let opts = MinimizeOptions { max_iters: 5000, ..Default::default() };
        let m = minimize(&s, &g, &p, &opts).unwrap();
        assert!(m.report.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.report.normalized_energy <= 1e-6, "{:?}", m.report.normalized_energy);
        assert!(m.report.min_modulus >= 1.0 - 1e-3);
    }

    #[test]
    fn gradient_check_passes() {
        let (g, _) = small();
        let p = ModelParams::new(0.3, 0.7, 0.5, FieldVector::new(0.2, 0.0, 4.0)).unwrap();
        let s = LatticeState::random_phases(&g, g.quantized_field(0, 1, 1), 3).perturbed(0.2, 4);
        assert!(finite_difference_check(&s, &g, &p, 200, 5).unwrap() <= 1e-6);
    }

    #[test]
    fn deterministic_trace() {
        let (g, p) = small();
        let s = LatticeState::random_phases(&g, FieldVector::ZERO, 2);
        let opts = MinimizeOptions { max_iters: 40, ..Default::default() };
        let a = minimize(&s, &g, &p, &opts).unwrap();
        let b = minimize(&s, &g, &p, &opts).unwrap();
        assert_eq!(a.report.energy_trace, b.report.energy_trace);
    }

    #[test]
    fn fixed_step_descends() {
        let (g, p) = small();
        let s = LatticeState::random_phases(&g, FieldVector::ZERO, 8);
        let opts = MinimizeOptions { max_iters: 50, step_rule: StepRule::Fixed, ..Default::default() };
        let m = minimize(&s, &g, &p, &opts).unwrap();
        assert!(m.report.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(m.report.energy.total < m.report.energy_trace[0]);
    }

    #[test]
    fn inadmissible_average_field_is_rejected() {
        let (g, p) = small();
        let s = LatticeState::uniform(&g, Complex64::new(1.0, 0.0), FieldVector::new(0.0, 0.0, 1.0));
        assert!(minimize(&s, &g, &p, &MinimizeOptions::default()).is_err());
    }

    #[test]
    fn options_validation() {
        assert!(MinimizeOptions { max_iters: 0, ..Default::default() }.validate().is_err());
        assert!(MinimizeOptions { grad_tol: Some(0.0), ..Default::default() }.validate().is_err());
        assert!(MinimizeOptions { flux_range: (1, 0), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn zero_field_selects_zero_flux() {
        let g = LatticeGeometry::new(2, 8, 1, 1.0, 1.0, 0.5).unwrap();
        let p = ModelParams::new(0.3, 1.0, 0.5, FieldVector::ZERO).unwrap();
        let opts = MinimizeOptions { max_iters: 400, flux_range: (-1, 1), ..Default::default() };
        let r = outer_flux_search(&g, &p, &opts, &[]).unwrap();
        assert_eq!(r.best_flux, [0, 0, 0]);
        assert_eq!(r.sectors.len(), 3);
    }
}
