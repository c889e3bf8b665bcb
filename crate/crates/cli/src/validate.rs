//! Cross-validation suite run by `lawdon validate`.

use std::f64::consts::FRAC_PI_2;

use lawdon_core::interp::{check_micmac_inequalities, check_zderiv_identity};
use lawdon_core::lattice::{gauge_transform, ld_energy, plane_flux, GaugeFunction, LatticeGeometry, LatticeState, ModelParams};
use lawdon_core::limit::{classify, critical_field_by_bisection, hc1, minimize_f_oracle, LimitParams};
use lawdon_core::minimize::{finite_difference_check, minimize, MinimizeOptions};
use lawdon_core::{AnisotropyMetric, FieldVector, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ValidateConfig;

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, value: f64, tolerance: f64) -> Check {
    log::info!("{name}: {value:e} (tolerance {tolerance:e})");
    Check { name, value, tolerance, passed: value <= tolerance }
}

fn random_limit_params(rng: &mut ChaCha8Rng) -> Result<LimitParams> {
    let h = loop {
        let v = FieldVector::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        if v.norm() <= 10.0 {
            break v;
        }
    };
    LimitParams::new(rng.gen_range(0.05..0.95), AnisotropyMetric::new(rng.gen_range(0.2..5.0))?, h)
}

fn random_state(g: &LatticeGeometry, h: FieldVector, rng: &mut ChaCha8Rng) -> LatticeState {
    let mut st = LatticeState::random_phases(g, h, rng.gen());
    for u in st.u.iter_mut() {
        *u *= rng.gen_range(0.2..1.0);
    }
    for a in st.a0.iter_mut().flatten() {
        *a = rng.gen_range(-1.0..1.0);
    }
    st
}

pub fn run(cfg: &ValidateConfig) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    let (mut dist, mut gap) = (0.0f64, 0.0f64);
    for _ in 0..cfg.instances {
        let p = random_limit_params(&mut rng)?;
        let r = classify(&p)?;
        dist = dist.max((r.h_star - minimize_f_oracle(&p)).norm());
        gap = gap.max(r.duality_gap);
    }
    checks.push(check("projection_vs_direct_minimizer", dist, 1e-6));
    checks.push(check("duality_gap", gap, 1e-8));

    let mut endpoint = 0.0f64;
    let mut bisection = 0.0f64;
    for (alpha, lambda) in [(0.5, 1.0), (0.2, 3.0), (0.8, 0.4)] {
        let m = AnisotropyMetric::new(lambda)?;
        endpoint = endpoint.max((hc1(0.0, alpha, &m)? - alpha / (2.0 * lambda)).abs());
        endpoint = endpoint.max((hc1(FRAC_PI_2, alpha, &m)? - 0.5).abs());
        for k in 0..=4 {
            let t = FRAC_PI_2 * k as f64 / 4.0;
            let exact = hc1(t, alpha, &m)?;
            bisection = bisection.max((critical_field_by_bisection(alpha, m, t, 1e-10)? - exact).abs() / exact);
        }
    }
    checks.push(check("hc1_endpoints", endpoint, 1e-10));
    checks.push(check("hc1_bisection_relative", bisection, 1e-6));

    let g = LatticeGeometry::new(2, 8, 2, 1.0, 1.0, 0.6)?;
    let p = ModelParams::new(0.3, 1.2, 0.5, FieldVector::new(0.4, -0.3, 2.0))?;
    let st = random_state(&g, g.quantized_field(1, 0, 1), &mut rng);
    let e0 = ld_energy(&st, &g, &p)?.total;
    let mut gauge = 0.0f64;
    for _ in 0..cfg.gauges {
        let gamma = GaugeFunction::random_smooth(&g, rng.gen(), 3.0);
        let e1 = ld_energy(&gauge_transform(&st, &g, &gamma)?, &g, &p)?.total;
        gauge = gauge.max((e1 - e0).abs() / e0.abs().max(1.0));
    }
    checks.push(check("gauge_invariance_relative", gauge, 1e-10));
    checks.push(check("gradient_vs_central_differences", finite_difference_check(&st, &g, &p, cfg.gradient_coords, rng.gen())?, 1e-6));

    let mut zres = 0.0f64;
    for _ in 0..cfg.zderiv_states {
        let s = random_state(&g, g.quantized_field(0, 1, -1), &mut rng);
        let c = check_zderiv_identity(&s, &g)?;
        zres = zres.max(c.residual / (1.0 + c.scale));
    }
    checks.push(check("zderiv_identity_scaled_residual", zres, 1e-12));

    // A short relaxation in the one-quantum sector.
    let opts = MinimizeOptions { max_iters: 300, seed: cfg.seed, ..Default::default() };
    let start = LatticeState::random_phases(&g, g.quantized_field(0, 0, 1), cfg.seed);
    let relaxed = match minimize(&start, &g, &p, &opts) {
        Ok(m) => m.state,
        Err(f) => match f.partial {
            Some(m) => m.state,
            None => return Err(f.error),
        },
    };
    let fluxes = (0..g.n_planes).map(|n| plane_flux(&relaxed, &g, n)).collect::<Result<Vec<_>>>()?;
    let integrality = fluxes.iter().map(|f| (f - f.round()).abs()).fold(0.0, f64::max);
    let spread = fluxes.iter().map(|f| (f - fluxes[0]).abs()).fold(0.0, f64::max);
    checks.push(check("plane_flux_integrality", integrality, 1e-8));
    checks.push(check("plane_flux_equality", spread, 1e-8));
    let mm = check_micmac_inequalities(&relaxed, &g, &p, 1e-10)?;
    let half = match (&mm.skipped, mm.gl2_half) {
        (None, Some(h)) => (-h.worst_margin).max(0.0),
        _ => f64::INFINITY,
    };
    checks.push(check("quartic_interpolation_bound_violation", half, 1e-10));

    Ok(ValidationReport { passed: checks.iter().all(|c| c.passed), checks })
}
