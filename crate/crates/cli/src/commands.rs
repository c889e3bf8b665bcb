use std::io::Write;
use std::path::Path;

use lawdon_core::lattice::{io as state_io, plane_degree, plane_flux, LatticeGeometry, LatticeState, ModelParams};
use lawdon_core::limit::{classify, critical_field_by_bisection, hc1, phase_diagram_sweep, write_sweep_csv, LimitParams};
use lawdon_core::minimize::{minimize, outer_flux_search, ConvergenceReport, MinimizeFailure, SectorSummary};
use lawdon_core::trial::{build_trial, evaluate_against_bound, BoundReport, OffsetSample, TrialRecipe};
use lawdon_core::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{self, Hc1Config, LdMinConfig, PhaseDiagramConfig, ProjectConfig, TrialConfig};
use crate::Failure;

pub struct Output<'a> {
    pub path: Option<&'a Path>,
}

impl Output<'_> {
    pub fn write(&self, bytes: &[u8]) -> Result<()> {
        match self.path {
            Some(p) => std::fs::write(p, bytes)?,
            None => std::io::stdout().lock().write_all(bytes)?,
        }
        Ok(())
    }

    pub fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(s.as_bytes())
    }
}

pub fn project(cfg: &ProjectConfig, out: &Output) -> Result<()> {
    let p = LimitParams::new(cfg.alpha, cfg.metric()?, cfg.h_ex()?)?;
    out.json(&classify(&p)?)
}

pub fn hc1_table(cfg: &Hc1Config, out: &Output) -> Result<()> {
    let metric = lawdon_core::AnisotropyMetric::new(cfg.lambda)?;
    let thetas = cfg.theta.points()?;
    if !(cfg.bisection_tol > 0.0 && cfg.bisection_tol < 1.0) {
        return Err(Error::InvalidParameter(format!("bisection_tol must lie in (0, 1), got {}", cfg.bisection_tol)));
    }
    let rows: Vec<(f64, f64, f64)> = thetas
        .par_iter()
        .map(|&t| Ok((t, hc1(t, cfg.alpha, &metric)?, critical_field_by_bisection(cfg.alpha, metric, t, cfg.bisection_tol)?)))
        .collect::<Result<_>>()?;
    let mut buf = Vec::new();
    writeln!(buf, "theta,hc1,hc1_bisection")?;
    for (t, a, b) in rows {
        writeln!(buf, "{t:.16e},{a:.16e},{b:.16e}")?;
    }
    out.write(&buf)
}

pub fn phase_diagram(cfg: &PhaseDiagramConfig, out: &Output) -> Result<()> {
    let rows = phase_diagram_sweep(cfg.alpha, cfg.lambda, &cfg.theta.points()?, &cfg.magnitude.points()?)?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    out.write(&buf)
}

#[derive(Serialize)]
struct LdMinReport<'a> {
    geometry: LatticeGeometry,
    params: ModelParams,
    report: &'a ConvergenceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_flux: Option<[i64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sectors: Option<&'a [SectorSummary]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn ld_min(cfg: &LdMinConfig, out: &Output, state_path: Option<&Path>) -> std::result::Result<(), Failure> {
    cfg.params.validate()?;
    cfg.options.validate()?;
    let initial = match &cfg.initial_state {
        Some(p) => Some(state_io::load_state(p)?),
        None => None,
    };
    let geom = match (&cfg.geometry, &initial) {
        (Some(g), Some((h, _))) if *g != h.geometry => {
            return Err(Error::InvalidParameter("geometry differs from the initial state's".into()).into());
        }
        (Some(g), _) => config::validate_geometry(g)?,
        (None, Some((h, _))) => h.geometry,
        (None, None) => return Err(Error::InvalidParameter("geometry is required without an initial state".into()).into()),
    };
    let save = |st: &LatticeState| -> Result<()> {
        match state_path {
            Some(p) => state_io::save_state(p, &geom, Some(&cfg.params), st),
            None => Ok(()),
        }
    };
    if cfg.search {
        if cfg.flux.is_some() || cfg.h_bar.is_some() {
            return Err(Error::InvalidParameter("flux and h_bar are chosen by the search; use options.flux_range".into()).into());
        }
        let warm: Vec<LatticeState> = initial.into_iter().map(|(_, s)| s).collect();
        let res = outer_flux_search(&geom, &cfg.params, &cfg.options, &warm)?;
        save(&res.best.state)?;
        out.json(&LdMinReport {
            geometry: geom,
            params: cfg.params,
            report: &res.best.report,
            best_flux: Some(res.best_flux),
            sectors: Some(&res.sectors),
            error: None,
        })?;
        return Ok(());
    }
    let start = match initial {
        Some((_, st)) => {
            if cfg.flux.is_some() || cfg.h_bar.is_some() {
                return Err(Error::InvalidParameter("the initial state fixes h_bar; drop flux and h_bar".into()).into());
            }
            st
        }
        None => {
            let h = match (cfg.flux, cfg.h_bar) {
                (Some(_), Some(_)) => return Err(Error::InvalidParameter("give flux or h_bar, not both".into()).into()),
                (Some([m1, m2, m3]), None) => geom.quantized_field(m1, m2, m3),
                (None, Some(h)) => h.validated()?,
                (None, None) => lawdon_core::FieldVector::ZERO,
            };
            geom.check_admissible(h)?;
            LatticeState::random_phases(&geom, h, cfg.options.seed)
        }
    };
    match minimize(&start, &geom, &cfg.params, &cfg.options) {
        Ok(m) => {
            save(&m.state)?;
            out.json(&LdMinReport { geometry: geom, params: cfg.params, report: &m.report, best_flux: None, sectors: None, error: None })?;
            Ok(())
        }
        Err(MinimizeFailure { error, partial: Some(m) }) => {
            save(&m.state)?;
            out.json(&LdMinReport {
                geometry: geom,
                params: cfg.params,
                report: &m.report,
                best_flux: None,
                sectors: None,
                error: Some(error.to_string()),
            })?;
            Err(error.into())
        }
        Err(f) => Err(f.error.into()),
    }
}

#[derive(Serialize)]
struct TrialReport<'a> {
    geometry: LatticeGeometry,
    params: ModelParams,
    recipe: &'a TrialRecipe,
    bound: BoundReport,
    plane_fluxes: Vec<f64>,
    degrees: Vec<Option<i64>>,
    offset_scan: &'a [OffsetSample],
}

pub fn trial(cfg: &TrialConfig, out: &Output, state_path: Option<&Path>) -> Result<()> {
    let geom = config::validate_geometry(&cfg.geometry)?;
    let p = cfg.params;
    p.validate()?;
    let s = cfg.s.unwrap_or_else(|| geom.s());
    let recipe = TrialRecipe::new(cfg.target_h.validated()?, p.alpha, p.lambda, s, p.epsilon, &geom)?;
    let tr = build_trial(&recipe, &geom, &p)?;
    if let Some(path) = state_path {
        state_io::save_state(path, &geom, Some(&p), &tr.state)?;
    }
    let plane_fluxes = (0..geom.n_planes).map(|n| plane_flux(&tr.state, &geom, n)).collect::<Result<_>>()?;
    let degrees = (0..geom.n_planes).map(|n| plane_degree(&tr.state, &geom, n).ok()).collect();
    out.json(&TrialReport {
        geometry: geom,
        params: p,
        recipe: &tr.recipe,
        bound: evaluate_against_bound(&tr.state, &geom, &p, cfg.target_h)?,
        plane_fluxes,
        degrees,
        offset_scan: &tr.offset_scan,
    })
}
