use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{AnisotropyMetric, FieldVector};

use super::{applied_field, eval_f, project_onto_k_shifted, LimitParams};

/// Threshold below which a field component counts as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// The induced field vanishes.
    Meissner,
    /// The induced field is nonzero and lies in the planes.
    LockIn,
    /// The induced field has a vertical component.
    Tilted,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Meissner => "Meissner",
            Regime::LockIn => "LockIn",
            Regime::Tilted => "Tilted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseResult {
    pub h_ex: FieldVector,
    pub h_star: FieldVector,
    pub regime: Regime,
    pub energy: f64,
    /// `|F(H*) + ½|H*|² − ½|H_ex|²|`, zero when `H*` also minimizes the dual.
    pub duality_gap: f64,
}

pub fn classify(p: &LimitParams) -> Result<PhaseResult> {
    let h_star = project_onto_k_shifted(p, FieldVector::ZERO)?;
    let energy = eval_f(h_star, p);
    let duality_gap = (energy + 0.5 * h_star.norm_sq() - 0.5 * p.h_ex().norm_sq()).abs();
    let regime = if h_star.norm() <= ZERO_TOL {
        Regime::Meissner
    } else if h_star.h3.abs() <= ZERO_TOL {
        Regime::LockIn
    } else {
        Regime::Tilted
    };
    Ok(PhaseResult { h_ex: p.h_ex(), h_star, regime, energy, duality_gap })
}

/// Largest applied-field magnitude along angle `theta` for which the induced
/// field vanishes, located by bisection on the classifier.
pub fn critical_field_by_bisection(
    alpha: f64,
    metric: AnisotropyMetric,
    theta: f64,
    rel_tol: f64,
) -> Result<f64> {
    let induced = |m: f64| -> Result<bool> {
        let p = LimitParams::at_angle(alpha, metric, theta, m)?;
        Ok(project_onto_k_shifted(&p, FieldVector::ZERO)?.norm() > ZERO_TOL)
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while !induced(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Consistency("no induced field found on the magnitude axis".into()));
        }
    }
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if induced(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub magnitude: f64,
    pub result: PhaseResult,
}

pub fn phase_diagram_sweep(
    alpha: f64,
    lambda: f64,
    theta_grid: &[f64],
    magnitude_grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if theta_grid.is_empty() || magnitude_grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    for grid in [theta_grid, magnitude_grid] {
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("sweep grids must be strictly increasing".into()));
        }
    }
    let metric = AnisotropyMetric::new(lambda)?;
    let points: Vec<(f64, f64)> = theta_grid
        .iter()
        .flat_map(|&t| magnitude_grid.iter().map(move |&m| (t, m)))
        .collect();
    points
        .par_iter()
        .map(|&(theta, magnitude)| {
            let p = LimitParams::new(alpha, metric, applied_field(theta, magnitude))?;
            Ok(SweepRow { theta, magnitude, result: classify(&p)? })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "theta,magnitude,hex1,hex2,hex3,hstar1,hstar2,hstar3,regime,F,duality_gap";

/// Writes sweep rows with 17 significant digits per float.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for row in rows {
        let r = &row.result;
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
            row.theta,
            row.magnitude,
            r.h_ex.h1,
            r.h_ex.h2,
            r.h_ex.h3,
            r.h_star.h1,
            r.h_star.h2,
            r.h_star.h3,
            r.regime,
            r.energy,
            r.duality_gap
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::{hc1, lock_in_angle};
    use std::f64::consts::FRAC_PI_2;

    fn iso() -> AnisotropyMetric {
        AnisotropyMetric::isotropic()
    }

    #[test]
    fn meissner_below_hc1() {
        let m = AnisotropyMetric::new(2.0).unwrap();
        for theta in [0.0, 0.4, 1.2, FRAC_PI_2] {
            let h = hc1(theta, 0.3, &m).unwrap();
            let r = classify(&LimitParams::at_angle(0.3, m, theta, 0.9 * h).unwrap()).unwrap();
            assert_eq!(r.regime, Regime::Meissner);
            assert_eq!(r.h_star, FieldVector::ZERO);
        }
    }

    #[test]
    fn lock_in_window() {
        for (alpha, lambda) in [(0.5, 1.0), (0.5, 2.5), (0.7, 0.6)] {
            let m = AnisotropyMetric::new(lambda).unwrap();
            let theta = 0.5 * lock_in_angle(alpha, &m);
            let lo = alpha / (2.0 * lambda * theta.cos());
            // Upper end set by the cylinder half height alone.
            let hi = (1.0 - alpha) / (2.0 * theta.sin());
            for k in 1..10 {
                let mag = lo + (hi - lo) * k as f64 / 10.0;
                let r = classify(&LimitParams::at_angle(alpha, m, theta, mag).unwrap()).unwrap();
                assert_eq!(r.regime, Regime::LockIn);
                assert_eq!(r.h_star.h3, 0.0);
            }
            let r = classify(&LimitParams::at_angle(alpha, m, theta, 1.02 * hi).unwrap()).unwrap();
            assert_eq!(r.regime, Regime::Tilted);
        }
    }

    #[test]
    fn steep_angles_never_lock_in() {
        let (alpha, m) = (0.5, iso());
        let theta = lock_in_angle(alpha, &m) + 0.05;
        let h = hc1(theta, alpha, &m).unwrap();
        for k in 1..200 {
            let mag = h * (1.0 + 0.05 * k as f64);
            let r = classify(&LimitParams::at_angle(alpha, m, theta, mag).unwrap()).unwrap();
            assert_eq!(r.regime, Regime::Tilted);
        }
    }

    #[test]
    fn regimes_ordered_along_magnitude_axis() {
        let mags: Vec<f64> = (1..=400).map(|k| k as f64 * 0.01).collect();
        let rows = phase_diagram_sweep(0.5, 1.0, &[0.2], &mags).unwrap();
        let order: Vec<Regime> = rows.iter().map(|r| r.result.regime).fold(Vec::new(), |mut acc, r| {
            if acc.last() != Some(&r) {
                acc.push(r);
            }
            acc
        });
        assert_eq!(order, vec![Regime::Meissner, Regime::LockIn, Regime::Tilted]);
    }

    #[test]
    fn theta_zero_row_switches_once_at_hc1() {
        let (alpha, lambda) = (0.5, 1.0);
        let mags: Vec<f64> = (1..=100).map(|k| k as f64 * 0.01).collect();
        let rows = phase_diagram_sweep(alpha, lambda, &[0.0], &mags).unwrap();
        let switches = rows.windows(2).filter(|w| w[0].result.regime != w[1].result.regime).count();
        assert_eq!(switches, 1);
        assert!(rows.iter().all(|r| matches!(r.result.regime, Regime::Meissner | Regime::LockIn)));
        let b = critical_field_by_bisection(alpha, iso(), 0.0, 1e-12).unwrap();
        assert!((b - hc1(0.0, alpha, &iso()).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn single_point_sweep_is_classify() {
        let rows = phase_diagram_sweep(0.4, 2.0, &[0.7], &[1.3]).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = classify(&LimitParams::at_angle(0.4, AnisotropyMetric::new(2.0).unwrap(), 0.7, 1.3).unwrap()).unwrap();
        assert_eq!(rows[0].result, direct);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        assert!(phase_diagram_sweep(0.5, 1.0, &[], &[1.0]).is_err());
        assert!(phase_diagram_sweep(0.5, 1.0, &[0.1, 0.1], &[1.0]).is_err());
        assert!(phase_diagram_sweep(0.5, 1.0, &[0.1], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn csv_layout() {
        let rows = phase_diagram_sweep(0.5, 1.0, &[0.0, 0.5], &[0.1, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 5);
        for line in &lines[1..] {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 11);
            let theta: f64 = fields[0].parse().unwrap();
            assert!(theta == 0.0 || theta == 0.5);
        }
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000001e-1"));
    }

    #[test]
    fn classify_symmetries() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let m = AnisotropyMetric::new(rng.gen_range(0.2..5.0)).unwrap();
            let alpha = rng.gen_range(0.05..0.95);
            let hex = FieldVector::new(rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let base = classify(&LimitParams::new(alpha, m, hex).unwrap()).unwrap();

            let phi: f64 = rng.gen_range(0.0..6.28);
            let (s, c) = phi.sin_cos();
            let rot = |v: FieldVector, s: f64| FieldVector::new(c * v.h1 - s * v.h2, s * v.h1 + c * v.h2, v.h3);
            let r = classify(&LimitParams::new(alpha, m, rot(hex, s)).unwrap()).unwrap();
            assert!(rot(r.h_star, -s).max_abs_diff(base.h_star) <= 1e-10);
            assert_eq!(r.regime, base.regime);

            let flip = |v: FieldVector| FieldVector::new(v.h1, v.h2, -v.h3);
            let r = classify(&LimitParams::new(alpha, m, flip(hex)).unwrap()).unwrap();
            assert!(flip(r.h_star).max_abs_diff(base.h_star) <= 1e-10);
        }
    }
}
