//! Direct minimization of `F`, independent of the projection route.
//!
//! `F` is invariant under horizontal rotations, so after rotating `H_ex` into the
//! `(e₁, e₃)` half-plane the minimizer has `H₂ = 0`. The remaining 2D problem is
//! solved by nested golden-section search (the partial minimum over `H₁` is
//! convex in `H₃`) followed by a shrinking coordinate pattern search. No
//! derivatives are used, so the kinks of `F` at `H₃ = 0` and `H = 0` are harmless.

use crate::metric::FieldVector;

use super::{eval_f, LimitParams};

const GOLDEN_TOL: f64 = 1e-11;
const REFINE_STEP_MIN: f64 = 1e-9;

fn golden_section(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    let fx = f(x);
    // The kinks of F sit at exact zeros; keep them if they are at least as good.
    if lo <= 0.0 && hi >= 0.0 {
        let f0 = f(0.0);
        if f0 <= fx {
            return (0.0, f0);
        }
    }
    (x, fx)
}

pub fn minimize_f_oracle(p: &LimitParams) -> FieldVector {
    let h_ex = p.h_ex();
    let rho = h_ex.horizontal_norm();
    if h_ex.norm() == 0.0 {
        return FieldVector::ZERO;
    }
    let canonical = p
        .with_h_ex(FieldVector::new(rho, 0.0, h_ex.h3))
        .expect("rotated applied field stays valid");
    let g = |x: f64, z: f64| eval_f(FieldVector::new(x, 0.0, z), &canonical);

    // |H*| ≤ |H_ex| because H_ex itself lies in K + H_ex.
    let span = h_ex.norm() * (1.0 + 1e-6) + 1e-9;
    let inner = |z: f64| golden_section(-span, span, GOLDEN_TOL, |x| g(x, z));
    let (mut z, _) = golden_section(-span, span, GOLDEN_TOL, |z| inner(z).1);
    let (mut x, mut best) = inner(z);

    let mut step = 1e-4 * span.max(1.0);
    while step >= REFINE_STEP_MIN {
        let mut improved = false;
        for (dx, dz) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = g(x + dx, z + dz);
            if v < best {
                best = v;
                x += dx;
                z += dz;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }

    if rho > 0.0 {
        FieldVector::new(x * h_ex.h1 / rho, x * h_ex.h2 / rho, z)
    } else {
        FieldVector::new(x, 0.0, z)
    }
}
