use crate::error::{Error, Result};
use crate::metric::FieldVector;

use super::LimitParams;

const MAX_ROOT_ITERS: usize = 200;
const ROOT_TOL: f64 = 1e-13;

/// The convex body `K`: points with `|U₃| ≤ z0` and `λ|U'| ≤ b`, plus the two
/// half-ellipsoids `λ²|U'|² + (U₃ ∓ z0)² ≤ b²` beyond `±z0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexBodyK {
    pub z0: f64,
    /// Cylinder radius `b/λ`.
    pub radius: f64,
    /// Cap semi-axis along `e₃`.
    pub b: f64,
    pub lambda: f64,
}

impl ConvexBodyK {
    pub fn from_params(p: &LimitParams) -> Self {
        Self { z0: p.z0(), radius: p.radius(), b: p.cap_semi_axis(), lambda: p.lambda() }
    }

    /// Signed violation of the membership rule, in units of the `‖·‖_{g⁻¹}` norm:
    /// nonpositive inside `K`, positive outside.
    pub fn constraint_residual(&self, u: FieldVector) -> f64 {
        let lr = self.lambda * u.horizontal_norm();
        if u.h3 >= self.z0 {
            lr.hypot(u.h3 - self.z0) - self.b
        } else if u.h3 <= -self.z0 {
            lr.hypot(u.h3 + self.z0) - self.b
        } else {
            lr - self.b
        }
    }

    /// Three-case membership rule, with a tolerance of a few ulps of the body size.
    pub fn contains(&self, u: FieldVector) -> bool {
        self.constraint_residual(u) <= 4.0 * f64::EPSILON * (self.b + self.z0)
    }

    /// `−U·V + ((1−α)/2)|V₃| + (α/2)‖V‖_g`, which is nonnegative for every `V`
    /// exactly when `U ∈ K`.
    pub fn support_gap(&self, u: FieldVector, v: FieldVector) -> f64 {
        let norm_g = v.h1.hypot(v.h2).hypot(self.lambda * v.h3) / self.lambda;
        -u.dot(v) + self.z0 * v.h3.abs() + self.b * norm_g
    }

    /// Euclidean projection of `p` onto `K`.
    pub fn project(&self, p: FieldVector) -> Result<FieldVector> {
        if self.constraint_residual(p) <= 0.0 {
            return Ok(p);
        }
        let r = p.horizontal_norm();
        let z = p.h3;
        let (r_new, z_new) = if z.abs() <= self.z0 {
            (self.radius, z)
        } else {
            let (x, w) = project_quarter_ellipse(r, z.abs() - self.z0, self.radius, self.b)?;
            (x, (self.z0 + w).copysign(z))
        };
        let (c, s) = if r > 0.0 { (p.h1 / r, p.h2 / r) } else { (1.0, 0.0) };
        Ok(FieldVector::new(r_new * c, r_new * s, z_new))
    }
}

/// Nearest point of the ellipse `x²/a² + y²/c² = 1` to an exterior point
/// `(p1, p2)` in the closed first quadrant.
///
/// The foot is `(a²p1/(a²+μ), c²p2/(c²+μ))` where `μ ≥ 0` is the root of the
/// decreasing convex function `f(μ) = (a p1/(a²+μ))² + (c p2/(c²+μ))² − 1`.
/// Newton from the left is safeguarded by the bracket `[0, √(a²p1² + c²p2²)]`.
pub(crate) fn project_quarter_ellipse(p1: f64, p2: f64, a: f64, c: f64) -> Result<(f64, f64)> {
    let ap = a * p1;
    let cp = c * p2;
    let (a2, c2) = (a * a, c * c);
    let f = |mu: f64| {
        let u = ap / (a2 + mu);
        let v = cp / (c2 + mu);
        (u * u + v * v - 1.0, -2.0 * (u * u / (a2 + mu) + v * v / (c2 + mu)))
    };
    let mut lo = 0.0;
    let mut hi = ap.hypot(cp);
    let mut mu = 0.0;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ROOT_ITERS {
        let (val, der) = f(mu);
        residual = val;
        if val.abs() <= ROOT_TOL {
            return Ok((a2 * p1 / (a2 + mu), c2 * p2 / (c2 + mu)));
        }
        if val > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = mu - val / der;
        mu = if der < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
            return Ok((a2 * p1 / (a2 + mu), c2 * p2 / (c2 + mu)));
        }
    }
    Err(Error::SolverFailure { iterations: MAX_ROOT_ITERS, residual })
}

/// Euclidean projection of `query` onto the translate `K + H_ex`.
pub fn project_onto_k_shifted(p: &LimitParams, query: FieldVector) -> Result<FieldVector> {
    let h_ex = p.h_ex();
    let u = p.body().project(query - h_ex)?;
    Ok(u + h_ex)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limit::eval_f;
    use crate::metric::AnisotropyMetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(alpha: f64, lambda: f64, h_ex: FieldVector) -> LimitParams {
        LimitParams::new(alpha, AnisotropyMetric::new(lambda).unwrap(), h_ex).unwrap()
    }

    fn random_vec(rng: &mut ChaCha8Rng, scale: f64) -> FieldVector {
        FieldVector::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    /// Rejection sample of a point of K.
    fn random_point_in(body: &ConvexBodyK, rng: &mut ChaCha8Rng) -> FieldVector {
        loop {
            let u = FieldVector::new(
                rng.gen_range(-body.radius..body.radius),
                rng.gen_range(-body.radius..body.radius),
                rng.gen_range(-(body.z0 + body.b)..(body.z0 + body.b)),
            );
            if body.constraint_residual(u) <= 0.0 {
                return u;
            }
        }
    }

    #[test]
    fn membership_examples() {
        let p = params(0.5, 1.0, FieldVector::ZERO);
        let k = p.body();
        assert!(k.contains(FieldVector::ZERO));
        assert!(k.contains(FieldVector::new(0.0, 0.0, k.z0 + k.b)));
        assert!(!k.contains(FieldVector::new(k.radius * (1.0 + 1e-6), 0.0, 0.0)));
    }

    #[test]
    fn body_junction_is_c1() {
        // cap cross-section at U₃ = z0 has exactly the cylinder radius
        for (alpha, lambda) in [(0.5, 1.0), (0.1, 4.0), (0.9, 0.3)] {
            let k = params(alpha, lambda, FieldVector::ZERO).body();
            assert!((k.b / k.lambda - k.radius).abs() < 1e-15);
            let on = FieldVector::new(k.radius, 0.0, k.z0 + 1e-9);
            assert!(k.constraint_residual(on).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_matches_support_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = params(0.35, 1.7, FieldVector::ZERO).body();
        let dirs: Vec<FieldVector> = (0..4000).map(|_| random_vec(&mut rng, 1.0)).collect();
        for _ in 0..400 {
            let u = random_vec(&mut rng, 0.6);
            let res = k.constraint_residual(u);
            if res.abs() < 1e-3 {
                continue;
            }
            let min_gap = dirs.iter().map(|&v| k.support_gap(u, v) / v.norm()).fold(f64::INFINITY, f64::min);
            if res < 0.0 {
                assert!(min_gap >= -1e-12, "inside point {u:?} has negative support gap {min_gap}");
            } else {
                assert!(min_gap < 0.0, "outside point {u:?} passes all sampled supports");
            }
        }
    }

    #[test]
    fn body_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = params(0.6, 0.8, FieldVector::ZERO).body();
        for _ in 0..1000 {
            let u = random_vec(&mut rng, 0.6);
            let flipped = FieldVector::new(u.h1, u.h2, -u.h3);
            let phi: f64 = rng.gen_range(0.0..6.3);
            let (s, c) = phi.sin_cos();
            let rotated = FieldVector::new(c * u.h1 - s * u.h2, s * u.h1 + c * u.h2, u.h3);
            let r = k.constraint_residual(u);
            assert!((k.constraint_residual(flipped) - r).abs() < 1e-14);
            assert!((k.constraint_residual(rotated) - r).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_examples() {
        let p = params(0.5, 1.0, FieldVector::ZERO);
        assert_eq!(project_onto_k_shifted(&p, FieldVector::ZERO).unwrap(), FieldVector::ZERO);

        let p = params(0.5, 2.0, FieldVector::new(0.125, 0.0, 0.0));
        assert_eq!(project_onto_k_shifted(&p, FieldVector::ZERO).unwrap(), FieldVector::ZERO);

        let p = params(0.5, 1.0, FieldVector::new(10.0, 0.0, 0.0));
        let h = project_onto_k_shifted(&p, FieldVector::ZERO).unwrap();
        assert!(h.max_abs_diff(FieldVector::new(9.75, 0.0, 0.0)) < 1e-14);
    }

    #[test]
    fn projection_of_axis_points_hits_poles() {
        let k = params(0.4, 3.0, FieldVector::ZERO).body();
        let top = k.project(FieldVector::new(0.0, 0.0, 5.0)).unwrap();
        assert!(top.max_abs_diff(FieldVector::new(0.0, 0.0, k.z0 + k.b)) < 1e-14);
        let bottom = k.project(FieldVector::new(0.0, 0.0, -5.0)).unwrap();
        assert!(bottom.max_abs_diff(FieldVector::new(0.0, 0.0, -(k.z0 + k.b))) < 1e-14);
    }

    #[test]
    fn projection_brute_force_grid() {
        // H_ex = (10, 0, 0), α = ½, λ = 1: minimize F on a fine grid around the
        // candidate and compare.
        let p = params(0.5, 1.0, FieldVector::new(10.0, 0.0, 0.0));
        let mut best = (f64::INFINITY, FieldVector::ZERO);
        for i in -200..=200 {
            for k in -200..=200 {
                let h = FieldVector::new(9.75 + i as f64 * 1e-4, 0.0, k as f64 * 1e-4);
                let f = eval_f(h, &p);
                if f < best.0 {
                    best = (f, h);
                }
            }
        }
        let proj = project_onto_k_shifted(&p, FieldVector::ZERO).unwrap();
        assert!(best.1.max_abs_diff(proj) <= 1e-4);
    }

    #[test]
    fn projection_satisfies_variational_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let p = params(rng.gen_range(0.05..0.95), rng.gen_range(0.2..5.0), random_vec(&mut rng, 3.0));
            let k = p.body();
            let query = random_vec(&mut rng, 3.0);
            let proj = project_onto_k_shifted(&p, query).unwrap();
            assert!(k.constraint_residual(proj - p.h_ex()) <= 1e-12);
            for _ in 0..100 {
                let x = random_point_in(&k, &mut rng) + p.h_ex();
                assert!((query - proj).dot(x - proj) <= 1e-10);
            }
        }
    }

    #[test]
    fn ellipse_projection_extreme_aspect() {
        for (a, c) in [(1e-3, 1.0), (1.0, 1e-3), (1e-3, 1e3), (5.0, 5.0)] {
            let (x, y) = project_quarter_ellipse(2.0 * a + 1.0, 3.0 * c + 1.0, a, c).unwrap();
            assert!(((x / a).powi(2) + (y / c).powi(2) - 1.0).abs() < 1e-12);
        }
    }
}
