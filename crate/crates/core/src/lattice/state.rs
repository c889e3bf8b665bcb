use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::LatticeGeometry;
use crate::error::{Error, Result};
use crate::metric::FieldVector;

/// Order parameters on the planes and the periodic link field `A₀`.
///
/// `u[geom.site(n, i, j)]` is `u_n(x_i, y_j)`. `a0[c][geom.cell(k, i, j)]` is
/// the `c`-th component of `A₀` on the link leaving grid point `(i, j, k)` in
/// the positive `c` direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeState {
    pub u: Vec<Complex64>,
    pub a0: [Vec<f64>; 3],
    pub h_bar: FieldVector,
}

impl LatticeState {
    pub fn new(geom: &LatticeGeometry, u: Vec<Complex64>, a0: [Vec<f64>; 3], h_bar: FieldVector) -> Result<Self> {
        let s = Self { u, a0, h_bar };
        s.check_dims(geom)?;
        Ok(s)
    }

    /// Constant order parameter, `A₀ = 0`.
    pub fn uniform(geom: &LatticeGeometry, value: Complex64, h_bar: FieldVector) -> Self {
        let cells = geom.n_cells();
        Self {
            u: vec![value; geom.n_sites()],
            a0: [vec![0.0; cells], vec![0.0; cells], vec![0.0; cells]],
            h_bar,
        }
    }

    /// Unit-modulus random phases, `A₀ = 0`.
    pub fn random_phases(geom: &LatticeGeometry, h_bar: FieldVector, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::uniform(geom, Complex64::new(1.0, 0.0), h_bar);
        for v in &mut s.u {
            *v = Complex64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        }
        s
    }

    pub fn check_dims(&self, geom: &LatticeGeometry) -> Result<()> {
        geom.validate()?;
        if self.u.len() != geom.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "u has {} entries, geometry needs N*M*M = {}",
                self.u.len(),
                geom.n_sites()
            )));
        }
        for (c, a) in self.a0.iter().enumerate() {
            if a.len() != geom.n_cells() {
                return Err(Error::DimensionMismatch(format!(
                    "a0 component {c} has {} entries, geometry needs M*M*N*Kz = {}",
                    a.len(),
                    geom.n_cells()
                )));
            }
        }
        self.h_bar.validated()?;
        Ok(())
    }

    /// Plane `n` as a slice of `M·M` values.
    pub fn plane(&self, geom: &LatticeGeometry, n: usize) -> &[Complex64] {
        let m2 = geom.plane_sites();
        &self.u[n * m2..(n + 1) * m2]
    }

    pub fn max_modulus(&self) -> f64 {
        self.u.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.u.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min)
    }

    /// Samples `A₀` from a smooth periodic field at the link midpoints.
    pub fn set_a0_from_fn(&mut self, geom: &LatticeGeometry, f: impl Fn(f64, f64, f64) -> [f64; 3]) {
        let (ax, ay, az) = (geom.ax(), geom.ay(), geom.az());
        for k in 0..geom.nz() {
            for j in 0..geom.m {
                for i in 0..geom.m {
                    let (x, y, z) = (geom.x(i), geom.y(j), geom.z(k));
                    let c = geom.cell(k, i, j);
                    self.a0[0][c] = f(x + 0.5 * ax, y, z)[0];
                    self.a0[1][c] = f(x, y + 0.5 * ay, z)[1];
                    self.a0[2][c] = f(x, y, z + 0.5 * az)[2];
                }
            }
        }
    }

    /// Shifts the whole configuration by `(di, dj)` grid steps and `dn` planes.
    /// Only meaningful for `h̄ = 0`, where the Floquet factors are trivial.
    pub fn translated(&self, geom: &LatticeGeometry, di: usize, dj: usize, dn: usize) -> Self {
        let m = geom.m;
        let mut out = self.clone();
        for n in 0..geom.n_planes {
            for j in 0..m {
                for i in 0..m {
                    out.u[geom.site((n + dn) % geom.n_planes, (i + di) % m, (j + dj) % m)] = self.u[geom.site(n, i, j)];
                }
            }
        }
        let nz = geom.nz();
        let dk = dn * geom.kz;
        for c in 0..3 {
            for k in 0..nz {
                for j in 0..m {
                    for i in 0..m {
                        out.a0[c][geom.cell((k + dk) % nz, (i + di) % m, (j + dj) % m)] = self.a0[c][geom.cell(k, i, j)];
                    }
                }
            }
        }
        out
    }

    /// Random perturbation of all real degrees of freedom, for tests.
    pub fn perturbed(&self, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for v in &mut out.u {
            *v += Complex64::new(rng.gen_range(-amplitude..amplitude), rng.gen_range(-amplitude..amplitude));
        }
        for a in &mut out.a0 {
            for v in a.iter_mut() {
                *v += rng.gen_range(-amplitude..amplitude);
            }
        }
        out
    }
}
