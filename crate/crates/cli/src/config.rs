use std::path::{Path, PathBuf};

use lawdon_core::lattice::{LatticeGeometry, ModelParams};
use lawdon_core::minimize::MinimizeOptions;
use lawdon_core::{AnisotropyMetric, Error, FieldVector, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// A 1D grid given either explicitly or as `count` equispaced points on `[start, stop]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Linspace { start: f64, stop: f64, count: usize },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Values(v) => v.clone(),
            Grid::Linspace { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n).map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64).collect(),
            },
        };
        if v.is_empty() {
            return Err(Error::InvalidParameter("grid is empty".into()));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid value {x} is not finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub alpha: f64,
    pub lambda: f64,
    /// Applied field; alternatively `theta` and `magnitude`.
    pub h_ex: Option<FieldVector>,
    pub theta: Option<f64>,
    pub magnitude: Option<f64>,
}

impl ProjectConfig {
    pub fn h_ex(&self) -> Result<FieldVector> {
        match (self.h_ex, self.theta, self.magnitude) {
            (Some(h), None, None) => Ok(h),
            (None, Some(t), Some(m)) => Ok(lawdon_core::limit::applied_field(t, m)),
            _ => Err(Error::InvalidParameter("give either h_ex or both theta and magnitude".into())),
        }
    }

    pub fn metric(&self) -> Result<AnisotropyMetric> {
        AnisotropyMetric::new(self.lambda)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hc1Config {
    pub alpha: f64,
    pub lambda: f64,
    pub theta: Grid,
    /// Relative tolerance of the bisection column.
    #[serde(default = "default_bisection_tol")]
    pub bisection_tol: f64,
}

fn default_bisection_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseDiagramConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub theta: Grid,
    pub magnitude: Grid,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdMinConfig {
    /// Required unless an initial state supplies it.
    pub geometry: Option<LatticeGeometry>,
    pub params: ModelParams,
    #[serde(default)]
    pub options: MinimizeOptions,
    /// Face flux quanta `(m1, m2, m3)` of `h̄`.
    pub flux: Option<[i64; 3]>,
    /// Explicit average field; must be admissible.
    pub h_bar: Option<FieldVector>,
    pub initial_state: Option<PathBuf>,
    /// Run the outer search over flux sectors instead of a single sector.
    #[serde(default)]
    pub search: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub geometry: LatticeGeometry,
    pub params: ModelParams,
    /// Target field `h` of the construction.
    pub target_h: FieldVector,
    /// Disk radius; defaults to the layer spacing.
    pub s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateConfig {
    pub seed: u64,
    pub instances: usize,
    pub gauges: usize,
    pub zderiv_states: usize,
    pub gradient_coords: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { seed: 1, instances: 200, gauges: 20, zderiv_states: 5, gradient_coords: 100 }
    }
}

pub fn validate_geometry(g: &LatticeGeometry) -> Result<LatticeGeometry> {
    g.validate()?;
    Ok(*g)
}
