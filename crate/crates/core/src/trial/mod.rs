//! Explicit competitor configurations built from a periodic vortex lattice.

mod basis;
mod build;
mod reference;

pub use basis::{build_basis, periodize, AnisotropicBasis, Periodization};
pub use build::{build_trial, evaluate_against_bound, BoundReport, OffsetSample, Trial, TrialRecipe, VortexCenter};
pub use reference::{reference_phase, reference_potential, solve_cell_problem, theta_arg, ReferenceSolution};
