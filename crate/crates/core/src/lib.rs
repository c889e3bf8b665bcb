//! Numerical toolkit for the Lawrence–Doniach model of layered superconductors
//! in oblique applied fields.
//!
//! The crate has three layers that cross-check each other:
//!
//! - [`limit`]: the limiting energy `F(H)` for the normalized induced field, solved
//!   exactly as a Euclidean projection onto the convex body `K + H_ex`, with an
//!   independent direct minimizer, the lower critical field and a phase classifier.
//! - [`lattice`] and [`minimize`]: a gauge-invariant link discretization of the
//!   Lawrence–Doniach energy on a Floquet-periodic cell, flux and degree
//!   diagnostics, and a descent solver over the quantized flux sectors.
//! - [`trial`] and [`interp`]: explicit upper-bound competitor configurations and
//!   the interpolated comparison functional used in the lower bound.

pub mod error;
pub mod interp;
pub mod lattice;
pub mod limit;
pub mod metric;
pub mod minimize;
pub mod trial;

pub use error::{Error, Result};
pub use metric::{AnisotropyMetric, FieldVector};
