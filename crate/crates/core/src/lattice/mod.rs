//! Periodic Lawrence–Doniach configurations on a lattice.
//!
//! Order parameters `u_n` live on the sites of `N` planes, each an `M × M` grid.
//! The vector potential is `A = Ā + A₀` with `Ā = ½ h̄ × x` for a constant
//! average field `h̄` and `A₀` a periodic link field on an `M × M × N·Kz` grid.
//! Covariant differences use link phases, so every energy term is exactly
//! gauge invariant; the Floquet boundary conditions enter only as phase factors
//! on links that cross the period boundary.

mod energy;
mod flux;
mod gauge;
mod geometry;
pub mod io;
mod state;

pub use energy::{
    in_plane_density, josephson_phase, ld_energy, ld_energy_and_gradient, EnergyBreakdown, Gradient,
};
pub use flux::{plane_degree, plane_flux, plaquette_windings};
pub use gauge::{gauge_transform, GaugeFunction};
pub use geometry::{LatticeGeometry, ModelParams};
pub use state::LatticeState;
