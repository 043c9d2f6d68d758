//! Lagrangian simulator for a spherical gas bubble in a compressible viscous
//! liquid, with the energy, entropy and decay diagnostics used to check it.
//!
//! The liquid occupies the mass interval `[0, k]`; `x = 0` is the bubble
//! surface and `x = k` a rigid wall.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod identity;
pub mod initial;
pub mod integrator;
pub mod operators;
pub mod oracle;
pub mod params;
pub mod state;
pub mod tridiag;

pub use diagnostics::{DecayFit, DecayOutcome, DiagnosticsRecord, Dissipation};
pub use error::{Error, Result};
pub use grid::Grid;
pub use initial::{cutoff_initial_data, make_initial_data, Family, InitialDataSpec};
pub use integrator::{run, IntegratorConfig, SampleSpec, Scheme, Trajectory};
pub use oracle::{OracleReport, RadiusHistory};
pub use params::Parameters;
pub use state::{radii, Geometry, State};
