//! Stationary supersonic outflow of a viscous, heat-conductive ideal gas
//! over a perturbed half-space `{x1 > M(x2)}`.
//!
//! The crate is organised bottom-up:
//!
//! - [`gas`]: ideal-gas closure, Mach number, the boundary-flux quadratic form.
//! - [`profile`]: planar stationary profiles on the half line and their tails.
//! - [`geometry`]: boundary shapes, the flattening map and the hat operators.
//! - [`extension`]: collar-supported lifts of the boundary data.
//! - [`background`]: background state, perturbation split and forcing terms.
//! - [`solver`]: semi-discrete Navier-Stokes in flattened coordinates, SSP-RK2 and RKC2.
//! - [`diagnostics`]: energy forms, weighted norms, decay fits, identities.
//! - [`steady`]: stationary solutions by time marching and their audits.
//! - [`config`], [`snapshot`]: run configuration and persistence formats.
//! - [`audit`]: property audits run by `verify` and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop, clippy::result_large_err)]

pub mod audit;
pub mod background;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod extension;
pub mod gas;
pub mod geometry;
mod ode;
pub mod profile;
pub mod snapshot;
pub mod solver;
pub mod steady;

pub use background::{BackgroundState, ForcingTerms, Perturbation};
pub use error::{Error, Result};
pub use extension::{BoundaryData, ExtensionField, Extensions, TrigSeries};
pub use gas::{FarFieldState, GasParams, Verdict};
pub use geometry::{BoundaryShape, Dim, FlattenedGrid, FourierMode};
pub use profile::{PlanarBoundaryData, PlanarProfile, ProfileOptions};
pub use solver::{Convection, FieldState, Problem, SolverConfig};
pub use steady::{StationaryResult, SteadyConfig};
