//! Numerical solver for the problem of selling an asset as close as possible
//! to its ultimate maximum when the price follows a geometric Brownian motion
//! whose drift and volatility are driven by an observable continuous-time
//! Markov chain.
//!
//! The production path is a pair of backward inductions on a log-spaced grid
//! of the maximum-to-price ratio `a = max_{s<=t} Y_s / Y_t`:
//!
//! * [`gsurface`] computes `G(t, a, j)`, the expected terminal ratio when
//!   stopping now;
//! * [`vsurface`] computes the value function `V(t, a, j)` by taking the
//!   conditional expectation of `min(G, V)` one step ahead.
//!
//! [`boundary`] turns the two surfaces into per-regime stopping boundaries and
//! [`oracle`] provides an independent Monte Carlo check by simulating full
//! regime-switching paths and evaluating stopping policies on them.

pub mod boundary;
pub mod chain;
pub mod density;
pub mod error;
pub mod grid;
pub mod gsurface;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod vsurface;

pub use boundary::{BoundaryCurve, BoundaryTolerance, Classification};
pub use density::QuadratureSpec;
pub use error::{Error, Result};
pub use grid::SolverGrid;
pub use gsurface::GSurface;
pub use model::{DriftParams, RegimeModel};
pub use oracle::{PathBatch, PolicySpec};
pub use stats::Estimate;
pub use vsurface::{Solver, VSurface};
