//! Numerical laboratory for the semilinear wave equation
//! `v_tt - v_ss + W(s) v = h(s) |v_t|^p` on the exterior of a Schwarzschild
//! black hole, written in tortoise coordinates.
//!
//! The crate is organised bottom-up:
//!
//! - [`coordinates`]: radius <-> tortoise maps and precomputed grids.
//! - [`potentials`]: lapse, effective potential and nonlinear weight.
//! - [`test_function`]: the positive stationary solution used as a multiplier.
//! - [`pde_solver`]: explicit leapfrog time stepping with blow-up detection.
//! - [`functionals`]: integrated quantities tracked along a run and the
//!   differential inequalities they must satisfy.
//! - [`riccati`]: closed-form comparison ODE solutions and lifespan bounds.
//! - [`experiments`]: amplitude sweeps, scaling fits and report files.

pub mod coordinates;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod pde_solver;
pub mod potentials;
pub mod quadrature;
pub mod riccati;
pub mod test_function;

pub use coordinates::{ModelParams, RadialPoint, SpatialGrid};
pub use error::{LabError, Result};
pub use functionals::{InequalityReport, Monitor, MonitorSample};
pub use pde_solver::{FieldState, LifespanRecord, RunStatus, WaveSolver};
pub use riccati::RiccatiParams;
pub use test_function::TestFunctionTable;
