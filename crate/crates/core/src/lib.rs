//! Spectral-Galerkin solver for the steady compressible Navier-Stokes-Fourier
//! system on the channel `(0,1) x T^2` with kinetic (generalized) slip walls.
//!
//! The crate follows the constructive route used for the existence theory of
//! this boundary value problem: the wall temperature is extended into the
//! channel, the perturbation `(phi, u, zeta) = (rho - rho_bar, u, theta - ext)`
//! is advanced by a solution operator that solves a linearized elliptic system
//! for `(u, zeta)` in variational form and a regularized transport equation
//! for `phi`, and the operator is iterated to a fixed point.
//!
//! Module map:
//!
//! * [`params`]: gas constants, transport laws, the coupling constant and the
//!   admissibility check on the slip coefficients.
//! * [`grid`]: Fourier x Chebyshev discretization, fields, norms, traces and
//!   the boundary half-derivative pairing.
//! * [`boundary`]: wall temperature and its interior extension.
//! * [`nonlinear`]: the sources `F`, `G`, `H`, the stress tensor, `N_k` norms.
//! * [`linearized`]: assembly and preconditioned solve of the variational
//!   problem for `(u, zeta)`.
//! * [`transport`]: elliptic regularization of the density transport equation.
//! * [`fixed_point`]: the solution operator and its iteration.
//! * [`inequality`]: Korn / Poincare checks and strong-form residuals.
//! * [`config`], [`report`], [`commands`]: run configuration, artifacts, CLI
//!   commands.

pub mod boundary;
pub mod commands;
pub mod config;
pub mod error;
pub mod fixed_point;
pub mod grid;
pub mod inequality;
pub mod krylov;
pub mod linearized;
pub mod nonlinear;
pub mod params;
mod par;
pub mod report;
pub mod transport;

pub use boundary::{BoundaryTemperature, ExtendedTemperature, WallMode, WallRecipe};
pub use error::{Error, Result};
pub use fixed_point::{SolveReport, SolverSettings};
pub use grid::{ChannelGrid, FaceField, ScalarField, VectorField};
pub use nonlinear::State;
pub use params::{AssumptionReport, Params, ParamsSpec};

pub use par::with_threads;
pub use rustfft::num_complex::Complex64;
