//! Pseudo-spectral laboratory for the 2D Euler and surface quasi-geostrophic
//! equations on the periodic square [0, 2pi)^2, instrumented around one
//! question: how fast can a level-set front sharpen?
//!
//! The crate is organised as a pipeline:
//!
//! - [`grid`] / [`fft`] / [`field`]: torus geometry, transforms, and the
//!   spectral operator toolbox (fractional-Laplacian inversion, velocity
//!   recovery, interpolation, norms).
//! - [`evolve`]: RK4 time stepping with CFL control, dealiasing, optional
//!   hyperviscosity, and binary checkpoints.
//! - [`front`]: level curves as graphs x2 = phi(x1), their thickness and
//!   semi-uniformity, the area between two curves, its boundary-flux time
//!   derivative, and envelope fits against the collapse lower bounds
//!   (double-exponential for QG, exponential for Euler).
//! - [`modulus`]: direct measurement of the stream-function modulus of
//!   continuity, |psi(z1) - psi(z2)| <= M tau |log tau| for QG and M tau for
//!   Euler, plus the three-region kernel decomposition behind those bounds.
//! - [`scenario`] / [`config`] / [`experiment`]: built-in initial data,
//!   key=value run configuration, and reproducible experiment bundles
//!   (diagnostics CSV, fit report, checkpoints, manifest).

pub mod config;
pub mod error;
pub mod evolve;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod front;
pub mod grid;
pub mod modulus;
pub mod par;
pub mod scenario;

pub use error::{Error, Result};
pub use field::{Equation, ScalarField, SpectralCoeffs, VelocityField};
pub use grid::Grid;
