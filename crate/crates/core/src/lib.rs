//! Stochastic surrogates of limit cycle oscillations.
//!
//! This crate computes periodic steady states of nonlinear dynamical systems
//! under a scalar random parameter by combining Harmonic Balance (a
//! Fourier-Galerkin discretization in time, assembled through the
//! alternating frequency/time scheme) with an intrusive polynomial chaos
//! expansion (a polynomial-Galerkin discretization over the random
//! parameter). The result is a spectral surrogate
//! `x(t, theta) = sum_{k,m} q_km exp(i k w t) Phi_m(theta)` whose
//! coefficients solve a single coupled root-finding problem; for
//! self-excited systems the base frequency `w(theta)` is expanded as well.
//!
//! Modules:
//! - [`fourier`]: period grid, truncated transforms, spectral differentiation;
//! - [`stochastic`]: input densities, orthonormal bases, Gauss rules;
//! - [`dynamics`]: the system trait, reference oscillators, time integration;
//! - [`hb`]: deterministic Harmonic Balance, Newton, deflation, continuation;
//! - [`expansion`]: the combined solver and the serializable surrogate;
//! - [`analysis`]: moments, coverage summaries, marginals, convergence maps,
//!   the Monte-Carlo-over-HB oracle, phase portraits.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod expansion;
pub mod fourier;
pub mod hb;
pub mod stochastic;

pub use error::{Error, Result};
