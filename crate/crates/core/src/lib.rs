//! Simulation and verification toolkit for a kinetic opinion-dynamics model.
//!
//! Agents hold opinions in `[-1, 1]`. At each interaction a persuader `j`
//! states `+1` with probability `(1 + x_j) / 2` (else `-1`) and agent `i`
//! moves a fraction `mu_plus` (resp. `mu_minus`) of the way toward the
//! stated extreme. The crate provides:
//!
//! * [`abm`]: the finite-N event-driven agent system,
//! * [`meanfield`]: the limiting jump process and its moment equations,
//! * [`kinetic`]: grid (RK4) and spectral solvers for the kinetic equation,
//! * [`equilibrium`]: stationary laws (Bernoulli-convolution sampler,
//!   cosine products, Cantor supports, closed-form densities),
//! * [`metrics`]: Wasserstein, Fourier-based, KS distances and histograms,
//! * [`verify`]: the theorem-check suite behind `opk verify`,
//! * [`cli`]: the `opk` command-line front end.

pub mod abm;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod kinetic;
pub mod meanfield;
pub mod metrics;
pub mod model;
pub mod rational;
pub mod verify;

pub use error::{Error, Result};
pub use model::{CharacteristicFunction, InitSpec, ModelParams, RandomSource, SampleSet};

/// Version string embedded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
