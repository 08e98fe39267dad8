//! Generalized Curie-Weiss random matrix ensembles at subcritical temperature.
//!
//! The crate builds the de Finetti mixing measure of the ensemble, samples
//! spin matrices, computes their spectra, and checks the quantitative
//! statements around the semicircle law numerically:
//!
//! - [`scalar`]: the rate function `F_beta`, magnetization, tilt, semicircle law.
//! - [`measure`]: the normalized mixing measure `nu_N`, its Laplace approximants
//!   and the concentration functionals.
//! - [`ensemble`]: spin matrices, the sign indicator and the centred matrices.
//! - [`spectral`]: symmetric eigenvalues, empirical spectral distributions,
//!   KS distance and interlacing counts.
//! - [`verification`]: independent oracles and Monte Carlo estimators.
//! - [`experiments`]: the config-driven experiment runner behind the `cwsc` binary.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod spectral;
pub mod verification;

pub use error::{Error, Result};
pub use measure::{DeFinettiMeasure, LaplaceApprox};
pub use scalar::{Magnetization, ModelParams, SemicircleMeasure};
