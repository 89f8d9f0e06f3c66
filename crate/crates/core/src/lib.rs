//! Conditioned Gaussian permeability fields and two-stage MCMC inversion of
//! Darcy pressure data.
//!
//! The pipeline: a squared-exponential covariance on a cell-centered grid
//! ([`covariance`]) gives a truncated Karhunen-Loeve basis ([`kle`]). Point
//! measurements are kriged ([`kriging`]) and the KLE coefficients are projected
//! onto the nullspace of the measurement data matrix ([`conditioning`]), so
//! every sample honors the data. Proposals are screened with an upscaled
//! coarse flow model and then accepted on the fine one ([`darcy`], [`mcmc`]),
//! and convergence is tracked with PSRF/MPSRF ([`diagnostics`]).

pub mod conditioning;
pub mod covariance;
pub mod darcy;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod kle;
pub mod kriging;
pub mod mcmc;
pub mod cli;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
