//! Two-stage Metropolis-Hastings inversion of pressure data, with and
//! without nullspace conditioning.

mod chain;
mod likelihood;
mod model;
mod proposal;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::McmcError;

pub use chain::{run_chain, run_study, study_seeds};
pub use likelihood::{coarse_accept_prob, fine_accept_prob, log_likelihood};
pub use model::{Conditioning, Evaluated, InversionModel};
pub use proposal::{log_prior, log_proposal_ratio, rws_propose, Move};
pub use trace::ChainTrace;

/// Likelihood precisions for the coarse and fine forward models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams {
    pub sigma_c2: f64,
    pub sigma_f2: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self {
            sigma_c2: 5e-3,
            sigma_f2: 1e-4,
        }
    }
}

impl LikelihoodParams {
    pub fn validate(&self) -> Result<(), McmcError> {
        for (name, v) in [("sigma_c2", self.sigma_c2), ("sigma_f2", self.sigma_f2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(McmcError::Argument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub conditioned: bool,
    /// Carry the projected coefficients forward after acceptance.
    pub store_projected: bool,
    pub single_component: bool,
    /// Screen proposals with the coarse model first.
    pub two_stage: bool,
    /// Add the proposal and prior ratios to the first-stage test instead of
    /// relying on their cancellation.
    pub explicit_prior_ratio: bool,
    pub initial_theta: Option<Vec<f64>>,
    /// 1-based iterations whose accepted field is kept in the trace.
    pub snapshots: Vec<usize>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            beta: 0.85,
            iterations: 10_000,
            seed: 1,
            conditioned: false,
            store_projected: false,
            single_component: true,
            two_stage: true,
            explicit_prior_ratio: false,
            initial_theta: None,
            snapshots: Vec::new(),
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), McmcError> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(McmcError::Argument(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
