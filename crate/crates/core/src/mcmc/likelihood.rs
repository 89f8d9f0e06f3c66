use crate::error::McmcError;

/// Gaussian log-likelihood `-|ref - sim|^2 / (2 sigma2)` (up to a constant).
pub fn log_likelihood(sim: &[f64], reference: &[f64], sigma2: f64) -> Result<f64, McmcError> {
    if sim.len() != reference.len() {
        return Err(McmcError::Argument(format!(
            "simulated data has {} values, reference has {}",
            sim.len(),
            reference.len()
        )));
    }
    let ss: f64 = sim.iter().zip(reference).map(|(s, r)| (r - s) * (r - s)).sum();
    Ok(-ss / (2.0 * sigma2))
}

fn capped(log_ratio: f64) -> f64 {
    if log_ratio >= 0.0 {
        1.0
    } else if log_ratio.is_nan() {
        0.0
    } else {
        log_ratio.exp()
    }
}

/// First-stage acceptance `min(1, Lc(prop) / Lc(curr))`. The proposal ratio
/// cancels against the prior ratio for the prior-reversible sampler.
pub fn coarse_accept_prob(loglik_c_prop: f64, loglik_c_curr: f64) -> f64 {
    capped(loglik_c_prop - loglik_c_curr)
}

/// Second-stage acceptance
/// `min(1, Lf(prop) Lc(curr) / (Lf(curr) Lc(prop)))`.
pub fn fine_accept_prob(loglik_f_prop: f64, loglik_f_curr: f64, loglik_c_prop: f64, loglik_c_curr: f64) -> f64 {
    capped((loglik_f_prop - loglik_f_curr) - (loglik_c_prop - loglik_c_curr))
}
