use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::conditioning::project;
use crate::error::{Error, McmcError};
use crate::grid::ScalarField;

use super::likelihood::{coarse_accept_prob, fine_accept_prob};
use super::model::InversionModel;
use super::proposal::{log_prior, log_proposal_ratio, rws_propose};
use super::trace::ChainTrace;
use super::ChainConfig;

struct State {
    theta: Vec<f64>,
    field: ScalarField,
    loglik_c: f64,
    loglik_f: f64,
}

fn forward(iteration: usize) -> impl FnOnce(Error) -> Error {
    move |e| {
        McmcError::Forward {
            iteration,
            source: Box::new(e),
        }
        .into()
    }
}

/// Runs one two-stage chain. The trace records the fine-accepted state after
/// every proposal, so rejected proposals repeat the previous state.
pub fn run_chain(cfg: &ChainConfig, model: &InversionModel) -> Result<ChainTrace, Error> {
    cfg.validate()?;
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut theta: Vec<f64> = match &cfg.initial_theta {
        Some(t) if t.len() == n => t.clone(),
        Some(t) => {
            return Err(McmcError::Argument(format!("initial theta has {} entries, need {n}", t.len())).into())
        }
        None => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    };
    let cond = cfg.conditioned;
    if cond && cfg.store_projected {
        let proj = &model
            .conditioning
            .as_ref()
            .ok_or_else(|| McmcError::Argument("conditioned sampling needs measurements".into()))?
            .projector;
        theta = project(&theta, proj)?.into_inner();
    }

    let eval = model.field(&theta, cond).map_err(forward(0))?;
    let loglik_c = if cfg.two_stage {
        model.coarse_loglik(&eval.field).map_err(forward(0))?
    } else {
        0.0
    };
    let loglik_f = model.fine_loglik(&eval.field).map_err(forward(0))?;
    let mut state = State {
        theta,
        field: eval.field,
        loglik_c,
        loglik_f,
    };

    let mut trace = ChainTrace::with_capacity(n, cfg.iterations);
    let mut snapshots: Vec<usize> = cfg.snapshots.clone();
    snapshots.sort_unstable();
    snapshots.dedup();
    let mut next_snapshot = snapshots.iter().peekable();

    for it in 1..=cfg.iterations {
        let (prop, mv) = rws_propose(&state.theta, cfg.beta, cfg.single_component, &mut rng);
        let eval = model.field(&prop, cond).map_err(forward(it))?;
        let prior_term = if cfg.explicit_prior_ratio {
            log_proposal_ratio(&state.theta, &prop, cfg.beta, mv) + log_prior(&prop) - log_prior(&state.theta)
        } else {
            0.0
        };

        let (coarse_ok, loglik_c_prop) = if cfg.two_stage {
            let lc = model.coarse_loglik(&eval.field).map_err(forward(it))?;
            let alpha = coarse_accept_prob(lc + prior_term, state.loglik_c);
            (rng.random::<f64>() < alpha, lc)
        } else {
            (true, 0.0)
        };

        let mut fine_ok = false;
        if coarse_ok {
            let lf = model.fine_loglik(&eval.field).map_err(forward(it))?;
            let alpha = if cfg.two_stage {
                fine_accept_prob(lf, state.loglik_f, loglik_c_prop, state.loglik_c)
            } else {
                coarse_accept_prob(lf + prior_term, state.loglik_f)
            };
            fine_ok = rng.random::<f64>() < alpha;
            if fine_ok {
                state.theta = match (cfg.store_projected, eval.projected) {
                    (true, Some(hat)) => hat,
                    _ => prop.into_inner(),
                };
                state.field = eval.field;
                state.loglik_c = loglik_c_prop;
                state.loglik_f = lf;
            }
        }
        trace.push(&state.theta, coarse_ok, fine_ok, state.loglik_f);
        while let Some(&&s) = next_snapshot.peek() {
            if s > it {
                break;
            }
            if s == it {
                trace.snapshots.push((it, state.field.clone()));
            }
            next_snapshot.next();
        }
    }
    Ok(trace)
}

/// Seeds `base, base + 1, ...` for a `k`-chain study.
pub fn study_seeds(base: u64, k: usize) -> Vec<u64> {
    (0..k as u64).map(|j| base.wrapping_add(j)).collect()
}

/// Runs independent chains in parallel, one per seed; results are returned
/// in seed order and do not depend on the thread count.
pub fn run_study(cfg: &ChainConfig, seeds: &[u64], model: &InversionModel) -> Result<Vec<ChainTrace>, Error> {
    if seeds.is_empty() {
        return Err(McmcError::Argument("a study needs at least one chain".into()).into());
    }
    let unique: HashSet<u64> = seeds.iter().copied().collect();
    if unique.len() != seeds.len() {
        log::warn!("study seeds {seeds:?} contain duplicates; those chains will be identical");
    }
    seeds
        .par_iter()
        .map(|&seed| {
            let mut c = cfg.clone();
            c.seed = seed;
            run_chain(&c, model)
        })
        .collect()
}
