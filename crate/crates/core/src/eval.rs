//! Expected long-run average reward (ElrAR).
//!
//! Each user's policy is rolled out for `horizon` decision points in a
//! fresh simulator; the rewards after the first `burn_in` steps are
//! averaged, and the per-user averages are averaged again.

use rayon::prelude::*;

use crate::actor::Policy;
use crate::envs::Simulator;
use crate::error::{input, Result};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Average tail reward per user.
    pub per_user: Vec<f64>,
    pub elrar: f64,
    pub horizon: usize,
    pub burn_in: usize,
}

impl EvalReport {
    pub fn users(&self) -> usize {
        self.per_user.len()
    }
}

/// Mean reward of steps `burn_in..horizon` of one rollout under `policy`.
pub fn average_reward<S: Simulator + ?Sized>(
    policy: &Policy,
    env: &S,
    horizon: usize,
    burn_in: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if horizon <= burn_in {
        return Err(input(format!(
            "horizon {horizon} must exceed burn-in {burn_in}"
        )));
    }
    if policy.env() != env.kind() {
        return Err(input(format!(
            "{} policy evaluated on the {} simulator",
            policy.env(),
            env.kind()
        )));
    }
    let mut state = env.initial_state(rng)?;
    let mut total = 0.0;
    for t in 0..horizon {
        let action = policy.sample(&state, rng)?;
        let (reward, next) = env.act(&state, action, rng)?;
        if t >= burn_in {
            total += reward;
        }
        state = next;
    }
    Ok(total / (horizon - burn_in) as f64)
}

/// Evaluates one policy per user, each in its own simulator and stream.
/// Users run in parallel; the report is independent of scheduling.
pub fn elrar<S: Simulator + Sync>(
    policies: &[Policy],
    envs: &[S],
    horizon: usize,
    burn_in: usize,
    streams: &mut [RngStream],
) -> Result<EvalReport> {
    if policies.len() != envs.len() || policies.len() != streams.len() {
        return Err(input(format!(
            "need matching counts, got {} policies, {} environments, {} streams",
            policies.len(),
            envs.len(),
            streams.len()
        )));
    }
    if policies.is_empty() {
        return Err(input("no users to evaluate"));
    }
    let per_user = policies
        .par_iter()
        .zip(envs.par_iter())
        .zip(streams.par_iter_mut())
        .map(|((p, e), rng)| average_reward(p, e, horizon, burn_in, rng))
        .collect::<Result<Vec<_>>>()?;
    let elrar = per_user.iter().sum::<f64>() / per_user.len() as f64;
    Ok(EvalReport {
        per_user,
        elrar,
        horizon,
        burn_in,
    })
}
