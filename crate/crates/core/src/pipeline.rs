//! The full per-user actor-critic loop.
//!
//! Repeat: fit the critic (reweighting to convergence), then maximise the
//! actor objective from the previous θ. Stops when θ moves by at most
//! `theta_tol` in sup-norm. The critic never depends on θ, so in practice
//! the second pass confirms convergence.

use crate::actor::{ascend, ActorProblem, AscentOptions, AscentReport, Policy};
use crate::critic::{fit_critic, CriticFit, CriticMode, DEFAULT_MAX_ITERS};
use crate::error::{input, Result};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticConfig {
    pub zeta_a: f64,
    pub zeta_c: f64,
    pub critic: CriticMode,
    pub critic_max_iters: usize,
    pub max_outer: usize,
    pub theta_tol: f64,
    pub ascent: AscentOptions,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        Self {
            zeta_a: 1e-3,
            zeta_c: 1e-3,
            critic: CriticMode::Capped { tau: 1.0 },
            critic_max_iters: DEFAULT_MAX_ITERS,
            max_outer: 50,
            theta_tol: 1e-6,
            ascent: AscentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCriticOutcome {
    pub policy: Policy,
    pub critic: CriticFit,
    pub outer_iterations: usize,
    /// Report of the last actor maximisation.
    pub ascent: AscentReport,
}

pub fn run_actor_critic(
    traj: &Trajectory,
    config: &ActorCriticConfig,
) -> Result<ActorCriticOutcome> {
    if config.max_outer == 0 {
        return Err(input("max_outer must be at least 1"));
    }
    if !(config.zeta_a > 0.0) {
        return Err(input(format!(
            "zeta_a must be positive, got {}",
            config.zeta_a
        )));
    }
    let mut theta = vec![0.0; traj.env().policy_dim()];
    let mut outer = 0;
    loop {
        outer += 1;
        let critic = fit_critic(traj, config.zeta_c, config.critic, config.critic_max_iters)?;
        let problem = ActorProblem::new(traj, &critic.weights, &critic.w, config.zeta_a)?;
        let (next, ascent) = ascend(&problem, theta.clone(), &config.ascent)?;
        let moved = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        if moved <= config.theta_tol || outer >= config.max_outer {
            return Ok(ActorCriticOutcome {
                policy: Policy::new(traj.env(), theta)?,
                critic,
                outer_iterations: outer,
                ascent,
            });
        }
    }
}
