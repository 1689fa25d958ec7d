//! Data-generating environments: the HeartSteps mobile-health MDP, the
//! 4-state chain walk, and reward-outlier injection.

use crate::actor::Policy;
use crate::error::{input, Result};
use crate::features::{Action, EnvKind, State, CHAIN_STATES};
use crate::numerics::{cholesky_psd, Matrix, RngStream};
use crate::trajectory::{Trajectory, Tuple};

/// Anything that can be rolled forward one decision point at a time.
pub trait Simulator {
    fn kind(&self) -> EnvKind;

    fn initial_state(&self, rng: &mut RngStream) -> Result<State>;

    /// Takes `action` in `state`; returns the observed reward and the next state.
    fn act(&self, state: &State, action: Action, rng: &mut RngStream) -> Result<(f64, State)>;
}

/// Coefficients `β₁..β₁₃` of the HeartSteps generative model.
pub const HEARTSTEPS_BETA: [f64; 13] = [
    0.4, 0.3, 0.4, 0.7, 0.05, 0.6, 3.0, 0.25, 0.25, 0.4, 0.1, 0.5, 500.0,
];

#[derive(Debug, Clone, PartialEq)]
pub struct HeartstepsParams {
    pub beta: [f64; 13],
    /// Variance of each state-transition noise term.
    pub state_noise_var: f64,
    /// Variance of the reward noise (before scaling by β₁₃).
    pub reward_noise_var: f64,
    /// Covariance of the initial state.
    pub init_cov: [[f64; 3]; 3],
}

impl Default for HeartstepsParams {
    fn default() -> Self {
        Self {
            beta: HEARTSTEPS_BETA,
            state_noise_var: 1.0,
            reward_noise_var: 9.0,
            init_cov: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }
}

impl HeartstepsParams {
    /// Same dynamics with every noise source switched off.
    pub fn noiseless() -> Self {
        Self {
            state_noise_var: 0.0,
            reward_noise_var: 0.0,
            init_cov: [[0.0; 3]; 3],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.state_noise_var >= 0.0) || !(self.reward_noise_var >= 0.0) {
            return Err(input("noise variances must be >= 0"));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(input("beta must be finite"));
        }
        for i in 0..3 {
            for j in 0..i {
                if self.init_cov[i][j] != self.init_cov[j][i] {
                    return Err(input("initial covariance must be symmetric"));
                }
            }
        }
        self.init_factor().map(|_| ())
    }

    fn init_factor(&self) -> Result<Matrix> {
        cholesky_psd(&Matrix::new(3, 3, self.init_cov.concat())?)
    }

    /// State transition from `(S_{t-1}, A_{t-1})`; draws the three state noises.
    pub fn transition(
        &self,
        prev: [f64; 3],
        a_prev: Action,
        rng: &mut RngStream,
    ) -> Result<[f64; 3]> {
        let b = &self.beta;
        let a = a_prev.value();
        let [s1, s2, s3] = prev;
        let xi1 = rng.gauss(0.0, self.state_noise_var)?;
        let xi2 = rng.gauss(0.0, self.state_noise_var)?;
        let xi3 = rng.gauss(0.0, self.state_noise_var)?;
        Ok([
            b[0] * s1 + xi1,
            b[1] * s2 + b[2] * a + xi2,
            b[3] * s3 + b[4] * s3 * a + b[5] * a + xi3,
        ])
    }

    /// Immediate reward for `(S_t, A_t)`; draws the reward noise.
    pub fn reward(&self, s: [f64; 3], a: Action, rng: &mut RngStream) -> Result<f64> {
        let b = &self.beta;
        let noise = rng.gauss(0.0, self.reward_noise_var)?;
        let [s1, s2, s3] = s;
        Ok(b[12]
            * (b[6] + a.value() * (b[7] + b[8] * s1 + b[9] * s2) + b[10] * s1 - b[11] * s3 + noise))
    }
}

fn heartsteps_state(s: &State) -> Result<[f64; 3]> {
    match *s {
        State::HeartSteps(v) => Ok(v),
        other => Err(input(format!("expected a HeartSteps state, got {other:?}"))),
    }
}

/// `S₀ ~ N(0, Σ)`.
pub fn heartsteps_init(params: &HeartstepsParams, rng: &mut RngStream) -> Result<State> {
    let l = params.init_factor()?;
    let z = [
        rng.gauss(0.0, 1.0)?,
        rng.gauss(0.0, 1.0)?,
        rng.gauss(0.0, 1.0)?,
    ];
    Ok(State::HeartSteps(
        l.mul_vec(&z)?.try_into().expect("3-vector"),
    ))
}

/// One HeartSteps decision point: advances the state from
/// `(s_prev, a_prev)` and returns it with the reward for `a_cur`.
pub fn heartsteps_step(
    params: &HeartstepsParams,
    s_prev: &State,
    a_prev: Action,
    a_cur: Action,
    rng: &mut RngStream,
) -> Result<(State, f64)> {
    let next = params.transition(heartsteps_state(s_prev)?, a_prev, rng)?;
    let r = params.reward(next, a_cur, rng)?;
    Ok((State::HeartSteps(next), r))
}

impl Simulator for HeartstepsParams {
    fn kind(&self) -> EnvKind {
        EnvKind::HeartSteps
    }

    fn initial_state(&self, rng: &mut RngStream) -> Result<State> {
        heartsteps_init(self, rng)
    }

    fn act(&self, state: &State, action: Action, rng: &mut RngStream) -> Result<(f64, State)> {
        let s = heartsteps_state(state)?;
        let r = self.reward(s, action, rng)?;
        let next = self.transition(s, action, rng)?;
        Ok((r, State::HeartSteps(next)))
    }
}

/// 4-state chain: `One` moves right, `Zero` moves left, the move succeeds
/// with `success_prob` and goes the other way otherwise; the ends saturate.
/// The reward is that of the state the move lands in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainWalkParams {
    pub rewards: [f64; CHAIN_STATES],
    pub success_prob: f64,
}

impl Default for ChainWalkParams {
    fn default() -> Self {
        Self {
            rewards: [0.0, 100.0, 100.0, 0.0],
            success_prob: 0.9,
        }
    }
}

impl ChainWalkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.success_prob > 0.5 && self.success_prob <= 1.0) {
            return Err(input(format!(
                "success probability {} outside (0.5, 1]",
                self.success_prob
            )));
        }
        Ok(())
    }
}

/// One chain-walk move. Consumes exactly one uniform draw.
pub fn chainwalk_step(
    params: &ChainWalkParams,
    s: &State,
    a: Action,
    rng: &mut RngStream,
) -> Result<(State, f64)> {
    let pos = match *s {
        State::ChainWalk(i) if i < CHAIN_STATES => i,
        other => return Err(input(format!("invalid chain-walk state {other:?}"))),
    };
    let success = rng.uniform() < params.success_prob;
    let right = (a == Action::One) == success;
    let next = if right {
        (pos + 1).min(CHAIN_STATES - 1)
    } else {
        pos.saturating_sub(1)
    };
    Ok((State::ChainWalk(next), params.rewards[next]))
}

impl Simulator for ChainWalkParams {
    fn kind(&self) -> EnvKind {
        EnvKind::ChainWalk
    }

    /// Uniform over the four positions.
    fn initial_state(&self, rng: &mut RngStream) -> Result<State> {
        Ok(State::ChainWalk(rng.below(CHAIN_STATES)))
    }

    fn act(&self, state: &State, action: Action, rng: &mut RngStream) -> Result<(f64, State)> {
        let (next, r) = chainwalk_step(self, state, action, rng)?;
        Ok((r, next))
    }
}

/// Either simulator, selected at run time.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvModel {
    HeartSteps(HeartstepsParams),
    ChainWalk(ChainWalkParams),
}

impl EnvModel {
    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::HeartSteps => EnvModel::HeartSteps(HeartstepsParams::default()),
            EnvKind::ChainWalk => EnvModel::ChainWalk(ChainWalkParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvModel::HeartSteps(p) => p.validate(),
            EnvModel::ChainWalk(p) => p.validate(),
        }
    }
}

impl Simulator for EnvModel {
    fn kind(&self) -> EnvKind {
        match self {
            EnvModel::HeartSteps(p) => p.kind(),
            EnvModel::ChainWalk(p) => p.kind(),
        }
    }

    fn initial_state(&self, rng: &mut RngStream) -> Result<State> {
        match self {
            EnvModel::HeartSteps(p) => p.initial_state(rng),
            EnvModel::ChainWalk(p) => p.initial_state(rng),
        }
    }

    fn act(&self, state: &State, action: Action, rng: &mut RngStream) -> Result<(f64, State)> {
        match self {
            EnvModel::HeartSteps(p) => p.act(state, action, rng),
            EnvModel::ChainWalk(p) => p.act(state, action, rng),
        }
    }
}

/// Rolls `env` forward `m` decision points under `behavior`, recording
/// `(s_t, a_t, r_t)`.
pub fn generate_trajectory<S: Simulator + ?Sized>(
    env: &S,
    behavior: &Policy,
    m: usize,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if m == 0 {
        return Err(input("trajectory length must be at least 1"));
    }
    if behavior.env() != env.kind() {
        return Err(input(format!(
            "{} policy cannot drive the {} simulator",
            behavior.env(),
            env.kind()
        )));
    }
    let mut state = env.initial_state(rng)?;
    let mut tuples = Vec::with_capacity(m);
    for _ in 0..m {
        let action = behavior.sample(&state, rng)?;
        let (reward, next) = env.act(&state, action, rng)?;
        tuples.push(Tuple {
            state,
            action,
            reward,
        });
        state = next;
    }
    Trajectory::new(env.kind(), tuples)
}

/// Reward-corruption settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlierSpec {
    /// Fraction of tuples to corrupt.
    pub psi: f64,
    /// Spike size in units of the mean absolute reward.
    pub nu: f64,
}

impl OutlierSpec {
    /// Number of corrupted tuples, `⌈ψ M⌉`. Products within 1e-9 of an
    /// integer are rounded first so that e.g. `0.04 × 100` yields 4.
    pub fn count(&self, m: usize) -> usize {
        let raw = self.psi * m as f64;
        let nearest = raw.round();
        let k = if (raw - nearest).abs() <= 1e-9 {
            nearest
        } else {
            raw.ceil()
        };
        (k.max(0.0) as usize).min(m)
    }
}

/// Adds `ν · mean_j |r_j|` to the rewards of `⌈ψ M⌉` distinct, uniformly
/// chosen tuples. States, actions and order are untouched.
pub fn inject_outliers(
    traj: &Trajectory,
    spec: &OutlierSpec,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !(0.0..=1.0).contains(&spec.psi) {
        return Err(input(format!("outlier ratio {} outside [0, 1]", spec.psi)));
    }
    if !(spec.nu >= 0.0) || !spec.nu.is_finite() {
        return Err(input(format!(
            "outlier strength must be finite and >= 0, got {}",
            spec.nu
        )));
    }
    let count = spec.count(traj.len());
    if count == 0 || spec.nu == 0.0 {
        return Ok(traj.clone());
    }
    let mut rewards = traj.rewards();
    let spike = spec.nu * rewards.iter().map(|r| r.abs()).sum::<f64>() / rewards.len() as f64;
    for i in rng.distinct_indices(rewards.len(), count) {
        rewards[i] += spike;
    }
    traj.with_rewards(&rewards)
}
