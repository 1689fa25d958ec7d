//! States, actions and the two feature maps used by the critic (`x(s, a)`)
//! and by the Boltzmann policy (`φ(s, a)`).

use std::fmt;
use std::str::FromStr;

use crate::error::{input, Error, Result};

/// Which simulator a state or policy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    HeartSteps,
    ChainWalk,
}

pub const CHAIN_STATES: usize = 4;

impl EnvKind {
    pub fn reward_dim(self) -> usize {
        8
    }

    pub fn policy_dim(self) -> usize {
        match self {
            EnvKind::HeartSteps => 4,
            EnvKind::ChainWalk => CHAIN_STATES + 1,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::HeartSteps => "heartsteps",
            EnvKind::ChainWalk => "chainwalk",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "heartsteps" => Ok(EnvKind::HeartSteps),
            "chainwalk" | "chain-walk" => Ok(EnvKind::ChainWalk),
            other => Err(input(format!("unknown dataset '{other}'"))),
        }
    }
}

/// HeartSteps: (weather, engagement, fatigue). Chain walk: position 0..=3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    HeartSteps([f64; 3]),
    ChainWalk(usize),
}

impl State {
    pub fn kind(&self) -> EnvKind {
        match self {
            State::HeartSteps(_) => EnvKind::HeartSteps,
            State::ChainWalk(_) => EnvKind::ChainWalk,
        }
    }

    fn validate(&self, env: EnvKind) -> Result<()> {
        if self.kind() != env {
            return Err(input(format!(
                "{} state passed to {env} feature map",
                self.kind()
            )));
        }
        match *self {
            State::HeartSteps(s) if s.iter().any(|v| !v.is_finite()) => {
                Err(input("HeartSteps state has non-finite entries"))
            }
            State::ChainWalk(i) if i >= CHAIN_STATES => {
                Err(input(format!("chain-walk state {i} out of range")))
            }
            _ => Ok(()),
        }
    }
}

/// Binary action. HeartSteps: `One` sends the intervention. Chain walk:
/// `One` moves right, `Zero` moves left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Zero,
    One,
}

impl Action {
    pub const ALL: [Action; 2] = [Action::Zero, Action::One];

    pub fn value(self) -> f64 {
        match self {
            Action::Zero => 0.0,
            Action::One => 1.0,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            0 => Ok(Action::Zero),
            1 => Ok(Action::One),
            _ => Err(input(format!("action must be 0 or 1, got {i}"))),
        }
    }
}

/// Reward-model features `x(s, a)`, length 8.
///
/// HeartSteps: `[1, s1, s2, s3, a, a s1, a s2, a s3]`. Chain walk: one-hot
/// at `4 a + s`, so the linear model can represent any mean reward per
/// state-action pair.
pub fn reward_features(env: EnvKind, s: &State, a: Action) -> Result<Vec<f64>> {
    s.validate(env)?;
    let av = a.value();
    Ok(match *s {
        State::HeartSteps([s1, s2, s3]) => vec![1.0, s1, s2, s3, av, av * s1, av * s2, av * s3],
        State::ChainWalk(i) => {
            let mut x = vec![0.0; 2 * CHAIN_STATES];
            x[CHAIN_STATES * a.index() + i] = 1.0;
            x
        }
    })
}

/// Policy features `φ(s, a) = [a sᵀ, a]ᵀ`; on the chain walk `s` is the
/// one-hot position. `φ(s, 0)` is zero for every state.
pub fn policy_features(env: EnvKind, s: &State, a: Action) -> Result<Vec<f64>> {
    s.validate(env)?;
    let av = a.value();
    Ok(match *s {
        State::HeartSteps([s1, s2, s3]) => vec![av * s1, av * s2, av * s3, av],
        State::ChainWalk(i) => {
            let mut phi = vec![0.0; CHAIN_STATES + 1];
            phi[i] = av;
            phi[CHAIN_STATES] = av;
            phi
        }
    })
}
