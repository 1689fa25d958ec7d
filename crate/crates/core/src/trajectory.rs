//! Observed `(state, action, reward)` tuples and their CSV form.
//!
//! HeartSteps files use the header `t,s1,s2,s3,a,r`; chain-walk files use
//! `t,s,a,r`. One row per decision point.

use std::path::Path;

use crate::error::{input, Error, Result};
use crate::features::{reward_features, Action, EnvKind, State};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuple {
    pub state: State,
    pub action: Action,
    pub reward: f64,
}

/// An ordered, non-empty sequence of tuples from one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    env: EnvKind,
    tuples: Vec<Tuple>,
}

impl Trajectory {
    pub fn new(env: EnvKind, tuples: Vec<Tuple>) -> Result<Self> {
        if tuples.is_empty() {
            return Err(input("trajectory must contain at least one tuple"));
        }
        for (i, t) in tuples.iter().enumerate() {
            if t.state.kind() != env {
                return Err(input(format!("tuple {i} holds a {} state", t.state.kind())));
            }
            if !t.reward.is_finite() {
                return Err(input(format!("tuple {i} has non-finite reward")));
            }
            // validates chain-walk ranges and HeartSteps finiteness
            reward_features(env, &t.state, t.action)?;
        }
        Ok(Self { env, tuples })
    }

    pub fn env(&self) -> EnvKind {
        self.env
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.tuples.iter().map(|t| t.reward).collect()
    }

    /// Same states and actions with the rewards replaced.
    pub fn with_rewards(&self, rewards: &[f64]) -> Result<Self> {
        if rewards.len() != self.len() {
            return Err(input(format!(
                "got {} rewards for a trajectory of {}",
                rewards.len(),
                self.len()
            )));
        }
        let tuples = self
            .tuples
            .iter()
            .zip(rewards)
            .map(|(t, &reward)| Tuple { reward, ..*t })
            .collect();
        Self::new(self.env, tuples)
    }

    /// Keeps the tuples whose index satisfies `keep`. Fails if none remain.
    pub fn filter_indices(&self, mut keep: impl FnMut(usize) -> bool) -> Result<Self> {
        let tuples = self
            .tuples
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, t)| *t)
            .collect();
        Self::new(self.env, tuples)
    }

    /// Reward-feature matrix with one row `x(s_i, a_i)` per tuple (M x u).
    pub fn design_matrix(&self) -> Result<Matrix> {
        let rows = self
            .tuples
            .iter()
            .map(|t| reward_features(self.env, &t.state, t.action))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let header: &[&str] = match self.env {
            EnvKind::HeartSteps => &["t", "s1", "s2", "s3", "a", "r"],
            EnvKind::ChainWalk => &["t", "s", "a", "r"],
        };
        w.write_record(header).map_err(csv_err)?;
        for (t, tuple) in self.tuples.iter().enumerate() {
            let mut row = vec![t.to_string()];
            match tuple.state {
                State::HeartSteps(s) => row.extend(s.iter().map(f64::to_string)),
                State::ChainWalk(i) => row.push(i.to_string()),
            }
            row.push(tuple.action.index().to_string());
            row.push(tuple.reward.to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_owned)
            .collect();
        let env = match header.join(",").as_str() {
            "t,s1,s2,s3,a,r" => EnvKind::HeartSteps,
            "t,s,a,r" => EnvKind::ChainWalk,
            other => return Err(input(format!("unrecognised trajectory header '{other}'"))),
        };
        let mut tuples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |j: usize| -> Result<f64> {
                rec.get(j)
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| input(format!("row {}: bad value in column {j}", line + 1)))
            };
            let (state, rest) = match env {
                EnvKind::HeartSteps => (State::HeartSteps([num(1)?, num(2)?, num(3)?]), 4),
                EnvKind::ChainWalk => (State::ChainWalk(num(1)? as usize), 2),
            };
            let action = Action::from_index(num(rest)? as u8)?;
            tuples.push(Tuple {
                state,
                action,
                reward: num(rest + 1)?,
            });
        }
        Self::new(env, tuples)
    }
}
