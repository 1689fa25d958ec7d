//! Experiment sweeps over outlier ratio (ψ), outlier strength (ν) and the
//! threshold scale (τ), with one CSV row per (grid point, seed, method).
//!
//! Every (seed, user) pair owns three random streams: one for the clean
//! training trajectory, one for outlier placement and one for evaluation.
//! All methods and grid points reuse them, so comparisons between methods
//! are paired and a whole run is reproducible bit for bit.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::actor::Policy;
use crate::critic::{CriticMode, DEFAULT_MAX_ITERS};
use crate::envs::{generate_trajectory, inject_outliers, EnvModel, OutlierSpec};
use crate::error::{input, Error, Result};
use crate::eval::average_reward;
use crate::features::EnvKind;
use crate::numerics::{quantile, RngStream};
use crate::pipeline::{run_actor_critic, ActorCriticConfig};
use crate::trajectory::Trajectory;

pub const CSV_HEADER: [&str; 10] = [
    "experiment",
    "dataset",
    "method",
    "psi",
    "nu",
    "tau",
    "seed",
    "elrar",
    "critic_iters",
    "outliers_detected",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    S1,
    S2,
    S3,
    S4,
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentId::S1 => "s1",
            ExperimentId::S2 => "s2",
            ExperimentId::S3 => "s3",
            ExperimentId::S4 => "s4",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Ok(ExperimentId::S1),
            "s2" => Ok(ExperimentId::S2),
            "s3" => Ok(ExperimentId::S3),
            "s4" => Ok(ExperimentId::S4),
            other => Err(input(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Ridge critic over every tuple, unweighted actor.
    Accb,
    /// Capped critic with boxplot threshold, weighted actor.
    RoAccb,
    /// Drop tuples whose reward is above the boxplot fence, then `Accb`.
    IqrFilterAccb,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Accb => "accb",
            Method::RoAccb => "ro-accb",
            Method::IqrFilterAccb => "iqr-filter-accb",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "accb" => Ok(Method::Accb),
            "ro-accb" => Ok(Method::RoAccb),
            "iqr-filter-accb" => Ok(Method::IqrFilterAccb),
            other => Err(input(format!("unknown method '{other}'"))),
        }
    }
}

/// Everything a sweep needs. [`ExperimentConfig::new`] fills in the
/// defaults for a given experiment and dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub dataset: EnvKind,
    pub methods: Vec<Method>,
    pub psi: Vec<f64>,
    pub nu: Vec<f64>,
    pub tau: Vec<f64>,
    pub seeds: Vec<u64>,
    pub users: usize,
    /// Training trajectory length per user.
    pub m: usize,
    pub zeta_a: f64,
    pub zeta_c: f64,
    pub horizon: usize,
    pub burn_in: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId, dataset: EnvKind) -> Self {
        let mut cfg = Self {
            experiment,
            dataset,
            methods: vec![Method::Accb, Method::RoAccb],
            psi: vec![0.04],
            nu: vec![5.0],
            tau: vec![1.0],
            seeds: (1..=5).collect(),
            users: 50,
            m: 210,
            zeta_a: 1e-3,
            zeta_c: 1e-3,
            horizon: 5000,
            burn_in: 1000,
            output: None,
        };
        match experiment {
            ExperimentId::S1 => cfg.methods.push(Method::IqrFilterAccb),
            ExperimentId::S2 => cfg.psi = (0..=9).map(|k| k as f64 / 100.0).collect(),
            ExperimentId::S3 => cfg.nu = (0..=10).map(f64::from).collect(),
            ExperimentId::S4 => {
                cfg.tau = match dataset {
                    EnvKind::HeartSteps => vec![0.1, 0.2, 0.5, 1.0, 2.0, 4.0, 8.0],
                    EnvKind::ChainWalk => vec![0.2, 0.5, 1.0, 2.0, 4.0],
                }
            }
        }
        cfg
    }

    /// Overrides fields from a flat `key = value` document. Lists are
    /// comma separated; `#` starts a comment.
    pub fn apply_overrides(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| {
                    input(format!(
                        "config line {}: expected 'key = value'",
                        lineno + 1
                    ))
                })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| input(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => {
                let dataset: EnvKind = value.parse()?;
                // Carry the per-dataset τ grid along unless it was already overridden.
                if self.tau == Self::new(self.experiment, self.dataset).tau {
                    self.tau = Self::new(self.experiment, dataset).tau;
                }
                self.dataset = dataset;
            }
            "methods" => self.methods = parse_list(value)?,
            "psi" => self.psi = parse_list(value)?,
            "nu" => self.nu = parse_list(value)?,
            "tau" => self.tau = parse_list(value)?,
            "seeds" => self.seeds = parse_list(value)?,
            "users" => self.users = parse_one(value)?,
            "m" | "trajectory_length" => self.m = parse_one(value)?,
            "zeta_a" => self.zeta_a = parse_one(value)?,
            "zeta_c" => self.zeta_c = parse_one(value)?,
            "horizon" => self.horizon = parse_one(value)?,
            "burn_in" => self.burn_in = parse_one(value)?,
            "out" | "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(input(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(input("methods list is empty"));
        }
        if self.psi.is_empty() || self.nu.is_empty() || self.tau.is_empty() || self.seeds.is_empty()
        {
            return Err(input(
                "every sweep grid and the seed list must be non-empty",
            ));
        }
        if let Some(p) = self.psi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(input(format!("psi {p} outside [0, 1]")));
        }
        if let Some(n) = self.nu.iter().find(|n| !(**n >= 0.0) || !n.is_finite()) {
            return Err(input(format!("nu {n} must be finite and >= 0")));
        }
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
            return Err(input(format!("tau {t} must be positive")));
        }
        if self.users == 0 || self.m == 0 {
            return Err(input("users and m must be at least 1"));
        }
        if !(self.zeta_a > 0.0) || !(self.zeta_c > 0.0) {
            return Err(input("zeta_a and zeta_c must be positive"));
        }
        if self.horizon <= self.burn_in {
            return Err(input(format!(
                "horizon {} must exceed burn_in {}",
                self.horizon, self.burn_in
            )));
        }
        Ok(())
    }

    /// Grid points in output order: ψ outermost, then ν, then τ.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for &psi in &self.psi {
            for &nu in &self.nu {
                for &tau in &self.tau {
                    points.push(GridPoint { psi, nu, tau });
                }
            }
        }
        points
    }
}

fn parse_one<T: FromStr>(value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| input(format!("cannot parse '{value}'")))
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(parse_one)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub psi: f64,
    pub nu: f64,
    pub tau: f64,
}

/// One CSV record: a method's ElrAR at one grid point for one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentId,
    pub dataset: EnvKind,
    pub method: Method,
    pub psi: f64,
    pub nu: f64,
    pub tau: f64,
    pub seed: u64,
    pub elrar: f64,
    /// Largest number of critic solves over the users.
    pub critic_iters: usize,
    /// Tuples given zero weight (or filtered out), summed over users.
    pub outliers_detected: usize,
}

impl ResultRow {
    fn record(&self) -> [String; 10] {
        [
            self.experiment.to_string(),
            self.dataset.to_string(),
            self.method.to_string(),
            self.psi.to_string(),
            self.nu.to_string(),
            self.tau.to_string(),
            self.seed.to_string(),
            self.elrar.to_string(),
            self.critic_iters.to_string(),
            self.outliers_detected.to_string(),
        ]
    }
}

/// A trained policy plus bookkeeping for the result row.
#[derive(Debug, Clone)]
pub struct Trained {
    pub policy: Policy,
    pub critic_iters: usize,
    pub outliers: usize,
}

fn streams(seed: u64, user: usize) -> (RngStream, RngStream, RngStream) {
    let base = 3 * user as u64;
    (
        RngStream::new(seed, base),
        RngStream::new(seed, base + 1),
        RngStream::new(seed, base + 2),
    )
}

/// Trains one method on one (possibly corrupted) trajectory.
pub fn train(
    method: Method,
    traj: &Trajectory,
    tau: f64,
    cfg: &ExperimentConfig,
) -> Result<Trained> {
    let ac = |critic| ActorCriticConfig {
        zeta_a: cfg.zeta_a,
        zeta_c: cfg.zeta_c,
        critic,
        critic_max_iters: DEFAULT_MAX_ITERS,
        ..ActorCriticConfig::default()
    };
    match method {
        Method::Accb => {
            let out = run_actor_critic(traj, &ac(CriticMode::Ridge))?;
            Ok(Trained {
                policy: out.policy,
                critic_iters: out.critic.iterations,
                outliers: 0,
            })
        }
        Method::RoAccb => {
            let out = run_actor_critic(traj, &ac(CriticMode::Capped { tau }))?;
            Ok(Trained {
                outliers: out.critic.outlier_count(),
                critic_iters: out.critic.iterations,
                policy: out.policy,
            })
        }
        Method::IqrFilterAccb => {
            let rewards = traj.rewards();
            let q1 = quantile(&rewards, 0.25)?;
            let q3 = quantile(&rewards, 0.75)?;
            let fence = q3 + 1.5 * (q3 - q1);
            let kept = traj.filter_indices(|i| rewards[i] <= fence)?;
            let out = run_actor_critic(&kept, &ac(CriticMode::Ridge))?;
            Ok(Trained {
                policy: out.policy,
                critic_iters: out.critic.iterations,
                outliers: traj.len() - kept.len(),
            })
        }
    }
}

struct UserResult {
    /// Indexed like `cfg.methods`.
    per_method: Vec<(f64, Trained)>,
}

fn run_user(
    cfg: &ExperimentConfig,
    env: &EnvModel,
    point: GridPoint,
    seed: u64,
    user: usize,
) -> Result<UserResult> {
    let (mut train_rng, mut outlier_rng, _) = streams(seed, user);
    let clean = generate_trajectory(env, &Policy::uniform(cfg.dataset), cfg.m, &mut train_rng)?;
    let traj = inject_outliers(
        &clean,
        &OutlierSpec {
            psi: point.psi,
            nu: point.nu,
        },
        &mut outlier_rng,
    )?;
    let per_method = cfg
        .methods
        .iter()
        .map(|&method| {
            let trained = train(method, &traj, point.tau, cfg)?;
            let (_, _, mut eval_rng) = streams(seed, user);
            let eta = average_reward(
                &trained.policy,
                env,
                cfg.horizon,
                cfg.burn_in,
                &mut eval_rng,
            )?;
            Ok((eta, trained))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UserResult { per_method })
}

/// Runs the configured grid and returns rows ordered by grid point, then
/// seed, then the configured method order.
pub fn run_sweep(experiment: ExperimentId, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let env = EnvModel::default_for(cfg.dataset);
    let mut rows = Vec::new();
    for point in cfg.grid() {
        for &seed in &cfg.seeds {
            let users = (0..cfg.users)
                .into_par_iter()
                .map(|n| run_user(cfg, &env, point, seed, n))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| {
                    input(format!(
                        "{experiment} failed at psi={} nu={} tau={} seed={seed}: {e}",
                        point.psi, point.nu, point.tau
                    ))
                })?;
            for (k, &method) in cfg.methods.iter().enumerate() {
                let etas = users.iter().map(|u| u.per_method[k].0);
                let elrar = etas.sum::<f64>() / cfg.users as f64;
                rows.push(ResultRow {
                    experiment,
                    dataset: cfg.dataset,
                    method,
                    psi: point.psi,
                    nu: point.nu,
                    tau: point.tau,
                    seed,
                    elrar,
                    critic_iters: users
                        .iter()
                        .map(|u| u.per_method[k].1.critic_iters)
                        .max()
                        .unwrap_or(0),
                    outliers_detected: users.iter().map(|u| u.per_method[k].1.outliers).sum(),
                });
            }
        }
    }
    Ok(rows)
}

/// Method comparison at a single outlier setting.
pub fn run_s1(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep(ExperimentId::S1, cfg)
}

/// Outlier-ratio sweep.
pub fn run_s2(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep(ExperimentId::S2, cfg)
}

/// Outlier-strength sweep.
pub fn run_s3(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep(ExperimentId::S3, cfg)
}

/// Threshold-scale sweep.
pub fn run_s4(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_sweep(ExperimentId::S4, cfg)
}

pub fn run(experiment: ExperimentId, cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match experiment {
        ExperimentId::S1 => run_s1(cfg),
        ExperimentId::S2 => run_s2(cfg),
        ExperimentId::S3 => run_s3(cfg),
        ExperimentId::S4 => run_s4(cfg),
    }
}

pub fn write_csv(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.record()).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
