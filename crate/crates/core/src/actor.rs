//! Boltzmann policy and the weighted actor objective
//!
//! `Ĵ(θ) = (1/M) Σ_i u_i Σ_a π_θ(a | s_i) x(s_i, a)ᵀ w - (ζ_a / 2) ‖θ‖²`
//!
//! with `π_θ(a | s) ∝ exp(-θᵀ φ(s, a))`. Tuples the critic rejected
//! (`u_i = 0`) drop out of the sum but still count in `M`.

use crate::error::{input, Error, Result};
use crate::features::{policy_features, reward_features, Action, EnvKind, State};
use crate::numerics::{dot, ensure_finite, norm_sq, RngStream};
use crate::trajectory::Trajectory;

/// Stochastic policy `π_θ(a | s) = exp(-θᵀφ(s,a)) / Σ_a' exp(-θᵀφ(s,a'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    env: EnvKind,
    theta: Vec<f64>,
}

impl Policy {
    pub fn new(env: EnvKind, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != env.policy_dim() {
            return Err(input(format!(
                "{env} policy needs {} parameters, got {}",
                env.policy_dim(),
                theta.len()
            )));
        }
        ensure_finite("policy parameters", &theta)?;
        Ok(Self { env, theta })
    }

    /// The uniform policy `θ = 0`.
    pub fn uniform(env: EnvKind) -> Self {
        Self {
            env,
            theta: vec![0.0; env.policy_dim()],
        }
    }

    pub fn env(&self) -> EnvKind {
        self.env
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Action probabilities indexed by [`Action::index`].
    pub fn probabilities(&self, s: &State) -> Result<[f64; 2]> {
        let phi0 = policy_features(self.env, s, Action::Zero)?;
        let phi1 = policy_features(self.env, s, Action::One)?;
        Ok(softmax2(-dot(&self.theta, &phi0), -dot(&self.theta, &phi1)))
    }

    pub fn sample(&self, s: &State, rng: &mut RngStream) -> Result<Action> {
        let p = self.probabilities(s)?;
        Ok(if rng.uniform() < p[1] {
            Action::One
        } else {
            Action::Zero
        })
    }
}

fn softmax2(l0: f64, l1: f64) -> [f64; 2] {
    let top = l0.max(l1);
    let (e0, e1) = ((l0 - top).exp(), (l1 - top).exp());
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Per-state probabilities; kept as a free function for symmetry with the
/// other operations.
pub fn policy_prob(policy: &Policy, s: &State) -> Result<[f64; 2]> {
    policy.probabilities(s)
}

/// Precomputed data for repeated evaluation of `Ĵ` and its gradient.
///
/// Expected rewards are stored centred per tuple (`q_a - q̄`); the
/// θ-independent part `Σ u_i q̄_i / M` is kept in `offset`. This keeps
/// line-search comparisons away from cancellation against large rewards.
#[derive(Debug, Clone)]
pub struct ActorProblem {
    env: EnvKind,
    phi: Vec<[Vec<f64>; 2]>,
    q_centred: Vec<[f64; 2]>,
    offset: f64,
    scale: f64,
    zeta_a: f64,
}

impl ActorProblem {
    pub fn new(traj: &Trajectory, weights: &[bool], w: &[f64], zeta_a: f64) -> Result<Self> {
        let env = traj.env();
        if weights.len() != traj.len() {
            return Err(input(format!(
                "{} weights for a trajectory of {} tuples",
                weights.len(),
                traj.len()
            )));
        }
        if w.len() != env.reward_dim() {
            return Err(input(format!(
                "critic has {} coefficients, expected {}",
                w.len(),
                env.reward_dim()
            )));
        }
        ensure_finite("critic coefficients", w)?;
        if !(zeta_a >= 0.0) || !zeta_a.is_finite() {
            return Err(input(format!(
                "zeta_a must be finite and >= 0, got {zeta_a}"
            )));
        }
        let mut phi = Vec::new();
        let mut q_centred = Vec::new();
        let mut offset = 0.0;
        for (t, _) in traj.tuples().iter().zip(weights).filter(|(_, &u)| u) {
            let q0 = dot(&reward_features(env, &t.state, Action::Zero)?, w);
            let q1 = dot(&reward_features(env, &t.state, Action::One)?, w);
            let mid = 0.5 * (q0 + q1);
            offset += mid;
            q_centred.push([q0 - mid, q1 - mid]);
            phi.push([
                policy_features(env, &t.state, Action::Zero)?,
                policy_features(env, &t.state, Action::One)?,
            ]);
        }
        let scale = 1.0 / traj.len() as f64;
        Ok(Self {
            env,
            phi,
            q_centred,
            offset: offset * scale,
            scale,
            zeta_a,
        })
    }

    pub fn dim(&self) -> usize {
        self.env.policy_dim()
    }

    fn centred_objective(&self, theta: &[f64]) -> f64 {
        let data: f64 = self
            .phi
            .iter()
            .zip(&self.q_centred)
            .map(|([p0, p1], q)| {
                let pi = softmax2(-dot(theta, p0), -dot(theta, p1));
                pi[0] * q[0] + pi[1] * q[1]
            })
            .sum();
        data * self.scale - 0.5 * self.zeta_a * norm_sq(theta)
    }

    pub fn objective(&self, theta: &[f64]) -> f64 {
        self.offset + self.centred_objective(theta)
    }

    /// `(1/M) Σ u_i Σ_a q_a π_a (φ̄ - φ_a) - ζ_a θ`.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let m = self.dim();
        let mut g = vec![0.0; m];
        for ([p0, p1], q) in self.phi.iter().zip(&self.q_centred) {
            let pi = softmax2(-dot(theta, p0), -dot(theta, p1));
            for k in 0..m {
                let mean_phi = pi[0] * p0[k] + pi[1] * p1[k];
                g[k] += q[0] * pi[0] * (mean_phi - p0[k]) + q[1] * pi[1] * (mean_phi - p1[k]);
            }
        }
        for k in 0..m {
            g[k] = g[k] * self.scale - self.zeta_a * theta[k];
        }
        g
    }
}

fn check_policy(problem: &ActorProblem, policy: &Policy) -> Result<()> {
    if policy.env != problem.env {
        return Err(input(format!(
            "{} policy used on {} data",
            policy.env, problem.env
        )));
    }
    Ok(())
}

/// Weighted actor objective `Ĵ(θ)`.
pub fn actor_objective(
    traj: &Trajectory,
    weights: &[bool],
    w: &[f64],
    policy: &Policy,
    zeta_a: f64,
) -> Result<f64> {
    let problem = ActorProblem::new(traj, weights, w, zeta_a)?;
    check_policy(&problem, policy)?;
    Ok(problem.objective(&policy.theta))
}

/// Analytic gradient of [`actor_objective`] with respect to θ.
pub fn actor_gradient(
    traj: &Trajectory,
    weights: &[bool],
    w: &[f64],
    policy: &Policy,
    zeta_a: f64,
) -> Result<Vec<f64>> {
    let problem = ActorProblem::new(traj, weights, w, zeta_a)?;
    check_policy(&problem, policy)?;
    Ok(problem.gradient(&policy.theta))
}

/// Stopping rules for [`maximize_actor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    /// Stop once `‖∇Ĵ‖₂` falls to this value.
    pub grad_tol: f64,
    pub max_steps: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    /// Maximum step halvings per line search.
    pub max_halvings: usize,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_steps: 500,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

/// What happened during a maximisation.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentReport {
    pub steps: usize,
    pub grad_norm: f64,
    pub objective: f64,
    pub converged: bool,
    /// The line search found no increase along the chosen direction.
    pub stalled: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

/// Maximises `Ĵ` from `theta_init`.
///
/// Quasi-Newton (BFGS) ascent with Armijo backtracking. The inverse-Hessian
/// estimate is reset to the identity whenever its direction stops being an
/// ascent direction or the curvature condition fails, which degrades the
/// step to plain gradient ascent.
pub fn maximize_actor(
    traj: &Trajectory,
    weights: &[bool],
    w: &[f64],
    theta_init: &[f64],
    zeta_a: f64,
    opts: &AscentOptions,
) -> Result<(Policy, AscentReport)> {
    if !(zeta_a > 0.0) {
        return Err(input(format!(
            "zeta_a must be positive for a well-posed maximisation, got {zeta_a}"
        )));
    }
    let problem = ActorProblem::new(traj, weights, w, zeta_a)?;
    let start = Policy::new(traj.env(), theta_init.to_vec())?;
    let (theta, report) = ascend(&problem, start.theta, opts)?;
    Ok((Policy::new(traj.env(), theta)?, report))
}

pub(crate) fn ascend(
    problem: &ActorProblem,
    mut theta: Vec<f64>,
    opts: &AscentOptions,
) -> Result<(Vec<f64>, AscentReport)> {
    let m = theta.len();
    let mut h = identity(m);
    let mut value = problem.centred_objective(&theta);
    let mut grad = problem.gradient(&theta);
    let mut trace = vec![problem.offset + value];
    let mut steps = 0;
    let mut stalled = false;

    while steps < opts.max_steps {
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numerical("actor objective became non-finite".into()));
        }
        if norm_sq(&grad).sqrt() <= opts.grad_tol {
            break;
        }
        let mut dir = mat_vec(&h, &grad);
        if dot(&dir, &grad) <= 0.0 {
            h = identity(m);
            dir = grad.clone();
        }
        let slope = dot(&dir, &grad);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + alpha * d).collect();
            let trial_value = problem.centred_objective(&trial);
            if trial_value >= value + opts.armijo * alpha * slope {
                accepted = Some((trial, trial_value));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            if h != identity(m) {
                h = identity(m);
                continue;
            }
            stalled = true;
            break;
        };
        if next_value < value {
            // Armijo with a positive slope forbids this; guards the ascent contract.
            stalled = true;
            break;
        }

        let next_grad = problem.gradient(&next);
        // BFGS on the minimisation of -Ĵ: s = Δθ, y = -(Δ∇Ĵ)
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = grad.iter().zip(&next_grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm_sq(&s).sqrt() * norm_sq(&y).sqrt() {
            bfgs_update(&mut h, &s, &y, sy);
        } else {
            h = identity(m);
        }

        theta = next;
        value = next_value;
        grad = next_grad;
        steps += 1;
        trace.push(problem.offset + value);
    }

    let grad_norm = norm_sq(&grad).sqrt();
    Ok((
        theta,
        AscentReport {
            steps,
            grad_norm,
            objective: problem.offset + value,
            converged: grad_norm <= opts.grad_tol,
            stalled,
            objective_trace: trace,
        },
    ))
}

fn identity(m: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn mat_vec(h: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    h.iter().map(|row| dot(row, v)).collect()
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`, `ρ = 1 / (sᵀy)`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let rho = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let m = s.len();
    for i in 0..m {
        for j in 0..m {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
