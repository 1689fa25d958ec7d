//! Expected-reward estimation.
//!
//! Two estimators share the linear model `E[r | s, a] = x(s, a)ᵀ w`:
//!
//! - [`ridge_fit`]: ordinary ridge regression over every tuple.
//! - [`capped_fit`]: minimises `Σ min(‖r_i - x_iᵀ w‖², ε) + ζ_c ‖w‖²` by
//!   alternating a weighted ridge solve with the inlier indicator
//!   `u_i = 1{‖r_i - x_iᵀ w‖² < ε}` until the indicator stops changing.
//!
//! The threshold comes from [`compute_epsilon`], a boxplot fence on the
//! squared residuals of the full ridge fit.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{input, Error, Result};
use crate::numerics::{dist_sq, dot, ensure_finite, norm_sq, quantile_sorted, solve_spd, Matrix};
use crate::trajectory::Trajectory;

/// Floor used for ε when every residual is exactly zero.
pub const EPSILON_FLOOR: f64 = 1e-12;

pub const DEFAULT_MAX_ITERS: usize = 100;

static EPSILON_EVALUATIONS: AtomicU64 = AtomicU64::new(0);
static WEIGHT_UPDATES: AtomicU64 = AtomicU64::new(0);

/// Process-wide instrumentation counters.
pub mod counters {
    use super::*;

    /// Number of [`compute_epsilon`](super::compute_epsilon) calls so far.
    pub fn epsilon_evaluations() -> u64 {
        EPSILON_EVALUATIONS.load(Ordering::Relaxed)
    }

    /// Number of inlier-indicator updates performed by capped fits so far.
    pub fn weight_updates() -> u64 {
        WEIGHT_UPDATES.load(Ordering::Relaxed)
    }
}

/// Result of a critic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticFit {
    /// Reward-model coefficients.
    pub w: Vec<f64>,
    /// Inlier indicator per tuple; `false` marks a tuple treated as an outlier.
    pub weights: Vec<bool>,
    /// Threshold on squared residuals. `f64::INFINITY` for the plain ridge path.
    pub epsilon: f64,
    /// Number of weighted solves performed.
    pub iterations: usize,
    /// `f(w⁽ᵗ⁾, u⁽ᵗ⁾)` for `t = 0..=iterations`, with `w⁽⁰⁾ = 0`.
    pub objective_trace: Vec<f64>,
    /// `‖w⁽ᵗ⁾ - w⁽ᵗ⁻¹⁾‖²` for `t = 1..=iterations`.
    pub step_norms_sq: Vec<f64>,
}

impl CriticFit {
    pub fn outlier_count(&self) -> usize {
        self.weights.iter().filter(|&&u| !u).count()
    }

    /// Every tuple was rejected; `w` is then zero.
    pub fn all_rejected(&self) -> bool {
        self.weights.iter().all(|&u| !u)
    }
}

fn check_problem(x: &Matrix, r: &[f64], zeta_c: f64) -> Result<()> {
    if x.rows() != r.len() {
        return Err(input(format!(
            "feature matrix has {} rows but there are {} rewards",
            x.rows(),
            r.len()
        )));
    }
    if r.is_empty() {
        return Err(input("critic needs at least one tuple"));
    }
    if !(zeta_c > 0.0) || !zeta_c.is_finite() {
        return Err(input(format!("zeta_c must be positive, got {zeta_c}")));
    }
    ensure_finite("rewards", r)
}

/// Solves `(Σ u_i x_i x_iᵀ + ζ I) w = Σ u_i x_i r_i`; `None` weights count
/// every row.
fn weighted_ridge(x: &Matrix, r: &[f64], weights: Option<&[bool]>, zeta: f64) -> Result<Vec<f64>> {
    let u = x.cols();
    let mut gram = Matrix::identity(u);
    for j in 0..u {
        gram.set(j, j, zeta);
    }
    let mut rhs = vec![0.0; u];
    for (i, &ri) in r.iter().enumerate() {
        if weights.is_some_and(|w| !w[i]) {
            continue;
        }
        let xi = x.row(i);
        for j in 0..u {
            rhs[j] += xi[j] * ri;
            for k in 0..=j {
                gram.set(j, k, gram.get(j, k) + xi[j] * xi[k]);
            }
        }
    }
    for j in 0..u {
        for k in 0..j {
            gram.set(k, j, gram.get(j, k));
        }
    }
    solve_spd(&gram, &rhs)
}

/// Ridge estimate `w = (Xᵀ X + ζ_c I)⁻¹ Xᵀ r` where `x` holds one feature row per tuple.
pub fn ridge_fit(x: &Matrix, r: &[f64], zeta_c: f64) -> Result<Vec<f64>> {
    check_problem(x, r, zeta_c)?;
    weighted_ridge(x, r, None, zeta_c)
}

pub fn squared_residuals(x: &Matrix, r: &[f64], w: &[f64]) -> Vec<f64> {
    r.iter()
        .enumerate()
        .map(|(i, ri)| (ri - dot(x.row(i), w)).powi(2))
        .collect()
}

/// Boxplot threshold `τ (q₃ + 1.5 (q₃ - q₁))` on squared residuals.
pub fn compute_epsilon(residuals_sq: &[f64], tau: f64) -> Result<f64> {
    EPSILON_EVALUATIONS.fetch_add(1, Ordering::Relaxed);
    if residuals_sq.is_empty() {
        return Err(input("cannot compute a threshold from no residuals"));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(input(format!("tau must be positive, got {tau}")));
    }
    ensure_finite("squared residuals", residuals_sq)?;
    let mut sorted = residuals_sq.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let eps = tau * (q3 + 1.5 * (q3 - q1));
    Ok(if eps > 0.0 { eps } else { EPSILON_FLOOR })
}

fn inlier_indicator(x: &Matrix, r: &[f64], w: &[f64], epsilon: f64) -> Vec<bool> {
    squared_residuals(x, r, w)
        .into_iter()
        .map(|e| e < epsilon)
        .collect()
}

/// Surrogate `f(w, u) = Σ u_i e_i + Σ (1 - u_i) ε + ζ ‖w‖²` with `e_i` the
/// squared residual. Equals [`critic_objective`] when `u` is the indicator of `w`.
pub fn surrogate_objective(
    x: &Matrix,
    r: &[f64],
    w: &[f64],
    weights: &[bool],
    zeta_c: f64,
    epsilon: f64,
) -> f64 {
    let data: f64 = squared_residuals(x, r, w)
        .into_iter()
        .zip(weights)
        .map(|(e, &u)| if u { e } else { epsilon })
        .sum();
    data + zeta_c * norm_sq(w)
}

/// Capped-ℓ2 objective `Σ min(‖r_i - x_iᵀ w‖², ε) + ζ_c ‖w‖²`.
pub fn critic_objective(
    x: &Matrix,
    r: &[f64],
    w: &[f64],
    zeta_c: f64,
    epsilon: f64,
) -> Result<f64> {
    if x.rows() != r.len() || x.cols() != w.len() {
        return Err(input("dimension mismatch in critic objective"));
    }
    if !(epsilon > 0.0) {
        return Err(input(format!("epsilon must be positive, got {epsilon}")));
    }
    ensure_finite("rewards", r)?;
    ensure_finite("coefficients", w)?;
    let data: f64 = squared_residuals(x, r, w)
        .into_iter()
        .map(|e| e.min(epsilon))
        .sum();
    Ok(data + zeta_c * norm_sq(w))
}

/// Iteratively reweighted capped-ℓ2 fit with a fixed threshold.
///
/// Starting from `w⁽⁰⁾ = 0` and `u⁽⁰⁾ = u_init` (all ones when `None`), each
/// iteration solves the ridge problem restricted to the current inliers and
/// then recomputes the indicator. Stops as soon as the indicator repeats
/// exactly, so the returned `(w, weights)` is a fixed point.
pub fn capped_fit(
    x: &Matrix,
    r: &[f64],
    zeta_c: f64,
    epsilon: f64,
    u_init: Option<&[bool]>,
    max_iters: usize,
) -> Result<CriticFit> {
    check_problem(x, r, zeta_c)?;
    if !(epsilon > 0.0) || epsilon.is_nan() {
        return Err(input(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut weights = match u_init {
        Some(u) if u.len() != r.len() => {
            return Err(input(format!(
                "u_init has length {}, expected {}",
                u.len(),
                r.len()
            )))
        }
        Some(u) => u.to_vec(),
        None => vec![true; r.len()],
    };

    let mut w = vec![0.0; x.cols()];
    let mut trace = vec![surrogate_objective(x, r, &w, &weights, zeta_c, epsilon)];
    let mut steps = Vec::new();

    for t in 1..=max_iters {
        let next_w = weighted_ridge(x, r, Some(&weights), zeta_c)?;
        let next_u = inlier_indicator(x, r, &next_w, epsilon);
        WEIGHT_UPDATES.fetch_add(1, Ordering::Relaxed);

        steps.push(dist_sq(&next_w, &w));
        trace.push(surrogate_objective(x, r, &next_w, &next_u, zeta_c, epsilon));
        w = next_w;
        let stable = next_u == weights;
        weights = next_u;
        if stable {
            return Ok(CriticFit {
                w,
                weights,
                epsilon,
                iterations: t,
                objective_trace: trace,
                step_norms_sq: steps,
            });
        }
    }
    Err(Error::Convergence {
        iterations: max_iters,
        objective_trace: trace,
    })
}

/// How the critic treats large residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticMode {
    /// Plain ridge over every tuple; no threshold, no reweighting.
    Ridge,
    /// Capped fit with ε from the boxplot rule scaled by `tau`.
    Capped { tau: f64 },
    /// Capped fit with a caller-chosen ε.
    FixedEpsilon(f64),
}

/// Fits the critic to a trajectory.
///
/// For the capped modes ε is fixed once, from the squared residuals of the
/// full ridge fit, and held constant through the reweighting loop.
pub fn fit_critic(
    traj: &Trajectory,
    zeta_c: f64,
    mode: CriticMode,
    max_iters: usize,
) -> Result<CriticFit> {
    let x = traj.design_matrix()?;
    let r = traj.rewards();
    match mode {
        CriticMode::Ridge => {
            let w = ridge_fit(&x, &r, zeta_c)?;
            let weights = vec![true; r.len()];
            let obj = surrogate_objective(&x, &r, &w, &weights, zeta_c, f64::INFINITY);
            Ok(CriticFit {
                w,
                weights,
                epsilon: f64::INFINITY,
                iterations: 1,
                objective_trace: vec![obj],
                step_norms_sq: Vec::new(),
            })
        }
        CriticMode::Capped { tau } => {
            let w0 = ridge_fit(&x, &r, zeta_c)?;
            let eps = compute_epsilon(&squared_residuals(&x, &r, &w0), tau)?;
            capped_fit(&x, &r, zeta_c, eps, None, max_iters)
        }
        CriticMode::FixedEpsilon(eps) => capped_fit(&x, &r, zeta_c, eps, None, max_iters),
    }
}
