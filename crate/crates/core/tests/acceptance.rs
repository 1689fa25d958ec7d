//! Acceptance suite. Each test prints one `[PASS]`/`[FAIL]` line for its
//! criterion before asserting, so `cargo test --test acceptance -- --nocapture`
//! yields a readable report.

use std::time::{Duration, Instant};

use robust_accb::actor::{actor_gradient, actor_objective, Policy};
use robust_accb::critic::{
    capped_fit, compute_epsilon, critic_objective, ridge_fit, squared_residuals,
    surrogate_objective, DEFAULT_MAX_ITERS,
};
use robust_accb::envs::{chainwalk_step, heartsteps_step, ChainWalkParams, HeartstepsParams};
use robust_accb::experiment::{
    run_s2, run_s3, run_s4, ExperimentConfig, ExperimentId, Method, ResultRow,
};
use robust_accb::features::{Action, EnvKind, State};
use robust_accb::numerics::{dot, Matrix, RngStream};
use robust_accb::trajectory::{Trajectory, Tuple};

const ZETA_C: f64 = 1e-3;

fn report(id: u32, name: &str, pass: bool, detail: impl AsRef<str>) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] AC{id:02} {name}: {}", detail.as_ref());
    assert!(
        pass,
        "acceptance criterion {id} ({name}) failed: {}",
        detail.as_ref()
    );
}

struct Instance {
    x: Matrix,
    r: Vec<f64>,
}

/// Gaussian design, linear signal with unit noise, a fraction of rewards
/// pushed up by 15..65.
fn instance(seed: u64, m: usize, u: usize, spike_frac: f64) -> Instance {
    let mut rng = RngStream::new(seed, 0);
    let x = Matrix::new(
        m,
        u,
        (0..m * u).map(|_| rng.gauss(0.0, 1.0).unwrap()).collect(),
    )
    .unwrap();
    let w: Vec<f64> = (0..u).map(|_| rng.gauss(0.0, 9.0).unwrap()).collect();
    let mut r: Vec<f64> = (0..m)
        .map(|i| dot(x.row(i), &w) + rng.gauss(0.0, 1.0).unwrap())
        .collect();
    let spikes = (spike_frac * m as f64).round() as usize;
    for i in rng.distinct_indices(m, spikes) {
        r[i] += 15.0 + 50.0 * rng.uniform();
    }
    Instance { x, r }
}

fn critic_instances() -> Vec<Instance> {
    let mut pick = RngStream::new(2024, 99);
    (0..200)
        .map(|k| {
            let m = 10 + pick.below(491);
            let u = 4 + pick.below(9);
            let frac = 0.2 * pick.uniform();
            instance(1000 + k, m, u, frac)
        })
        .collect()
}

fn boxplot_fit(inst: &Instance) -> robust_accb::critic::CriticFit {
    let w0 = ridge_fit(&inst.x, &inst.r, ZETA_C).unwrap();
    let eps = compute_epsilon(&squared_residuals(&inst.x, &inst.r, &w0), 1.0).unwrap();
    capped_fit(&inst.x, &inst.r, ZETA_C, eps, None, DEFAULT_MAX_ITERS).unwrap()
}

#[test]
fn ac01_sufficient_decrease() {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    let mut checked = 0;
    for inst in critic_instances() {
        let fit = boxplot_fit(&inst);
        for (t, step) in fit.step_norms_sq.iter().enumerate() {
            let margin = fit.objective_trace[t] - fit.objective_trace[t + 1] - ZETA_C * step;
            worst = worst.min(margin);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        "per-iteration sufficient decrease",
        worst >= -1e-9 && elapsed < Duration::from_secs(10),
        format!("{checked} iterations, worst margin {worst:.3e} (>= -1e-9), {elapsed:.2?} (< 10s)"),
    );
}

#[test]
fn ac02_finite_termination() {
    let mut max_iters = 0;
    let mut inconsistent = 0;
    for inst in critic_instances() {
        let fit = boxplot_fit(&inst);
        max_iters = max_iters.max(fit.iterations);
        let recomputed: Vec<bool> = squared_residuals(&inst.x, &inst.r, &fit.w)
            .into_iter()
            .map(|e| e < fit.epsilon)
            .collect();
        if recomputed != fit.weights {
            inconsistent += 1;
        }
    }
    report(
        2,
        "finite termination with fixed point",
        max_iters <= 50 && inconsistent == 0,
        format!("max iterations {max_iters} (<= 50), {inconsistent} inconsistent fixed points"),
    );
}

#[test]
fn ac03_infinite_threshold_is_ridge() {
    let mut worst: f64 = 0.0;
    let mut pick = RngStream::new(7, 7);
    for k in 0..50 {
        let m = 10 + pick.below(300);
        let u = 4 + pick.below(9);
        let inst = instance(5000 + k, m, u, 0.1);
        let fit = capped_fit(&inst.x, &inst.r, ZETA_C, 1e12, None, DEFAULT_MAX_ITERS).unwrap();
        let ridge = ridge_fit(&inst.x, &inst.r, ZETA_C).unwrap();
        let diff: f64 = fit
            .w
            .iter()
            .zip(&ridge)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = dot(&ridge, &ridge).sqrt().max(1e-300);
        worst = worst.max(diff / scale);
    }
    report(
        3,
        "epsilon -> infinity reduces to ridge",
        worst <= 1e-8,
        format!("worst relative gap {worst:.3e} (<= 1e-8)"),
    );
}

/// Ridge on the rows in `keep`, by building the sub-matrix; no weights involved.
fn subset_ridge(inst: &Instance, keep: &[usize]) -> Vec<f64> {
    if keep.is_empty() {
        return vec![0.0; inst.x.cols()];
    }
    let rows: Vec<Vec<f64>> = keep.iter().map(|&i| inst.x.row(i).to_vec()).collect();
    let r: Vec<f64> = keep.iter().map(|&i| inst.r[i]).collect();
    ridge_fit(&Matrix::from_rows(&rows).unwrap(), &r, ZETA_C).unwrap()
}

#[test]
fn ac04_subset_enumeration_oracle() {
    let mut pick = RngStream::new(44, 1);
    let mut exact = 0;
    let mut violations = 0;
    let total = 50;
    for k in 0..total {
        let m = 6 + pick.below(7);
        let u = 1 + pick.below(3);
        let frac = 0.2 * pick.uniform();
        let inst = instance(9000 + k, m, u, frac);
        let w0 = ridge_fit(&inst.x, &inst.r, ZETA_C).unwrap();
        let eps = compute_epsilon(&squared_residuals(&inst.x, &inst.r, &w0), 1.0).unwrap();
        let fit = capped_fit(&inst.x, &inst.r, ZETA_C, eps, None, DEFAULT_MAX_ITERS).unwrap();
        let got = critic_objective(&inst.x, &inst.r, &fit.w, ZETA_C, eps).unwrap();
        let all_ones = critic_objective(&inst.x, &inst.r, &w0, ZETA_C, eps).unwrap();

        let mut global = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            let keep: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            let w = subset_ridge(&inst, &keep);
            global = global.min(critic_objective(&inst.x, &inst.r, &w, ZETA_C, eps).unwrap());
        }
        let tol = 1e-9 * global.abs().max(1.0);
        if got < global - tol || got > all_ones + tol {
            violations += 1;
        }
        if (got - global).abs() <= tol {
            exact += 1;
        }
    }
    let rate = exact as f64 / total as f64;
    report(
        4,
        "subset-enumeration oracle",
        violations == 0 && rate >= 0.8,
        format!("{violations} bound violations, global optimum reached in {exact}/{total} ({:.0}% >= 80%)", rate * 100.0),
    );
}

#[test]
fn ac05_actor_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = RngStream::new(31, 5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = 5 + rng.below(60);
        let tuples: Vec<Tuple> = (0..m)
            .map(|_| Tuple {
                state: State::HeartSteps([
                    rng.gauss(0.0, 1.0).unwrap(),
                    rng.gauss(0.0, 1.0).unwrap(),
                    rng.gauss(0.0, 1.0).unwrap(),
                ]),
                action: if rng.uniform() < 0.5 {
                    Action::One
                } else {
                    Action::Zero
                },
                reward: rng.gauss(0.0, 1.0).unwrap(),
            })
            .collect();
        let traj = Trajectory::new(EnvKind::HeartSteps, tuples).unwrap();
        let weights: Vec<bool> = (0..m).map(|_| rng.uniform() < 0.85).collect();
        let w: Vec<f64> = (0..8).map(|_| rng.gauss(0.0, 25.0).unwrap()).collect();
        let theta: Vec<f64> = (0..4).map(|_| rng.gauss(0.0, 1.0).unwrap()).collect();
        let zeta = 10f64.powf(-3.0 + 3.0 * rng.uniform());

        let policy = Policy::new(EnvKind::HeartSteps, theta.clone()).unwrap();
        let analytic = actor_gradient(&traj, &weights, &w, &policy, zeta).unwrap();
        let h = 1e-5;
        let fd: Vec<f64> = (0..4)
            .map(|k| {
                let mut plus = theta.clone();
                let mut minus = theta.clone();
                plus[k] += h;
                minus[k] -= h;
                let f = |t: Vec<f64>| {
                    actor_objective(
                        &traj,
                        &weights,
                        &w,
                        &Policy::new(EnvKind::HeartSteps, t).unwrap(),
                        zeta,
                    )
                    .unwrap()
                };
                (f(plus) - f(minus)) / (2.0 * h)
            })
            .collect();
        let err: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = dot(&analytic, &analytic).sqrt().max(1.0);
        worst = worst.max(err / scale);
    }
    let elapsed = start.elapsed();
    report(
        5,
        "actor gradient vs central differences",
        worst < 1e-5 && elapsed < Duration::from_secs(5),
        format!("worst relative error {worst:.3e} (< 1e-5), {elapsed:.2?} (< 5s)"),
    );
}

fn desk_config(experiment: ExperimentId) -> ExperimentConfig {
    ExperimentConfig {
        users: 10,
        m: 210,
        horizon: 1500,
        burn_in: 500,
        seeds: (1..=5).collect(),
        methods: vec![Method::Accb, Method::RoAccb],
        ..ExperimentConfig::new(experiment, EnvKind::HeartSteps)
    }
}

/// Mean and standard error over seeds of the rows matching `select`.
fn summary(rows: &[ResultRow], select: impl Fn(&ResultRow) -> bool) -> (f64, f64) {
    let v: Vec<f64> = rows.iter().filter(|r| select(r)).map(|r| r.elrar).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn rel_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn ac06_outlier_ratio_trend() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        psi: vec![0.0, 0.03, 0.06, 0.09],
        nu: vec![5.0],
        ..desk_config(ExperimentId::S2)
    };
    let rows = run_s2(&cfg).unwrap();
    let at = |m: Method, psi: f64| summary(&rows, |r| r.method == m && r.psi == psi);

    let (ro0, _) = at(Method::RoAccb, 0.0);
    let (ac0, _) = at(Method::Accb, 0.0);
    let (ro9, ro9_se) = at(Method::RoAccb, 0.09);
    let (ac9, ac9_se) = at(Method::Accb, 0.09);
    let pooled = (ro9_se.powi(2) + ac9_se.powi(2)).sqrt();
    let spread = |m| {
        let means: Vec<f64> = cfg.psi.iter().map(|&p| at(m, p).0).collect();
        means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - means.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (ro_spread, ac_spread) = (spread(Method::RoAccb), spread(Method::Accb));

    let a = rel_gap(ro0, ac0) <= 0.02;
    let b = ro9 - ac9 > 2.0 * pooled;
    let c = ro_spread <= ac_spread;
    let elapsed = start.elapsed();
    report(
        6,
        "outlier-ratio sweep trend",
        a && b && c && elapsed < Duration::from_secs(600),
        format!(
            "(a) psi=0 gap {:.2}% (<= 2%) {}; (b) psi=9% ro-accb {ro9:.1} vs accb {ac9:.1}, diff {:.1} vs 2*SE {:.1} {}; \
             (c) spread ro-accb {ro_spread:.1} vs accb {ac_spread:.1} {}; {elapsed:.2?}",
            100.0 * rel_gap(ro0, ac0),
            ok(a),
            ro9 - ac9,
            2.0 * pooled,
            ok(b),
            ok(c)
        ),
    );
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "NOT MET"
    }
}

#[test]
fn ac07_outlier_strength_trend() {
    let cfg = ExperimentConfig {
        psi: vec![0.04],
        nu: vec![0.0, 5.0, 10.0],
        ..desk_config(ExperimentId::S3)
    };
    let rows = run_s3(&cfg).unwrap();
    let at = |m: Method, nu: f64| summary(&rows, |r| r.method == m && r.nu == nu);

    let (ro0, _) = at(Method::RoAccb, 0.0);
    let (ro10, _) = at(Method::RoAccb, 10.0);
    let (ac0, ac0_se) = at(Method::Accb, 0.0);
    let (ac10, ac10_se) = at(Method::Accb, 10.0);
    let noise = 2.0 * (ac0_se.powi(2) + ac10_se.powi(2)).sqrt();

    let stable = rel_gap(ro10, ro0) <= 0.05;
    let degrades = ac0 - ac10 > noise;
    report(
        7,
        "outlier-strength sweep trend",
        stable && degrades,
        format!(
            "ro-accb nu=10 {ro10:.1} vs nu=0 {ro0:.1} ({:.2}% <= 5%) {}; accb nu=0 {ac0:.1} -> nu=10 {ac10:.1}, \
             drop {:.1} vs 2*SE {noise:.1} {}",
            100.0 * rel_gap(ro10, ro0),
            ok(stable),
            ac0 - ac10,
            ok(degrades)
        ),
    );
}

#[test]
fn ac08_threshold_scale_reduction() {
    let cfg = ExperimentConfig {
        tau: vec![0.5, 1.0, 2.0, 8.0],
        ..desk_config(ExperimentId::S4)
    };
    let rows = run_s4(&cfg).unwrap();
    let accb_constant = cfg.seeds.iter().all(|&seed| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == Method::Accb && r.seed == seed)
            .map(|r| r.elrar)
            .collect();
        v.windows(2).all(|p| p[0] == p[1])
    });
    let (ac, _) = summary(&rows, |r| r.method == Method::Accb && r.tau == 8.0);
    let (ro8, _) = summary(&rows, |r| r.method == Method::RoAccb && r.tau == 8.0);
    let close = rel_gap(ro8, ac) <= 0.02;
    report(
        8,
        "threshold-scale reduction",
        accb_constant && close,
        format!(
            "accb constant in tau: {}; ro-accb tau=8 {ro8:.1} vs accb {ac:.1} ({:.2}% <= 2%) {}",
            ok(accb_constant),
            100.0 * rel_gap(ro8, ac),
            ok(close)
        ),
    );
}

#[test]
fn ac09_simulator_exactness() {
    let p = HeartstepsParams::noiseless();
    let mut rng = RngStream::new(1, 1);
    let zero = State::HeartSteps([0.0; 3]);
    let (_, r00) = heartsteps_step(&p, &zero, Action::Zero, Action::Zero, &mut rng).unwrap();
    let (_, r01) = heartsteps_step(&p, &zero, Action::Zero, Action::One, &mut rng).unwrap();
    let (s, _) = heartsteps_step(
        &p,
        &State::HeartSteps([1.0; 3]),
        Action::One,
        Action::Zero,
        &mut rng,
    )
    .unwrap();
    let State::HeartSteps(s) = s else {
        unreachable!()
    };
    // 0.4·1, 0.3·1 + 0.4, 0.7·1 + 0.05·1 + 0.6
    let expected = [0.4, 0.7, 1.35];
    let state_err = s
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let hs_ok = r00 == 1500.0 && r01 == 1625.0 && state_err <= 4.0 * f64::EPSILON;

    let chain = ChainWalkParams::default();
    let mut rng = RngStream::new(2, 2);
    let n = 100_000;
    let mut intended = 0;
    for k in 0..n {
        let a = if k % 2 == 0 {
            Action::One
        } else {
            Action::Zero
        };
        let (next, _) = chainwalk_step(&chain, &State::ChainWalk(1), a, &mut rng).unwrap();
        let want = if a == Action::One { 2 } else { 0 };
        if next == State::ChainWalk(want) {
            intended += 1;
        }
    }
    let freq = intended as f64 / n as f64;
    let chain_ok = (freq - 0.9).abs() <= 0.01 && ((1.0 - freq) - 0.1).abs() <= 0.01;
    report(
        9,
        "simulator exactness",
        hs_ok && chain_ok,
        format!(
            "R(0,0)={r00}, R(0,1)={r01}, state error {state_err:.1e}; chain intended {freq:.4} / opposite {:.4}",
            1.0 - freq
        ),
    );
}

#[test]
fn ac10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("s1.cfg");
    std::fs::write(
        &config,
        "users = 4\nseeds = 1,2\nhorizon = 400\nburn_in = 100\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_robust-accb"))
            .args(["run", "s1", "--dataset", "heartsteps", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let rows = String::from_utf8_lossy(&a).lines().count() - 1;
    report(
        10,
        "byte-identical reruns",
        a == b && rows == 3 * 2,
        format!("{} bytes, {rows} rows, identical: {}", a.len(), a == b),
    );
}

#[test]
fn step_norms_are_summable() {
    // Σ ‖Δw‖² ≤ (2/ζ) f(w⁽⁰⁾, u⁽⁰⁾) on every acceptance instance
    for inst in critic_instances().into_iter().take(50) {
        let fit = boxplot_fit(&inst);
        let total: f64 = fit.step_norms_sq.iter().sum();
        let f0 = surrogate_objective(
            &inst.x,
            &inst.r,
            &vec![0.0; inst.x.cols()],
            &vec![true; inst.r.len()],
            ZETA_C,
            fit.epsilon,
        );
        assert!(total <= 2.0 / ZETA_C * f0);
    }
}
