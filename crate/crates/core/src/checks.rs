//! Property suites run by `robest check`: seeded populations checked for
//! envelope, exactness and dominance properties.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::{gramian_baseline_bound, theorem1_bound, theorem2_bound};
use crate::error::Result;
use crate::linalg::{expm, expm_param_derivative, log_norm, lyap_observability, norm2};
use crate::metric::{robustness_distance, robustness_metric, MetricTerm};
use crate::run::{analyze_scenario, AnalysisOptions, ORACLE_TOL};
use crate::scenarios::{preset_scenarios, random_initial_state, random_stable_augmented, Scenario};
use crate::sensitivity::{l2_energy, sensitivity_ode, simulate_augmented};
use crate::systems::{bu_sup_norm, SupNorm, TimeGrid};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, failures: usize, total: usize, extra: String) -> CheckOutcome {
    CheckOutcome {
        name,
        passed: failures == 0,
        detail: format!("{}/{} passed{}", total - failures, total, extra),
    }
}

pub fn exponential_envelopes(count: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for k in 0..count {
        let n = 2 + k % 4;
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let mu = log_norm(&a)?.mu;
        for i in 0..n {
            a[(i, i)] -= mu + 0.5;
        }
        let e = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let e = &e / norm2(&e);
        let ok = (1..=100).map(|j| j as f64 * 0.1).all(|t| {
            let env = (-0.5 * t).exp() * (1.0 + 1e-9);
            let ea = expm(&(&a * t)).map(|m| norm2(&m));
            let de = expm_param_derivative(&a, &e, t).map(|m| norm2(&m));
            matches!((ea, de), (Ok(x), Ok(y)) if x <= env && y <= t * env)
        });
        failures += usize::from(!ok);
    }
    Ok(outcome("exponential envelopes", failures, count, String::new()))
}

pub fn initial_state_exactness(count: usize, seed: u64) -> Result<CheckOutcome> {
    let mut failures = 0;
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let s = random_initial_state(2 + k % 5, seed.wrapping_add(k as u64), 0.5)?;
        let aug = s.augmented()?;
        let theta = s.theta_star();
        let ev = aug.eval(theta)?;
        let grid = TimeGrid::default_for(&ev.a, s.horizon)?;
        let gt = l2_energy(&sensitivity_ode(&aug, 0, theta, &s.input, &grid)?, s.horizon)?.value();
        let p = lyap_observability(&ev.a, &(ev.c.transpose() * &ev.c))?.p;
        let dx0 = aug.xbar0().partial(0, theta)?;
        let exact = (dx0.transpose() * &p * &dx0)[(0, 0)];
        let rel = (gt - exact).abs() / exact;
        worst = worst.max(rel);
        let bound = theorem2_bound(&aug, 0, theta)?;
        failures += usize::from(rel > 1e-5 || bound < gt);
    }
    Ok(outcome(
        "initial-state bound exactness and dominance",
        failures,
        count,
        format!(", worst relative gap {worst:.2e}"),
    ))
}

/// Dynamics-bound and baseline dominance plus the count where the dynamics bound is tighter.
pub fn dynamics_dominance(count: usize, seed: u64) -> Result<(CheckOutcome, CheckOutcome, usize)> {
    let (mut f1, mut fb, mut tighter) = (0, 0, 0);
    for k in 0..count {
        let s: Scenario = random_stable_augmented(2 + k % 4, seed.wrapping_add(k as u64), 0.5)?;
        let aug = s.augmented()?;
        let theta = s.theta_star();
        let ev = aug.eval(theta)?;
        let grid = TimeGrid::default_for(&ev.a, s.horizon)?;
        let (states, _) = simulate_augmented(&aug, theta, &s.input, &grid)?;
        let gt = l2_energy(&sensitivity_ode(&aug, 0, theta, &s.input, &grid)?, s.horizon)?.value();
        let bu = bu_sup_norm(&aug, &s.input, theta, s.horizon, SupNorm::Euclidean)?;
        let t1 = theorem1_bound(&aug, 0, theta, bu, s.horizon)?;
        let bl = gramian_baseline_bound(&aug, 0, theta, &states, s.horizon)?;
        f1 += usize::from(t1 < gt);
        fb += usize::from(bl < gt);
        tighter += usize::from(t1 <= bl);
    }
    Ok((
        outcome("dynamics bound dominance", f1, count, String::new()),
        outcome("Gramian baseline dominance", fb, count, String::new()),
        tighter,
    ))
}

pub fn oracle_agreement() -> Result<CheckOutcome> {
    let scenarios = preset_scenarios();
    let mut total = 0;
    let mut failures = 0;
    for s in &scenarios {
        let r = analyze_scenario(s, &AnalysisOptions::default())?;
        for row in &r.rows {
            total += 1;
            let tol = ORACLE_TOL * row.gt_energy_ode.max(1e-12);
            failures += usize::from((row.gt_energy_ode - row.gt_energy_fd).abs() > tol);
        }
    }
    Ok(outcome("ground-truth route agreement", failures, total, String::new()))
}

pub fn metric_contract(count: usize, seed: u64) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    for _ in 0..count {
        let terms: Vec<MetricTerm> = (0..rng.gen_range(1..5))
            .map(|_| MetricTerm {
                theta_star: rng.gen_range(0.01..10.0),
                sens_norm: rng.gen_range(0.0..10.0),
                err_norm: rng.gen_range(0.01..10.0),
            })
            .collect();
        let r = robustness_metric(robustness_distance(&terms)?)?;
        let mut bumped = terms.clone();
        bumped[0].sens_norm += rng.gen_range(0.01..1.0);
        let r2 = robustness_metric(robustness_distance(&bumped)?)?;
        failures += usize::from(!(r > 0.0 && r <= 1.0 && r2 < r));
    }
    Ok(outcome("metric range and monotonicity", failures, count, String::new()))
}

/// Every suite with populations of `count`.
pub fn run_checks(count: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = vec![
        exponential_envelopes(count, seed)?,
        initial_state_exactness(count, seed)?,
    ];
    let (t1, bl, tighter) = dynamics_dominance(count, seed)?;
    out.push(t1);
    out.push(bl);
    out.push(CheckOutcome {
        name: "dynamics bound tighter than baseline (informational)",
        passed: true,
        detail: format!("{tighter}/{count}"),
    });
    out.push(oracle_agreement()?);
    out.push(metric_contract(count * 10, seed)?);
    Ok(out)
}
