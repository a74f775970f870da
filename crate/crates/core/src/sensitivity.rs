//! Ground-truth sensitivities `∂ȳ/∂θᵢ`, by two independent routes, and
//! their L² energy.
//!
//! The forward-sensitivity route co-integrates `[x̄; z̄]` with
//! `ż̄ = Āz̄ + (∂Ā/∂θᵢ)x̄ + (∂B̄/∂θᵢ)u`, `z̄(0) = ∂x̄(0)/∂θᵢ`. The
//! finite-difference route integrates the increments `ȳ(θ ± hεᵢ) − ȳ(θ)`.
//! Both use the same RK4 grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::systems::{
    check_step_size, check_system_shapes, outputs_from_states, rk4_states, AugmentedSystem, InputSignal,
    TimeGrid, Trajectory,
};

/// Samples of `∂ȳ/∂θᵢ` on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrajectory {
    pub param_index: usize,
    pub trajectory: Trajectory,
}

/// `∫₀ᴺ ‖s(t)‖² dt`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SensitivityEnergy(pub f64);

impl SensitivityEnergy {
    pub fn value(self) -> f64 {
        self.0
    }

    /// L² norm, the square root of the energy.
    pub fn norm(self) -> f64 {
        self.0.sqrt()
    }
}

/// `max(1e-6, 1e-5·|θᵢ*|)`.
pub fn default_fd_step(theta_i: f64) -> f64 {
    (1e-5 * theta_i.abs()).max(1e-6)
}

fn check_index(aug: &AugmentedSystem, index: usize) -> Result<()> {
    if index >= aug.spec().len() {
        return Err(Error::ParamIndex {
            index,
            nparams: aug.spec().len(),
        });
    }
    Ok(())
}

/// Nominal augmented simulation: states `x̄(t)` and error output `ȳ(t)`.
pub fn simulate_augmented(
    aug: &AugmentedSystem,
    theta: &[f64],
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<(Trajectory, Trajectory)> {
    let ev = aug.eval(theta)?;
    crate::systems::simulate(&ev.a, &ev.b, &ev.c, &ev.d, &ev.x0, u, grid)
}

/// Forward-sensitivity route (reference).
pub fn sensitivity_ode(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<SensitivityTrajectory> {
    check_index(aug, index)?;
    let ev = aug.eval(theta)?;
    check_system_shapes(&ev.a, &ev.b, &ev.c, &ev.d, &ev.x0, u)?;
    check_step_size(&ev.a, grid)?;
    let times = grid.times();
    if !aug.depends_on(index) {
        let zeros = vec![DVector::zeros(aug.outputs()); times.len()];
        return Ok(SensitivityTrajectory {
            param_index: index,
            trajectory: Trajectory::new(times, zeros)?,
        });
    }
    let dv = aug.partials(index, theta)?;
    let n = aug.states();
    let k = aug.inputs();

    let mut big_a = DMatrix::zeros(2 * n, 2 * n);
    big_a.view_mut((0, 0), (n, n)).copy_from(&ev.a);
    big_a.view_mut((n, n), (n, n)).copy_from(&ev.a);
    big_a.view_mut((n, 0), (n, n)).copy_from(&dv.a);
    let mut big_b = DMatrix::zeros(2 * n, k);
    big_b.view_mut((0, 0), (n, k)).copy_from(&ev.b);
    big_b.view_mut((n, 0), (n, k)).copy_from(&dv.b);
    let mut big_x0 = DVector::zeros(2 * n);
    big_x0.rows_mut(0, n).copy_from(&ev.x0);
    big_x0.rows_mut(n, n).copy_from(&dv.x0);
    // s = (∂C̄)x̄ + C̄z̄ + (∂D̄)u
    let mut big_c = DMatrix::zeros(aug.outputs(), 2 * n);
    big_c.view_mut((0, 0), (aug.outputs(), n)).copy_from(&dv.c);
    big_c.view_mut((0, n), (aug.outputs(), n)).copy_from(&ev.c);

    let states = rk4_states(&big_a, &big_b, &big_x0, u, grid)?;
    let outputs = outputs_from_states(&states, &big_c, &dv.d, u, grid);
    Ok(SensitivityTrajectory {
        param_index: index,
        trajectory: Trajectory::new(times, outputs)?,
    })
}

/// Central finite difference `(ȳ(θ+hεᵢ) − ȳ(θ−hεᵢ)) / 2h`.
///
/// Each one-sided difference `ȳ(θ±hεᵢ) − ȳ(θ)` is integrated directly as the
/// state of the increment system
/// `δẋ = Ā(θ±h)δx + ΔĀ·x̄ + ΔB̄·u`, `δȳ = C̄(θ±h)δx + ΔC̄·x̄ + ΔD̄·u`
/// alongside the nominal state. With the same RK4 grid this is exactly the
/// difference of the two discrete trajectories, but without subtracting
/// nearly equal outputs.
pub fn sensitivity_fd(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    h: f64,
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<SensitivityTrajectory> {
    check_index(aug, index)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", format!("finite-difference step must be positive, got {h}")));
    }
    let ev = aug.eval(theta)?;
    check_system_shapes(&ev.a, &ev.b, &ev.c, &ev.d, &ev.x0, u)?;
    check_step_size(&ev.a, grid)?;
    let n = aug.states();
    let (k, q) = (aug.inputs(), aug.outputs());

    let one_sided = |step: f64| -> Result<Vec<DVector<f64>>> {
        let da = aug.abar().increment(index, theta, step)?;
        let db = aug.bbar().increment(index, theta, step)?;
        let dc = aug.cbar().increment(index, theta, step)?;
        let dd = aug.dbar().increment(index, theta, step)?;
        let dx0 = aug.xbar0().increment(index, theta, step)?;
        let mut big_a = DMatrix::zeros(2 * n, 2 * n);
        big_a.view_mut((0, 0), (n, n)).copy_from(&ev.a);
        big_a.view_mut((n, 0), (n, n)).copy_from(&da);
        big_a.view_mut((n, n), (n, n)).copy_from(&(&ev.a + &da));
        let mut big_b = DMatrix::zeros(2 * n, k);
        big_b.view_mut((0, 0), (n, k)).copy_from(&ev.b);
        big_b.view_mut((n, 0), (n, k)).copy_from(&db);
        let mut big_x0 = DVector::zeros(2 * n);
        big_x0.rows_mut(0, n).copy_from(&ev.x0);
        big_x0.rows_mut(n, n).copy_from(&dx0);
        let mut big_c = DMatrix::zeros(q, 2 * n);
        big_c.view_mut((0, 0), (q, n)).copy_from(&dc);
        big_c.view_mut((0, n), (q, n)).copy_from(&(&ev.c + &dc));
        let states = rk4_states(&big_a, &big_b, &big_x0, u, grid)?;
        Ok(outputs_from_states(&states, &big_c, &dd, u, grid))
    };
    let plus = one_sided(h)?;
    let minus = one_sided(-h)?;
    let values = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    Ok(SensitivityTrajectory {
        param_index: index,
        trajectory: Trajectory::new(grid.times(), values)?,
    })
}

/// `∫₀ᴺ ‖s(t)‖² dt` by composite Simpson.
pub fn l2_energy(s: &SensitivityTrajectory, horizon: f64) -> Result<SensitivityEnergy> {
    squared_l2(&s.trajectory, horizon).map(SensitivityEnergy)
}

/// Composite Simpson of `‖v(t)‖²` over `[0, N]`; handles non-uniform
/// spacing and an odd number of intervals. The grid must start at 0 and
/// reach `N`; a sample exactly at `N` is interpolated if needed.
pub fn squared_l2(traj: &Trajectory, horizon: f64) -> Result<f64> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("N", format!("horizon must be positive, got {horizon}")));
    }
    let times = traj.times();
    if times.is_empty() || times[0].abs() > 1e-12 {
        return Err(Error::invalid("grid", "trajectory must start at t = 0"));
    }
    let end = *times.last().unwrap();
    let slack = 1e-9 * horizon;
    if end < horizon - slack {
        return Err(Error::invalid(
            "grid",
            format!("trajectory ends at {end} before the horizon {horizon}"),
        ));
    }
    let mut xs = Vec::new();
    let mut fs = Vec::new();
    for (k, (&t, v)) in times.iter().zip(traj.values()).enumerate() {
        if t <= horizon + slack {
            xs.push(t);
            fs.push(v.norm_squared());
        } else {
            let (t0, v0) = (times[k - 1], &traj.values()[k - 1]);
            if horizon - t0 > slack {
                let w = (horizon - t0) / (t - t0);
                let vi = v0 * (1.0 - w) + v * w;
                xs.push(horizon);
                fs.push(vi.norm_squared());
            }
            break;
        }
    }
    Ok(simpson(&xs, &fs))
}

/// Composite Simpson on an arbitrary increasing grid.
pub(crate) fn simpson(xs: &[f64], fs: &[f64]) -> f64 {
    let n = xs.len().saturating_sub(1);
    match n {
        0 => return 0.0,
        1 => return 0.5 * (xs[1] - xs[0]) * (fs[0] + fs[1]),
        _ => {}
    }
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let pairs = n / 2;
    let mut acc = 0.0;
    for j in 0..pairs {
        let (h0, h1) = (h[2 * j], h[2 * j + 1]);
        let (f0, f1, f2) = (fs[2 * j], fs[2 * j + 1], fs[2 * j + 2]);
        acc += (h0 + h1) / 6.0
            * ((2.0 - h1 / h0) * f0 + (h0 + h1).powi(2) / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
    }
    if n % 2 == 1 {
        let (h0, h1) = (h[n - 2], h[n - 1]);
        let alpha = (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        let beta = (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        let eta = h1.powi(3) / (6.0 * h0 * (h0 + h1));
        acc += alpha * fs[n] + beta * fs[n - 1] - eta * fs[n - 2];
    }
    acc
}
