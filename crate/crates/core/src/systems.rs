//! Parametrized LTI systems, the truth/estimate augmentation whose output is
//! the estimation error, input signals and fixed-step RK4 simulation.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::param::{ParamMatrix, ParamVector, ParamVectorSpec};

/// `ẋ = A(θ)x + B(θ)u`, `y = C(θ)x + D(θ)u`, `x(0) = x0(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: ParamMatrix,
    b: ParamMatrix,
    c: ParamMatrix,
    d: ParamMatrix,
    x0: ParamVector,
    spec: ParamVectorSpec,
}

impl StateSpace {
    pub fn new(
        a: ParamMatrix,
        b: ParamMatrix,
        c: ParamMatrix,
        d: ParamMatrix,
        x0: ParamVector,
        spec: ParamVectorSpec,
    ) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::dims("A (square)", n, a.cols()));
        }
        if b.rows() != n {
            return Err(Error::dims("B rows", n, b.rows()));
        }
        if c.cols() != n {
            return Err(Error::dims("C cols", n, c.cols()));
        }
        if d.shape() != (c.rows(), b.cols()) {
            return Err(Error::dims(
                "D shape",
                format!("{}x{}", c.rows(), b.cols()),
                format!("{}x{}", d.rows(), d.cols()),
            ));
        }
        if x0.len() != n {
            return Err(Error::dims("x0 length", n, x0.len()));
        }
        let p = spec.len();
        for (context, np) in [
            ("A parameter count", a.nparams()),
            ("B parameter count", b.nparams()),
            ("C parameter count", c.nparams()),
            ("D parameter count", d.nparams()),
            ("x0 parameter count", x0.as_matrix().nparams()),
        ] {
            if np != p {
                return Err(Error::dims(context, p, np));
            }
        }
        Ok(Self { a, b, c, d, x0, spec })
    }

    /// Parameter-free system with `D = 0`.
    pub fn constant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        x0: DVector<f64>,
        spec: ParamVectorSpec,
    ) -> Result<Self> {
        let p = spec.len();
        let d = ParamMatrix::zeros(c.nrows(), b.ncols(), p);
        Self::new(
            ParamMatrix::constant(a, p),
            ParamMatrix::constant(b, p),
            ParamMatrix::constant(c, p),
            d,
            ParamVector::constant(x0, p),
            spec,
        )
    }

    pub fn a(&self) -> &ParamMatrix {
        &self.a
    }
    pub fn b(&self) -> &ParamMatrix {
        &self.b
    }
    pub fn c(&self) -> &ParamMatrix {
        &self.c
    }
    pub fn d(&self) -> &ParamMatrix {
        &self.d
    }
    pub fn x0(&self) -> &ParamVector {
        &self.x0
    }
    pub fn spec(&self) -> &ParamVectorSpec {
        &self.spec
    }
    pub fn states(&self) -> usize {
        self.a.rows()
    }
    pub fn inputs(&self) -> usize {
        self.b.cols()
    }
    pub fn outputs(&self) -> usize {
        self.c.rows()
    }
}

/// Numeric snapshot of an augmented system (or of its θᵢ-derivatives).
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluated {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub x0: DVector<f64>,
}

/// Block composition of truth and estimate; its output is `ȳ = y − ỹ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    abar: ParamMatrix,
    bbar: ParamMatrix,
    cbar: ParamMatrix,
    dbar: ParamMatrix,
    xbar0: ParamVector,
    spec: ParamVectorSpec,
}

/// `Ā = diag(A, Ã)`, `B̄ = [B; B̃]`, `C̄ = [C, −C̃]`, `D̄ = D − D̃`, `x̄(0) = [x(0); x̃(0)]`.
pub fn build_augmented(truth: &StateSpace, estimate: &StateSpace) -> Result<AugmentedSystem> {
    if truth.spec != estimate.spec {
        return Err(Error::invalid("estimate", "truth and estimate must share the parameter spec"));
    }
    for (context, t, e) in [
        ("truth vs estimate state dimension", truth.states(), estimate.states()),
        ("truth vs estimate input dimension", truth.inputs(), estimate.inputs()),
        ("truth vs estimate output dimension", truth.outputs(), estimate.outputs()),
    ] {
        if t != e {
            return Err(Error::dims(context, t, e));
        }
    }
    Ok(AugmentedSystem {
        abar: truth.a.block_diag(&estimate.a)?,
        bbar: truth.b.vstack(&estimate.b)?,
        cbar: truth.c.hstack(&estimate.c.negate())?,
        dbar: truth.d.sub(&estimate.d)?,
        xbar0: truth.x0.vstack(&estimate.x0)?,
        spec: truth.spec.clone(),
    })
}

impl AugmentedSystem {
    pub fn abar(&self) -> &ParamMatrix {
        &self.abar
    }
    pub fn bbar(&self) -> &ParamMatrix {
        &self.bbar
    }
    pub fn cbar(&self) -> &ParamMatrix {
        &self.cbar
    }
    pub fn dbar(&self) -> &ParamMatrix {
        &self.dbar
    }
    pub fn xbar0(&self) -> &ParamVector {
        &self.xbar0
    }
    pub fn spec(&self) -> &ParamVectorSpec {
        &self.spec
    }
    pub fn states(&self) -> usize {
        self.abar.rows()
    }
    pub fn inputs(&self) -> usize {
        self.bbar.cols()
    }
    pub fn outputs(&self) -> usize {
        self.cbar.rows()
    }

    pub fn eval(&self, theta: &[f64]) -> Result<Evaluated> {
        self.spec.check_theta(theta)?;
        Ok(Evaluated {
            a: self.abar.eval(theta)?,
            b: self.bbar.eval(theta)?,
            c: self.cbar.eval(theta)?,
            d: self.dbar.eval(theta)?,
            x0: self.xbar0.eval(theta)?,
        })
    }

    /// All matrices differentiated with respect to θᵢ at θ.
    pub fn partials(&self, index: usize, theta: &[f64]) -> Result<Evaluated> {
        self.spec.check_theta(theta)?;
        Ok(Evaluated {
            a: self.abar.partial(index, theta)?,
            b: self.bbar.partial(index, theta)?,
            c: self.cbar.partial(index, theta)?,
            d: self.dbar.partial(index, theta)?,
            x0: self.xbar0.partial(index, theta)?,
        })
    }

    pub fn dynamics_depend_on(&self, index: usize) -> bool {
        self.abar.depends_on(index)
    }

    pub fn dynamics_parameter_free(&self) -> bool {
        self.abar.is_constant()
    }

    /// True when θᵢ enters through anything other than Ā.
    pub fn io_or_initial_depend_on(&self, index: usize) -> bool {
        self.bbar.depends_on(index)
            || self.cbar.depends_on(index)
            || self.dbar.depends_on(index)
            || self.xbar0.depends_on(index)
    }

    pub fn depends_on(&self, index: usize) -> bool {
        self.dynamics_depend_on(index) || self.io_or_initial_depend_on(index)
    }
}

/// Exogenous input `u(t) ∈ ℝᵏ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    Zero {
        dim: usize,
    },
    Step {
        amplitude: Vec<f64>,
    },
    /// `u(t) = amplitude · sin(frequency·t + phase)`.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `values[j]` holds on `[breakpoints[j], breakpoints[j+1])`; zero before the first breakpoint.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl InputSignal {
    pub fn unit_step(dim: usize) -> Self {
        InputSignal::Step {
            amplitude: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputSignal::Zero { dim } => *dim,
            InputSignal::Step { amplitude } | InputSignal::Sinusoid { amplitude, .. } => amplitude.len(),
            InputSignal::PiecewiseConstant { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            InputSignal::Zero { .. } => Ok(()),
            InputSignal::Step { amplitude } => {
                if finite(amplitude) {
                    Ok(())
                } else {
                    Err(Error::NonFinite("step amplitude"))
                }
            }
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                if finite(amplitude) && frequency.is_finite() && phase.is_finite() {
                    Ok(())
                } else {
                    Err(Error::NonFinite("sinusoid parameters"))
                }
            }
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::invalid(
                        "piecewise_constant",
                        "need one value vector per breakpoint (at least one)",
                    ));
                }
                if !breakpoints.windows(2).all(|w| w[0] < w[1]) || !finite(breakpoints) {
                    return Err(Error::invalid("piecewise_constant", "breakpoints must be finite and strictly increasing"));
                }
                let k = values[0].len();
                if values.iter().any(|v| v.len() != k || !finite(v)) {
                    return Err(Error::invalid("piecewise_constant", "values must be finite vectors of equal length"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            InputSignal::Zero { dim } => DVector::zeros(*dim),
            InputSignal::Step { amplitude } => DVector::from_column_slice(amplitude),
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => DVector::from_column_slice(amplitude) * (frequency * t + phase).sin(),
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                match breakpoints.iter().rposition(|&b| b <= t) {
                    Some(j) => DVector::from_column_slice(&values[j]),
                    None => DVector::zeros(self.dim()),
                }
            }
        }
    }
}

/// Spatial norm used inside `sup_t ‖B̄u(t)‖`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupNorm {
    #[default]
    Euclidean,
    /// Largest absolute component.
    Componentwise,
}

impl SupNorm {
    fn apply(self, v: &DVector<f64>) -> f64 {
        match self {
            SupNorm::Euclidean => v.norm(),
            SupNorm::Componentwise => v.amax(),
        }
    }
}

pub const SUP_GRID_POINTS: usize = 2048;

/// `‖B̄(θ)u‖_∞` over `[0, N]`.
pub fn bu_sup_norm(aug: &AugmentedSystem, u: &InputSignal, theta: &[f64], horizon: f64, kind: SupNorm) -> Result<f64> {
    let bbar = aug.bbar().eval(theta)?;
    bu_sup_norm_matrix(&bbar, u, horizon, kind)
}

/// `sup_{t∈[0,N]} ‖B u(t)‖` for a numeric input matrix. Exact for zero, step
/// and piecewise-constant inputs; sampled on a uniform grid otherwise.
pub fn bu_sup_norm_matrix(b: &DMatrix<f64>, u: &InputSignal, horizon: f64, kind: SupNorm) -> Result<f64> {
    u.validate()?;
    if u.dim() != b.ncols() {
        return Err(Error::dims("input dimension vs B columns", b.ncols(), u.dim()));
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("N", "horizon must be positive"));
    }
    Ok(match u {
        InputSignal::Zero { .. } => 0.0,
        InputSignal::Step { .. } => kind.apply(&(b * u.eval(0.0))),
        InputSignal::PiecewiseConstant { breakpoints, values } => {
            let mut best: f64 = if breakpoints[0] > 0.0 { 0.0 } else { f64::NEG_INFINITY };
            for (j, v) in values.iter().enumerate() {
                let start = breakpoints[j];
                let end = breakpoints.get(j + 1).copied().unwrap_or(f64::INFINITY);
                if start <= horizon && end > 0.0 {
                    best = best.max(kind.apply(&(b * DVector::from_column_slice(v))));
                }
            }
            best.max(0.0)
        }
        InputSignal::Sinusoid { frequency, .. } => {
            let periods = horizon * frequency.abs() / std::f64::consts::TAU;
            let points = SUP_GRID_POINTS.max((periods * 256.0).ceil() as usize);
            (0..=points)
                .map(|k| kind.apply(&(b * u.eval(horizon * k as f64 / points as f64))))
                .fold(0.0, f64::max)
        }
    })
}

/// Uniform time grid `t_k = k·dt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || steps == 0 {
            return Err(Error::invalid("grid", format!("need dt > 0 and steps > 0 (dt = {dt}, steps = {steps})")));
        }
        Ok(Self { dt, steps })
    }

    /// Grid ending exactly at `horizon` with step no larger than `max_dt`.
    pub fn covering(horizon: f64, max_dt: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid("N", format!("horizon must be positive, got {horizon}")));
        }
        if !(max_dt > 0.0) {
            return Err(Error::invalid("dt", format!("step must be positive, got {max_dt}")));
        }
        let steps = (horizon / max_dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Self::new(horizon / steps as f64, steps)
    }

    /// `dt = min(0.05/‖Ā‖₂, N/2000)`.
    pub fn default_for(abar: &DMatrix<f64>, horizon: f64) -> Result<Self> {
        let a_norm = norm2(abar);
        let mut max_dt = horizon / 2000.0;
        if a_norm > 0.0 {
            max_dt = max_dt.min(0.05 / a_norm);
        }
        Self::covering(horizon, max_dt)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn end(&self) -> f64 {
        self.dt * self.steps as f64
    }
    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }
}

/// Sampled vector signal on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::dims("trajectory samples", times.len(), values.len()));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("times", "must be strictly increasing"));
        }
        if values.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::NonFinite("trajectory values"));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }
    pub fn last(&self) -> Option<&DVector<f64>> {
        self.values.last()
    }

    /// Applies a linear map sample-wise.
    pub fn map_linear(&self, m: &DMatrix<f64>) -> Result<Trajectory> {
        if m.ncols() != self.dim() {
            return Err(Error::dims("map_linear", self.dim(), m.ncols()));
        }
        Ok(Trajectory {
            times: self.times.clone(),
            values: self.values.iter().map(|v| m * v).collect(),
        })
    }

    /// CSV with header `t,<prefix>1,...`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W, prefix: &str) -> Result<()> {
        write!(w, "t")?;
        for j in 1..=self.dim() {
            write!(w, ",{prefix}{j}")?;
        }
        writeln!(w)?;
        for (t, v) in self.times.iter().zip(&self.values) {
            write!(w, "{}", fmt_f64(*t))?;
            for x in v.iter() {
                write!(w, ",{}", fmt_f64(*x))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Shortest-roundtrip is not fixed width; CSV outputs use 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const BLOWUP_NORM: f64 = 1e12;

/// Classical RK4 for `ẋ = Ax + Bu(t)`; returns the states on the grid.
pub(crate) fn rk4_states(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<Vec<DVector<f64>>> {
    let dt = grid.dt();
    let forced = !matches!(u, InputSignal::Zero { .. });
    let drive = |t: f64| -> Option<DVector<f64>> { forced.then(|| b * u.eval(t)) };
    let rhs = |x: &DVector<f64>, f: &Option<DVector<f64>>| -> DVector<f64> {
        let mut dx = a * x;
        if let Some(f) = f {
            dx += f;
        }
        dx
    };

    let mut states = Vec::with_capacity(grid.steps() + 1);
    let mut x = x0.clone();
    states.push(x.clone());
    for k in 0..grid.steps() {
        let t = grid.time(k);
        let f0 = drive(t);
        let fh = drive(t + 0.5 * dt);
        let f1 = drive(t + dt);
        let k1 = rhs(&x, &f0);
        let k2 = rhs(&(&x + &k1 * (0.5 * dt)), &fh);
        let k3 = rhs(&(&x + &k2 * (0.5 * dt)), &fh);
        let k4 = rhs(&(&x + &k3 * dt), &f1);
        x += (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
        let norm = x.norm();
        if !(norm <= BLOWUP_NORM) {
            return Err(Error::Diverged { t: t + dt, norm });
        }
        states.push(x.clone());
    }
    Ok(states)
}

pub(crate) fn outputs_from_states(
    states: &[DVector<f64>],
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    u: &InputSignal,
    grid: &TimeGrid,
) -> Vec<DVector<f64>> {
    let feedthrough = d.iter().any(|&v| v != 0.0);
    states
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let mut y = c * x;
            if feedthrough {
                y += d * u.eval(grid.time(k));
            }
            y
        })
        .collect()
}

pub(crate) fn check_step_size(a: &DMatrix<f64>, grid: &TimeGrid) -> Result<()> {
    let product = grid.dt() * norm2(a);
    if product > 0.1 * (1.0 + 1e-9) {
        return Err(Error::invalid(
            "dt",
            format!("dt·‖A‖ = {product:.4} exceeds 0.1 (dt = {:.3e})", grid.dt()),
        ));
    }
    Ok(())
}

pub(crate) fn check_system_shapes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &InputSignal,
) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::dims("A (square)", n, a.ncols()));
    }
    if b.nrows() != n || c.ncols() != n || x0.len() != n {
        return Err(Error::dims(
            "simulate shapes",
            format!("B {n}xk, C mx{n}, x0 {n}"),
            format!("B {}x{}, C {}x{}, x0 {}", b.nrows(), b.ncols(), c.nrows(), c.ncols(), x0.len()),
        ));
    }
    if d.shape() != (c.nrows(), b.ncols()) {
        return Err(Error::dims("D shape", format!("{}x{}", c.nrows(), b.ncols()), format!("{}x{}", d.nrows(), d.ncols())));
    }
    u.validate()?;
    if u.dim() != b.ncols() {
        return Err(Error::dims("input dimension vs B columns", b.ncols(), u.dim()));
    }
    Ok(())
}

/// Fixed-step RK4 simulation of `ẋ = Ax + Bu`, `y = Cx + Du`.
///
/// Requires a grid starting at 0 with `dt·‖A‖₂ ≤ 0.1`. Aborts if the state
/// norm exceeds 1e12.
pub fn simulate(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    x0: &DVector<f64>,
    u: &InputSignal,
    grid: &TimeGrid,
) -> Result<(Trajectory, Trajectory)> {
    check_system_shapes(a, b, c, d, x0, u)?;
    check_step_size(a, grid)?;
    let states = rk4_states(a, b, x0, u, grid)?;
    let outputs = outputs_from_states(&states, c, d, u, grid);
    let times = grid.times();
    Ok((
        Trajectory::new(times.clone(), states)?,
        Trajectory::new(times, outputs)?,
    ))
}
