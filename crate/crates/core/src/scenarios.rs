//! Scenario presets for the mass-spring-damper example, seeded random
//! populations, and the JSON document form of a scenario.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{log_norm, norm2};
use crate::param::{Monomial, ParamMatrix, ParamMatrixDoc, ParamVector, ParamVectorSpec};
use crate::sensitivity::default_fd_step;
use crate::systems::{build_augmented, AugmentedSystem, InputSignal, StateSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub truth: StateSpace,
    pub estimate: StateSpace,
    pub input: InputSignal,
    pub horizon: f64,
    pub params_of_interest: Vec<usize>,
    /// Central-difference step; `None` uses [`default_fd_step`].
    pub fd_step: Option<f64>,
}

impl Scenario {
    pub fn new(
        name: impl Into<String>,
        truth: StateSpace,
        estimate: StateSpace,
        input: InputSignal,
        horizon: f64,
        params_of_interest: Vec<usize>,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            truth,
            estimate,
            input,
            horizon,
            params_of_interest,
            fd_step: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!(
                "scenario name `{}` must be nonempty and use only [A-Za-z0-9_-]",
                self.name
            )));
        }
        let aug = self.augmented()?;
        self.input.validate()?;
        if self.input.dim() != aug.inputs() {
            return Err(Error::dims("scenario input dimension", aug.inputs(), self.input.dim()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::invalid("N", format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.params_of_interest.is_empty() {
            return Err(Error::Config(format!("scenario `{}` has no parameters of interest", self.name)));
        }
        let p = self.truth.spec().len();
        if let Some(&bad) = self.params_of_interest.iter().find(|&&i| i >= p) {
            return Err(Error::ParamIndex { index: bad, nparams: p });
        }
        if let Some(h) = self.fd_step {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::invalid("fd_step", format!("must be positive, got {h}")));
            }
        }
        Ok(())
    }

    pub fn augmented(&self) -> Result<AugmentedSystem> {
        build_augmented(&self.truth, &self.estimate)
    }

    pub fn theta_star(&self) -> &[f64] {
        self.truth.spec().nominal()
    }

    pub fn fd_step_for(&self, index: usize) -> f64 {
        self.fd_step.unwrap_or_else(|| default_fd_step(self.theta_star()[index]))
    }
}

const SPRING_A0: [[f64; 2]; 2] = [[0.0, 1.0], [-20.0, -2.0]];
const SPRING_A1: [[f64; 2]; 2] = [[0.0, 0.0], [-5.0, -0.5]];
const SPRING_A2: [[f64; 2]; 2] = [[0.0, 0.0], [-1.0, -0.1]];
pub const DEFAULT_THETA_STAR: f64 = 0.5;
pub const PRESET_HORIZON: f64 = 15.0;

fn mat(m: [[f64; 2]; 2]) -> DMatrix<f64> {
    dmatrix![m[0][0], m[0][1]; m[1][0], m[1][1]]
}

/// `[[0, 1], [−(k0 + k1θ), −(c0 + c1θ)]]` as constant and slope matrices.
fn spring_estimate(k0: f64, k1: f64, c0: f64, c1: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    (dmatrix![0.0, 1.0; -k0, -c0], dmatrix![0.0, 0.0; -k1, -c1])
}

fn spec(p: usize) -> ParamVectorSpec {
    let names = (1..=p).map(|i| format!("theta{i}")).collect();
    ParamVectorSpec::new(names, vec![DEFAULT_THETA_STAR; p]).expect("static spec")
}

fn spring_system(a: ParamMatrix, x0: ParamVector, spec: &ParamVectorSpec) -> StateSpace {
    let p = spec.len();
    StateSpace::new(
        a,
        ParamMatrix::constant(dmatrix![0.0; 1.0], p),
        ParamMatrix::constant(dmatrix![1.0, 0.0], p),
        ParamMatrix::zeros(1, 1, p),
        x0,
        spec.clone(),
    )
    .expect("static system")
}

fn unit_x0(p: usize) -> ParamVector {
    ParamVector::constant(dvector![1.0, 0.0], p)
}

/// A-matrix terms shared by the dynamics scenarios.
fn spring_terms(
    p: usize,
    base: (DMatrix<f64>, DMatrix<f64>),
    quadratic: bool,
    second: bool,
) -> ParamMatrix {
    let a1 = mat(SPRING_A1);
    let mut terms = vec![(Monomial::constant(), base.0), (Monomial::var(0), base.1)];
    if quadratic {
        terms.push((Monomial::pow(0, 2), &a1 * 0.1));
    }
    if second {
        terms.push((Monomial::var(1), mat(SPRING_A2)));
        terms.push((Monomial::var(0).times(&Monomial::var(1)), &a1 * 0.05));
    }
    ParamMatrix::from_terms(2, 2, p, terms).expect("static terms")
}

fn dynamics_scenario(name: &str, estimate: (f64, f64, f64, f64), quadratic: bool, second: bool) -> Scenario {
    let p = if second { 2 } else { 1 };
    let sp = spec(p);
    let truth_a = spring_terms(p, (mat(SPRING_A0), mat(SPRING_A1)), quadratic, second);
    let est_a = spring_terms(p, spring_estimate(estimate.0, estimate.1, estimate.2, estimate.3), quadratic, second);
    Scenario::new(
        name,
        spring_system(truth_a, unit_x0(p), &sp),
        spring_system(est_a, unit_x0(p), &sp),
        InputSignal::unit_step(1),
        PRESET_HORIZON,
        (0..p).collect(),
    )
    .expect("static scenario")
}

fn initial_state_scenario(name: &str, second: bool) -> Scenario {
    let p = if second { 2 } else { 1 };
    let sp = spec(p);
    let theta = DEFAULT_THETA_STAR;
    let truth_a = mat(SPRING_A0) + mat(SPRING_A1) * theta;
    let (e0, e1) = spring_estimate(19.80, 5.10, 2.05, 0.48);
    let est_a = e0 + e1 * theta;
    let x0 = |quad: f64| {
        let mut terms = vec![
            (Monomial::constant(), dmatrix![1.0; 0.0]),
            (Monomial::pow(0, 2), dmatrix![quad; 0.0]),
        ];
        if second {
            terms.push((Monomial::var(1), dmatrix![0.1; 0.0]));
        }
        ParamVector::new(ParamMatrix::from_terms(2, 1, p, terms).expect("static x0")).expect("column")
    };
    Scenario::new(
        name,
        spring_system(ParamMatrix::constant(truth_a, p), x0(0.2), &sp),
        spring_system(ParamMatrix::constant(est_a, p), x0(0.25), &sp),
        InputSignal::unit_step(1),
        PRESET_HORIZON,
        (0..p).collect(),
    )
    .expect("static scenario")
}

/// The six mass-spring-damper scenarios: four with parameter-dependent
/// dynamics, two with a parameter-dependent initial state.
pub fn preset_scenarios() -> Vec<Scenario> {
    vec![
        dynamics_scenario("affine", (19.80, 5.10, 2.05, 0.48), false, false),
        dynamics_scenario("affine_misidentified", (19.0, 5.5, 2.2, 0.40), false, false),
        dynamics_scenario("quadratic", (19.80, 5.10, 2.05, 0.48), true, false),
        dynamics_scenario("two_param", (19.80, 5.10, 2.05, 0.48), false, true),
        initial_state_scenario("x0_quadratic", false),
        initial_state_scenario("x0_two_param", true),
    ]
}

pub fn preset_scenario(name: &str) -> Option<Scenario> {
    preset_scenarios().into_iter().find(|s| s.name == name)
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

fn perturb(rng: &mut ChaCha8Rng, m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v * (1.0 + rng.gen_range(-0.02..0.02)))
}

fn check_random_args(n: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "state dimension must be at least 1"));
    }
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::invalid("delta", format!("must be positive, got {delta}")));
    }
    Ok(())
}

/// Random augmented system with `μ(Ā(θ*)) = −delta`, affine in one parameter.
///
/// Truth `A(θ) = A₀ + A₁θ` with `‖A₁‖ = 0.1‖A₀‖`; the estimate perturbs every
/// coefficient by a factor in `[0.98, 1.02]`. Both constant terms are then
/// shifted by the same multiple of I. Unit step input, `N = 12/delta`.
pub fn random_stable_augmented(n: usize, seed: u64, delta: f64) -> Result<Scenario> {
    check_random_args(n, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta = DEFAULT_THETA_STAR;
    let a0 = uniform(&mut rng, n, n);
    let a1_raw = uniform(&mut rng, n, n);
    let a1 = &a1_raw * (0.1 * norm2(&a0) / norm2(&a1_raw).max(f64::MIN_POSITIVE));
    let b = uniform(&mut rng, n, 1);
    let c = uniform(&mut rng, 1, n);
    let x0 = uniform(&mut rng, n, 1);
    let (ea0, ea1, eb, ec, ex0) = (
        perturb(&mut rng, &a0),
        perturb(&mut rng, &a1),
        perturb(&mut rng, &b),
        perturb(&mut rng, &c),
        perturb(&mut rng, &x0),
    );

    let mu = log_norm(&(&a0 + &a1 * theta))?
        .mu
        .max(log_norm(&(&ea0 + &ea1 * theta))?.mu);
    let shift = DMatrix::<f64>::identity(n, n) * (mu + delta);
    let sp = ParamVectorSpec::new(vec!["theta1".into()], vec![theta])?;
    let system = |a0: DMatrix<f64>, a1: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, x0: DMatrix<f64>| {
        StateSpace::new(
            ParamMatrix::affine(a0 - &shift, &[(0, a1)], 1)?,
            ParamMatrix::constant(b, 1),
            ParamMatrix::constant(c, 1),
            ParamMatrix::zeros(1, 1, 1),
            ParamVector::constant(DVector::from_column_slice(x0.as_slice()), 1),
            sp.clone(),
        )
    };
    Scenario::new(
        format!("random_n{n}_s{seed}"),
        system(a0, a1, b, c, x0)?,
        system(ea0, ea1, eb, ec, ex0)?,
        InputSignal::unit_step(1),
        12.0 / delta,
        vec![0],
    )
}

/// Random system with parameter-free dynamics (`μ(Ā) = −delta`) and an
/// initial state affine in one parameter. Horizon `24/delta`.
pub fn random_initial_state(n: usize, seed: u64, delta: f64) -> Result<Scenario> {
    check_random_args(n, delta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = uniform(&mut rng, n, n);
    let b = uniform(&mut rng, n, 1);
    let c = uniform(&mut rng, 1, n);
    let x0 = uniform(&mut rng, n, 1);
    let dx0 = uniform(&mut rng, n, 1);
    let (ea, eb, ec, ex0, edx0) = (
        perturb(&mut rng, &a),
        perturb(&mut rng, &b),
        perturb(&mut rng, &c),
        perturb(&mut rng, &x0),
        uniform(&mut rng, n, 1),
    );
    let mu = log_norm(&a)?.mu.max(log_norm(&ea)?.mu);
    let shift = DMatrix::<f64>::identity(n, n) * (mu + delta);
    let sp = ParamVectorSpec::new(vec!["theta1".into()], vec![DEFAULT_THETA_STAR])?;
    let system = |a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, x0: DMatrix<f64>, dx0: DMatrix<f64>| {
        StateSpace::new(
            ParamMatrix::constant(a - &shift, 1),
            ParamMatrix::constant(b, 1),
            ParamMatrix::constant(c, 1),
            ParamMatrix::zeros(1, 1, 1),
            ParamVector::new(ParamMatrix::affine(x0, &[(0, dx0)], 1)?)?,
            sp.clone(),
        )
    };
    Scenario::new(
        format!("random_x0_n{n}_s{seed}"),
        system(a, b, c, x0, dx0)?,
        system(ea, eb, ec, ex0, edx0)?,
        InputSignal::unit_step(1),
        24.0 / delta,
        vec![0],
    )
}

/// JSON form of a named parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDoc {
    pub name: String,
    pub nominal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemDoc {
    pub a: ParamMatrixDoc,
    pub b: ParamMatrixDoc,
    pub c: ParamMatrixDoc,
    /// Defaults to zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<ParamMatrixDoc>,
    pub x0: ParamMatrixDoc,
}

impl SystemDoc {
    fn to_system(&self, spec: &ParamVectorSpec) -> Result<StateSpace> {
        let a = ParamMatrix::from_doc(&self.a, spec)?;
        let b = ParamMatrix::from_doc(&self.b, spec)?;
        let c = ParamMatrix::from_doc(&self.c, spec)?;
        let d = match &self.d {
            Some(d) => ParamMatrix::from_doc(d, spec)?,
            None => ParamMatrix::zeros(c.rows(), b.cols(), spec.len()),
        };
        let x0 = ParamVector::new(ParamMatrix::from_doc(&self.x0, spec)?)?;
        StateSpace::new(a, b, c, d, x0, spec.clone())
    }

    fn from_system(sys: &StateSpace) -> Self {
        let spec = sys.spec();
        Self {
            a: sys.a().to_doc(spec),
            b: sys.b().to_doc(spec),
            c: sys.c().to_doc(spec),
            d: Some(sys.d().to_doc(spec)),
            x0: sys.x0().as_matrix().to_doc(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub name: String,
    pub params: Vec<ParamDoc>,
    pub truth: SystemDoc,
    pub estimate: SystemDoc,
    /// Defaults to a unit step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSignal>,
    pub horizon: f64,
    /// Parameter names; defaults to all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_of_interest: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
}

impl ScenarioDoc {
    pub fn to_scenario(&self) -> Result<Scenario> {
        let spec = ParamVectorSpec::new(
            self.params.iter().map(|p| p.name.clone()).collect(),
            self.params.iter().map(|p| p.nominal).collect(),
        )?;
        let truth = self.truth.to_system(&spec)?;
        let estimate = self.estimate.to_system(&spec)?;
        let input = self.input.clone().unwrap_or_else(|| InputSignal::unit_step(truth.inputs()));
        let params_of_interest = match &self.params_of_interest {
            None => (0..spec.len()).collect(),
            Some(names) => names
                .iter()
                .map(|n| {
                    spec.index_of(n)
                        .ok_or_else(|| Error::Config(format!("unknown parameter of interest `{n}`")))
                })
                .collect::<Result<_>>()?,
        };
        let s = Scenario {
            name: self.name.clone(),
            truth,
            estimate,
            input,
            horizon: self.horizon,
            params_of_interest,
            fd_step: self.fd_step,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_scenario(s: &Scenario) -> Self {
        let spec = s.truth.spec();
        Self {
            name: s.name.clone(),
            params: spec
                .names()
                .iter()
                .zip(spec.nominal())
                .map(|(name, &nominal)| ParamDoc {
                    name: name.clone(),
                    nominal,
                })
                .collect(),
            truth: SystemDoc::from_system(&s.truth),
            estimate: SystemDoc::from_system(&s.estimate),
            input: Some(s.input.clone()),
            horizon: s.horizon,
            params_of_interest: Some(s.params_of_interest.iter().map(|&i| spec.names()[i].clone()).collect()),
            fd_step: s.fd_step,
        }
    }
}
