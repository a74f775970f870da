//! Closed-form upper bounds on the sensitivity energy `‖∂ȳ/∂θᵢ‖²`.
//!
//! * [`theorem1_bound`]: parameter-dependent dynamics with a bounded input,
//!   `K₁‖∂Ā‖² + K₂‖∂Ā‖³‖B̄u‖_∞ + K₃N²‖∂Ā‖²‖B̄u‖_∞` with
//!   `K₁ = ‖C̄ᵀC̄‖‖x̄(0)‖²/(4|μ|³)`, `K₂ = 2‖x̄(0)‖‖C̄ᵀC̄‖/|μ|⁵`, `K₃ = ‖C̄‖/|μ|`.
//! * [`theorem2_bound`]: parameter-dependent initial state,
//!   `λ_max(P)‖∂x̄(0)/∂θᵢ‖²` with `ĀᵀP + PĀ = −C̄ᵀC̄`.
//! * [`gramian_baseline_bound`]: `N·trace(Q̄ₒ(N))·‖w̄‖²` with `w̄ = (∂Ā/∂θᵢ)x̄`.
//!
//! All norms of matrices are induced 2-norms. The dynamics bound needs a negative
//! log-norm μ(Ā); when Ā is Hurwitz but μ(Ā) ≥ 0 a [`Preconditioner`] moves
//! the system to coordinates where the log-norm is negative.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{gramian_finite, log_norm, lyap_observability, norm2, sym_eig};
use crate::sensitivity::squared_l2;
use crate::systems::{bu_sup_norm_matrix, AugmentedSystem, InputSignal, SupNorm, Trajectory};

/// Constants and inputs behind a dynamics-bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem1Terms {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub mu: f64,
    pub horizon: f64,
    pub da_norm: f64,
    pub bu_inf: f64,
    pub x0_norm: f64,
    pub value: f64,
}

impl Theorem1Terms {
    /// The three additive contributions.
    pub fn parts(&self) -> [f64; 3] {
        let d = self.da_norm;
        [
            self.k1 * d * d,
            self.k2 * d.powi(3) * self.bu_inf,
            self.k3 * self.horizon * self.horizon * d * d * self.bu_inf,
        ]
    }
}

/// Evaluates the dynamics bound from its scalar ingredients.
///
/// `mu` must be negative; `c_norm = ‖C̄‖`, `ctc_norm = ‖C̄ᵀC̄‖`.
pub fn theorem1_formula(
    mu: f64,
    c_norm: f64,
    ctc_norm: f64,
    x0_norm: f64,
    da_norm: f64,
    bu_inf: f64,
    horizon: f64,
) -> Result<Theorem1Terms> {
    if !(mu < 0.0) {
        return Err(Error::NonNegativeLogNorm { mu });
    }
    if !(horizon > 0.0) {
        return Err(Error::invalid("N", format!("horizon must be positive, got {horizon}")));
    }
    if !(bu_inf >= 0.0) {
        return Err(Error::invalid("bu_inf", format!("must be nonnegative, got {bu_inf}")));
    }
    let m = mu.abs();
    let k1 = ctc_norm * x0_norm * x0_norm / (4.0 * m.powi(3));
    let k2 = 2.0 * x0_norm * ctc_norm / m.powi(5);
    let k3 = c_norm / m;
    let mut terms = Theorem1Terms {
        k1,
        k2,
        k3,
        mu,
        horizon,
        da_norm,
        bu_inf,
        x0_norm,
        value: 0.0,
    };
    terms.value = terms.parts().iter().sum();
    Ok(terms)
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

fn theorem1_numeric(
    abar: &DMatrix<f64>,
    da: &DMatrix<f64>,
    cbar: &DMatrix<f64>,
    x0: &DVector<f64>,
    bu_inf: f64,
    horizon: f64,
) -> Result<Theorem1Terms> {
    let mu = log_norm(abar)?.mu;
    let da_norm = norm2(da);
    let c_norm = norm2(cbar);
    let ctc_norm = norm2(&(cbar.transpose() * cbar));
    if da_norm == 0.0 && !(mu < 0.0) {
        if !(horizon > 0.0) || !(bu_inf >= 0.0) {
            return Err(Error::invalid("N/bu_inf", "horizon must be positive and bu_inf nonnegative"));
        }
        return Ok(Theorem1Terms {
            k1: f64::NAN,
            k2: f64::NAN,
            k3: f64::NAN,
            mu,
            horizon,
            da_norm,
            bu_inf,
            x0_norm: x0.norm(),
            value: 0.0,
        });
    }
    theorem1_formula(mu, c_norm, ctc_norm, x0.norm(), da_norm, bu_inf, horizon)
}

/// Dynamics bound with its constants, in original coordinates.
///
/// Rejects `μ(Ā(θ)) ≥ 0`; returns 0 when `∂Ā/∂θᵢ = 0`.
pub fn theorem1_terms(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    bu_inf: f64,
    horizon: f64,
) -> Result<Theorem1Terms> {
    check_index(aug, index)?;
    let ev = aug.eval(theta)?;
    let da = aug.abar().partial(index, theta)?;
    theorem1_numeric(&ev.a, &da, &ev.c, &ev.x0, bu_inf, horizon)
}

pub fn theorem1_bound(aug: &AugmentedSystem, index: usize, theta: &[f64], bu_inf: f64, horizon: f64) -> Result<f64> {
    Ok(theorem1_terms(aug, index, theta, bu_inf, horizon)?.value)
}

/// Similarity `x̂ = T x̄` with `T = P^{1/2}`, `ĀᵀP + PĀ = −I`.
///
/// In the new coordinates `Â + Âᵀ = −P⁻¹`, so `μ(Â) = −1/(2λ_max(P)) < 0`.
/// The output `ȳ` and therefore its sensitivity are unchanged.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// 2-norm condition number of T.
    pub condition: f64,
    pub mu_original: f64,
    pub mu_transformed: f64,
}

pub fn lyapunov_preconditioner(abar: &DMatrix<f64>) -> Result<Preconditioner> {
    let n = abar.nrows();
    let sol = lyap_observability(abar, &DMatrix::identity(n, n))?;
    let eig = sym_eig(&sol.p)?;
    if !(eig.min() > 0.0) {
        return Err(Error::Singular("Lyapunov preconditioner (P not positive definite)"));
    }
    let v = &eig.vectors;
    let t = v * DMatrix::from_diagonal(&eig.values.map(f64::sqrt)) * v.transpose();
    let t_inv = v * DMatrix::from_diagonal(&eig.values.map(|l| 1.0 / l.sqrt())) * v.transpose();
    let mu_original = log_norm(abar)?.mu;
    let mu_transformed = log_norm(&(&t * abar * &t_inv))?.mu;
    Ok(Preconditioner {
        condition: (eig.max() / eig.min()).sqrt(),
        t,
        t_inv,
        mu_original,
        mu_transformed,
    })
}

/// Dynamics bound evaluated for the transformed system `(TĀT⁻¹, TB̄, C̄T⁻¹, Tx̄(0))`.
pub fn theorem1_terms_transformed(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    pre: &Preconditioner,
    u: &InputSignal,
    horizon: f64,
    sup: SupNorm,
) -> Result<Theorem1Terms> {
    check_index(aug, index)?;
    let ev = aug.eval(theta)?;
    if pre.t.nrows() != ev.a.nrows() {
        return Err(Error::dims("preconditioner size", ev.a.nrows(), pre.t.nrows()));
    }
    let da = aug.abar().partial(index, theta)?;
    let a_hat = &pre.t * &ev.a * &pre.t_inv;
    let da_hat = &pre.t * da * &pre.t_inv;
    let c_hat = &ev.c * &pre.t_inv;
    let x0_hat = &pre.t * &ev.x0;
    let bu_hat = bu_sup_norm_matrix(&(&pre.t * &ev.b), u, horizon, sup)?;
    theorem1_numeric(&a_hat, &da_hat, &c_hat, &x0_hat, bu_hat, horizon)
}

/// Ingredients of the initial-state bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Terms {
    pub lambda_max_p: f64,
    pub dx0_norm: f64,
    pub value: f64,
    /// True when the dynamics depend on some parameter (outside the hypothesis).
    pub out_of_hypothesis: bool,
}

/// `λ_max(P)·‖∂x̄(0)/∂θᵢ‖²`. Strict: the system must not otherwise depend on
/// parameters (Ā on any θⱼ; B̄, C̄, D̄ on θᵢ).
pub fn theorem2_terms(aug: &AugmentedSystem, index: usize, theta: &[f64], strict: bool) -> Result<Theorem2Terms> {
    check_index(aug, index)?;
    let out_of_hypothesis = !aug.dynamics_parameter_free()
        || aug.bbar().depends_on(index)
        || aug.cbar().depends_on(index)
        || aug.dbar().depends_on(index);
    if strict && out_of_hypothesis {
        return Err(Error::Hypothesis(
            "the initial-state bound needs parameter-free dynamics and output map; \
             use the dynamics bound (theorem1) or relax strictness"
                .into(),
        ));
    }
    let ev = aug.eval(theta)?;
    let dx0 = aug.xbar0().partial(index, theta)?;
    let dx0_norm = dx0.norm();
    let q = ev.c.transpose() * &ev.c;
    let p = lyap_observability(&ev.a, &q)?.p;
    let lambda_max_p = sym_eig(&p)?.max().max(0.0);
    Ok(Theorem2Terms {
        lambda_max_p,
        dx0_norm,
        value: lambda_max_p * dx0_norm * dx0_norm,
        out_of_hypothesis,
    })
}

pub fn theorem2_bound(aug: &AugmentedSystem, index: usize, theta: &[f64]) -> Result<f64> {
    Ok(theorem2_terms(aug, index, theta, true)?.value)
}

/// Ingredients of the finite-horizon Gramian baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineTerms {
    pub gramian_trace: f64,
    pub w_energy: f64,
    pub horizon: f64,
    pub value: f64,
}

/// Baseline given a precomputed `trace(Q̄ₒ(N))`.
pub fn baseline_with_trace(
    da: &DMatrix<f64>,
    x_traj: &Trajectory,
    horizon: f64,
    gramian_trace: f64,
) -> Result<BaselineTerms> {
    if x_traj.dim() != da.ncols() {
        return Err(Error::dims("state trajectory dimension", da.ncols(), x_traj.dim()));
    }
    let w = x_traj.map_linear(da)?;
    let w_energy = squared_l2(&w, horizon)?;
    Ok(BaselineTerms {
        gramian_trace,
        w_energy,
        horizon,
        value: horizon * gramian_trace * w_energy,
    })
}

pub fn gramian_baseline_terms(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    x_traj: &Trajectory,
    horizon: f64,
) -> Result<BaselineTerms> {
    check_index(aug, index)?;
    let da = aug.abar().partial(index, theta)?;
    if da.iter().all(|&v| v == 0.0) {
        squared_l2(x_traj, horizon)?;
        return Ok(BaselineTerms {
            gramian_trace: f64::NAN,
            w_energy: 0.0,
            horizon,
            value: 0.0,
        });
    }
    let ev = aug.eval(theta)?;
    let trace = gramian_finite(&ev.a, &ev.c, horizon)?.trace();
    baseline_with_trace(&da, x_traj, horizon, trace)
}

pub fn gramian_baseline_bound(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    x_traj: &Trajectory,
    horizon: f64,
) -> Result<f64> {
    Ok(gramian_baseline_terms(aug, index, theta, x_traj, horizon)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    /// `u = 0`: only the `K₁` term survives.
    FreeResponse,
    /// `x̄(0) = 0`: only the `K₃` term survives.
    ForcedOnly,
}

pub fn special_case_bound(
    aug: &AugmentedSystem,
    index: usize,
    theta: &[f64],
    mode: SpecialCase,
    bu_inf: f64,
    horizon: f64,
) -> Result<f64> {
    let terms = theorem1_terms(aug, index, theta, bu_inf, horizon)?;
    match mode {
        SpecialCase::FreeResponse => {
            if bu_inf != 0.0 {
                return Err(Error::invalid("mode", "free_response requires a zero input (bu_inf = 0)"));
            }
            if terms.da_norm == 0.0 {
                return Ok(0.0);
            }
            Ok(terms.k1 * terms.da_norm * terms.da_norm)
        }
        SpecialCase::ForcedOnly => {
            if terms.x0_norm != 0.0 {
                return Err(Error::invalid("mode", "forced_only requires a zero initial state"));
            }
            if terms.da_norm == 0.0 {
                return Ok(0.0);
            }
            Ok(terms.parts()[2])
        }
    }
}

/// `∫₀^∞ t³e^{−|μ|t}`, `∫₀^∞ t²e^{−|μ|t}`, `∫₀^∞ t²e^{−2|μ|t}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayMoments {
    pub i3: f64,
    pub i2: f64,
    pub i2_half: f64,
}

pub fn decay_moment_integrals(mu_abs: f64) -> Result<DecayMoments> {
    if !(mu_abs > 0.0) || !mu_abs.is_finite() {
        return Err(Error::invalid("mu_abs", format!("must be positive, got {mu_abs}")));
    }
    Ok(DecayMoments {
        i3: 6.0 / mu_abs.powi(4),
        i2: 2.0 / mu_abs.powi(3),
        i2_half: 1.0 / (4.0 * mu_abs.powi(3)),
    })
}

/// Constants block of a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub mu: f64,
    #[serde(rename = "N")]
    pub horizon: f64,
    pub da_norm: f64,
    pub bu_inf: f64,
    pub x0_norm: f64,
}

impl From<&Theorem1Terms> for BoundConstants {
    fn from(t: &Theorem1Terms) -> Self {
        Self {
            k1: t.k1,
            k2: t.k2,
            k3: t.k3,
            mu: t.mu,
            horizon: t.horizon,
            da_norm: t.da_norm,
            bu_inf: t.bu_inf,
            x0_norm: t.x0_norm,
        }
    }
}

/// Coordinate change applied before evaluating the dynamics bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformInfo {
    pub condition: f64,
    pub mu_original: f64,
    pub mu_transformed: f64,
}

/// Per-parameter record of bounds against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub param_index: usize,
    pub param_name: String,
    pub theta_star: f64,
    pub theorem1: Option<f64>,
    pub theorem2: Option<f64>,
    pub gramian_baseline: Option<f64>,
    pub ground_truth_energy: f64,
    pub ground_truth_energy_fd: f64,
    pub constants: BoundConstants,
    pub transform: Option<TransformInfo>,
    pub flags: Vec<String>,
}

impl BoundReport {
    /// Every present bound dominates the ground truth.
    pub fn dominance_holds(&self) -> bool {
        [self.theorem1, self.theorem2, self.gramian_baseline]
            .iter()
            .flatten()
            .all(|&b| b >= self.ground_truth_energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::{Monomial, ParamMatrix, ParamVector, ParamVectorSpec};
    use crate::systems::{build_augmented, StateSpace, TimeGrid};
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    /// Scalar augmented system: truth ẋ = (a + s·θ)x, estimate state is zero.
    fn scalar_aug(a: f64, slope: f64, c: f64, x0: f64, b: f64) -> AugmentedSystem {
        let spec = ParamVectorSpec::new(vec!["t".into()], vec![0.0]).unwrap();
        let truth = StateSpace::new(
            ParamMatrix::affine(dmatrix![a], &[(0, dmatrix![slope])], 1).unwrap(),
            ParamMatrix::constant(dmatrix![b], 1),
            ParamMatrix::constant(dmatrix![c], 1),
            ParamMatrix::zeros(1, 1, 1),
            ParamVector::constant(dvector![x0], 1),
            spec.clone(),
        )
        .unwrap();
        // Zero-output estimate with the same decay keeps μ(Ā) = a.
        let est = StateSpace::constant(dmatrix![a], dmatrix![0.0], dmatrix![0.0], dvector![0.0], spec).unwrap();
        build_augmented(&truth, &est).unwrap()
    }

    #[test]
    fn theorem1_scalar_hand_value() {
        let aug = scalar_aug(-2.0, 0.5, 1.0, 1.0, 1.0);
        let t = theorem1_terms(&aug, 0, &[0.0], 1.0, 3.0).unwrap();
        assert_eq!(t.mu, -2.0);
        assert!((t.k1 - 1.0 / 32.0).abs() < 1e-15);
        assert!((t.k2 - 1.0 / 16.0).abs() < 1e-15);
        assert!((t.k3 - 0.5).abs() < 1e-15);
        assert!((t.value - 1.140625).abs() < 1e-12);
    }

    #[test]
    fn theorem1_independent_reimplementation() {
        // K's recomputed from the definitions directly
        let (mu, c, x0, d, bu, n): (f64, f64, f64, f64, f64, f64) = (-0.7, 1.3, 2.1, 0.4, 0.9, 5.0);
        let m = mu.abs();
        let k1 = c * c * x0 * x0 / (4.0 * m * m * m);
        let k2 = 2.0 * x0 * c * c / m.powf(5.0);
        let k3 = c / m;
        let expected = k1 * d * d + k2 * d * d * d * bu + k3 * n * n * d * d * bu;
        let got = theorem1_formula(mu, c, c * c, x0, d, bu, n).unwrap().value;
        assert!((got - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn theorem1_zero_input_is_free_response_case() {
        let aug = scalar_aug(-2.0, 0.5, 1.0, 1.0, 1.0);
        let t1 = theorem1_bound(&aug, 0, &[0.0], 0.0, 3.0).unwrap();
        let sc = special_case_bound(&aug, 0, &[0.0], SpecialCase::FreeResponse, 0.0, 3.0).unwrap();
        assert_eq!(t1, sc);
        assert!((sc - 0.0078125).abs() < 1e-15);
        assert!(special_case_bound(&aug, 0, &[0.0], SpecialCase::FreeResponse, 1.0, 3.0).is_err());
    }

    #[test]
    fn theorem1_zero_initial_state_is_forced_case() {
        let aug = scalar_aug(-2.0, 0.5, 1.0, 0.0, 1.0);
        let t = theorem1_terms(&aug, 0, &[0.0], 1.0, 3.0).unwrap();
        let sc = special_case_bound(&aug, 0, &[0.0], SpecialCase::ForcedOnly, 1.0, 3.0).unwrap();
        assert_eq!(t.value, sc);
        assert_eq!(sc, t.parts()[2]);
        let with_x0 = scalar_aug(-2.0, 0.5, 1.0, 1.0, 1.0);
        assert!(special_case_bound(&with_x0, 0, &[0.0], SpecialCase::ForcedOnly, 1.0, 3.0).is_err());
    }

    #[test]
    fn theorem1_zero_derivative_and_rejections() {
        let aug = scalar_aug(-2.0, 0.0, 1.0, 1.0, 1.0);
        assert_eq!(theorem1_bound(&aug, 0, &[0.0], 1.0, 3.0).unwrap(), 0.0);
        let unstable = scalar_aug(0.5, 1.0, 1.0, 1.0, 1.0);
        assert!(matches!(
            theorem1_bound(&unstable, 0, &[0.0], 1.0, 3.0),
            Err(Error::NonNegativeLogNorm { .. })
        ));
        assert!(theorem1_bound(&aug, 3, &[0.0], 1.0, 3.0).is_err());
    }

    #[test]
    fn preconditioner_makes_log_norm_negative() {
        let a = dmatrix![0.0, 1.0; -22.5, -2.25];
        let pre = lyapunov_preconditioner(&a).unwrap();
        assert!(pre.mu_original > 0.0);
        assert!(pre.mu_transformed < 0.0);
        let p = &pre.t * &pre.t;
        let lmax = sym_eig(&p).unwrap().max();
        assert!((pre.mu_transformed + 1.0 / (2.0 * lmax)).abs() < 1e-9 * pre.mu_transformed.abs());
        assert!(((&pre.t * &pre.t_inv) - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(pre.condition >= 1.0);
    }

    fn initial_state_aug(a: DMatrix<f64>, c: DMatrix<f64>, dx0: DVector<f64>) -> AugmentedSystem {
        let n = a.nrows() / 2;
        let spec = ParamVectorSpec::new(vec!["t".into()], vec![0.0]).unwrap();
        let x0 = |v: DVector<f64>| {
            ParamVector::new(
                ParamMatrix::from_terms(n, 1, 1, [(Monomial::var(0), DMatrix::from_column_slice(n, 1, v.as_slice()))]).unwrap(),
            )
            .unwrap()
        };
        let mk = |a: DMatrix<f64>, c: DMatrix<f64>, x: ParamVector| {
            StateSpace::new(
                ParamMatrix::constant(a, 1),
                ParamMatrix::constant(DMatrix::zeros(n, 1), 1),
                ParamMatrix::constant(c, 1),
                ParamMatrix::zeros(1, 1, 1),
                x,
                spec.clone(),
            )
            .unwrap()
        };
        let truth = mk(
            a.view((0, 0), (n, n)).into_owned(),
            c.view((0, 0), (1, n)).into_owned(),
            x0(dx0.rows(0, n).into_owned()),
        );
        let est = mk(
            a.view((n, n), (n, n)).into_owned(),
            -c.view((0, n), (1, n)).into_owned(),
            x0(dx0.rows(n, n).into_owned()),
        );
        build_augmented(&truth, &est).unwrap()
    }

    #[test]
    fn theorem2_scalar_and_zero() {
        let spec = ParamVectorSpec::new(vec!["t".into()], vec![0.0]).unwrap();
        let truth = StateSpace::new(
            ParamMatrix::constant(dmatrix![-1.0], 1),
            ParamMatrix::constant(dmatrix![0.0], 1),
            ParamMatrix::constant(dmatrix![1.0], 1),
            ParamMatrix::zeros(1, 1, 1),
            ParamVector::new(ParamMatrix::affine(dmatrix![1.0], &[(0, dmatrix![2.0])], 1).unwrap()).unwrap(),
            spec.clone(),
        )
        .unwrap();
        let est = StateSpace::constant(dmatrix![-1.0], dmatrix![0.0], dmatrix![0.0], dvector![0.0], spec.clone()).unwrap();
        let aug = build_augmented(&truth, &est).unwrap();
        let t2 = theorem2_terms(&aug, 0, &[0.0], true).unwrap();
        assert!((t2.lambda_max_p - 0.5).abs() < 1e-14);
        assert!((t2.value - 2.0).abs() < 1e-13);

        let still = StateSpace::constant(dmatrix![-1.0], dmatrix![0.0], dmatrix![1.0], dvector![1.0], spec).unwrap();
        let aug0 = build_augmented(&still, &est).unwrap();
        assert_eq!(theorem2_bound(&aug0, 0, &[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn theorem2_strictness() {
        let aug = scalar_aug(-2.0, 0.5, 1.0, 1.0, 1.0);
        assert!(matches!(theorem2_bound(&aug, 0, &[0.0]), Err(Error::Hypothesis(_))));
        let relaxed = theorem2_terms(&aug, 0, &[0.0], false).unwrap();
        assert!(relaxed.out_of_hypothesis);
        assert_eq!(relaxed.value, 0.0);
    }

    #[test]
    fn theorem2_tight_on_top_eigenvector() {
        let a = dmatrix![
            -1.0, 0.3, 0.0, 0.0;
            -0.2, -0.8, 0.0, 0.0;
            0.0, 0.0, -1.2, 0.4;
            0.0, 0.0, 0.1, -0.9
        ];
        let c = dmatrix![1.0, 0.5, -0.9, -0.4];
        let p = lyap_observability(&a, &(c.transpose() * &c)).unwrap().p;
        let eig = sym_eig(&p).unwrap();
        let v: DVector<f64> = eig.vectors.column(0).into_owned() * 1.7;
        let aug = initial_state_aug(a, c, v.clone());
        let bound = theorem2_bound(&aug, 0, &[0.0]).unwrap();
        let exact = (v.transpose() * &p * &v)[(0, 0)];
        assert!((bound - exact).abs() <= 1e-6 * exact);
    }

    #[test]
    fn baseline_scalar_closed_form() {
        let aug = scalar_aug(-1.0, 1.0, 1.0, 1.0, 0.0);
        let horizon = 5.0;
        let grid = TimeGrid::covering(horizon, 1e-3).unwrap();
        let times = grid.times();
        // x̄ = [e^{−t}, 0]
        let values = times.iter().map(|&t| dvector![(-t).exp(), 0.0]).collect();
        let traj = Trajectory::new(times, values).unwrap();
        let got = gramian_baseline_bound(&aug, 0, &[0.0], &traj, horizon).unwrap();
        let q = (1.0 - (-10.0f64).exp()) / 2.0;
        let expected = 5.0 * q * q;
        assert!((got - expected).abs() < 1e-7 * expected);
        assert!((got - 1.249887).abs() < 1e-6);

        let flat = scalar_aug(-1.0, 0.0, 1.0, 1.0, 0.0);
        assert_eq!(gramian_baseline_bound(&flat, 0, &[0.0], &traj, horizon).unwrap(), 0.0);
        assert!(gramian_baseline_bound(&aug, 0, &[0.0], &traj, 6.0).is_err());
    }

    fn simpson_inf(f: impl Fn(f64) -> f64, upper: f64, intervals: usize) -> f64 {
        let h = upper / intervals as f64;
        let mut acc = f(0.0) + f(upper);
        for k in 1..intervals {
            acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn decay_moments_closed_and_quadrature() {
        let one = decay_moment_integrals(1.0).unwrap();
        assert_eq!((one.i3, one.i2, one.i2_half), (6.0, 2.0, 0.25));
        let two = decay_moment_integrals(2.0).unwrap();
        assert_eq!((two.i3, two.i2, two.i2_half), (0.375, 0.25, 0.03125));
        for m in [1.0f64, 2.0] {
            let r = decay_moment_integrals(m).unwrap();
            let upper = 200.0 / m;
            let q3 = simpson_inf(|t| t.powi(3) * (-m * t).exp(), upper, 200_000);
            let q2 = simpson_inf(|t| t * t * (-m * t).exp(), upper, 200_000);
            let q2h = simpson_inf(|t| t * t * (-2.0 * m * t).exp(), upper, 200_000);
            assert!((q3 - r.i3).abs() <= 1e-9 * r.i3);
            assert!((q2 - r.i2).abs() <= 1e-9 * r.i2);
            assert!((q2h - r.i2_half).abs() <= 1e-9 * r.i2_half);
        }
        assert!(decay_moment_integrals(0.0).is_err());
        assert!(decay_moment_integrals(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn theorem1_monotone(
            mu in -3.0f64..-0.05,
            c in 0.1f64..3.0,
            x0 in 0.0f64..3.0,
            d in 0.0f64..3.0,
            bu in 0.0f64..3.0,
            n in 0.1f64..50.0,
            bump in 0.0f64..1.0,
        ) {
            let base = theorem1_formula(mu, c, c * c, x0, d, bu, n).unwrap().value;
            let bumped = [
                theorem1_formula(mu, c, c * c, x0, d + bump, bu, n).unwrap().value,
                theorem1_formula(mu, c, c * c, x0, d, bu + bump, n).unwrap().value,
                theorem1_formula(mu, c, c * c, x0, d, bu, n + bump).unwrap().value,
                theorem1_formula(mu, c, c * c, x0 + bump, d, bu, n).unwrap().value,
            ];
            for b in bumped {
                prop_assert!(b >= base);
            }
        }
    }
}
