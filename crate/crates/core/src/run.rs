//! Per-scenario analysis: nominal simulation, ground truth by both routes,
//! requested bounds and the robustness metric from each source.

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    baseline_with_trace, lyapunov_preconditioner, theorem1_terms, theorem1_terms_transformed, theorem2_terms,
    BoundConstants, BoundReport, Preconditioner, Theorem1Terms, TransformInfo,
};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::linalg::{gramian_finite, log_norm, norm2};
use crate::metric::{metric_from_bounds, MetricOptions, RobustnessResult, SensitivitySource};
use crate::report;
use crate::scenarios::Scenario;
use crate::sensitivity::{l2_energy, sensitivity_fd, sensitivity_ode, simulate_augmented, squared_l2};
use crate::systems::{bu_sup_norm, SupNorm, TimeGrid, Trajectory};

/// Relative tolerance between the two ground-truth routes.
pub const ORACLE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub mode: Mode,
    pub sources: Vec<SensitivitySource>,
    pub dt: Option<f64>,
    pub sup_norm: SupNorm,
    pub metric: MetricOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Precond,
            sources: SensitivitySource::ALL.to_vec(),
            dt: None,
            sup_norm: SupNorm::Euclidean,
            metric: MetricOptions::default(),
        }
    }
}

impl AnalysisOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            mode: cfg.mode,
            sources: cfg.sources.clone(),
            dt: cfg.dt,
            sup_norm: cfg.sup_norm,
            metric: MetricOptions {
                perfect_is_robust: cfg.perfect_is_robust,
            },
        }
    }

    fn wants(&self, s: SensitivitySource) -> bool {
        self.sources.contains(&s)
    }
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub param: String,
    pub theta_star: f64,
    pub mu: f64,
    pub horizon: f64,
    pub da_norm: f64,
    pub bu_inf: f64,
    pub gt_energy_ode: f64,
    pub gt_energy_fd: f64,
    pub thm1: Option<f64>,
    pub thm2: Option<f64>,
    pub baseline: Option<f64>,
    pub r_gt: Option<f64>,
    pub r_thm1: Option<f64>,
    pub r_baseline: Option<f64>,
    pub flags: Vec<String>,
}

impl SummaryRow {
    pub fn is_ok(&self) -> bool {
        self.flags.first().is_some_and(|f| f == "ok")
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub name: String,
    pub mode: Mode,
    pub theta_star: Vec<f64>,
    pub mu: f64,
    pub horizon: f64,
    pub dt: f64,
    pub error_norm: f64,
    pub transform: Option<TransformInfo>,
    pub reports: Vec<BoundReport>,
    pub metrics: Vec<RobustnessResult>,
    pub rows: Vec<SummaryRow>,
    pub states: Trajectory,
    pub output: Trajectory,
    /// `(parameter name, ∂ȳ/∂θᵢ)` by the forward-sensitivity route.
    pub sensitivities: Vec<(String, Trajectory)>,
}

impl ScenarioResult {
    pub fn metric(&self, source: SensitivitySource) -> Option<&RobustnessResult> {
        self.metrics.iter().find(|m| m.source == source)
    }
}

fn nan_constants(mu: f64, horizon: f64, da_norm: f64, bu_inf: f64, x0_norm: f64) -> BoundConstants {
    BoundConstants {
        k1: f64::NAN,
        k2: f64::NAN,
        k3: f64::NAN,
        mu,
        horizon,
        da_norm,
        bu_inf,
        x0_norm,
    }
}

pub fn analyze_scenario(s: &Scenario, opts: &AnalysisOptions) -> Result<ScenarioResult> {
    s.validate()?;
    let aug = s.augmented()?;
    let theta = s.theta_star().to_vec();
    let names = aug.spec().names().to_vec();
    let horizon = s.horizon;
    let ev = aug.eval(&theta)?;
    let mu = log_norm(&ev.a)?.mu;
    let grid = match opts.dt {
        Some(dt) => TimeGrid::covering(horizon, dt)?,
        None => TimeGrid::default_for(&ev.a, horizon)?,
    };
    let bu_inf = bu_sup_norm(&aug, &s.input, &theta, horizon, opts.sup_norm)?;

    let (states, output) = simulate_augmented(&aug, &theta, &s.input, &grid)?;
    let error_norm = squared_l2(&output, horizon)?.sqrt();

    let needs_thm1 = opts.wants(SensitivitySource::Theorem1)
        && s.params_of_interest
            .iter()
            .any(|&i| aug.dynamics_depend_on(i) && !aug.io_or_initial_depend_on(i));
    let precond: Option<Preconditioner> = if needs_thm1 && !(mu < 0.0) {
        match opts.mode {
            Mode::Strict => return Err(Error::NonNegativeLogNorm { mu }),
            Mode::Precond => {
                let pre = lyapunov_preconditioner(&ev.a)?;
                info!(
                    "{}: mu = {mu:.4e} >= 0, bounding in transformed coordinates (mu = {:.4e}, cond = {:.3e})",
                    s.name, pre.mu_transformed, pre.condition
                );
                Some(pre)
            }
        }
    } else {
        None
    };
    let transform = precond.as_ref().map(|p| TransformInfo {
        condition: p.condition,
        mu_original: p.mu_original,
        mu_transformed: p.mu_transformed,
    });
    let mut gramian_trace: Option<f64> = None;

    let mut reports = Vec::new();
    let mut da_norms = Vec::new();
    let mut sensitivities = Vec::new();
    for &i in &s.params_of_interest {
        let ode = sensitivity_ode(&aug, i, &theta, &s.input, &grid)?;
        let fd = sensitivity_fd(&aug, i, &theta, s.fd_step_for(i), &s.input, &grid)?;
        let gt_ode = l2_energy(&ode, horizon)?.value();
        let gt_fd = l2_energy(&fd, horizon)?.value();
        let da = aug.abar().partial(i, &theta)?;
        let da_norm = norm2(&da);
        let x0_norm = ev.x0.norm();
        // Dynamics bounds assume θᵢ enters only through Ā.
        let dynamics_form = !aug.io_or_initial_depend_on(i);

        let mut flags = Vec::new();
        let mut constants = nan_constants(mu, horizon, da_norm, bu_inf, x0_norm);
        let mut thm1 = None;
        if opts.wants(SensitivitySource::Theorem1) {
            if dynamics_form {
                let terms: Theorem1Terms = match &precond {
                    Some(pre) if da_norm > 0.0 => {
                        theorem1_terms_transformed(&aug, i, &theta, pre, &s.input, horizon, opts.sup_norm)?
                    }
                    _ => theorem1_terms(&aug, i, &theta, bu_inf, horizon)?,
                };
                constants = BoundConstants::from(&terms);
                thm1 = Some(terms.value);
            } else {
                flags.push("thm1_na".to_string());
            }
        }
        let mut thm2 = None;
        if opts.wants(SensitivitySource::Theorem2) {
            let applicable = aug.dynamics_parameter_free()
                && !aug.bbar().depends_on(i)
                && !aug.cbar().depends_on(i)
                && !aug.dbar().depends_on(i);
            if applicable {
                thm2 = Some(theorem2_terms(&aug, i, &theta, true)?.value);
            } else {
                flags.push("thm2_na".to_string());
            }
        }
        let mut baseline = None;
        if opts.wants(SensitivitySource::GramianBaseline) {
            if dynamics_form {
                let value = if da_norm == 0.0 {
                    0.0
                } else {
                    let trace = match gramian_trace {
                        Some(t) => t,
                        None => {
                            let t = gramian_finite(&ev.a, &ev.c, horizon)?.trace();
                            gramian_trace = Some(t);
                            t
                        }
                    };
                    baseline_with_trace(&da, &states, horizon, trace)?.value
                };
                baseline = Some(value);
            } else {
                flags.push("baseline_na".to_string());
            }
        }

        let mut problems = Vec::new();
        for (name, bound) in [("thm1", thm1), ("thm2", thm2), ("baseline", baseline)] {
            if let Some(b) = bound {
                if b < gt_ode {
                    warn!("{}/{}: {name} bound {b:.6e} below ground truth {gt_ode:.6e}", s.name, names[i]);
                    problems.push(format!("{name}_below_gt"));
                }
            }
        }
        if (gt_ode - gt_fd).abs() > ORACLE_TOL * gt_ode.max(1e-12) {
            warn!("{}/{}: oracle mismatch ode {gt_ode:.6e} vs fd {gt_fd:.6e}", s.name, names[i]);
            problems.push("oracle_mismatch".to_string());
        }
        if precond.is_some() && thm1.is_some() {
            flags.push("precond".to_string());
        }
        if problems.is_empty() {
            problems.push("ok".to_string());
        }
        problems.extend(flags);

        reports.push(BoundReport {
            param_index: i,
            param_name: names[i].clone(),
            theta_star: theta[i],
            theorem1: thm1,
            theorem2: thm2,
            gramian_baseline: baseline,
            ground_truth_energy: gt_ode,
            ground_truth_energy_fd: gt_fd,
            constants,
            transform: if thm1.is_some() { transform } else { None },
            flags: problems,
        });
        da_norms.push(da_norm);
        sensitivities.push((names[i].clone(), ode.trajectory));
    }

    let mut metrics = Vec::new();
    for source in SensitivitySource::ALL {
        if source != SensitivitySource::GroundTruth && !opts.wants(source) {
            continue;
        }
        if reports.iter().any(|r| source.energy(r).is_none()) {
            continue;
        }
        match metric_from_bounds(&reports, error_norm, source, opts.metric) {
            Ok(m) => metrics.push(m),
            Err(Error::PerfectEstimator) => {
                warn!("{}: estimation error is zero, metric undefined", s.name);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let r_of = |src: SensitivitySource| metrics.iter().find(|m| m.source == src).map(|m| m.r);

    let rows = reports
        .iter()
        .zip(&da_norms)
        .map(|(rep, &da_norm)| {
            let mut flags = rep.flags.clone();
            if metrics.is_empty() {
                flags.push("perfect_estimator".to_string());
            }
            SummaryRow {
                scenario: s.name.clone(),
                param: rep.param_name.clone(),
                theta_star: rep.theta_star,
                mu,
                horizon,
                da_norm,
                bu_inf,
                gt_energy_ode: rep.ground_truth_energy,
                gt_energy_fd: rep.ground_truth_energy_fd,
                thm1: rep.theorem1,
                thm2: rep.theorem2,
                baseline: rep.gramian_baseline,
                r_gt: r_of(SensitivitySource::GroundTruth),
                r_thm1: r_of(SensitivitySource::Theorem1),
                r_baseline: r_of(SensitivitySource::GramianBaseline),
                flags,
            }
        })
        .collect();

    Ok(ScenarioResult {
        name: s.name.clone(),
        mode: opts.mode,
        theta_star: theta,
        mu,
        horizon,
        dt: grid.dt(),
        error_norm,
        transform,
        reports,
        metrics,
        rows,
        states,
        output,
        sensitivities,
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub results: Vec<ScenarioResult>,
}

impl RunSummary {
    pub fn rows(&self) -> impl Iterator<Item = &SummaryRow> {
        self.results.iter().flat_map(|r| r.rows.iter())
    }
}

/// Analyzes every scenario (concurrently) and writes artifacts in config order.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let scenarios = cfg.resolve_scenarios()?;
    let opts = AnalysisOptions::from_config(cfg);
    let results = scenarios
        .par_iter()
        .map(|s| analyze_scenario(s, &opts))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summary = RunSummary { results };
    report::write_all(&cfg.out_dir, &summary, cfg.write_trajectories)?;
    Ok(summary)
}
