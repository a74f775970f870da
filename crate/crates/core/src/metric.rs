//! Robustness distance `d_R = Σ θᵢ*·‖∂ȳ/∂θᵢ‖ / ‖ȳ‖` and metric `R = 1/(1+d_R)`.
//!
//! Norms of signals are L²[0,N] norms, i.e. square roots of energies.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::error::{Error, Result};

/// Where a sensitivity norm came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivitySource {
    GroundTruth,
    Theorem1,
    Theorem2,
    GramianBaseline,
}

impl SensitivitySource {
    pub const ALL: [SensitivitySource; 4] = [
        SensitivitySource::GroundTruth,
        SensitivitySource::Theorem1,
        SensitivitySource::Theorem2,
        SensitivitySource::GramianBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SensitivitySource::GroundTruth => "ground_truth",
            SensitivitySource::Theorem1 => "theorem1",
            SensitivitySource::Theorem2 => "theorem2",
            SensitivitySource::GramianBaseline => "gramian_baseline",
        }
    }

    /// Energy for this source out of a report, if present.
    pub fn energy(self, report: &BoundReport) -> Option<f64> {
        match self {
            SensitivitySource::GroundTruth => Some(report.ground_truth_energy),
            SensitivitySource::Theorem1 => report.theorem1,
            SensitivitySource::Theorem2 => report.theorem2,
            SensitivitySource::GramianBaseline => report.gramian_baseline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricTerm {
    pub theta_star: f64,
    pub sens_norm: f64,
    pub err_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Contribution {
    pub param_index: usize,
    pub theta_star: f64,
    pub sensitivity_norm: f64,
    pub error_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessResult {
    pub d_r: f64,
    pub r: f64,
    pub contributions: Vec<Contribution>,
    pub source: SensitivitySource,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricOptions {
    /// Report `R = 1` instead of failing when the nominal error is zero.
    pub perfect_is_robust: bool,
}

fn contribution(param_index: usize, term: &MetricTerm, opts: MetricOptions) -> Result<Contribution> {
    let MetricTerm {
        theta_star,
        sens_norm,
        err_norm,
    } = *term;
    if !(sens_norm >= 0.0) || !sens_norm.is_finite() {
        return Err(Error::invalid("sens_norm", format!("must be finite and nonnegative, got {sens_norm}")));
    }
    if !theta_star.is_finite() {
        return Err(Error::invalid("theta_star", "must be finite"));
    }
    if !(err_norm >= 0.0) || !err_norm.is_finite() {
        return Err(Error::invalid("err_norm", format!("must be finite and nonnegative, got {err_norm}")));
    }
    if err_norm == 0.0 {
        if opts.perfect_is_robust {
            return Ok(Contribution {
                param_index,
                theta_star,
                sensitivity_norm: sens_norm,
                error_norm: err_norm,
                value: 0.0,
            });
        }
        return Err(Error::PerfectEstimator);
    }
    if theta_star == 0.0 {
        warn!("parameter {param_index}: nominal value is 0, metric is blind to it");
    } else if theta_star < 0.0 {
        warn!("parameter {param_index}: negative nominal value {theta_star}, using its magnitude");
    }
    Ok(Contribution {
        param_index,
        theta_star,
        sensitivity_norm: sens_norm,
        error_norm: err_norm,
        value: theta_star.abs() * sens_norm / err_norm,
    })
}

pub fn robustness_distance(terms: &[MetricTerm]) -> Result<f64> {
    let mut d = 0.0;
    for (i, t) in terms.iter().enumerate() {
        d += contribution(i, t, MetricOptions::default())?.value;
    }
    Ok(d)
}

pub fn robustness_metric(d_r: f64) -> Result<f64> {
    if !(d_r >= 0.0) {
        return Err(Error::invalid("d_R", format!("must be nonnegative, got {d_r}")));
    }
    Ok(1.0 / (1.0 + d_r))
}

/// Builds the full result from `(param_index, term)` pairs.
pub fn robustness_from_terms(
    terms: &[(usize, MetricTerm)],
    source: SensitivitySource,
    opts: MetricOptions,
) -> Result<RobustnessResult> {
    let contributions = terms
        .iter()
        .map(|(i, t)| contribution(*i, t, opts))
        .collect::<Result<Vec<_>>>()?;
    let d_r = contributions.iter().map(|c| c.value).sum();
    Ok(RobustnessResult {
        d_r,
        r: robustness_metric(d_r)?,
        contributions,
        source,
    })
}

/// Metric with `√energy` of the chosen source as each sensitivity norm.
pub fn metric_from_bounds(
    reports: &[BoundReport],
    err_norm: f64,
    source: SensitivitySource,
    opts: MetricOptions,
) -> Result<RobustnessResult> {
    let terms = reports
        .iter()
        .map(|rep| {
            let energy = source.energy(rep).ok_or_else(|| {
                Error::invalid(
                    "source",
                    format!("no {} value for parameter {}", source.as_str(), rep.param_name),
                )
            })?;
            Ok((
                rep.param_index,
                MetricTerm {
                    theta_star: rep.theta_star,
                    sens_norm: energy.max(0.0).sqrt(),
                    err_norm,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    robustness_from_terms(&terms, source, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundConstants;
    use proptest::prelude::*;

    fn term(theta_star: f64, sens_norm: f64, err_norm: f64) -> MetricTerm {
        MetricTerm {
            theta_star,
            sens_norm,
            err_norm,
        }
    }

    fn report(idx: usize, theta: f64, gt: f64, t2: Option<f64>) -> BoundReport {
        BoundReport {
            param_index: idx,
            param_name: format!("p{idx}"),
            theta_star: theta,
            theorem1: None,
            theorem2: t2,
            gramian_baseline: None,
            ground_truth_energy: gt,
            ground_truth_energy_fd: gt,
            constants: BoundConstants {
                k1: 0.0,
                k2: 0.0,
                k3: 0.0,
                mu: -1.0,
                horizon: 1.0,
                da_norm: 0.0,
                bu_inf: 0.0,
                x0_norm: 0.0,
            },
            transform: None,
            flags: vec![],
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(robustness_distance(&[term(2.0, 0.0, 1.0), term(1.0, 0.0, 3.0)]).unwrap(), 0.0);
        assert!((robustness_distance(&[term(2.0, 0.3, 0.6)]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(robustness_distance(&[term(1.0, 0.5, 1.0), term(1.0, 0.5, 1.0)]).unwrap(), 1.0);
    }

    #[test]
    fn metric_examples() {
        assert_eq!(robustness_metric(0.0).unwrap(), 1.0);
        assert_eq!(robustness_metric(1.0).unwrap(), 0.5);
        assert_eq!(robustness_metric(3.0).unwrap(), 0.25);
        assert!(robustness_metric(-0.1).is_err());
    }

    #[test]
    fn perfect_estimator() {
        assert!(matches!(
            robustness_distance(&[term(1.0, 0.1, 0.0)]),
            Err(Error::PerfectEstimator)
        ));
        let opts = MetricOptions {
            perfect_is_robust: true,
        };
        let r = robustness_from_terms(&[(0, term(1.0, 0.1, 0.0))], SensitivitySource::GroundTruth, opts).unwrap();
        assert_eq!(r.r, 1.0);
    }

    #[test]
    fn negative_and_zero_nominal() {
        let d = robustness_distance(&[term(-2.0, 0.3, 0.6), term(0.0, 5.0, 1.0)]).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_bounds() {
        let reps = [report(0, 1.0, 0.5, Some(2.0))];
        let r = metric_from_bounds(&reps, 1.0, SensitivitySource::Theorem2, MetricOptions::default()).unwrap();
        assert!((r.d_r - 2f64.sqrt()).abs() < 1e-15);
        assert!((r.r - 0.41421).abs() < 1e-5);
        assert!(metric_from_bounds(&reps, 1.0, SensitivitySource::Theorem1, MetricOptions::default()).is_err());

        let zeros = [report(0, 1.0, 0.0, Some(0.0)), report(1, 0.5, 0.0, Some(0.0))];
        let r = metric_from_bounds(&zeros, 0.3, SensitivitySource::Theorem2, MetricOptions::default()).unwrap();
        assert_eq!(r.r, 1.0);

        let reps = [report(0, 0.5, 0.09, None), report(1, 2.0, 0.16, None)];
        let via_bounds = metric_from_bounds(&reps, 0.7, SensitivitySource::GroundTruth, MetricOptions::default()).unwrap();
        let d = robustness_distance(&[term(0.5, 0.3, 0.7), term(2.0, 0.4, 0.7)]).unwrap();
        assert_eq!(via_bounds.d_r, d);
        assert_eq!(via_bounds.r, robustness_metric(d).unwrap());
        assert_eq!(via_bounds.contributions.len(), 2);
    }

    proptest! {
        #[test]
        fn metric_in_unit_interval(d in 0.0f64..1e6) {
            let r = robustness_metric(d).unwrap();
            prop_assert!(r > 0.0 && r <= 1.0);
            prop_assert_eq!(r == 1.0, d == 0.0);
        }

        #[test]
        fn metric_decreases_with_each_sensitivity(
            thetas in proptest::collection::vec(0.01f64..5.0, 1..5),
            sens in proptest::collection::vec(0.0f64..5.0, 5),
            pick in 0usize..5,
            bump in 0.01f64..2.0,
        ) {
            let terms: Vec<_> = thetas.iter().zip(&sens).map(|(&t, &s)| term(t, s, 1.3)).collect();
            let k = pick % terms.len();
            let mut bumped = terms.clone();
            bumped[k].sens_norm += bump;
            let r0 = robustness_metric(robustness_distance(&terms).unwrap()).unwrap();
            let r1 = robustness_metric(robustness_distance(&bumped).unwrap()).unwrap();
            prop_assert!(r1 < r0);
        }
    }
}
