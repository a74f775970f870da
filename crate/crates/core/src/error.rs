use thiserror::Error;

/// Errors raised by the analysis pipeline.
///
/// Variants fall into two families: precondition rejections (bad shapes,
/// invalid configuration, hypotheses of a bound not met) and numerical
/// failures (singular solves, divergence, non-convergence). The CLI maps
/// them to exit codes 2 and 3 respectively.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("parameter index {index} out of range (p = {nparams})")]
    ParamIndex { index: usize, nparams: usize },

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("matrix is not Hurwitz: spectral abscissa = {abscissa:.6e}")]
    NotHurwitz { abscissa: f64 },

    #[error(
        "log-norm mu = {mu:.6e} is not negative; the bound requires a decaying log-norm \
         (run in preconditioned mode to bound in Lyapunov-transformed coordinates)"
    )]
    NonNegativeLogNorm { mu: f64 },

    #[error("hypothesis not met: {0}")]
    Hypothesis(String),

    #[error("perfect estimator: metric undefined (error norm is zero); R = 1 by convention is available via the `perfect_is_robust` flag")]
    PerfectEstimator,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("simulation diverged at t = {t:.6e} (|x| = {norm:.3e})")]
    Diverged { t: f64, norm: f64 },

    #[error("singular linear system in {0}")]
    Singular(&'static str),

    #[error("{what} did not converge: {detail}")]
    NoConvergence { what: &'static str, detail: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::DimensionMismatch {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            arg,
            reason: reason.into(),
        }
    }

    /// True for numerical failures, false for precondition rejections.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Diverged { .. }
                | Error::Singular(_)
                | Error::NoConvergence { .. }
                | Error::NonFinite(_)
        )
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Csv(_) => 1,
            e if e.is_numerical() => 3,
            _ => 2,
        }
    }
}
