use thiserror::Error;

/// Everything that can go wrong across the crate.
///
/// Validation problems (bad inputs, unsatisfiable requests) are distinct from
/// numerical failures (iteration limits, singular systems); the CLI maps the
/// former to exit code 1 and the latter to exit code 2.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("point {point} lies outside the design interval [{lower}, {upper}]")]
    OutOfDomain { point: f64, lower: f64, upper: f64 },

    #[error("bad design weights: {reason}")]
    BadWeights { reason: String },

    #[error("bad design space: {reason}")]
    BadSpace { reason: String },

    #[error("need at least {support} runs to cover {support} support points, got {n}")]
    TooFewRuns { n: usize, support: usize },

    #[error("parameter vector has length {got}, model expects {expected}")]
    BadTheta { expected: usize, got: usize },

    #[error("bad model: {reason}")]
    BadModel { reason: String },

    #[error("basis is not a Chebyshev system on the design interval")]
    NotChebyshev,

    #[error("no convergence after {iterations} iterations (residual gap {gap:.3e})")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error("expected {expected} extremal points, found {found}")]
    WrongAlternationCount { expected: usize, found: usize },

    #[error("optimal-design polytope is empty: no nonnegative solution on the extremal set")]
    EmptyPolytope,

    #[error("extremal set has {size} points, exceeding the enumeration cap of {cap}")]
    CombinatorialBlowup { size: usize, cap: usize },

    #[error("reduced-model information matrix is numerically singular (det {det:.3e})")]
    SingularReduced { det: f64 },

    #[error("degenerate problem: {reason}")]
    Degenerate { reason: String },

    #[error("design cannot identify the model: {reason}")]
    DegenerateDesign { reason: String },

    #[error("bad simulation config: {reason}")]
    BadSimConfig { reason: String },

    #[error("bad problem spec: {reason}")]
    BadSpec { reason: String },

    #[error("nonlinear fit failed: {reason}")]
    FitFailure { reason: String },
}

impl Error {
    /// CLI exit code: 1 for validation errors, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::OutOfDomain { .. }
            | Error::BadWeights { .. }
            | Error::BadSpace { .. }
            | Error::TooFewRuns { .. }
            | Error::BadTheta { .. }
            | Error::BadModel { .. }
            | Error::BadSimConfig { .. }
            | Error::BadSpec { .. } => 1,
            _ => 2,
        }
    }

    /// Short machine-readable tag used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::BadWeights { .. } => "bad_weights",
            Error::BadSpace { .. } => "bad_space",
            Error::TooFewRuns { .. } => "too_few_runs",
            Error::BadTheta { .. } => "bad_theta",
            Error::BadModel { .. } => "bad_model",
            Error::NotChebyshev => "not_chebyshev",
            Error::NoConvergence { .. } => "no_convergence",
            Error::WrongAlternationCount { .. } => "wrong_alternation_count",
            Error::EmptyPolytope => "empty_polytope",
            Error::CombinatorialBlowup { .. } => "combinatorial_blowup",
            Error::SingularReduced { .. } => "singular_reduced",
            Error::Degenerate { .. } => "degenerate",
            Error::DegenerateDesign { .. } => "degenerate_design",
            Error::BadSimConfig { .. } => "bad_sim_config",
            Error::BadSpec { .. } => "bad_spec",
            Error::FitFailure { .. } => "fit_failure",
        }
    }
}
