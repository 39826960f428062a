use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: need at least 3 subdivisions per axis, got {0}")]
    InvalidGrid(usize),

    #[error("invalid Lebesgue exponent {0}: must be >= 1")]
    InvalidExponent(f64),

    #[error("fields live on different grids (n = {left} vs n = {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {final_residual:e})")]
    SolverFailure {
        iterations: usize,
        final_residual: f64,
        /// Relative residual after every iteration.
        residual_history: Vec<f64>,
    },

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("constant estimation failed: every sampled field had zero W^{{2,3}} norm")]
    EstimationFailure,

    #[error("field lies outside the ball: norm {norm} > radius {radius}")]
    OutsideBall { norm: f64, radius: f64 },

    #[error("initialization failed: no point on the ray t*e has negative energy")]
    InitializationFailure,

    #[error("forcing too large: ||h||_L3 = {h_norm} exceeds admissible bound m = {m}")]
    ForcingTooLarge { h_norm: f64, m: f64 },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }
}
