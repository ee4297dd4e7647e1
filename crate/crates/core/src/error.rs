use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "fit did not converge after {iterations} iterations (last max change {last_change:.3e})"
    )]
    NotConverged {
        iterations: usize,
        last_change: f64,
        /// Last iterate: intercept followed by slopes.
        last_iterate: Vec<f64>,
    },

    #[error("degenerate response: {0}")]
    DegenerateResponse(String),

    #[error("saturated fit: variance weight vanishes at observation {index}")]
    SaturatedFit { index: usize },

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("lasso did not converge: duality gap {gap:.3e} after {sweeps} sweeps")]
    LassoNotConverged { gap: f64, sweeps: usize },

    #[error("solution path cycles at tau = {tau}")]
    PathCycling { tau: f64 },

    #[error("selection event inconsistency: {0}")]
    SelectionEvent(String),

    #[error("truncation support too remote from the mean (mu = {mu}, sd = {sd}) to evaluate")]
    SupportTooRemote { mu: f64, sd: f64 },

    #[error("singular information matrix")]
    SingularInformation,

    #[error("no covariates selected")]
    EmptyModel,

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Data(_) | Error::DegenerateResponse(_) | Error::Io(_) => 3,
            Error::EmptyModel => 4,
            _ => 5,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
