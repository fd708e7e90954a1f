use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("ODE step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("non-finite value encountered at t = {t}: {context}")]
    NonFinite { t: f64, context: String },

    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),

    #[error("wavefunction reached the grid boundary at t = {t} (edge/peak = {ratio:e})")]
    BoundaryLeak { t: f64, ratio: f64 },

    #[error("jump probability {probability} per step exceeds 0.1; reduce dt (kappa = {kappa}, dt = {dt})")]
    JumpProbabilityTooLarge { probability: f64, kappa: f64, dt: f64 },

    #[error("Fock cutoff {n_max} too small: leakage {leakage:e} exceeds {tolerance:e}")]
    FockLeakage { n_max: usize, leakage: f64, tolerance: f64 },

    #[error("incompatible inputs: {0}")]
    Mismatch(String),

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("no stroboscopic period: drive frequencies are not commensurate; supply an explicit period")]
    Incommensurate,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field, reason: reason.into() }
    }
}
