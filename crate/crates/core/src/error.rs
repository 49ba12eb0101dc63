use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("radius {r} does not lie outside the horizon 2M = {horizon}")]
    InsideHorizon { r: f64, horizon: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root finder did not converge for s = {s} after {iterations} iterations")]
    NoConvergence { s: f64, iterations: usize },

    #[error("grid [{s_min}, {s_max}] cannot hold a run to t = {t_max}: need |s| >= {required}")]
    GridTooSmall {
        s_min: f64,
        s_max: f64,
        t_max: f64,
        required: f64,
    },

    #[error("comparison solution evaluated at t = {t}, at or past its blow-up time {blowup}")]
    PastBlowup { t: f64, blowup: f64 },

    #[error("{0} usable points, a fit needs at least 3")]
    InsufficientPoints(usize),

    #[error("asymptotic ratio is not bounded away from 0 and infinity: {0}")]
    UnboundedRatio(String),

    #[error(
        "run at epsilon = {epsilon} reached the grid boundary at t = {t}; enlarge tmax or the grid"
    )]
    BoundaryContact { epsilon: f64, t: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
