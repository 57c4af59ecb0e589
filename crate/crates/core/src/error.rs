use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate coupling vector: all Rabi frequencies vanish")]
    DegenerateCouplings,

    #[error("gauge discontinuity: frame overlap {overlap:.3e} below {threshold}")]
    GaugeDiscontinuity { overlap: f64, threshold: f64 },

    #[error("loop is not closed: first and last vertices differ by {0:.3e}")]
    OpenLoop(f64),

    #[error("loop base point must have every theta equal to zero")]
    BasePoint,

    #[error("loop leaves the {0} chart")]
    ChartViolation(String),

    #[error("requested angle {angle} exceeds single-rectangle capacity {capacity}")]
    CapacityExceeded { angle: f64, capacity: f64 },

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("integrator step size underflow at t = {t} (h = {h:.3e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("encoding failure: {0}")]
    Encoding(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
