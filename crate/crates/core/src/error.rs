use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("field does not decay at the box boundary (relative amplitude {ratio:.3e} > {tol:.1e})")]
    BoundaryDecay { ratio: f64, tol: f64 },

    #[error("non-convergence after {iterations} iterations (residual {residual:.3e}, target {target:.1e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },

    #[error("construction error: {0}")]
    Construction(String),

    #[error("inconsistent multipliers: pairing route {pairing:.12e}, flow route {flow:.12e}")]
    InconsistentMultiplier { pairing: f64, flow: f64 },

    #[error("blow-up suspected at t = {time}")]
    BlowupSuspected { time: f64 },

    #[error("window too short: {0} valid samples")]
    WindowTooShort(usize),

    #[error("malformed snapshot: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
