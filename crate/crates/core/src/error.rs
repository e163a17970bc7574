use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("field data has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The A-equation iteration ran out of budget or stopped decreasing its residual.
    #[error("A-equation solve did not converge after {iterations} iterations: {reason} (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        reason: &'static str,
    },

    #[error("Picard iteration stalled after {iterates} iterates (relative update {update:e}); try a smaller dt")]
    PicardNonConvergence { iterates: usize, update: f64 },

    #[error("field solve failed at t = {t}: {source}")]
    FieldSolveFailure {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("H1 norm {h1:e} exceeded blow-up guard {guard:e} at t = {t}")]
    BlowUpGuardTriggered { t: f64, h1: f64, guard: f64 },

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
