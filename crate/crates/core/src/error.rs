use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid {rows}x{cols} is degenerate (need rows, cols >= 1 and at least 2 nodes)")]
    DegenerateGrid { rows: usize, cols: usize },

    #[error("edge {edge} is outside the grid ({num_edges} edges)")]
    EdgeOutOfRange { edge: usize, num_edges: usize },

    #[error("invalid cycle: {0}")]
    InvalidCycle(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{what}: expected length {expected}, got {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("labeling is not a valid multicut ({violated} active edges join nodes of one component)")]
    InfeasibleLabeling { violated: usize },

    #[error("solver backend `{0}` is not available")]
    BackendUnavailable(String),

    #[error("solver backend error: {0}")]
    Backend(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("synthetic masks overlap at node ({row}, {col})")]
    OverlappingMasks { row: usize, col: usize },

    #[error("report format error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse { offset, message: message.into() }
    }
}
