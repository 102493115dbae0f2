use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("slice {slice} of third-order tensor is not skew-symmetric (deviation {deviation:.3e})")]
    NonSkewSlice { slice: usize, deviation: f64 },

    #[error("matrix is not orthogonal (|R^T R - id| = {deviation:.3e}){}", node_suffix(*.node))]
    NotOrthogonal { deviation: f64, node: Option<usize> },

    #[error("grid dimensions {dims:?} too small, every axis needs at least 3 nodes")]
    GridTooSmall { dims: [usize; 3] },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite sample at node {node}")]
    NonFiniteSample { node: usize },

    #[error("stretch tensor is (nearly) singular, det = {det:.3e}{}", node_suffix(*.node))]
    SingularStretch { det: f64, node: Option<usize> },

    #[error("non-finite connection tensor A at node {node}")]
    NonFiniteA { node: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("field is identically zero, Rayleigh quotient undefined")]
    ZeroField,

    #[error("line search stalled at iteration {iteration} (step {step:.3e})")]
    LineSearchStalled { iteration: usize, step: f64 },

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("field file: {0}")]
    FieldFormat(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn node_suffix(node: Option<usize>) -> String {
    match node {
        Some(n) => format!(" at node {n}"),
        None => String::new(),
    }
}
