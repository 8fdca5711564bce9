use thiserror::Error;

/// Errors produced by tensor construction, tape operations, optimization and
/// snapshot I/O.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("a {rows}x{cols} tensor needs {expected} entries, got {actual}")]
    InvalidBuffer {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },

    #[error("tensor dimensions must be positive, got {rows}x{cols}")]
    ZeroDim { rows: usize, cols: usize },

    #[error("{op}: expected a 1x1 scalar node, got {rows}x{cols}")]
    NonScalar {
        op: &'static str,
        rows: usize,
        cols: usize,
    },

    #[error("{op}: invalid argument: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),

    #[error("duplicate parameter `{0}`")]
    DuplicateParam(String),

    #[error("missing gradient for parameter `{0}`")]
    MissingGradient(String),

    #[error("gradient for `{name}` is {grad_rows}x{grad_cols} but the parameter is {param_rows}x{param_cols}")]
    GradientShape {
        name: String,
        grad_rows: usize,
        grad_cols: usize,
        param_rows: usize,
        param_cols: usize,
    },

    #[error("snapshot i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, a: &crate::Tensor, b: &crate::Tensor) -> Self {
        TensorError::ShapeMismatch {
            op,
            left_rows: a.rows(),
            left_cols: a.cols(),
            right_rows: b.rows(),
            right_cols: b.cols(),
        }
    }
}
