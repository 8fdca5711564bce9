//! Minimal dense-matrix math with reverse-mode automatic differentiation.
//!
//! Everything is a 2-D row-major `f64` matrix ([`Tensor`]); scalars are 1x1.
//! Differentiable computations are recorded on a [`Tape`] and differentiated
//! with a single reverse sweep. Named parameters live in a [`ParamStore`],
//! are updated by [`adam_step`], and round-trip through a small binary
//! snapshot format. [`finite_diff_check`] verifies any tape-built scalar
//! against central finite differences.

mod error;
mod gradcheck;
mod optim;
mod snapshot;
mod store;
mod tape;
mod tensor;

pub use error::TensorError;
pub use gradcheck::{finite_diff_check, finite_diff_check_subset};
pub use optim::{adam_step, clip_grad_norm, AdamParams, AdamState};
pub use snapshot::{
    load_params, load_params_from_path, save_params, save_params_to_path, SNAPSHOT_MAGIC,
    SNAPSHOT_VERSION,
};
pub use store::{ParamId, ParamStore};
pub use tape::{GradMap, NodeId, Tape};
pub use tensor::{log_softmax_row_into, softmax_row_into, Tensor};
