//! Attention encoder for local traffic observations.
//!
//! Turns an `N x X` observation matrix — one row per observed vehicle, the
//! observer first — into a single `1 x (N*X)` feature vector through
//! multi-head scaled dot-product self-attention over the rows, a linear
//! mixing layer, and a final fully connected layer on the flattened
//! representation. Deliberately minimal: no residual connections, no
//! normalization layers, no bias terms, and no masking — zero padding rows
//! attend and are attended to like any other row (their value vectors are
//! zero, so they contribute nothing to the mix).
//!
//! All math runs on the [`tensor_core`] tape, so the encoder is trainable
//! end to end and participates in gradient checking like any other layer.

mod encoder;

pub use encoder::{LsaConfig, LsaEncoder};
