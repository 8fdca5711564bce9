//! Actor and critic networks.
//!
//! Both are three-layer perceptrons on the [`tensor_core`] tape with tanh
//! hidden activations. The actor ends in a tanh as well, so its action
//! logits are bounded to `[-1, 1]` — the policy can never collapse to a
//! deterministic distribution, which keeps exploration alive without an
//! entropy floor. The critic ends linear and emits one scalar value per
//! input row.
//!
//! [`ActionDistribution`] turns logit rows into categorical distributions
//! using exactly the same softmax kernels the tape uses, so probabilities
//! recorded during rollouts match what a training-time graph recomputes bit
//! for bit.

mod distribution;
mod mlp;

pub use distribution::ActionDistribution;
pub use mlp::Mlp;
