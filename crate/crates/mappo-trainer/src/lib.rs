//! On-policy actor-critic training for the highway merge environment.
//!
//! The crate wires the pieces from the sibling crates into a full training
//! loop: vectorized rollouts with a shared team reward, generalized
//! advantage estimation, a clipped surrogate policy objective with a
//! clipped value loss and an entropy bonus, and Adam updates with global
//! gradient-norm clipping. The critic can either see the concatenated
//! encodings of every agent (centralized training) or only the acting
//! agent's own encoding (fully independent learners); everything else is
//! shared between the two modes.

mod gae;
mod hyper;
mod losses;
mod model;
mod rollout;
mod trainer;

pub use gae::gae;
pub use hyper::Hyperparams;
pub use losses::{build_ppo_loss, clip_fraction, LossInputs, LossNodes};
pub use model::{CriticScope, EncoderKind, FeatureMask, ModelConfig, PolicyModel};
pub use rollout::RolloutBatch;
pub use trainer::{evaluate_policy, EpochMetrics, EvalReport, TrainError, Trainer};
