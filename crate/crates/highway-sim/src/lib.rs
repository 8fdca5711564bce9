//! Deterministic highway on-ramp merge simulation.
//!
//! A straight two-lane highway segment with a parallel acceleration ramp.
//! Controllable autonomous vehicles (CAVs) merge from the ramp and drive
//! among scripted human-driven vehicles (HDVs) and one scripted priority
//! vehicle (PV) that runs well above the surrounding traffic's speed and
//! never yields. Agents pick one of five meta-actions per 1 Hz policy step;
//! physics integrates at a finer fixed substep underneath.
//!
//! Everything is seeded: identical `(config, seed, action sequence)` triples
//! reproduce bit-identical trajectories.

mod config;
mod error;
mod idm;
mod obs;
mod reward;
mod trajectory;
mod vehicle;
mod world;

pub use config::{
    CavControl, IdmParams, MobilParams, RewardWeights, RoadGeometry, ScenarioConfig,
    ScenarioOverrides, SpawnConfig, Speeds, Timing, VehicleDims,
};
pub use error::{ConfigError, SimError};
pub use idm::{hdv_control, idm_accel, mobil_lane_decision, pv_control};
pub use obs::{observe, ObservationMatrix};
pub use reward::{compute_reward, RewardBreakdown};
pub use trajectory::{TrajectoryWriter, TRAJECTORY_HEADER};
pub use vehicle::{AgentAction, Maneuver, VehicleKind, VehicleRecord};
pub use world::{collision_pairs, HighwayEnv, StepEvents, StepOutput};
