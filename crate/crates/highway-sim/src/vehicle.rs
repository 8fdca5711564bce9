use serde::{Deserialize, Serialize};

/// Who is driving.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleKind {
    /// Controllable agent.
    Cav,
    /// Scripted human-driven vehicle.
    Hdv,
    /// Scripted priority vehicle: fast, never yields.
    Pv,
}

impl VehicleKind {
    pub fn label(self) -> &'static str {
        match self {
            VehicleKind::Cav => "cav",
            VehicleKind::Hdv => "hdv",
            VehicleKind::Pv => "pv",
        }
    }
}

/// The five meta-actions an agent may issue each policy step.
///
/// Lane actions that point at a lane that does not exist there (leftmost
/// lane, or the ramp which may never be re-entered, or a ramp merge outside
/// the merge window) degrade to `Idle`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentAction {
    /// Start a one-step maneuver toward the next lane to the left.
    LaneLeft,
    /// Start a one-step maneuver toward the next lane to the right.
    LaneRight,
    /// Keep the current target speed.
    Idle,
    /// Raise the target speed by `delta_v`.
    Faster,
    /// Lower the target speed by `delta_v`.
    Slower,
}

impl AgentAction {
    pub const COUNT: usize = 5;

    pub const ALL: [AgentAction; 5] = [
        AgentAction::LaneLeft,
        AgentAction::LaneRight,
        AgentAction::Idle,
        AgentAction::Faster,
        AgentAction::Slower,
    ];

    pub fn index(self) -> usize {
        match self {
            AgentAction::LaneLeft => 0,
            AgentAction::LaneRight => 1,
            AgentAction::Idle => 2,
            AgentAction::Faster => 3,
            AgentAction::Slower => 4,
        }
    }

    pub fn from_index(i: usize) -> Option<AgentAction> {
        AgentAction::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            AgentAction::LaneLeft => "lane_left",
            AgentAction::LaneRight => "lane_right",
            AgentAction::Idle => "idle",
            AgentAction::Faster => "faster",
            AgentAction::Slower => "slower",
        }
    }
}

/// An in-progress lane change. The maneuver spans exactly one policy step:
/// the vehicle drifts laterally at `lateral_rate` for the whole step and is
/// snapped onto the target lane's centerline when the step completes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Maneuver {
    pub target_lane: usize,
    pub lateral_rate: f64,
}

/// Complete physical state of one vehicle.
///
/// A crash clears `alive` and freezes the vehicle in place; dead vehicles no
/// longer move, act, appear in observations, or participate in collisions —
/// but they keep counting as stalled agents in the shared reward.
#[derive(Clone, Debug, PartialEq)]
pub struct VehicleRecord {
    pub id: u32,
    pub kind: VehicleKind,
    /// Current lane index (0 = ramp, 1 = right, 2 = left). During a lane
    /// change this stays the departure lane until the maneuver completes.
    pub lane: usize,
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    /// Commanded cruising speed (CAV: set by actions; scripted: fixed).
    pub target_speed: f64,
    pub alive: bool,
    pub maneuver: Option<Maneuver>,
}

impl VehicleRecord {
    /// Lane used for interaction queries (leader search, PV blocking):
    /// vehicles mid-maneuver already claim their target lane.
    pub fn effective_lane(&self) -> usize {
        match self.maneuver {
            Some(m) => m.target_lane,
            None => self.lane,
        }
    }

    pub fn is_agent(&self) -> bool {
        self.kind == VehicleKind::Cav
    }

    pub(crate) fn freeze_crashed(&mut self) {
        self.alive = false;
        self.vx = 0.0;
        self.vy = 0.0;
        self.maneuver = None;
    }
}
