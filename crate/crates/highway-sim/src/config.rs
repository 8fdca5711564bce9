use crate::error::ConfigError;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Road layout. Lane indices run right-to-left: 0 is the on-ramp, 1 the
/// right highway lane, 2 the left highway lane. Lane centerlines sit at
/// `lane_width * index`, the ramp is drivable up to `merge_end`, and ramp
/// vehicles may cross into lane 1 only inside `[merge_start, merge_end]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadGeometry {
    pub highway_length: f64,
    pub lane_width: f64,
    pub merge_start: f64,
    pub merge_end: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry {
            highway_length: 520.0,
            lane_width: 4.0,
            merge_start: 200.0,
            merge_end: 310.0,
        }
    }
}

impl RoadGeometry {
    pub fn lane_center_y(&self, lane: usize) -> f64 {
        self.lane_width * lane as f64
    }
}

/// Policy runs at `1 / policy_dt` Hz; physics integrates `substeps` forward
/// Euler steps of `policy_dt / substeps` seconds under each policy step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timing {
    pub policy_dt: f64,
    pub substeps: u32,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            policy_dt: 1.0,
            substeps: 15,
        }
    }
}

impl Timing {
    pub fn sub_dt(&self) -> f64 {
        self.policy_dt / self.substeps as f64
    }
}

/// Speed limits and reference speeds, all in m/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Speeds {
    /// Hard cap for CAVs; also the velocity normalization constant.
    pub v_max_cav: f64,
    /// Hard cap for HDVs.
    pub v_max_hdv: f64,
    /// HDV cruising target.
    pub hdv_target: f64,
    /// PV cruising target (twice the HDV flow by default).
    pub pv_target: f64,
    /// Below this a CAV counts as stalled.
    pub v_stall: f64,
    /// Target-speed increment applied by the speed meta-actions.
    pub delta_v: f64,
    /// Speed at which the reward's speed credit starts; full credit at
    /// `v_max_cav`.
    pub v_reward_min: f64,
}

impl Default for Speeds {
    fn default() -> Self {
        Speeds {
            v_max_cav: 30.0,
            v_max_hdv: 25.0,
            hdv_target: 15.0,
            pv_target: 30.0,
            v_stall: 5.0,
            delta_v: 5.0,
            v_reward_min: 15.0,
        }
    }
}

/// Intelligent Driver Model constants for scripted longitudinal control.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdmParams {
    /// Maximum acceleration (m/s^2).
    pub a_max: f64,
    /// Comfortable braking used in the desired-gap term (m/s^2, positive).
    pub b_comfort: f64,
    /// Desired time headway (s).
    pub headway: f64,
    /// Standstill jam gap (m).
    pub jam_gap: f64,
    /// Free-road exponent.
    pub exponent: i32,
    /// Hard deceleration floor (m/s^2, negative) for emergencies.
    pub a_floor: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        IdmParams {
            a_max: 3.0,
            b_comfort: 5.0,
            headway: 1.5,
            jam_gap: 2.0,
            exponent: 4,
            a_floor: -8.0,
        }
    }
}

/// MOBIL lane-change constants for scripted vehicles.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilParams {
    /// How much an HDV weighs other drivers' losses.
    pub politeness_hdv: f64,
    /// The PV never yields: zero politeness.
    pub politeness_pv: f64,
    /// Safety veto: no change may force anyone below -b_safe (m/s^2).
    pub b_safe: f64,
    /// Minimum net acceleration gain to bother changing lanes (m/s^2).
    pub a_threshold: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        MobilParams {
            politeness_hdv: 0.3,
            politeness_pv: 0.0,
            b_safe: 4.0,
            a_threshold: 0.1,
        }
    }
}

/// Shared-reward weights. The reward is
/// `clamp01(w_speed*S - w_crash*C - w_stall*St - w_weave*W - w_pv*P + offset)`,
/// where S is the mean speed credit over alive agents, C flags a new agent
/// crash, St is the stalled fraction of all agents, W the fraction starting
/// a lane change, and P how hard the PV is being blocked.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardWeights {
    pub w_speed: f64,
    pub w_crash: f64,
    pub w_stall: f64,
    pub w_weave: f64,
    pub w_pv: f64,
    pub offset: f64,
    /// Gap (m) under which a CAV ahead of the PV counts as blocking it.
    pub d_pv: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_speed: 0.5,
            w_crash: 2.0,
            w_stall: 0.5,
            w_weave: 0.1,
            w_pv: 0.5,
            offset: 0.5,
            d_pv: 40.0,
        }
    }
}

/// Spawn placement. Vehicles are laid out lane by lane, rear to front, with
/// random inter-vehicle gaps of `gap_min` plus up to `gap_jitter` extra;
/// jitters are rescaled if the lane would overflow its range. Speed ranges
/// are uniform draws. Two-element arrays are `[low, high]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpawnConfig {
    pub ramp_x: (f64, f64),
    pub highway_x: (f64, f64),
    pub gap_min: f64,
    pub gap_jitter: f64,
    pub cav_ramp_speed: (f64, f64),
    pub cav_highway_speed: (f64, f64),
    pub hdv_speed: (f64, f64),
    pub pv_speed: (f64, f64),
    /// Distance the PV spawns behind the rearmost highway vehicle.
    pub pv_gap: (f64, f64),
}

impl Default for SpawnConfig {
    fn default() -> Self {
        SpawnConfig {
            ramp_x: (10.0, 150.0),
            highway_x: (20.0, 260.0),
            gap_min: 15.0,
            gap_jitter: 25.0,
            cav_ramp_speed: (8.0, 12.0),
            cav_highway_speed: (10.0, 15.0),
            hdv_speed: (12.0, 15.0),
            pv_speed: (20.0, 25.0),
            pv_gap: (25.0, 45.0),
        }
    }
}

/// Collision footprint shared by every vehicle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
}

impl Default for VehicleDims {
    fn default() -> Self {
        VehicleDims {
            length: 5.0,
            width: 2.0,
        }
    }
}

/// CAV longitudinal control: proportional tracking of the commanded target
/// speed, bounded by `[-b_max, a_max]`. Deliberately has no automatic
/// emergency braking — collision avoidance is the agent's job.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavControl {
    pub accel_gain: f64,
    pub a_max: f64,
    pub b_max: f64,
}

impl Default for CavControl {
    fn default() -> Self {
        CavControl {
            accel_gain: 1.5,
            a_max: 3.0,
            b_max: 5.0,
        }
    }
}

/// Full scenario description: traffic mix, observation sizing, and every
/// physical constant. Loads from a sectioned TOML file where any subset of
/// keys may be overridden; see [`ScenarioOverrides`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Preset id this config started from (1..=5), kept for reporting.
    pub scenario: u8,
    /// Number of controllable agents.
    pub n_cav: usize,
    /// Number of scripted human-driven vehicles (the PV is extra).
    pub n_hdv: usize,
    /// Observation rows: self plus the `n_obs - 1` nearest vehicles.
    pub n_obs: usize,
    /// Episode length in policy steps.
    pub horizon: u32,
    /// Sensing radius (m); also the position normalization constant.
    pub sensing_radius: f64,
    /// Append heading-angle features (cos, sin) to every observation row.
    pub include_angles: bool,
    pub road: RoadGeometry,
    pub timing: Timing,
    pub speeds: Speeds,
    pub idm: IdmParams,
    pub mobil: MobilParams,
    pub reward: RewardWeights,
    pub spawn: SpawnConfig,
    pub vehicle: VehicleDims,
    pub cav: CavControl,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: 1,
            n_cav: 2,
            n_hdv: 4,
            n_obs: 4,
            horizon: 120,
            sensing_radius: 90.0,
            include_angles: false,
            road: RoadGeometry::default(),
            timing: Timing::default(),
            speeds: Speeds::default(),
            idm: IdmParams::default(),
            mobil: MobilParams::default(),
            reward: RewardWeights::default(),
            spawn: SpawnConfig::default(),
            vehicle: VehicleDims::default(),
            cav: CavControl::default(),
        }
    }
}

impl ScenarioConfig {
    /// The five standard traffic mixes: (agents, scripted HDVs, observation
    /// rows), each plus one priority vehicle.
    pub fn preset(id: u8) -> Result<Self, ConfigError> {
        let (n_cav, n_hdv, n_obs) = match id {
            1 => (2, 4, 4),
            2 => (3, 3, 4),
            3 => (4, 2, 6),
            4 => (4, 4, 6),
            5 => (6, 6, 6),
            other => return Err(ConfigError::UnknownScenario(other)),
        };
        Ok(ScenarioConfig {
            scenario: id,
            n_cav,
            n_hdv,
            n_obs,
            ..ScenarioConfig::default()
        })
    }

    /// Observation row width: presence, priority flag, relative position
    /// (x, y) and relative velocity (x, y), plus optional heading angles.
    pub fn obs_width(&self) -> usize {
        if self.include_angles {
            8
        } else {
            6
        }
    }

    /// Total vehicles in an episode: agents + HDVs + the PV.
    pub fn total_vehicles(&self) -> usize {
        self.n_cav + self.n_hdv + 1
    }

    /// Agents spawning on the ramp (the rest start on the highway).
    pub fn ramp_cav_count(&self) -> usize {
        self.n_cav.div_ceil(2)
    }

    /// Loads a TOML file and applies it over the preset named by its
    /// `scenario` key (default 1).
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parses overrides from TOML text and applies them over the matching
    /// preset.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let overrides: ScenarioOverrides = toml::from_str(text)?;
        Self::from_overrides(&overrides)
    }

    /// Builds a config from the preset selected by `overrides.scenario`
    /// (default 1) with every present field overridden, then validates.
    pub fn from_overrides(overrides: &ScenarioOverrides) -> Result<Self, ConfigError> {
        let mut cfg = Self::preset(overrides.scenario.unwrap_or(1))?;
        overrides.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every structural invariant; called by every loading path and
    /// by the environment constructor.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue {
                    key,
                    msg: format!("must be positive and finite, got {v}"),
                })
            }
        }
        fn non_negative(key: &'static str, v: f64) -> Result<(), ConfigError> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue {
                    key,
                    msg: format!("must be non-negative and finite, got {v}"),
                })
            }
        }
        fn range(key: &'static str, (lo, hi): (f64, f64)) -> Result<(), ConfigError> {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(ConfigError::InvalidValue {
                    key,
                    msg: format!("must be a [low, high] pair with low <= high, got [{lo}, {hi}]"),
                })
            }
        }

        if self.n_cav == 0 {
            return Err(ConfigError::InvalidValue {
                key: "n_cav",
                msg: "at least one agent is required".into(),
            });
        }
        if self.n_obs == 0 {
            return Err(ConfigError::InvalidValue {
                key: "n_obs",
                msg: "at least the self row is required".into(),
            });
        }
        if self.horizon == 0 {
            return Err(ConfigError::InvalidValue {
                key: "horizon",
                msg: "episodes need at least one step".into(),
            });
        }
        if self.timing.substeps == 0 {
            return Err(ConfigError::InvalidValue {
                key: "timing.substeps",
                msg: "at least one physics substep per policy step".into(),
            });
        }
        positive("timing.policy_dt", self.timing.policy_dt)?;
        positive("sensing_radius", self.sensing_radius)?;
        positive("road.highway_length", self.road.highway_length)?;
        positive("road.lane_width", self.road.lane_width)?;
        if !(0.0 < self.road.merge_start
            && self.road.merge_start < self.road.merge_end
            && self.road.merge_end < self.road.highway_length)
        {
            return Err(ConfigError::InvalidValue {
                key: "road.merge_start/merge_end",
                msg: format!(
                    "need 0 < merge_start < merge_end < highway_length, got {} / {} / {}",
                    self.road.merge_start, self.road.merge_end, self.road.highway_length
                ),
            });
        }

        positive("speeds.v_max_cav", self.speeds.v_max_cav)?;
        positive("speeds.v_max_hdv", self.speeds.v_max_hdv)?;
        positive("speeds.hdv_target", self.speeds.hdv_target)?;
        positive("speeds.pv_target", self.speeds.pv_target)?;
        non_negative("speeds.v_stall", self.speeds.v_stall)?;
        positive("speeds.delta_v", self.speeds.delta_v)?;
        if !(self.speeds.v_reward_min >= 0.0 && self.speeds.v_reward_min < self.speeds.v_max_cav) {
            return Err(ConfigError::InvalidValue {
                key: "speeds.v_reward_min",
                msg: format!(
                    "must lie in [0, v_max_cav), got {} with v_max_cav {}",
                    self.speeds.v_reward_min, self.speeds.v_max_cav
                ),
            });
        }

        positive("idm.a_max", self.idm.a_max)?;
        positive("idm.b_comfort", self.idm.b_comfort)?;
        non_negative("idm.headway", self.idm.headway)?;
        non_negative("idm.jam_gap", self.idm.jam_gap)?;
        if self.idm.exponent < 1 {
            return Err(ConfigError::InvalidValue {
                key: "idm.exponent",
                msg: format!("must be >= 1, got {}", self.idm.exponent),
            });
        }
        if !(self.idm.a_floor < 0.0) {
            return Err(ConfigError::InvalidValue {
                key: "idm.a_floor",
                msg: format!("must be negative, got {}", self.idm.a_floor),
            });
        }

        non_negative("mobil.politeness_hdv", self.mobil.politeness_hdv)?;
        non_negative("mobil.politeness_pv", self.mobil.politeness_pv)?;
        positive("mobil.b_safe", self.mobil.b_safe)?;
        non_negative("mobil.a_threshold", self.mobil.a_threshold)?;

        non_negative("reward.w_speed", self.reward.w_speed)?;
        non_negative("reward.w_crash", self.reward.w_crash)?;
        non_negative("reward.w_stall", self.reward.w_stall)?;
        non_negative("reward.w_weave", self.reward.w_weave)?;
        non_negative("reward.w_pv", self.reward.w_pv)?;
        positive("reward.d_pv", self.reward.d_pv)?;

        positive("vehicle.length", self.vehicle.length)?;
        positive("vehicle.width", self.vehicle.width)?;
        if self.vehicle.width >= self.road.lane_width {
            return Err(ConfigError::InvalidValue {
                key: "vehicle.width",
                msg: "vehicles must be narrower than a lane".into(),
            });
        }

        positive("cav.accel_gain", self.cav.accel_gain)?;
        positive("cav.a_max", self.cav.a_max)?;
        positive("cav.b_max", self.cav.b_max)?;

        range("spawn.ramp_x", self.spawn.ramp_x)?;
        range("spawn.highway_x", self.spawn.highway_x)?;
        range("spawn.cav_ramp_speed", self.spawn.cav_ramp_speed)?;
        range("spawn.cav_highway_speed", self.spawn.cav_highway_speed)?;
        range("spawn.hdv_speed", self.spawn.hdv_speed)?;
        range("spawn.pv_speed", self.spawn.pv_speed)?;
        range("spawn.pv_gap", self.spawn.pv_gap)?;
        non_negative("spawn.gap_jitter", self.spawn.gap_jitter)?;
        if self.spawn.gap_min < self.vehicle.length + 1.0 {
            return Err(ConfigError::InvalidValue {
                key: "spawn.gap_min",
                msg: format!(
                    "must exceed the vehicle length plus 1 m ({} m), got {}",
                    self.vehicle.length + 1.0,
                    self.spawn.gap_min
                ),
            });
        }
        if self.spawn.ramp_x.1 > self.road.merge_end {
            return Err(ConfigError::InvalidValue {
                key: "spawn.ramp_x",
                msg: "ramp spawns must lie before the ramp end".into(),
            });
        }

        // Capacity: every lane must fit its vehicles at minimum gaps.
        let ramp_count = self.ramp_cav_count();
        self.check_lane_capacity(0, ramp_count, self.spawn.ramp_x)?;
        let highway_total = (self.n_cav - ramp_count) + self.n_hdv;
        let per_lane_worst = highway_total.div_ceil(2);
        for lane in 1..=2 {
            self.check_lane_capacity(lane, per_lane_worst, self.spawn.highway_x)?;
        }
        Ok(())
    }

    fn check_lane_capacity(
        &self,
        lane: usize,
        count: usize,
        (lo, hi): (f64, f64),
    ) -> Result<(), ConfigError> {
        if count <= 1 {
            return Ok(());
        }
        let needed = (count - 1) as f64 * self.spawn.gap_min;
        let available = hi - lo;
        if needed > available {
            return Err(ConfigError::SpawnCapacity {
                lane,
                count,
                needed,
                available,
            });
        }
        Ok(())
    }
}

/// Partial config: every field optional, for TOML files and CLI layering.
/// Unknown keys are rejected so typos fail loudly instead of silently using
/// defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    pub scenario: Option<u8>,
    pub n_cav: Option<usize>,
    pub n_hdv: Option<usize>,
    pub n_obs: Option<usize>,
    pub horizon: Option<u32>,
    pub sensing_radius: Option<f64>,
    pub include_angles: Option<bool>,
    #[serde(default)]
    pub road: RoadOverrides,
    #[serde(default)]
    pub timing: TimingOverrides,
    #[serde(default)]
    pub speeds: SpeedsOverrides,
    #[serde(default)]
    pub idm: IdmOverrides,
    #[serde(default)]
    pub mobil: MobilOverrides,
    #[serde(default)]
    pub reward: RewardOverrides,
    #[serde(default)]
    pub spawn: SpawnOverrides,
    #[serde(default)]
    pub vehicle: VehicleOverrides,
    #[serde(default)]
    pub cav: CavOverrides,
}

macro_rules! overrides_section {
    ($name:ident { $($field:ident : $ty:ty),+ $(,)? } applies $section:ident) => {
        #[derive(Clone, Copy, Debug, Default, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            $(pub $field: Option<$ty>,)+
        }
        impl $name {
            fn apply(&self, cfg: &mut ScenarioConfig) {
                $(if let Some(v) = self.$field {
                    cfg.$section.$field = v;
                })+
            }
        }
    };
}

overrides_section!(RoadOverrides {
    highway_length: f64,
    lane_width: f64,
    merge_start: f64,
    merge_end: f64,
} applies road);

overrides_section!(TimingOverrides {
    policy_dt: f64,
    substeps: u32,
} applies timing);

overrides_section!(SpeedsOverrides {
    v_max_cav: f64,
    v_max_hdv: f64,
    hdv_target: f64,
    pv_target: f64,
    v_stall: f64,
    delta_v: f64,
    v_reward_min: f64,
} applies speeds);

overrides_section!(IdmOverrides {
    a_max: f64,
    b_comfort: f64,
    headway: f64,
    jam_gap: f64,
    exponent: i32,
    a_floor: f64,
} applies idm);

overrides_section!(MobilOverrides {
    politeness_hdv: f64,
    politeness_pv: f64,
    b_safe: f64,
    a_threshold: f64,
} applies mobil);

overrides_section!(RewardOverrides {
    w_speed: f64,
    w_crash: f64,
    w_stall: f64,
    w_weave: f64,
    w_pv: f64,
    offset: f64,
    d_pv: f64,
} applies reward);

overrides_section!(SpawnOverrides {
    ramp_x: (f64, f64),
    highway_x: (f64, f64),
    gap_min: f64,
    gap_jitter: f64,
    cav_ramp_speed: (f64, f64),
    cav_highway_speed: (f64, f64),
    hdv_speed: (f64, f64),
    pv_speed: (f64, f64),
    pv_gap: (f64, f64),
} applies spawn);

overrides_section!(VehicleOverrides {
    length: f64,
    width: f64,
} applies vehicle);

overrides_section!(CavOverrides {
    accel_gain: f64,
    a_max: f64,
    b_max: f64,
} applies cav);

impl ScenarioOverrides {
    /// Overwrites every field present in `self` onto `cfg`.
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(v) = self.scenario {
            cfg.scenario = v;
        }
        if let Some(v) = self.n_cav {
            cfg.n_cav = v;
        }
        if let Some(v) = self.n_hdv {
            cfg.n_hdv = v;
        }
        if let Some(v) = self.n_obs {
            cfg.n_obs = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.sensing_radius {
            cfg.sensing_radius = v;
        }
        if let Some(v) = self.include_angles {
            cfg.include_angles = v;
        }
        self.road.apply(cfg);
        self.timing.apply(cfg);
        self.speeds.apply(cfg);
        self.idm.apply(cfg);
        self.mobil.apply(cfg);
        self.reward.apply(cfg);
        self.spawn.apply(cfg);
        self.vehicle.apply(cfg);
        self.cav.apply(cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_the_standard_traffic_table() {
        let expect = [(1, 2, 4, 4), (2, 3, 3, 4), (3, 4, 2, 6), (4, 4, 4, 6), (5, 6, 6, 6)];
        for (id, n_cav, n_hdv, n_obs) in expect {
            let cfg = ScenarioConfig::preset(id).unwrap();
            assert_eq!(cfg.n_cav, n_cav, "scenario {id} agents");
            assert_eq!(cfg.n_hdv, n_hdv, "scenario {id} HDVs");
            assert_eq!(cfg.n_obs, n_obs, "scenario {id} observation rows");
            assert_eq!(cfg.horizon, 120);
            cfg.validate().unwrap();
        }
        assert!(matches!(
            ScenarioConfig::preset(6),
            Err(ConfigError::UnknownScenario(6))
        ));
    }

    #[test]
    fn toml_text_overrides_selected_keys_only() {
        let cfg = ScenarioConfig::from_toml_str(
            r#"
            scenario = 3
            horizon = 60

            [reward]
            w_crash = 5.0

            [speeds]
            hdv_target = 12.0
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario, 3);
        assert_eq!(cfg.n_cav, 4); // from preset 3
        assert_eq!(cfg.horizon, 60);
        assert_eq!(cfg.reward.w_crash, 5.0);
        assert_eq!(cfg.reward.w_speed, 0.5); // untouched default
        assert_eq!(cfg.speeds.hdv_target, 12.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ScenarioConfig::from_toml_str("horizn = 60").is_err());
        assert!(ScenarioConfig::from_toml_str("[reward]\nw_crahs = 1.0").is_err());
    }

    #[test]
    fn full_roundtrip_through_toml_is_lossless() {
        let cfg = ScenarioConfig::preset(4).unwrap();
        let text = cfg.to_toml_string();
        let parsed = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        let mut cfg = ScenarioConfig::default();
        cfg.road.merge_start = 400.0; // beyond merge_end
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::default();
        cfg.speeds.v_reward_min = 35.0; // above v_max
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overfull_spawn_range_is_a_config_error() {
        let mut cfg = ScenarioConfig::preset(5).unwrap();
        cfg.spawn.highway_x = (20.0, 40.0); // nowhere near enough room
        match cfg.validate() {
            Err(ConfigError::SpawnCapacity { .. }) => {}
            other => panic!("expected SpawnCapacity error, got {other:?}"),
        }
    }

    #[test]
    fn ramp_agents_split_ceiling_on_ramp() {
        let cfg = ScenarioConfig::preset(2).unwrap(); // 3 agents
        assert_eq!(cfg.ramp_cav_count(), 2);
        let cfg = ScenarioConfig::preset(5).unwrap(); // 6 agents
        assert_eq!(cfg.ramp_cav_count(), 3);
    }
}
