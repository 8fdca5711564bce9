//! World state and the policy-step / physics-substep loop.

use crate::config::{ScenarioConfig, VehicleDims};
use crate::error::{ConfigError, SimError};
use crate::idm::{hdv_control, pv_control, scripted_accel};
use crate::obs::{observe, ObservationMatrix};
use crate::reward::{compute_reward, RewardBreakdown};
use crate::vehicle::{AgentAction, Maneuver, VehicleKind, VehicleRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What happened during one policy step, as needed by the reward.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepEvents {
    /// An agent crashed during this step.
    pub agent_crashed: bool,
    /// Number of agents that began a lane change this step.
    pub weave_starts: usize,
}

/// Result of one policy step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    /// One observation per agent in id order; dead agents get all-zero
    /// matrices (their presence flag row included), paired with
    /// `agent_alive` so callers can mask them out.
    pub obs: Vec<ObservationMatrix>,
    /// Shared team reward in `[0, 1]`.
    pub reward: f64,
    /// Unweighted reward terms for diagnostics.
    pub breakdown: RewardBreakdown,
    /// Episode is over (horizon, all agents crashed, or all survivors
    /// passed the end of the segment).
    pub done: bool,
    /// Vehicles that crashed this step, as id pairs; a vehicle running off
    /// the ramp end is reported paired with itself.
    pub crashes: Vec<(u32, u32)>,
    /// Alive flag per agent in id order, after this step.
    pub agent_alive: Vec<bool>,
}

/// All alive-vehicle pairs whose axis-aligned footprints overlap:
/// `|Δx| < length` and `|Δy| < width`. Each unordered pair appears once.
pub fn collision_pairs(vehicles: &[VehicleRecord], dims: &VehicleDims) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for i in 0..vehicles.len() {
        let a = &vehicles[i];
        if !a.alive {
            continue;
        }
        for b in &vehicles[i + 1..] {
            if !b.alive {
                continue;
            }
            if (a.x - b.x).abs() < dims.length && (a.y - b.y).abs() < dims.width {
                pairs.push((a.id, b.id));
            }
        }
    }
    pairs
}

/// The merge environment: a straight highway segment, its on-ramp, scripted
/// traffic, and the controllable agents.
///
/// Determinism contract: identical `(config, seed, action sequence)` produce
/// bit-identical states. Randomness is consumed only inside `reset`;
/// stepping is purely a function of the current state, and every reduction
/// iterates vehicles in id order.
pub struct HighwayEnv {
    cfg: ScenarioConfig,
    vehicles: Vec<VehicleRecord>,
    t: u32,
    done: bool,
    started: bool,
    rng: ChaCha8Rng,
}

impl HighwayEnv {
    /// Validates the config and builds an environment; call `reset` before
    /// stepping.
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        Ok(HighwayEnv {
            cfg,
            vehicles: Vec::new(),
            t: 0,
            done: false,
            started: false,
            rng: ChaCha8Rng::seed_from_u64(0),
        })
    }

    pub fn cfg(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn vehicles(&self) -> &[VehicleRecord] {
        &self.vehicles
    }

    /// Policy steps taken since the last reset.
    pub fn time(&self) -> u32 {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Ids of all agents, id order (these are always `0..n_cav`).
    pub fn agent_ids(&self) -> Vec<u32> {
        self.vehicles
            .iter()
            .filter(|v| v.is_agent())
            .map(|v| v.id)
            .collect()
    }

    pub fn alive_agent_ids(&self) -> Vec<u32> {
        self.vehicles
            .iter()
            .filter(|v| v.is_agent() && v.alive)
            .map(|v| v.id)
            .collect()
    }

    pub fn agent_alive_flags(&self) -> Vec<bool> {
        self.vehicles
            .iter()
            .filter(|v| v.is_agent())
            .map(|v| v.alive)
            .collect()
    }

    /// Observation for one alive agent.
    pub fn observe(&self, agent_id: u32) -> Result<ObservationMatrix, SimError> {
        observe(&self.cfg, &self.vehicles, agent_id)
    }

    /// One observation per agent in id order; dead agents get zero matrices.
    pub fn observations(&self) -> Vec<ObservationMatrix> {
        self.vehicles
            .iter()
            .filter(|v| v.is_agent())
            .map(|v| {
                if v.alive {
                    observe(&self.cfg, &self.vehicles, v.id).expect("alive agent observes")
                } else {
                    ObservationMatrix::zeros(self.cfg.n_obs, self.cfg.obs_width())
                }
            })
            .collect()
    }

    /// Spawns a fresh episode from `seed` and returns the initial
    /// observations (one per agent, id order).
    ///
    /// Agents take ids `0..n_cav` (ramp group first), HDVs follow, the PV is
    /// last. Roughly half the agents (rounded up) start on the ramp; the
    /// rest alternate across the two highway lanes together with the HDVs,
    /// agents rearmost. The PV starts behind all highway traffic on the left
    /// lane, already moving fast.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<ObservationMatrix>, SimError> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.vehicles = self.spawn()?;
        self.t = 0;
        self.done = false;
        self.started = true;
        debug_assert!(
            collision_pairs(&self.vehicles, &self.cfg.vehicle).is_empty(),
            "spawn produced an overlap"
        );
        Ok(self.observations())
    }

    fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
        if hi > lo {
            rng.gen_range(lo..hi)
        } else {
            lo
        }
    }

    /// Rear-to-front placement along one lane: minimum gaps plus random
    /// jitter, with the jitters rescaled when they would overflow the range.
    fn place_lane(
        rng: &mut ChaCha8Rng,
        count: usize,
        (lo, hi): (f64, f64),
        gap_min: f64,
        gap_jitter: f64,
    ) -> Vec<f64> {
        if count == 0 {
            return Vec::new();
        }
        let raw: Vec<f64> = (0..count).map(|_| rng.gen::<f64>() * gap_jitter).collect();
        let budget = (hi - lo) - (count - 1) as f64 * gap_min;
        let raw_sum: f64 = raw.iter().sum();
        let scale = if raw_sum > budget && raw_sum > 0.0 {
            budget.max(0.0) / raw_sum
        } else {
            1.0
        };
        let mut xs = Vec::with_capacity(count);
        let mut cursor = lo + raw[0] * scale;
        xs.push(cursor);
        for j in raw.iter().skip(1) {
            cursor += gap_min + j * scale;
            xs.push(cursor);
        }
        xs
    }

    fn spawn(&mut self) -> Result<Vec<VehicleRecord>, SimError> {
        let cfg = self.cfg;
        let k_ramp = cfg.ramp_cav_count();
        let k_highway = cfg.n_cav - k_ramp;
        let highway_total = k_highway + cfg.n_hdv;

        // Highway vehicles (agents first, rearmost) alternate lanes 1, 2.
        let lane_of = |i: usize| 1 + (i % 2);
        let lane_counts = [
            (0..highway_total).filter(|&i| lane_of(i) == 1).count(),
            (0..highway_total).filter(|&i| lane_of(i) == 2).count(),
        ];

        let rng = &mut self.rng;
        let ramp_xs = Self::place_lane(rng, k_ramp, cfg.spawn.ramp_x, cfg.spawn.gap_min, cfg.spawn.gap_jitter);
        let lane1_xs = Self::place_lane(rng, lane_counts[0], cfg.spawn.highway_x, cfg.spawn.gap_min, cfg.spawn.gap_jitter);
        let lane2_xs = Self::place_lane(rng, lane_counts[1], cfg.spawn.highway_x, cfg.spawn.gap_min, cfg.spawn.gap_jitter);

        let mut lane_cursors = [0usize; 2];
        let mut vehicles = Vec::with_capacity(cfg.total_vehicles());
        let mut next_id = 0u32;
        let mut push = |vehicles: &mut Vec<VehicleRecord>, kind, lane: usize, x: f64, vx: f64, target: f64| {
            vehicles.push(VehicleRecord {
                id: next_id,
                kind,
                lane,
                x,
                y: cfg.road.lane_center_y(lane),
                vx,
                vy: 0.0,
                target_speed: target,
                alive: true,
                maneuver: None,
            });
            next_id += 1;
        };

        // Ramp agents.
        for &x in &ramp_xs {
            let vx = Self::uniform(rng, cfg.spawn.cav_ramp_speed);
            push(&mut vehicles, VehicleKind::Cav, 0, x, vx, vx);
        }
        // Highway agents and HDVs, interleaved over the two lanes.
        for i in 0..highway_total {
            let lane = lane_of(i);
            let slot = lane_cursors[lane - 1];
            lane_cursors[lane - 1] += 1;
            let x = if lane == 1 { lane1_xs[slot] } else { lane2_xs[slot] };
            if i < k_highway {
                let vx = Self::uniform(rng, cfg.spawn.cav_highway_speed);
                push(&mut vehicles, VehicleKind::Cav, lane, x, vx, vx);
            } else {
                let vx = Self::uniform(rng, cfg.spawn.hdv_speed);
                push(&mut vehicles, VehicleKind::Hdv, lane, x, vx, cfg.speeds.hdv_target);
            }
        }
        // Priority vehicle: left lane, behind all highway traffic.
        let rear = lane1_xs
            .iter()
            .chain(&lane2_xs)
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let rear = if rear.is_finite() { rear } else { cfg.spawn.highway_x.0 };
        let pv_x = rear - Self::uniform(rng, cfg.spawn.pv_gap);
        let pv_vx = Self::uniform(rng, cfg.spawn.pv_speed);
        push(&mut vehicles, VehicleKind::Pv, 2, pv_x, pv_vx, cfg.speeds.pv_target);

        Ok(vehicles)
    }

    fn vehicle_mut(&mut self, id: u32) -> &mut VehicleRecord {
        self.vehicles
            .iter_mut()
            .find(|v| v.id == id)
            .expect("id comes from this world")
    }

    /// Lane one step to the left (higher index) if the vehicle may go there
    /// from position `x`: ramp merges are allowed only inside the merge
    /// window, and the leftmost lane has no left neighbor.
    fn left_target(&self, lane: usize, x: f64) -> Option<usize> {
        match lane {
            0 => (x >= self.cfg.road.merge_start && x <= self.cfg.road.merge_end).then_some(1),
            1 => Some(2),
            _ => None,
        }
    }

    /// Lane one step to the right (lower index); the ramp is never a valid
    /// target.
    fn right_target(&self, lane: usize) -> Option<usize> {
        match lane {
            2 => Some(1),
            _ => None,
        }
    }

    fn begin_maneuver(&mut self, id: u32, target_lane: usize) {
        let rate = self.cfg.road.lane_width / self.cfg.timing.policy_dt;
        let v = self.vehicle_mut(id);
        let signed = if target_lane > v.lane { rate } else { -rate };
        v.maneuver = Some(Maneuver {
            target_lane,
            lateral_rate: signed,
        });
        v.vy = signed;
    }

    /// Applies one agent meta-action. Invalid lane requests quietly degrade
    /// to `Idle`; speed requests move the target, never the velocity.
    fn apply_action(&mut self, id: u32, action: AgentAction, events: &mut StepEvents) {
        let (lane, x, busy) = {
            let v = self.vehicle_mut(id);
            (v.lane, v.x, v.maneuver.is_some())
        };
        match action {
            AgentAction::Idle => {}
            AgentAction::Faster => {
                let cap = self.cfg.speeds.v_max_cav;
                let dv = self.cfg.speeds.delta_v;
                let v = self.vehicle_mut(id);
                v.target_speed = (v.target_speed + dv).min(cap);
            }
            AgentAction::Slower => {
                let dv = self.cfg.speeds.delta_v;
                let v = self.vehicle_mut(id);
                v.target_speed = (v.target_speed - dv).max(0.0);
            }
            AgentAction::LaneLeft => {
                if let Some(target) = self.left_target(lane, x) {
                    if !busy {
                        self.begin_maneuver(id, target);
                        events.weave_starts += 1;
                    }
                }
            }
            AgentAction::LaneRight => {
                if let Some(target) = self.right_target(lane) {
                    if !busy {
                        self.begin_maneuver(id, target);
                        events.weave_starts += 1;
                    }
                }
            }
        }
    }

    fn crash_vehicle(&mut self, id: u32, crashes: &mut Vec<(u32, u32)>, other: u32, events: &mut StepEvents) {
        let is_agent = {
            let v = self.vehicle_mut(id);
            if !v.alive {
                return;
            }
            v.freeze_crashed();
            v.kind == VehicleKind::Cav
        };
        if is_agent {
            events.agent_crashed = true;
        }
        if id <= other {
            crashes.push((id, other));
        }
    }

    /// Advances the world one policy step.
    ///
    /// `actions` carries one entry per **alive** agent, in id order. Agent
    /// actions and scripted lane decisions commit at the step boundary; the
    /// physics then integrates `substeps` forward-Euler substeps with
    /// synchronous acceleration updates, checking ramp overruns and
    /// collisions after each substep. Lane maneuvers span exactly this step
    /// and end snapped onto the target centerline. The shared reward is
    /// evaluated on the post-integration state.
    pub fn step(&mut self, actions: &[AgentAction]) -> Result<StepOutput, SimError> {
        if !self.started {
            return Err(SimError::NotReset);
        }
        if self.done {
            return Err(SimError::EpisodeDone);
        }
        let alive_ids = self.alive_agent_ids();
        if actions.len() != alive_ids.len() {
            return Err(SimError::ActionCount {
                expected: alive_ids.len(),
                got: actions.len(),
            });
        }

        let mut events = StepEvents::default();
        let mut crashes: Vec<(u32, u32)> = Vec::new();

        for (&id, &action) in alive_ids.iter().zip(actions) {
            self.apply_action(id, action, &mut events);
        }

        // Scripted lane decisions, evaluated against the pre-step state and
        // committed together.
        let scripted: Vec<(u32, usize)> = self
            .vehicles
            .iter()
            .filter(|v| v.alive && v.maneuver.is_none())
            .filter_map(|v| {
                let target = match v.kind {
                    VehicleKind::Hdv => hdv_control(&self.cfg, &self.vehicles, v).1,
                    VehicleKind::Pv => pv_control(&self.cfg, &self.vehicles, v).1,
                    VehicleKind::Cav => None,
                };
                target.map(|t| (v.id, t))
            })
            .collect();
        for (id, target) in scripted {
            self.begin_maneuver(id, target);
        }

        let dt = self.cfg.timing.sub_dt();
        for _ in 0..self.cfg.timing.substeps {
            // Synchronous update: accelerations from the shared current state.
            let accels: Vec<f64> = self
                .vehicles
                .iter()
                .map(|v| {
                    if !v.alive {
                        return 0.0;
                    }
                    match v.kind {
                        VehicleKind::Cav => {
                            let err = v.target_speed - v.vx;
                            (self.cfg.cav.accel_gain * err).clamp(-self.cfg.cav.b_max, self.cfg.cav.a_max)
                        }
                        VehicleKind::Hdv | VehicleKind::Pv => scripted_accel(&self.cfg, &self.vehicles, v),
                    }
                })
                .collect();
            for (v, a) in self.vehicles.iter_mut().zip(&accels) {
                if !v.alive {
                    continue;
                }
                let cap = match v.kind {
                    VehicleKind::Cav => self.cfg.speeds.v_max_cav,
                    VehicleKind::Hdv => self.cfg.speeds.v_max_hdv,
                    VehicleKind::Pv => self.cfg.speeds.v_max_cav.max(self.cfg.speeds.pv_target),
                };
                v.vx = (v.vx + a * dt).clamp(0.0, cap);
                v.x += v.vx * dt;
                if v.maneuver.is_some() {
                    v.y += v.vy * dt;
                }
            }

            // Running off the physical end of the ramp wrecks the vehicle.
            let overruns: Vec<u32> = self
                .vehicles
                .iter()
                .filter(|v| v.alive && v.effective_lane() == 0 && v.x >= self.cfg.road.merge_end)
                .map(|v| v.id)
                .collect();
            for id in overruns {
                let end = self.cfg.road.merge_end;
                let v = self.vehicle_mut(id);
                v.x = end;
                self.crash_vehicle(id, &mut crashes, id, &mut events);
            }

            for (a, b) in collision_pairs(&self.vehicles, &self.cfg.vehicle) {
                self.crash_vehicle(a, &mut crashes, b, &mut events);
                self.crash_vehicle(b, &mut crashes, a, &mut events);
            }
        }

        // Maneuvers span exactly one policy step; snap onto the target lane.
        for v in &mut self.vehicles {
            if !v.alive {
                continue;
            }
            if let Some(m) = v.maneuver.take() {
                v.lane = m.target_lane;
                v.y = self.cfg.road.lane_center_y(m.target_lane);
                v.vy = 0.0;
            }
        }

        self.t += 1;
        let (reward, breakdown) = compute_reward(&self.cfg, &self.vehicles, &events);

        let agent_alive = self.agent_alive_flags();
        let any_alive = agent_alive.iter().any(|&a| a);
        let all_finished = any_alive
            && self
                .vehicles
                .iter()
                .filter(|v| v.is_agent() && v.alive)
                .all(|v| v.x > self.cfg.road.highway_length);
        self.done = self.t >= self.cfg.horizon || !any_alive || all_finished;

        Ok(StepOutput {
            obs: self.observations(),
            reward,
            breakdown,
            done: self.done,
            crashes,
            agent_alive,
        })
    }
}
