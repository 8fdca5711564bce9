//! Scripted longitudinal and lateral control: the Intelligent Driver Model
//! for car following and MOBIL for lane-change decisions.

use crate::config::ScenarioConfig;
use crate::vehicle::{VehicleKind, VehicleRecord};

/// IDM acceleration toward desired speed `v0` given an optional leader
/// described by `(bumper_gap, leader_speed)`.
///
/// `a = a_max * (1 - (v / v0)^δ - (s* / s)^2)` with the desired gap
/// `s* = s0 + max(0, v T + v Δv / (2 sqrt(a_max b)))`. The result is bounded
/// to `[a_floor, a_max]`; a non-positive gap forces the floor.
pub fn idm_accel(
    v: f64,
    v0: f64,
    leader: Option<(f64, f64)>,
    p: &crate::config::IdmParams,
) -> f64 {
    let free = 1.0 - (v / v0).powi(p.exponent);
    let interaction = match leader {
        None => 0.0,
        Some((gap, v_lead)) => {
            if gap <= 0.1 {
                return p.a_floor;
            }
            let dv = v - v_lead;
            let s_star = p.jam_gap + (v * p.headway + v * dv / (2.0 * (p.a_max * p.b_comfort).sqrt())).max(0.0);
            (s_star / gap).powi(2)
        }
    };
    (p.a_max * (free - interaction)).clamp(p.a_floor, p.a_max)
}

/// Nearest alive vehicle ahead of `x` in `lane` (by effective lane), if any.
pub(crate) fn leader_in_lane<'a>(
    vehicles: &'a [VehicleRecord],
    lane: usize,
    x: f64,
    skip_id: u32,
) -> Option<&'a VehicleRecord> {
    vehicles
        .iter()
        .filter(|v| v.alive && v.id != skip_id && v.effective_lane() == lane && v.x > x)
        .min_by(|a, b| a.x.total_cmp(&b.x))
}

/// Nearest alive vehicle behind `x` in `lane` (by effective lane), if any.
pub(crate) fn follower_in_lane<'a>(
    vehicles: &'a [VehicleRecord],
    lane: usize,
    x: f64,
    skip_id: u32,
) -> Option<&'a VehicleRecord> {
    vehicles
        .iter()
        .filter(|v| v.alive && v.id != skip_id && v.effective_lane() == lane && v.x <= x)
        .max_by(|a, b| a.x.total_cmp(&b.x))
}

fn bumper_gap(cfg: &ScenarioConfig, rear_x: f64, front_x: f64) -> f64 {
    front_x - rear_x - cfg.vehicle.length
}

/// IDM acceleration of a scripted vehicle in its effective lane right now.
pub(crate) fn scripted_accel(cfg: &ScenarioConfig, vehicles: &[VehicleRecord], me: &VehicleRecord) -> f64 {
    let leader = leader_in_lane(vehicles, me.effective_lane(), me.x, me.id)
        .map(|l| (bumper_gap(cfg, me.x, l.x), l.vx));
    idm_accel(me.vx, me.target_speed, leader, &cfg.idm)
}

/// Acceleration `me` would have in `lane` if `extra_leader` were also there.
fn accel_in_lane(
    cfg: &ScenarioConfig,
    vehicles: &[VehicleRecord],
    me: &VehicleRecord,
    lane: usize,
) -> f64 {
    let leader = leader_in_lane(vehicles, lane, me.x, me.id).map(|l| (bumper_gap(cfg, me.x, l.x), l.vx));
    idm_accel(me.vx, me.target_speed, leader, &cfg.idm)
}

/// Acceleration of `follower` if `new_leader` were directly ahead of it.
fn follower_accel_with_leader(
    cfg: &ScenarioConfig,
    follower: &VehicleRecord,
    new_leader: Option<&VehicleRecord>,
) -> f64 {
    let leader = new_leader.map(|l| (bumper_gap(cfg, follower.x, l.x), l.vx));
    idm_accel(follower.vx, follower.target_speed, leader, &cfg.idm)
}

/// MOBIL: should the scripted vehicle `me` start a change into `target`?
///
/// The change must be safe (neither the mover nor the new follower is forced
/// below `-b_safe`) and worth it: own gain plus `politeness` times the two
/// affected followers' net gain must exceed `a_threshold`.
pub fn mobil_lane_decision(
    cfg: &ScenarioConfig,
    vehicles: &[VehicleRecord],
    me: &VehicleRecord,
    target: usize,
    politeness: f64,
) -> bool {
    let m = &cfg.mobil;

    // Safety first: my own braking requirement behind the new leader...
    let a_self_new = accel_in_lane(cfg, vehicles, me, target);
    if a_self_new < -m.b_safe {
        return false;
    }
    // ...and the new follower's braking requirement behind me.
    let new_follower = follower_in_lane(vehicles, target, me.x, me.id);
    let (a_nf_old, a_nf_new) = match new_follower {
        Some(f) => {
            let old_leader = leader_in_lane(vehicles, target, f.x, f.id);
            let old = follower_accel_with_leader(cfg, f, old_leader);
            let new = follower_accel_with_leader(cfg, f, Some(me));
            if new < -m.b_safe {
                return false;
            }
            (old, new)
        }
        None => (0.0, 0.0),
    };

    // Incentive: my gain plus the polite share of both followers' change.
    let a_self_old = accel_in_lane(cfg, vehicles, me, me.effective_lane());
    let old_follower = follower_in_lane(vehicles, me.effective_lane(), me.x, me.id);
    let (a_of_old, a_of_new) = match old_follower {
        Some(f) => {
            let old = follower_accel_with_leader(cfg, f, Some(me));
            let next_leader = leader_in_lane(vehicles, me.effective_lane(), me.x, me.id);
            let new = follower_accel_with_leader(cfg, f, next_leader);
            (old, new)
        }
        None => (0.0, 0.0),
    };

    let own_gain = a_self_new - a_self_old;
    let others_gain = (a_nf_new - a_nf_old) + (a_of_new - a_of_old);
    own_gain + politeness * others_gain > m.a_threshold
}

/// One scripted decision for an HDV at a policy-step boundary: current IDM
/// acceleration plus an optional MOBIL lane-change target. HDVs drive on the
/// two highway lanes only.
pub fn hdv_control(cfg: &ScenarioConfig, vehicles: &[VehicleRecord], me: &VehicleRecord) -> (f64, Option<usize>) {
    debug_assert_eq!(me.kind, VehicleKind::Hdv);
    let accel = scripted_accel(cfg, vehicles, me);
    let lane_target = if me.maneuver.is_some() {
        None
    } else {
        candidate_lanes(me.lane)
            .into_iter()
            .flatten()
            .find(|&t| mobil_lane_decision(cfg, vehicles, me, t, cfg.mobil.politeness_hdv))
    };
    (accel, lane_target)
}

/// One scripted decision for the PV: identical machinery but with zero
/// politeness, so it overtakes whenever that is safe and profitable and
/// never slows down for anyone behind it.
pub fn pv_control(cfg: &ScenarioConfig, vehicles: &[VehicleRecord], me: &VehicleRecord) -> (f64, Option<usize>) {
    debug_assert_eq!(me.kind, VehicleKind::Pv);
    let accel = scripted_accel(cfg, vehicles, me);
    let lane_target = if me.maneuver.is_some() {
        None
    } else {
        candidate_lanes(me.lane)
            .into_iter()
            .flatten()
            .find(|&t| mobil_lane_decision(cfg, vehicles, me, t, cfg.mobil.politeness_pv))
    };
    (accel, lane_target)
}

/// Highway lanes adjacent to `lane`; scripted vehicles never use the ramp.
fn candidate_lanes(lane: usize) -> [Option<usize>; 2] {
    match lane {
        1 => [Some(2), None],
        2 => [Some(1), None],
        _ => [None, None],
    }
}
