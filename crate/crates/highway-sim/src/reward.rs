//! Shared team reward, evaluated once per policy step after integration.

use crate::config::ScenarioConfig;
use crate::vehicle::{VehicleKind, VehicleRecord};
use crate::world::StepEvents;

/// The individual reward terms before weighting, kept for diagnostics and
/// metrics. All lie in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RewardBreakdown {
    /// Mean speed credit over alive agents.
    pub speed: f64,
    /// 1.0 when an agent crashed during this step.
    pub crash: f64,
    /// Fraction of all agents below the stall speed (crashed agents stand
    /// still, so a wreck keeps costing the team every remaining step).
    pub stall: f64,
    /// Fraction of agents that began a lane change this step.
    pub weave: f64,
    /// How hard the priority vehicle is being blocked by an agent ahead.
    pub pv_block: f64,
}

/// Computes the shared reward
/// `clamp01(w_speed*S - w_crash*C - w_stall*St - w_weave*W - w_pv*P + offset)`.
///
/// The speed credit of one agent rises linearly from 0 at `v_reward_min` to
/// 1 at `v_max_cav`, so cruising at half the cap earns exactly the offset
/// and full speed with no penalties earns 1.
pub fn compute_reward(
    cfg: &ScenarioConfig,
    vehicles: &[VehicleRecord],
    events: &StepEvents,
) -> (f64, RewardBreakdown) {
    let w = &cfg.reward;
    let n_cav = cfg.n_cav as f64;

    let mut speed_sum = 0.0;
    let mut alive = 0usize;
    let mut stalled = 0usize;
    for v in vehicles.iter().filter(|v| v.kind == VehicleKind::Cav) {
        if v.alive {
            alive += 1;
            let span = cfg.speeds.v_max_cav - cfg.speeds.v_reward_min;
            speed_sum += ((v.vx - cfg.speeds.v_reward_min) / span).clamp(0.0, 1.0);
        }
        if v.vx < cfg.speeds.v_stall {
            stalled += 1;
        }
    }
    let speed = if alive > 0 { speed_sum / alive as f64 } else { 0.0 };
    let crash = if events.agent_crashed { 1.0 } else { 0.0 };
    let stall = stalled as f64 / n_cav;
    let weave = events.weave_starts as f64 / n_cav;
    let pv_block = pv_block_term(cfg, vehicles);

    let breakdown = RewardBreakdown {
        speed,
        crash,
        stall,
        weave,
        pv_block,
    };
    let raw = w.w_speed * speed - w.w_crash * crash - w.w_stall * stall - w.w_weave * weave
        - w.w_pv * pv_block
        + w.offset;
    (raw.clamp(0.0, 1.0), breakdown)
}

/// 1 - gap/d_pv for the nearest agent ahead of the PV in its effective lane,
/// 0 when nothing blocks it within `d_pv`.
fn pv_block_term(cfg: &ScenarioConfig, vehicles: &[VehicleRecord]) -> f64 {
    let Some(pv) = vehicles.iter().find(|v| v.kind == VehicleKind::Pv && v.alive) else {
        return 0.0;
    };
    let lane = pv.effective_lane();
    vehicles
        .iter()
        .filter(|v| v.alive && v.kind == VehicleKind::Cav && v.effective_lane() == lane && v.x > pv.x)
        .map(|v| v.x - pv.x - cfg.vehicle.length)
        .min_by(f64::total_cmp)
        .map(|gap| (1.0 - gap / cfg.reward.d_pv).clamp(0.0, 1.0))
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::StepEvents;

    fn cav(id: u32, lane: usize, x: f64, vx: f64, alive: bool) -> VehicleRecord {
        VehicleRecord {
            id,
            kind: VehicleKind::Cav,
            lane,
            x,
            y: 4.0 * lane as f64,
            vx,
            vy: 0.0,
            target_speed: vx,
            alive,
            maneuver: None,
        }
    }

    fn pv(id: u32, lane: usize, x: f64) -> VehicleRecord {
        VehicleRecord {
            id,
            kind: VehicleKind::Pv,
            lane,
            x,
            y: 4.0 * lane as f64,
            vx: 25.0,
            vy: 0.0,
            target_speed: 30.0,
            alive: true,
            maneuver: None,
        }
    }

    fn quiet() -> StepEvents {
        StepEvents::default()
    }

    #[test]
    fn full_speed_no_penalties_earns_exactly_one() {
        let cfg = ScenarioConfig::default(); // 2 agents
        let vehicles = vec![cav(0, 1, 100.0, 30.0, true), cav(1, 2, 150.0, 30.0, true)];
        let (r, b) = compute_reward(&cfg, &vehicles, &quiet());
        assert_eq!(r, 1.0);
        assert_eq!(b.speed, 1.0);
        assert_eq!(b.stall, 0.0);
    }

    #[test]
    fn mid_speed_no_penalties_earns_exactly_the_offset() {
        let cfg = ScenarioConfig::default();
        let vehicles = vec![cav(0, 1, 100.0, 15.0, true), cav(1, 2, 150.0, 15.0, true)];
        let (r, b) = compute_reward(&cfg, &vehicles, &quiet());
        assert_eq!(b.speed, 0.0);
        assert_eq!(r, cfg.reward.offset);
    }

    #[test]
    fn crash_step_clamps_to_zero() {
        let cfg = ScenarioConfig::default();
        let vehicles = vec![cav(0, 1, 100.0, 0.0, false), cav(1, 2, 150.0, 30.0, true)];
        let events = StepEvents {
            agent_crashed: true,
            ..StepEvents::default()
        };
        let (r, b) = compute_reward(&cfg, &vehicles, &events);
        assert_eq!(r, 0.0, "w_crash dominates everything else");
        assert_eq!(b.crash, 1.0);
        // The wreck counts as stalled from now on.
        assert_eq!(b.stall, 0.5);
    }

    #[test]
    fn wreck_keeps_draining_reward_on_later_steps() {
        let cfg = ScenarioConfig::default();
        let vehicles = vec![cav(0, 1, 100.0, 0.0, false), cav(1, 2, 150.0, 30.0, true)];
        let (r, b) = compute_reward(&cfg, &vehicles, &quiet());
        // speed term: survivor at full speed = 1.0 over one alive agent.
        assert_eq!(b.speed, 1.0);
        assert_eq!(b.stall, 0.5);
        // 0.5*1 - 0.5*0.5 + 0.5 = 0.75
        assert!((r - 0.75).abs() < 1e-12);
    }

    #[test]
    fn pv_tailgating_at_half_distance_costs_a_quarter() {
        let cfg = ScenarioConfig::default();
        // Agent 20 m bumper gap ahead of the PV in the same lane: P = 0.5.
        let vehicles = vec![
            cav(0, 2, 125.0, 30.0, true),
            cav(1, 1, 300.0, 30.0, true),
            pv(2, 2, 100.0),
        ];
        let (r, b) = compute_reward(&cfg, &vehicles, &quiet());
        assert!((b.pv_block - 0.5).abs() < 1e-12, "block {}", b.pv_block);
        assert!((r - (1.0 - 0.25)).abs() < 1e-12);

        // Same agent far ahead: no blocking.
        let far = vec![cav(0, 2, 180.0, 30.0, true), cav(1, 1, 300.0, 30.0, true), pv(2, 2, 100.0)];
        let (r2, b2) = compute_reward(&cfg, &far, &quiet());
        assert_eq!(b2.pv_block, 0.0);
        assert!(r2 > r);
    }

    #[test]
    fn weaving_costs_proportionally() {
        let cfg = ScenarioConfig::default();
        let vehicles = vec![cav(0, 1, 100.0, 15.0, true), cav(1, 2, 150.0, 15.0, true)];
        let events = StepEvents {
            weave_starts: 1,
            ..StepEvents::default()
        };
        let (r, _) = compute_reward(&cfg, &vehicles, &events);
        assert!((r - (0.5 - 0.1 * 0.5)).abs() < 1e-12);
    }

    #[test]
    fn reward_is_always_inside_unit_interval() {
        let cfg = ScenarioConfig::default();
        // Worst case: everything penalized at once.
        let vehicles = vec![cav(0, 2, 101.0, 0.0, false), cav(1, 2, 106.0, 0.0, false), pv(2, 2, 95.0)];
        let events = StepEvents {
            agent_crashed: true,
            weave_starts: 2,
        };
        let (r, _) = compute_reward(&cfg, &vehicles, &events);
        assert_eq!(r, 0.0);
    }
}
