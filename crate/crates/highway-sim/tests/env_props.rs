//! Property tests: invariants that must hold for every seed and any action
//! sequence, on every scenario.

use highway_sim::{AgentAction, HighwayEnv, ScenarioConfig, SimError, VehicleKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn episode_invariants_hold_for_any_seed_and_actions(
        scenario in 1u8..=5,
        world_seed in any::<u64>(),
        action_seed in any::<u64>(),
    ) {
        let cfg = ScenarioConfig::preset(scenario).unwrap();
        let mut env = HighwayEnv::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(action_seed);
        env.reset(world_seed).unwrap();

        let census = env.vehicles().len();
        let mut prev_alive: Vec<bool> = env.vehicles().iter().map(|v| v.alive).collect();
        let mut prev_x: Vec<f64> = env.vehicles().iter().map(|v| v.x).collect();

        for _ in 0..40 {
            let n_alive = env.alive_agent_ids().len();
            let actions: Vec<AgentAction> = (0..n_alive)
                .map(|_| AgentAction::from_index(rng.gen_range(0..AgentAction::COUNT)).unwrap())
                .collect();
            let out = env.step(&actions).unwrap();

            // Shared reward lives in the unit interval.
            prop_assert!((0.0..=1.0).contains(&out.reward), "reward {}", out.reward);

            // The traffic census never changes mid-episode.
            prop_assert_eq!(env.vehicles().len(), census);
            prop_assert_eq!(out.agent_alive.len(), cfg.n_cav);
            prop_assert_eq!(out.obs.len(), cfg.n_cav);

            for (i, v) in env.vehicles().iter().enumerate() {
                // Every state variable stays finite.
                prop_assert!(v.x.is_finite() && v.y.is_finite() && v.vx.is_finite() && v.vy.is_finite());
                // Speeds respect the per-kind caps and never go negative.
                let cap = match v.kind {
                    VehicleKind::Cav => cfg.speeds.v_max_cav,
                    VehicleKind::Hdv => cfg.speeds.v_max_hdv,
                    VehicleKind::Pv => cfg.speeds.v_max_cav.max(cfg.speeds.pv_target),
                };
                prop_assert!((0.0..=cap).contains(&v.vx), "vx {} over cap {cap}", v.vx);
                // Nobody drives backwards.
                prop_assert!(v.x >= prev_x[i] - 1e-12, "x went backwards");
                // Lateral position stays between the outermost centerlines.
                prop_assert!((0.0..=cfg.road.lane_center_y(2)).contains(&v.y), "y {}", v.y);
                prop_assert!(v.lane <= 2);
                // Wrecks stay wrecked, frozen in place.
                if !prev_alive[i] {
                    prop_assert!(!v.alive, "vehicle {} resurrected", v.id);
                    prop_assert_eq!(v.vx, 0.0);
                }
                prev_x[i] = v.x;
                prev_alive[i] = v.alive;
            }

            // Observations: correct shape, all entries in [-1, 1], dead
            // agents all zero.
            for (slot, o) in out.obs.iter().enumerate() {
                prop_assert_eq!((o.rows(), o.cols()), (cfg.n_obs, cfg.obs_width()));
                prop_assert!(o.data().iter().all(|x| (-1.0..=1.0).contains(x) && x.is_finite()));
                if !out.agent_alive[slot] {
                    prop_assert!(o.data().iter().all(|&x| x == 0.0));
                }
            }

            if out.done {
                // A finished episode refuses further steps.
                let refused = env.step(&vec![AgentAction::Idle; env.alive_agent_ids().len()]);
                prop_assert!(matches!(refused, Err(SimError::EpisodeDone)));
                break;
            }
        }
    }

    #[test]
    fn observation_width_follows_the_angle_toggle(
        scenario in 1u8..=5,
        world_seed in any::<u64>(),
        include_angles in any::<bool>(),
    ) {
        let mut cfg = ScenarioConfig::preset(scenario).unwrap();
        cfg.include_angles = include_angles;
        let mut env = HighwayEnv::new(cfg).unwrap();
        let obs = env.reset(world_seed).unwrap();
        let want = if include_angles { 8 } else { 6 };
        for o in &obs {
            prop_assert_eq!(o.cols(), want);
            prop_assert!(o.data().iter().all(|x| (-1.0..=1.0).contains(x)));
        }
    }
}
