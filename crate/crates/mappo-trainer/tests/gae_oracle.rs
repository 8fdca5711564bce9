//! Checks the recursive advantage estimator against a direct summation
//! oracle: the advantage at `t` is the discounted sum of one-step value
//! errors, truncated at the first episode boundary.

use mappo_trainer::gae;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// O(T^2) reference: expands the definition term by term instead of using
/// the backward recursion under test.
fn brute_force(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lam: f64,
) -> Vec<f64> {
    let t_len = rewards.len();
    (0..t_len)
        .map(|t| {
            let mut acc = 0.0;
            let mut coef = 1.0;
            for s in t..t_len {
                let next = if dones[s] {
                    0.0
                } else if s + 1 < t_len {
                    values[s + 1]
                } else {
                    bootstrap
                };
                let delta = rewards[s] + gamma * next - values[s];
                acc += coef * delta;
                if dones[s] {
                    break;
                }
                coef *= gamma * lam;
            }
            acc
        })
        .collect()
}

#[test]
fn recursion_matches_direct_summation_on_random_episodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6ae0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let t_len = rng.gen_range(1..=10);
        let gamma: f64 = rng.gen_range(0.0..=1.0);
        let lam: f64 = rng.gen_range(0.0..=1.0);
        let rewards: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let values: Vec<f64> = (0..t_len).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dones: Vec<bool> = (0..t_len).map(|_| rng.gen_bool(0.25)).collect();
        let bootstrap = rng.gen_range(-2.0..2.0);

        let (adv, ret) = gae(&rewards, &values, &dones, bootstrap, gamma, lam);
        let expected = brute_force(&rewards, &values, &dones, bootstrap, gamma, lam);
        for t in 0..t_len {
            let err = (adv[t] - expected[t]).abs();
            worst = worst.max(err);
            assert!(
                err <= 1e-10,
                "advantage mismatch at t={t}: got {}, expected {} (err {err})",
                adv[t],
                expected[t]
            );
            assert_eq!(
                ret[t].to_bits(),
                (adv[t] + values[t]).to_bits(),
                "returns must be advantage + value, bit for bit"
            );
        }
    }
    println!("worst advantage error over 1000 random episodes: {worst:.3e}");
}

#[test]
fn episode_boundaries_isolate_segments() {
    // Estimating over a concatenation of two episodes (with a done flag in
    // between) must equal estimating each episode on its own.
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e9);
    for _ in 0..200 {
        let len_a = rng.gen_range(1..=6);
        let len_b = rng.gen_range(1..=6);
        let total = len_a + len_b;
        let gamma: f64 = rng.gen_range(0.2..=1.0);
        let lam: f64 = rng.gen_range(0.2..=1.0);
        let rewards: Vec<f64> = (0..total).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..total).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut dones = vec![false; total];
        dones[len_a - 1] = true;
        dones[total - 1] = rng.gen_bool(0.5);
        let bootstrap = rng.gen_range(-1.0..1.0);

        let (joint_adv, _) = gae(&rewards, &values, &dones, bootstrap, gamma, lam);
        let (first_adv, _) = gae(
            &rewards[..len_a],
            &values[..len_a],
            &dones[..len_a],
            12345.0, // never used: the segment ends in a done
            gamma,
            lam,
        );
        let (second_adv, _) = gae(
            &rewards[len_a..],
            &values[len_a..],
            &dones[len_a..],
            bootstrap,
            gamma,
            lam,
        );
        for t in 0..len_a {
            assert_eq!(joint_adv[t].to_bits(), first_adv[t].to_bits());
        }
        for t in 0..len_b {
            assert_eq!(joint_adv[len_a + t].to_bits(), second_adv[t].to_bits());
        }
    }
}

#[test]
fn lam_one_recovers_discounted_return_minus_value() {
    // With lam = 1 and no mid-stream dones the advantage telescopes to the
    // full discounted return (bootstrapped) minus the value.
    let rewards = [0.5, -0.25, 1.0, 0.125];
    let values = [0.3, 0.1, -0.4, 0.2];
    let dones = [false, false, false, false];
    let gamma = 0.9;
    let bootstrap = 0.7;
    let (adv, _) = gae(&rewards, &values, &dones, bootstrap, gamma, 1.0);
    for t in 0..4 {
        let mut g = 0.0;
        let mut c = 1.0;
        for s in t..4 {
            g += c * rewards[s];
            c *= gamma;
        }
        g += c * bootstrap;
        assert!((adv[t] - (g - values[t])).abs() < 1e-12);
    }
}

#[test]
#[should_panic(expected = "length mismatch")]
fn mismatched_lengths_panic() {
    gae(&[1.0, 2.0], &[0.0], &[false, false], 0.0, 0.9, 0.9);
}
