//! Network verification: independent forward oracle, finite-difference
//! gradients, the bounded-logit property of the actor head, and
//! distribution behavior.

use policy_nets::{ActionDistribution, Mlp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{finite_diff_check, ParamStore, Tape, Tensor};

fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

fn registered(net: &Mlp, seed: u64) -> ParamStore {
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.register_params(&mut store, &mut rng).unwrap();
    store
}

// ---------------------------------------------------------------------------
// Independent oracle: plain-Vec forward pass.
// ---------------------------------------------------------------------------

fn reference_forward(net: &Mlp, store: &ParamStore, input: &[f64], output_tanh: bool) -> Vec<f64> {
    let mut x = input.to_vec();
    for l in 1..=3 {
        let w = store.get_by_name(&format!("{}.l{}.W", net.prefix(), l)).unwrap();
        let b = store.get_by_name(&format!("{}.l{}.b", net.prefix(), l)).unwrap();
        let mut next = vec![0.0; w.cols()];
        for (j, out) in next.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, xi) in x.iter().enumerate() {
                acc += xi * w.get(i, j);
            }
            *out = acc + b.get(0, j);
        }
        if l < 3 || output_tanh {
            for v in &mut next {
                *v = v.tanh();
            }
        }
        x = next;
    }
    x
}

#[test]
fn actor_and_critic_match_the_independent_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let actor = Mlp::actor(12, 16, 5).unwrap();
    let critic = Mlp::critic(12, 16).unwrap();
    let store_a = registered(&actor, 100);
    let store_c = registered(&critic, 200);
    for _ in 0..5 {
        let input = random_tensor(&mut rng, 1, 12);
        let got = actor.forward_values(&store_a, &input).unwrap();
        let want = reference_forward(&actor, &store_a, input.data(), true);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12);
        }
        let got = critic.forward_values(&store_c, &input).unwrap();
        let want = reference_forward(&critic, &store_c, input.data(), false);
        assert_eq!(got.shape(), [1, 1]);
        assert!((got.get(0, 0) - want[0]).abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Gradients.
// ---------------------------------------------------------------------------

#[test]
fn actor_gradients_match_finite_differences() {
    let actor = Mlp::actor(6, 8, 5).unwrap();
    let mut store = registered(&actor, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let input = random_tensor(&mut rng, 3, 6);
    let weights = random_tensor(&mut rng, 3, 5);
    let worst = finite_diff_check(&mut store, 1e-6, |tape, store| {
        let x = tape.constant(input.clone());
        let logits = actor.forward(tape, store, x)?;
        let w = tape.constant(weights.clone());
        let weighted = tape.mul_elem(logits, w)?;
        Ok(tape.sum(weighted))
    })
    .unwrap();
    assert!(worst <= 1e-6, "worst relative gradient error {worst}");
}

#[test]
fn critic_gradients_match_finite_differences() {
    let critic = Mlp::critic(6, 8).unwrap();
    let mut store = registered(&critic, 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let input = random_tensor(&mut rng, 4, 6);
    let worst = finite_diff_check(&mut store, 1e-6, |tape, store| {
        let x = tape.constant(input.clone());
        let values = critic.forward(tape, store, x)?;
        Ok(tape.sum(values))
    })
    .unwrap();
    assert!(worst <= 1e-6, "worst relative gradient error {worst}");
}

// ---------------------------------------------------------------------------
// Bounded logits: tanh output caps the max softmax probability at
// e^1 / (e^1 + (A-1) e^-1) — about 0.649 for five actions.
// ---------------------------------------------------------------------------

#[test]
fn bounded_logits_cap_the_greedy_probability() {
    let cap = 1.0_f64.exp() / (1.0_f64.exp() + 4.0 * (-1.0_f64).exp());
    assert!((cap - 0.649).abs() < 1e-3, "five-action cap is about 0.649");

    // Saturate the head: logits (1, -1, -1, -1, -1) reach the cap exactly.
    let saturated = Tensor::new(1, 5, vec![1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
    let dist = ActionDistribution::from_logits(&saturated);
    assert!((dist.prob(0, 0) - cap).abs() <= 1e-15);

    // Any real forward pass stays strictly inside the cap.
    let actor = Mlp::actor(12, 16, 5).unwrap();
    let store = registered(&actor, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let input = random_tensor(&mut rng, 1, 12);
        let logits = actor.forward_values(&store, &input).unwrap();
        assert!(logits.data().iter().all(|l| l.abs() <= 1.0));
        let dist = ActionDistribution::from_logits(&logits);
        let max = (0..5).map(|a| dist.prob(0, a)).fold(0.0, f64::max);
        assert!(max <= cap + 1e-15, "probability {max} above the cap {cap}");
        // And entropy stays off the floor.
        assert!(dist.entropy(0) > 1.0);
    }
}

// ---------------------------------------------------------------------------
// Batching: a batched forward must equal row-by-row forwards bit for bit,
// since training batches rows while rollouts run single rows.
// ---------------------------------------------------------------------------

#[test]
fn batched_forward_equals_per_row_forward_bitwise() {
    let actor = Mlp::actor(10, 32, 5).unwrap();
    let store = registered(&actor, 13);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let batch = random_tensor(&mut rng, 7, 10);
    let batched = actor.forward_values(&store, &batch).unwrap();
    for r in 0..7 {
        let single = Tensor::new(1, 10, batch.row_slice(r).to_vec()).unwrap();
        let row_out = actor.forward_values(&store, &single).unwrap();
        for c in 0..5 {
            assert_eq!(
                batched.get(r, c).to_bits(),
                row_out.get(0, c).to_bits(),
                "row {r} col {c} differs between batched and single forward"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// Distribution behavior.
// ---------------------------------------------------------------------------

#[test]
fn log_probs_match_tape_log_softmax_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let logits = random_tensor(&mut rng, 4, 5);
    let dist = ActionDistribution::from_logits(&logits);

    let mut tape = Tape::new();
    let node = tape.constant(logits.clone());
    let logp = tape.log_softmax_rows(node);
    let from_tape = tape.value(logp);
    for r in 0..4 {
        for a in 0..5 {
            assert_eq!(dist.log_prob(r, a).to_bits(), from_tape.get(r, a).to_bits());
        }
    }
}

#[test]
fn sample_frequencies_track_probabilities() {
    let logits = Tensor::new(1, 5, vec![0.9, -0.3, 0.1, -1.0, 0.4]).unwrap();
    let dist = ActionDistribution::from_logits(&logits);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = 200_000;
    let mut counts = [0usize; 5];
    for _ in 0..n {
        counts[dist.sample(0, &mut rng)] += 1;
    }
    for a in 0..5 {
        let p = dist.prob(0, a);
        let freq = counts[a] as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (freq - p).abs() <= 5.0 * sigma,
            "action {a}: frequency {freq} vs probability {p}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn distributions_are_normalized_for_any_logits(
        raw in proptest::collection::vec(-1.0f64..1.0, 5),
    ) {
        let logits = Tensor::new(1, 5, raw).unwrap();
        let dist = ActionDistribution::from_logits(&logits);
        let total: f64 = (0..5).map(|a| dist.prob(0, a)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!((0..5).all(|a| dist.prob(0, a) > 0.0));
        // log_prob is consistent with prob.
        for a in 0..5 {
            prop_assert!((dist.log_prob(0, a).exp() - dist.prob(0, a)).abs() <= 1e-12);
        }
        // Entropy is positive and at most ln 5.
        let h = dist.entropy(0);
        prop_assert!(h > 0.0 && h <= 5.0_f64.ln() + 1e-12);
    }

    #[test]
    fn greedy_is_the_modal_action(
        raw in proptest::collection::vec(-1.0f64..1.0, 5),
    ) {
        let logits = Tensor::new(1, 5, raw).unwrap();
        let dist = ActionDistribution::from_logits(&logits);
        let g = dist.greedy(0);
        for a in 0..5 {
            prop_assert!(dist.prob(0, g) >= dist.prob(0, a));
        }
    }
}
