//! Verifies the combined clipped-surrogate loss against hand-computed
//! values, checks the exact gradient-blocking behavior of the clip, and
//! cross-checks analytic gradients with finite differences.

use mappo_trainer::{build_ppo_loss, clip_fraction, LossInputs, LossNodes};
use tensor_core::{finite_diff_check, ParamStore, Tape, Tensor};

const CLIP: f64 = 0.2;

/// Reference log-softmax with the same max-subtraction scheme as the
/// differentiable kernels.
fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = row.iter().map(|x| (x - max).exp()).sum();
    let log_z = max + sum.ln();
    row.iter().map(|x| x - log_z).collect()
}

struct Built {
    store: ParamStore,
    actions: Vec<usize>,
    logp_old: Vec<f64>,
    advantages: Vec<f64>,
    value_old: Vec<f64>,
    value_targets: Vec<f64>,
    n_agents: usize,
    value_coef: f64,
    entropy_coef: f64,
}

impl Built {
    fn graph(&self, tape: &mut Tape) -> LossNodes {
        let logits_id = self.store.id("logits").unwrap();
        let values_id = self.store.id("values").unwrap();
        let logits = tape.param(logits_id, self.store.get(logits_id).clone());
        let values = tape.param(values_id, self.store.get(values_id).clone());
        build_ppo_loss(
            tape,
            &LossInputs {
                logits,
                actions: &self.actions,
                logp_old: &self.logp_old,
                advantages: &self.advantages,
                values,
                value_old: &self.value_old,
                value_targets: &self.value_targets,
            },
            self.n_agents,
            CLIP,
            self.value_coef,
            self.entropy_coef,
        )
        .unwrap()
    }
}

fn setup(logits: Tensor, values: Tensor) -> Built {
    let mut store = ParamStore::new();
    store.insert("logits", logits).unwrap();
    store.insert("values", values).unwrap();
    Built {
        store,
        actions: vec![],
        logp_old: vec![],
        advantages: vec![],
        value_old: vec![],
        value_targets: vec![],
        n_agents: 1,
        value_coef: 1.0,
        entropy_coef: 0.01,
    }
}

#[test]
fn combined_loss_matches_hand_computation() {
    let logits = Tensor::new(
        3,
        4,
        vec![
            0.3, -0.7, 1.1, 0.2, //
            -0.4, 0.9, 0.05, -1.2, //
            0.6, 0.6, -0.3, 0.8,
        ],
    )
    .unwrap();
    let values = Tensor::column(&[0.45, -0.2]);
    let mut b = setup(logits.clone(), values.clone());
    b.actions = vec![2, 1, 3];
    b.logp_old = vec![-1.1, -0.6, -1.4];
    b.advantages = vec![0.8, -0.5, 1.6];
    b.value_old = vec![0.5, -0.3];
    b.value_targets = vec![0.9, -0.25];
    b.n_agents = 3;
    b.value_coef = 0.7;
    b.entropy_coef = 0.05;

    let mut tape = Tape::new();
    let nodes = b.graph(&mut tape);

    // Hand recomputation with plain arithmetic.
    let mut policy_sum = 0.0;
    let mut entropy_sum = 0.0;
    for (i, row) in (0..3).map(|r| (r, logits.row_slice(r))) {
        let ls = log_softmax(row);
        let ratio = (ls[b.actions[i]] - b.logp_old[i]).exp();
        let clipped = ratio.clamp(1.0 - CLIP, 1.0 + CLIP);
        policy_sum += (ratio * b.advantages[i]).min(clipped * b.advantages[i]);
        entropy_sum += -ls.iter().map(|&l| l.exp() * l).sum::<f64>();
    }
    let policy = policy_sum / 3.0;
    let entropy = entropy_sum / 3.0;
    let mut critic_sum = 0.0;
    for j in 0..2 {
        let v = values.data()[j];
        let raw = (v - b.value_targets[j]).powi(2);
        let v_clip = b.value_old[j] + (v - b.value_old[j]).clamp(-CLIP, CLIP);
        let clipped = (v_clip - b.value_targets[j]).powi(2);
        critic_sum += raw.max(clipped);
    }
    let critic = critic_sum / 2.0;
    let total = -3.0 * (policy - 0.7 * critic + 0.05 * entropy);

    assert!((tape.value(nodes.policy).value() - policy).abs() < 1e-12);
    assert!((tape.value(nodes.entropy).value() - entropy).abs() < 1e-12);
    assert!((tape.value(nodes.critic).value() - critic).abs() < 1e-12);
    assert!((tape.value(nodes.total).value() - total).abs() < 1e-12);
}

#[test]
fn unchanged_policy_recovers_mean_advantage() {
    let logits = Tensor::new(2, 5, vec![0.2, -0.1, 0.7, 0.0, -0.9, 1.3, 0.4, -0.2, 0.1, 0.6]).unwrap();
    let values = Tensor::column(&[0.1, 0.2]);
    let actions = vec![2usize, 0];

    // Compute the exact on-tape log-probabilities first, so "old" and
    // "new" policies agree bit for bit and every ratio is exactly one.
    let logp_old: Vec<f64> = {
        let mut tape = Tape::new();
        let node = tape.constant(logits.clone());
        let ls = tape.log_softmax_rows(node);
        let picked = tape.select_per_row(ls, &actions).unwrap();
        tape.value(picked).data().to_vec()
    };

    let mut b = setup(logits, values);
    b.actions = actions;
    b.logp_old = logp_old;
    b.advantages = vec![0.75, -1.5];
    b.value_old = vec![0.1, 0.2];
    b.value_targets = vec![0.1, 0.2];

    let mut tape = Tape::new();
    let nodes = b.graph(&mut tape);
    let expected = (0.75 + -1.5) / 2.0;
    assert_eq!(tape.value(nodes.policy).value(), expected);
    assert_eq!(tape.value(nodes.critic).value(), 0.0);
    assert_eq!(clip_fraction(tape.value(nodes.ratios), CLIP), 0.0);
}

#[test]
fn clipped_ratios_block_policy_gradients() {
    // One sample far outside the trust region on each side. With the
    // value and entropy terms switched off, every logit gradient must be
    // exactly zero because the clipped branch is a constant.
    for (advantage, logp_old) in [(1.0, -5.0), (-1.0, -0.01)] {
        // ratio = exp(logp_new - logp_old); the first case makes the ratio
        // huge (positive advantage, min picks the clipped constant), the
        // second makes it tiny (negative advantage, same outcome).
        let logits = Tensor::new(1, 3, vec![0.3, -0.2, 0.5]).unwrap();
        let values = Tensor::column(&[0.0]);
        let mut b = setup(logits, values);
        b.actions = vec![1];
        b.logp_old = vec![logp_old];
        b.advantages = vec![advantage];
        b.value_old = vec![0.0];
        b.value_targets = vec![0.0];
        b.value_coef = 0.0;
        b.entropy_coef = 0.0;

        let mut tape = Tape::new();
        let nodes = b.graph(&mut tape);
        let ratio = tape.value(nodes.ratios).data()[0];
        assert!(
            !(1.0 - CLIP..=1.0 + CLIP).contains(&ratio),
            "test setup must land outside the clip band, got ratio {ratio}"
        );
        let grads = tape.backward(nodes.total).unwrap();
        let logits_id = b.store.id("logits").unwrap();
        for &g in grads.get(logits_id).unwrap().data() {
            assert_eq!(g, 0.0, "clipped sample leaked gradient {g}");
        }
    }
}

#[test]
fn interior_ratios_do_pass_gradients() {
    // Control for the blocking test: a ratio inside the band must move.
    let logits = Tensor::new(1, 3, vec![0.3, -0.2, 0.5]).unwrap();
    let values = Tensor::column(&[0.0]);
    let logp_old = log_softmax(&[0.3, -0.2, 0.5])[1];
    let mut b = setup(logits, values);
    b.actions = vec![1];
    b.logp_old = vec![logp_old];
    b.advantages = vec![1.0];
    b.value_old = vec![0.0];
    b.value_targets = vec![0.0];
    b.value_coef = 0.0;
    b.entropy_coef = 0.0;

    let mut tape = Tape::new();
    let nodes = b.graph(&mut tape);
    let grads = tape.backward(nodes.total).unwrap();
    let logits_id = b.store.id("logits").unwrap();
    let norm: f64 = grads
        .get(logits_id)
        .unwrap()
        .data()
        .iter()
        .map(|g| g * g)
        .sum();
    assert!(norm > 1e-6, "in-band sample should produce gradient");
}

#[test]
fn value_overshoot_costs_four_epsilon_squared() {
    // Move the value estimate 2*eps past its old value with the target at
    // the old value: the unclipped error is (2 eps)^2 = 4 eps^2, the
    // clipped branch saturates at eps^2, and the loss takes the larger.
    let v_old = 0.3;
    let v_new = v_old + 2.0 * CLIP;
    let logits = Tensor::new(1, 2, vec![0.1, -0.1]).unwrap();
    let values = Tensor::column(&[v_new]);
    let mut b = setup(logits, values);
    b.actions = vec![0];
    b.logp_old = vec![log_softmax(&[0.1, -0.1])[0]];
    b.advantages = vec![0.0];
    b.value_old = vec![v_old];
    b.value_targets = vec![v_old];
    b.entropy_coef = 0.0;

    let mut tape = Tape::new();
    let nodes = b.graph(&mut tape);
    let expected = 4.0 * CLIP * CLIP;
    assert!((tape.value(nodes.critic).value() - expected).abs() < 1e-15);

    // The unclipped branch wins the max, so the gradient flows through it:
    // d/dv (v - target)^2 = 2 * (v - target) = 4 eps, times n_agents.
    let grads = tape.backward(nodes.total).unwrap();
    let values_id = b.store.id("values").unwrap();
    let g = grads.get(values_id).unwrap().data()[0];
    assert!((g - 4.0 * CLIP).abs() < 1e-15, "value gradient {g}");
}

#[test]
fn uniform_logits_reach_maximum_entropy() {
    let logits = Tensor::new(2, 5, vec![0.7; 10]).unwrap();
    let values = Tensor::column(&[0.0, 0.0]);
    let mut b = setup(logits, values);
    b.actions = vec![0, 3];
    b.logp_old = vec![(1.0f64 / 5.0).ln(), (1.0f64 / 5.0).ln()];
    b.advantages = vec![0.0, 0.0];
    b.value_old = vec![0.0, 0.0];
    b.value_targets = vec![0.0, 0.0];

    let mut tape = Tape::new();
    let nodes = b.graph(&mut tape);
    assert!((tape.value(nodes.entropy).value() - 5.0f64.ln()).abs() < 1e-12);
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let logits = Tensor::new(
        4,
        5,
        vec![
            0.31, -0.44, 0.91, 0.12, -0.73, //
            -0.21, 0.56, 0.08, -0.99, 0.44, //
            0.63, 0.17, -0.35, 0.72, -0.11, //
            -0.52, 0.29, 0.48, -0.16, 0.85,
        ],
    )
    .unwrap();
    let values = Tensor::column(&[0.41, -0.27, 0.18]);
    let mut b = setup(logits, values);
    b.actions = vec![2, 4, 0, 3];
    // Keep every ratio strictly inside the clip band and every value
    // delta away from the clamp kinks so the loss is smooth at the test
    // point and central differences are trustworthy.
    b.logp_old = vec![-1.05, -1.62, -1.55, -1.18];
    b.advantages = vec![0.9, -0.6, 0.35, 1.2];
    b.value_old = vec![0.40, -0.25, 0.20];
    b.value_targets = vec![0.80, -0.60, 0.45];
    b.n_agents = 4;
    b.value_coef = 0.9;
    b.entropy_coef = 0.02;

    let Built {
        mut store,
        actions,
        logp_old,
        advantages,
        value_old,
        value_targets,
        n_agents,
        value_coef,
        entropy_coef,
    } = b;
    let worst = finite_diff_check(&mut store, 1e-6, |tape, store| {
        let logits_id = store.id("logits").unwrap();
        let values_id = store.id("values").unwrap();
        let logits = tape.param(logits_id, store.get(logits_id).clone());
        let values = tape.param(values_id, store.get(values_id).clone());
        build_ppo_loss(
            tape,
            &LossInputs {
                logits,
                actions: &actions,
                logp_old: &logp_old,
                advantages: &advantages,
                values,
                value_old: &value_old,
                value_targets: &value_targets,
            },
            n_agents,
            CLIP,
            value_coef,
            entropy_coef,
        )
        .map(|nodes| nodes.total)
    })
    .unwrap();
    assert!(worst < 1e-6, "worst relative gradient error {worst}");
}
