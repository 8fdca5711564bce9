//! Encoder verification against an independent dense implementation, plus
//! gradient checking and the structural properties attention must satisfy.

use lsa_encoder::{LsaConfig, LsaEncoder};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tensor_core::{finite_diff_check, ParamStore, Tape, Tensor};

fn random_obs(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::new(rows, cols, data).unwrap()
}

fn build(rows: usize, width: usize, prefix: &str, seed: u64) -> (LsaEncoder, ParamStore) {
    let enc = LsaEncoder::new(LsaConfig::new(rows, width), prefix).unwrap();
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    enc.register_params(&mut store, &mut rng).unwrap();
    (enc, store)
}

// ---------------------------------------------------------------------------
// Independent oracle: plain Vec<Vec<f64>> reimplementation of the whole
// pipeline, no shared code with the crate under test.
// ---------------------------------------------------------------------------

type Mat = Vec<Vec<f64>>;

fn to_mat(t: &Tensor) -> Mat {
    (0..t.rows())
        .map(|r| t.row_slice(r).to_vec())
        .collect()
}

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut acc = 0.0;
            for p in 0..k {
                acc += a[i][p] * b[p][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn softmax_rows(a: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.iter().map(|e| e / sum).collect()
        })
        .collect()
}

/// Reference encoder: per head, softmax(obs Wq (obs Wk)^T / sqrt(d)) obs Wv;
/// concatenate heads, mix, flatten row-major, final square layer.
fn reference_encode(enc: &LsaEncoder, store: &ParamStore, obs: &Tensor) -> Vec<f64> {
    let cfg = *enc.cfg();
    let prefix = enc.prefix();
    let mut x = to_mat(obs);
    for m in 1..=cfg.blocks {
        let mut heads: Vec<Mat> = Vec::new();
        for i in 1..=cfg.heads() {
            let get = |w: &str| {
                to_mat(
                    store
                        .get_by_name(&format!("{prefix}.block{m}.head{i}.{w}"))
                        .unwrap(),
                )
            };
            let (q, k, v) = (mat_mul(&x, &get("WQ")), mat_mul(&x, &get("WK")), mat_mul(&x, &get("WV")));
            let scale = 1.0 / (cfg.head_dim() as f64).sqrt();
            let mut scores = vec![vec![0.0; cfg.rows]; cfg.rows];
            for a in 0..cfg.rows {
                for b in 0..cfg.rows {
                    let dot: f64 = (0..cfg.head_dim()).map(|c| q[a][c] * k[b][c]).sum();
                    scores[a][b] = dot * scale;
                }
            }
            heads.push(mat_mul(&softmax_rows(&scores), &v));
        }
        let concat: Mat = (0..cfg.rows)
            .map(|r| heads.iter().flat_map(|h| h[r].iter().cloned()).collect())
            .collect();
        let wo = to_mat(store.get_by_name(&format!("{prefix}.block{m}.WO")).unwrap());
        x = mat_mul(&concat, &wo);
    }
    let flat: Vec<f64> = x.into_iter().flatten().collect();
    let wff = to_mat(
        store
            .get_by_name(&format!("{prefix}.block{}.WFF", cfg.blocks))
            .unwrap(),
    );
    (0..flat.len())
        .map(|j| (0..flat.len()).map(|i| flat[i] * wff[i][j]).sum())
        .collect()
}

#[test]
fn encoder_matches_the_independent_reference() {
    for (rows, width, seed) in [(4usize, 6usize, 1u64), (6, 6, 2), (6, 8, 3), (4, 6, 4)] {
        let (enc, store) = build(rows, width, "lsa", seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        for _ in 0..5 {
            let obs = random_obs(&mut rng, rows, width);
            let got = enc.forward(&store, &obs).unwrap();
            let want = reference_encode(&enc, &store, &obs);
            assert_eq!(got.shape(), [1, rows * width]);
            for (g, w) in got.data().iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12, "encoder {g} vs reference {w}");
            }
        }
    }
}

#[test]
fn stacked_blocks_match_the_reference_too() {
    let mut cfg = LsaConfig::new(4, 6);
    cfg.blocks = 2;
    let enc = LsaEncoder::new(cfg, "lsa").unwrap();
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    enc.register_params(&mut store, &mut rng).unwrap();
    let obs = random_obs(&mut rng, 4, 6);
    let got = enc.forward(&store, &obs).unwrap();
    let want = reference_encode(&enc, &store, &obs);
    for (g, w) in got.data().iter().zip(&want) {
        assert!((g - w).abs() <= 1e-12);
    }
}

// ---------------------------------------------------------------------------
// Gradient check over every encoder parameter.
// ---------------------------------------------------------------------------

#[test]
fn full_encoder_gradients_match_finite_differences() {
    let (enc, mut store) = build(4, 6, "lsa", 9);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let obs = random_obs(&mut rng, 4, 6);
    let weights = random_obs(&mut rng, 1, 24);
    let worst = finite_diff_check(&mut store, 1e-6, |tape, store| {
        let input = tape.constant(obs.clone());
        let encoded = enc.encode(tape, store, input)?;
        let w = tape.constant(weights.clone());
        let weighted = tape.mul_elem(encoded, w)?;
        Ok(tape.sum(weighted))
    })
    .unwrap();
    assert!(worst <= 1e-6, "worst relative gradient error {worst}");
}

// ---------------------------------------------------------------------------
// Structural properties.
// ---------------------------------------------------------------------------

#[test]
fn attention_rows_are_stochastic_and_padding_is_not_masked() {
    let (enc, store) = build(6, 8, "lsa", 21);
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    // Two zero padding rows at the bottom, as a short neighbor list produces.
    let mut obs = random_obs(&mut rng, 6, 8);
    for r in 4..6 {
        obs.row_slice_mut(r).fill(0.0);
    }
    let weights = enc.attention_weights(&store, &obs).unwrap();
    assert_eq!(weights.len(), 1);
    assert_eq!(weights[0].len(), 4);
    for head in &weights[0] {
        assert_eq!(head.shape(), [6, 6]);
        for r in 0..6 {
            let row = head.row_slice(r);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12, "row {r} sums to {sum}");
            // No masking: every row, padding included, gets positive weight.
            assert!(row.iter().all(|&w| w > 0.0));
        }
    }
}

#[test]
fn attention_blocks_are_permutation_equivariant() {
    let (enc, store) = build(6, 8, "lsa", 31);
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for trial in 0..10 {
        let obs = random_obs(&mut rng, 6, 8);
        // Random permutation of the rows.
        let mut perm: Vec<usize> = (0..6).collect();
        for i in (1..6).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let permuted = Tensor::from_fn(6, 8, |r, c| obs.get(perm[r], c));

        let run = |input: &Tensor| {
            let mut tape = Tape::new();
            let node = tape.constant(input.clone());
            let out = enc.attend(&mut tape, &store, node).unwrap();
            tape.value(out).clone()
        };
        let base = run(&obs);
        let shuffled = run(&permuted);
        for r in 0..6 {
            for c in 0..8 {
                let diff = (shuffled.get(r, c) - base.get(perm[r], c)).abs();
                assert!(diff <= 1e-12, "trial {trial}: row {r} col {c} differs by {diff}");
            }
        }
    }
}

#[test]
fn zero_observation_encodes_to_zero_with_zero_gradients() {
    let (enc, store) = build(4, 6, "lsa", 41);
    let obs = Tensor::zeros(4, 6);
    let mut tape = Tape::new();
    let input = tape.constant(obs);
    let out = enc.encode(&mut tape, &store, input).unwrap();
    assert!(tape.value(out).data().iter().all(|&x| x == 0.0));
    let loss = tape.sum(out);
    let grads = tape.backward(loss).unwrap();
    for (id, grad) in grads.iter() {
        assert!(
            grad.data().iter().all(|&g| g == 0.0),
            "parameter {} has a nonzero gradient on zero input",
            store.name(id)
        );
    }
}

#[test]
fn initialization_is_bounded_seeded_and_prefix_scoped() {
    let (enc_a, store_a) = build(4, 6, "lsa", 5);
    let (_, store_b) = build(4, 6, "lsa", 5);
    let (_, store_c) = build(4, 6, "lsa", 6);

    for name in enc_a.param_names() {
        let t = store_a.get_by_name(&name).unwrap();
        let bound = 1.0 / (t.rows() as f64).sqrt();
        assert!(t.data().iter().all(|&x| x.abs() <= bound), "{name} out of range");
        // Same seed reproduces bit-identical draws; a different seed diverges.
        let same = store_b.get_by_name(&name).unwrap();
        assert_eq!(t.data(), same.data(), "{name} differs across identical seeds");
        let other = store_c.get_by_name(&name).unwrap();
        assert_ne!(t.data(), other.data(), "{name} ignored the seed");
    }

    // Actor and critic copies can coexist in one store under different
    // prefixes.
    let mut store = ParamStore::new();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let actor = LsaEncoder::new(LsaConfig::new(4, 6), "lsa").unwrap();
    let critic = LsaEncoder::new(LsaConfig::new(4, 6), "critic.lsa").unwrap();
    actor.register_params(&mut store, &mut rng).unwrap();
    critic.register_params(&mut store, &mut rng).unwrap();
    assert_eq!(store.len(), 22);
}

#[test]
fn snapshot_roundtrip_preserves_the_encoding_bit_for_bit() {
    let (enc, store) = build(4, 6, "lsa", 51);
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let obs = random_obs(&mut rng, 4, 6);
    let before = enc.forward(&store, &obs).unwrap();

    let mut buf = Vec::new();
    tensor_core::save_params(&store, &mut buf).unwrap();
    let restored = tensor_core::load_params(&mut buf.as_slice()).unwrap();
    let after = enc.forward(&restored, &obs).unwrap();

    let same_bits = before
        .data()
        .iter()
        .zip(after.data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same_bits);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_stays_row_stochastic_for_any_input(
        seed in any::<u64>(),
        obs_seed in any::<u64>(),
    ) {
        let (enc, store) = build(4, 6, "lsa", seed);
        let mut rng = ChaCha8Rng::seed_from_u64(obs_seed);
        let obs = random_obs(&mut rng, 4, 6);
        let weights = enc.attention_weights(&store, &obs).unwrap();
        for head in &weights[0] {
            for r in 0..4 {
                let sum: f64 = head.row_slice(r).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-9);
                prop_assert!(head.row_slice(r).iter().all(|&w| (0.0..=1.0).contains(&w)));
            }
        }
    }

    #[test]
    fn encoding_is_a_pure_function_of_store_and_input(
        seed in any::<u64>(),
        obs_seed in any::<u64>(),
    ) {
        let (enc, store) = build(4, 6, "lsa", seed);
        let mut rng = ChaCha8Rng::seed_from_u64(obs_seed);
        let obs = random_obs(&mut rng, 4, 6);
        let a = enc.forward(&store, &obs).unwrap();
        let b = enc.forward(&store, &obs).unwrap();
        prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
