use tensor_core::{NodeId, Tape, Tensor, TensorError};

/// Everything one minibatch update needs, with the network outputs already
/// on the tape. Policy samples (one per acting agent) and value samples
/// (one per environment step for a joint critic, one per acting agent for
/// a local critic) may differ in count.
pub struct LossInputs<'a> {
    /// `B x A` action logits, one row per policy sample.
    pub logits: NodeId,
    /// Chosen action index per policy sample.
    pub actions: &'a [usize],
    /// Log-probability each action had when it was sampled.
    pub logp_old: &'a [f64],
    /// Normalized advantage per policy sample.
    pub advantages: &'a [f64],
    /// `Bv x 1` value estimates under the current parameters.
    pub values: NodeId,
    /// Value estimate each sample had when it was collected.
    pub value_old: &'a [f64],
    /// Regression target per value sample.
    pub value_targets: &'a [f64],
}

/// Handles into the assembled loss graph. `total` is the node to minimize;
/// the component nodes and the ratio column are kept for metrics.
pub struct LossNodes {
    /// Scalar to minimize: `-(n_agents) * (policy - c1 * value + c2 * entropy)`.
    pub total: NodeId,
    /// Clipped surrogate policy objective (to be maximized).
    pub policy: NodeId,
    /// Clipped value regression loss (to be minimized).
    pub critic: NodeId,
    /// Mean policy entropy (to be maximized).
    pub entropy: NodeId,
    /// `B x 1` probability ratios, for clip-rate diagnostics.
    pub ratios: NodeId,
}

/// Builds the combined clipped-surrogate objective on `tape`.
///
/// Per policy sample `i` with ratio `r_i = exp(logp_new_i - logp_old_i)`
/// and advantage `a_i`, the policy term is
/// `mean_i(min(r_i * a_i, clip(r_i, 1-eps, 1+eps) * a_i))`. The value term
/// is `mean_j(max((v_j - t_j)^2, (v_old_j + clip(v_j - v_old_j, -eps, eps) - t_j)^2))`.
/// The entropy term is the mean per-sample entropy of the action
/// distribution. The three are combined and scaled by the agent count,
/// negated so that minimizing `total` maximizes the objective.
pub fn build_ppo_loss(
    tape: &mut Tape,
    inp: &LossInputs<'_>,
    n_agents: usize,
    clip_eps: f64,
    value_coef: f64,
    entropy_coef: f64,
) -> Result<LossNodes, TensorError> {
    let b = inp.actions.len();
    let invalid = |msg: String| TensorError::InvalidArgument {
        op: "build_ppo_loss",
        msg,
    };
    if b == 0 {
        return Err(invalid("no policy samples".into()));
    }
    if inp.logp_old.len() != b || inp.advantages.len() != b {
        return Err(invalid("policy sample arrays disagree in length".into()));
    }
    let logits_shape = tape.value(inp.logits).shape();
    if logits_shape[0] != b {
        return Err(invalid(format!(
            "logits have {} rows for {} policy samples",
            logits_shape[0], b
        )));
    }
    let bv = inp.value_old.len();
    if bv == 0 {
        return Err(invalid("no value samples".into()));
    }
    if inp.value_targets.len() != bv {
        return Err(invalid("value sample arrays disagree in length".into()));
    }
    let values_shape = tape.value(inp.values).shape();
    if values_shape != [bv, 1] {
        return Err(invalid(format!(
            "values node is {}x{}, expected {bv}x1",
            values_shape[0], values_shape[1]
        )));
    }

    // Policy surrogate.
    let logp_all = tape.log_softmax_rows(inp.logits);
    let logp_new = tape.select_per_row(logp_all, inp.actions)?;
    let logp_old = tape.constant(Tensor::column(inp.logp_old));
    let diff = tape.sub(logp_new, logp_old)?;
    let ratios = tape.exp(diff);
    let adv = tape.constant(Tensor::column(inp.advantages));
    let surr_raw = tape.mul_elem(ratios, adv)?;
    let ratio_clipped = tape.clamp(ratios, 1.0 - clip_eps, 1.0 + clip_eps)?;
    let surr_clipped = tape.mul_elem(ratio_clipped, adv)?;
    let surr = tape.min_elem(surr_raw, surr_clipped)?;
    let policy = tape.mean(surr);

    // Entropy bonus: mean over samples of -(sum_a p * log p).
    let probs = tape.softmax_rows(inp.logits);
    let plogp = tape.mul_elem(probs, logp_all)?;
    let plogp_sum = tape.sum(plogp);
    let entropy = tape.scale(plogp_sum, -1.0 / b as f64);

    // Clipped value regression.
    let targets = tape.constant(Tensor::column(inp.value_targets));
    let v_old = tape.constant(Tensor::column(inp.value_old));
    let err = tape.sub(inp.values, targets)?;
    let sq_raw = tape.mul_elem(err, err)?;
    let v_delta = tape.sub(inp.values, v_old)?;
    let v_delta_clipped = tape.clamp(v_delta, -clip_eps, clip_eps)?;
    let v_clipped = tape.add(v_old, v_delta_clipped)?;
    let err_clipped = tape.sub(v_clipped, targets)?;
    let sq_clipped = tape.mul_elem(err_clipped, err_clipped)?;
    let sq = tape.max_elem(sq_raw, sq_clipped)?;
    let critic = tape.mean(sq);

    // total = -(n) * (policy - c1 * critic + c2 * entropy)
    let weighted_critic = tape.scale(critic, value_coef);
    let after_critic = tape.sub(policy, weighted_critic)?;
    let weighted_entropy = tape.scale(entropy, entropy_coef);
    let objective = tape.add(after_critic, weighted_entropy)?;
    let total = tape.scale(objective, -(n_agents as f64));

    Ok(LossNodes {
        total,
        policy,
        critic,
        entropy,
        ratios,
    })
}

/// Fraction of probability ratios that fell outside `[1-eps, 1+eps]`.
pub fn clip_fraction(ratios: &Tensor, clip_eps: f64) -> f64 {
    let n = ratios.len();
    if n == 0 {
        return 0.0;
    }
    let clipped = ratios
        .data()
        .iter()
        .filter(|&&r| (r - 1.0).abs() > clip_eps)
        .count();
    clipped as f64 / n as f64
}
