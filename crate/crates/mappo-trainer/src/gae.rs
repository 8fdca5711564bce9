/// Generalized advantage estimation over one reward/value stream.
///
/// For each step `t` the one-step error is
/// `delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)`, and the
/// advantage satisfies the backward recursion
/// `A_t = delta_t + gamma * lam * (1 - done_t) * A_{t+1}`. A `true` in
/// `dones[t]` means the episode ended with step `t`, so nothing after `t`
/// leaks into it. `bootstrap` stands in for the value of the state after
/// the final step when the stream ends mid-episode.
///
/// Returns `(advantages, returns)` where `returns[t]` is computed literally
/// as `advantages[t] + values[t]`; downstream value targets rely on that
/// identity holding bitwise, so this function is the single place the sum
/// is formed.
///
/// # Panics
/// Panics if the three input slices do not share one length.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len(), "rewards/values length mismatch");
    assert_eq!(rewards.len(), dones.len(), "rewards/dones length mismatch");
    let t_len = rewards.len();
    let mut advantages = vec![0.0; t_len];
    let mut returns = vec![0.0; t_len];
    let mut next_adv = 0.0;
    for t in (0..t_len).rev() {
        let (next_value, carried) = if dones[t] {
            (0.0, 0.0)
        } else if t + 1 < t_len {
            (values[t + 1], next_adv)
        } else {
            (bootstrap, 0.0)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        let adv = delta + gamma * lam * carried;
        advantages[t] = adv;
        returns[t] = adv + values[t];
        next_adv = adv;
    }
    (advantages, returns)
}
