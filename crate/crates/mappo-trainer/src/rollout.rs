use crate::gae::gae;
use crate::model::CriticScope;

/// Fixed-length on-policy experience from `n_envs` environments stepped
/// for `t_steps` each, with auto-reset at episode boundaries.
///
/// Layout: per-agent quantities are indexed `[env][t][agent]`, per-step
/// quantities `[env][t]`, all flattened row-major. Observations are stored
/// after feature masking, exactly as the networks saw them, so update-time
/// recomputation is bit-identical to collection time.
pub struct RolloutBatch {
    pub n_envs: usize,
    pub t_steps: usize,
    pub n_agents: usize,
    /// Flat feature length per agent observation.
    pub k: usize,
    pub critic_scope: CriticScope,

    /// Masked observations, `n_envs * t_steps * n_agents * k` scalars; the
    /// `n_agents * k` block for one step is contiguous in agent-id order.
    pub obs: Vec<f64>,
    /// Sampled action index per agent sample (placeholder for dead agents).
    pub actions: Vec<usize>,
    /// Log-probability of the sampled action at collection time.
    pub logp_old: Vec<f64>,
    /// Whether the agent was alive when the step's actions were chosen;
    /// dead samples are excluded from every loss.
    pub alive: Vec<bool>,
    /// Whether the agent crashed during this step (alive before, not after).
    pub agent_terminal: Vec<bool>,
    /// Shared team reward per environment step.
    pub rewards: Vec<f64>,
    /// Episode-over flag per environment step.
    pub dones: Vec<bool>,

    /// Value estimates at collection time: one per step for a joint
    /// critic, one per agent sample for a local critic.
    pub values: Vec<f64>,
    /// Value of the observation after the final step (zero if an episode
    /// boundary or agent death makes it irrelevant); one per environment
    /// for a joint critic, one per (environment, agent) for a local one.
    pub bootstrap: Vec<f64>,

    /// Generalized advantage estimates, same indexing as `values`.
    pub adv_raw: Vec<f64>,
    /// Value regression targets, formed as `adv_raw + values` elementwise.
    pub returns: Vec<f64>,
    /// Normalized advantages, one per agent sample (zero for dead samples).
    pub adv_norm: Vec<f64>,

    /// Episodes that reached a terminal state during collection.
    pub episodes_completed: usize,
    /// Of those, how many saw at least one agent crash.
    pub episodes_crashed: usize,
}

impl RolloutBatch {
    pub fn new(
        n_envs: usize,
        t_steps: usize,
        n_agents: usize,
        k: usize,
        critic_scope: CriticScope,
    ) -> Self {
        let steps = n_envs * t_steps;
        let samples = steps * n_agents;
        let (n_values, n_bootstrap) = match critic_scope {
            CriticScope::Joint => (steps, n_envs),
            CriticScope::Local => (samples, n_envs * n_agents),
        };
        RolloutBatch {
            n_envs,
            t_steps,
            n_agents,
            k,
            critic_scope,
            obs: vec![0.0; samples * k],
            actions: vec![0; samples],
            logp_old: vec![0.0; samples],
            alive: vec![false; samples],
            agent_terminal: vec![false; samples],
            rewards: vec![0.0; steps],
            dones: vec![false; steps],
            values: vec![0.0; n_values],
            bootstrap: vec![0.0; n_bootstrap],
            adv_raw: vec![0.0; n_values],
            returns: vec![0.0; n_values],
            adv_norm: vec![0.0; samples],
            episodes_completed: 0,
            episodes_crashed: 0,
        }
    }

    /// Index into per-step arrays.
    pub fn step_index(&self, env: usize, t: usize) -> usize {
        debug_assert!(env < self.n_envs && t < self.t_steps);
        env * self.t_steps + t
    }

    /// Index into per-agent-sample arrays.
    pub fn sample_index(&self, env: usize, t: usize, agent: usize) -> usize {
        debug_assert!(agent < self.n_agents);
        self.step_index(env, t) * self.n_agents + agent
    }

    /// One agent's masked observation at a step.
    pub fn obs_at(&self, env: usize, t: usize, agent: usize) -> &[f64] {
        let start = self.sample_index(env, t, agent) * self.k;
        &self.obs[start..start + self.k]
    }

    /// All agents' observations at a step, concatenated in id order.
    pub fn joint_obs_at(&self, env: usize, t: usize) -> &[f64] {
        let start = self.sample_index(env, t, 0) * self.k;
        &self.obs[start..start + self.n_agents * self.k]
    }

    /// The advantage a policy sample trains against (normalized).
    pub fn advantage_for(&self, env: usize, t: usize, agent: usize) -> f64 {
        self.adv_norm[self.sample_index(env, t, agent)]
    }

    /// The collection-time value estimate backing a sample.
    pub fn value_for(&self, env: usize, t: usize, agent: usize) -> f64 {
        match self.critic_scope {
            CriticScope::Joint => self.values[self.step_index(env, t)],
            CriticScope::Local => self.values[self.sample_index(env, t, agent)],
        }
    }

    /// The raw (unnormalized) advantage backing a sample.
    pub fn raw_advantage_for(&self, env: usize, t: usize, agent: usize) -> f64 {
        match self.critic_scope {
            CriticScope::Joint => self.adv_raw[self.step_index(env, t)],
            CriticScope::Local => self.adv_raw[self.sample_index(env, t, agent)],
        }
    }

    /// The value regression target backing a sample.
    pub fn return_for(&self, env: usize, t: usize, agent: usize) -> f64 {
        match self.critic_scope {
            CriticScope::Joint => self.returns[self.step_index(env, t)],
            CriticScope::Local => self.returns[self.sample_index(env, t, agent)],
        }
    }

    /// Mean per-step team reward over the whole rollout.
    pub fn mean_reward(&self) -> f64 {
        let n = self.rewards.len();
        if n == 0 {
            return 0.0;
        }
        self.rewards.iter().sum::<f64>() / n as f64
    }

    /// Runs advantage estimation over every stream in the batch.
    ///
    /// A joint critic has one stream per environment; a local critic has
    /// one per (environment, agent), cut not only at episode boundaries
    /// but also at the step an agent crashes (its future value is zero
    /// from then on). Afterward `returns == adv_raw + values` holds
    /// bitwise on every entry, which is asserted here and relied on when
    /// minibatches are assembled.
    pub fn compute_gae(&mut self, gamma: f64, lam: f64) {
        match self.critic_scope {
            CriticScope::Joint => {
                for e in 0..self.n_envs {
                    let s = self.step_index(e, 0);
                    let range = s..s + self.t_steps;
                    let (adv, ret) = gae(
                        &self.rewards[range.clone()],
                        &self.values[range.clone()],
                        &self.dones[range.clone()],
                        self.bootstrap[e],
                        gamma,
                        lam,
                    );
                    self.adv_raw[range.clone()].copy_from_slice(&adv);
                    self.returns[range].copy_from_slice(&ret);
                }
            }
            CriticScope::Local => {
                let mut stream_rewards = vec![0.0; self.t_steps];
                let mut stream_values = vec![0.0; self.t_steps];
                let mut stream_dones = vec![false; self.t_steps];
                for e in 0..self.n_envs {
                    for i in 0..self.n_agents {
                        for t in 0..self.t_steps {
                            let s = self.step_index(e, t);
                            let a = self.sample_index(e, t, i);
                            stream_rewards[t] = self.rewards[s];
                            stream_values[t] = self.values[a];
                            stream_dones[t] = self.dones[s] || self.agent_terminal[a];
                        }
                        let (adv, ret) = gae(
                            &stream_rewards,
                            &stream_values,
                            &stream_dones,
                            self.bootstrap[e * self.n_agents + i],
                            gamma,
                            lam,
                        );
                        for t in 0..self.t_steps {
                            let a = self.sample_index(e, t, i);
                            if self.alive[a] {
                                self.adv_raw[a] = adv[t];
                                self.returns[a] = ret[t];
                            } else {
                                self.adv_raw[a] = 0.0;
                                self.returns[a] = 0.0;
                            }
                        }
                    }
                }
            }
        }
        self.assert_target_identity();
    }

    /// Checks that every live regression target is exactly the advantage
    /// plus the collection-time value — the identity the clipped value
    /// loss assumes. Active in release builds; a violation is a bug.
    pub fn assert_target_identity(&self) {
        for e in 0..self.n_envs {
            for t in 0..self.t_steps {
                for i in 0..self.n_agents {
                    if !self.alive[self.sample_index(e, t, i)] {
                        continue;
                    }
                    let ret = self.return_for(e, t, i);
                    let sum = self.raw_advantage_for(e, t, i) + self.value_for(e, t, i);
                    assert_eq!(
                        ret.to_bits(),
                        sum.to_bits(),
                        "value target diverged from advantage + value at env {e}, step {t}, agent {i}"
                    );
                }
            }
        }
    }

    /// Normalizes advantages to zero mean and unit variance across every
    /// live agent sample in the batch, with a floor on the denominator.
    /// Dead samples stay at zero.
    pub fn normalize_advantages(&mut self, std_floor: f64) {
        let mut live = Vec::with_capacity(self.adv_norm.len());
        for e in 0..self.n_envs {
            for t in 0..self.t_steps {
                for i in 0..self.n_agents {
                    if self.alive[self.sample_index(e, t, i)] {
                        live.push(self.raw_advantage_for(e, t, i));
                    }
                }
            }
        }
        if live.is_empty() {
            return;
        }
        let n = live.len() as f64;
        let mean = live.iter().sum::<f64>() / n;
        let var = live.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
        let denom = var.sqrt().max(std_floor);
        for e in 0..self.n_envs {
            for t in 0..self.t_steps {
                for i in 0..self.n_agents {
                    let a = self.sample_index(e, t, i);
                    self.adv_norm[a] = if self.alive[a] {
                        (self.raw_advantage_for(e, t, i) - mean) / denom
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}
