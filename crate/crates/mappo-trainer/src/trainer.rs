use crate::hyper::Hyperparams;
use crate::losses::{build_ppo_loss, clip_fraction, LossInputs};
use crate::model::{CriticScope, FeatureMask, ModelConfig, PolicyModel};
use crate::rollout::RolloutBatch;
use highway_sim::{
    AgentAction, ConfigError, HighwayEnv, ObservationMatrix, ScenarioConfig, SimError, VehicleKind,
};
use policy_nets::ActionDistribution;
use rand::{RngCore, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use tensor_core::{adam_step, clip_grad_norm, AdamParams, AdamState, Tape, TensorError};
use thiserror::Error;

/// Distinct random streams derived from one training seed, so reordering
/// consumers never shifts another stream's draws.
const STREAM_ENV_SEEDS: u64 = 0x1000;
const STREAM_ACTIONS: u64 = 0x2000;
const STREAM_SHUFFLE: u64 = 0x3000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("non-finite {context} at epoch {epoch}; aborting before the update corrupts parameters")]
    NonFinite { epoch: usize, context: String },
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-step team reward over the epoch's rollout (already in [0, 1]).
    pub mean_reward_norm: f64,
    /// Mean negated surrogate objective across updates (lower is better).
    pub policy_loss: f64,
    /// Mean clipped value-regression loss across updates.
    pub value_loss: f64,
    /// Mean policy entropy across updates.
    pub entropy: f64,
    /// Fraction of probability ratios outside the clip band.
    pub clip_fraction: f64,
    /// Fraction of episodes finished this epoch that saw an agent crash.
    pub crash_rate: f64,
}

/// Greedy evaluation summary over a batch of fresh episodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub episodes: usize,
    /// Mean per-step team reward (already normalized to [0, 1]).
    pub mean_reward: f64,
    /// Fraction of episodes with at least one agent crash.
    pub crash_rate: f64,
    /// Mean speed of live controlled vehicles across all steps.
    pub mean_cav_speed: f64,
    /// Mean priority-vehicle slowdown across all steps: 0 when it holds
    /// its cruising target, 1 when fully stopped.
    pub pv_delay: f64,
}

/// Owns the model, the vectorized environments, and the optimizer state;
/// each `train_epoch` call collects one on-policy rollout and runs the
/// clipped-surrogate updates over it.
pub struct Trainer {
    hp: Hyperparams,
    scenario: ScenarioConfig,
    model: PolicyModel,
    envs: Vec<HighwayEnv>,
    /// Masked, flattened current observation per environment
    /// (`n_agents * k` scalars each).
    current_obs: Vec<Vec<f64>>,
    current_alive: Vec<Vec<bool>>,
    ep_crashed: Vec<bool>,
    env_seed_rngs: Vec<ChaCha8Rng>,
    action_rngs: Vec<ChaCha8Rng>,
    shuffle_rng: ChaCha8Rng,
    adam: AdamState,
    epoch: usize,
}

impl Trainer {
    /// Builds the model, spins up `hp.n_envs` environments, and resets each
    /// from its own seed stream. The same `(scenario, model_cfg, hp, seed)`
    /// always yields bitwise-identical training runs.
    pub fn new(
        scenario: ScenarioConfig,
        model_cfg: ModelConfig,
        hp: Hyperparams,
        seed: u64,
    ) -> Result<Self, TrainError> {
        hp.validate().map_err(TrainError::Config)?;
        if model_cfg.n_agents != scenario.n_cav {
            return Err(TrainError::Config(format!(
                "model expects {} agents, scenario has {}",
                model_cfg.n_agents, scenario.n_cav
            )));
        }
        if model_cfg.obs_rows != scenario.n_obs {
            return Err(TrainError::Config(format!(
                "model expects {} observation rows, scenario produces {}",
                model_cfg.obs_rows, scenario.n_obs
            )));
        }
        if model_cfg.obs_width != scenario.obs_width() {
            return Err(TrainError::Config(format!(
                "model expects width-{} observations, scenario produces width {} \
                 (heading columns {})",
                model_cfg.obs_width,
                scenario.obs_width(),
                if scenario.include_angles { "on" } else { "off" }
            )));
        }
        if model_cfg.n_actions != AgentAction::COUNT {
            return Err(TrainError::Config(format!(
                "model expects {} actions, environment defines {}",
                model_cfg.n_actions,
                AgentAction::COUNT
            )));
        }

        let model = PolicyModel::new(model_cfg, seed)?;
        let adam = AdamState::new(model.store(), AdamParams::with_lr(hp.lr));

        let stream_rng = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        let mut env_seed_rngs: Vec<ChaCha8Rng> = (0..hp.n_envs)
            .map(|e| stream_rng(STREAM_ENV_SEEDS + e as u64))
            .collect();
        let action_rngs: Vec<ChaCha8Rng> = (0..hp.n_envs)
            .map(|e| stream_rng(STREAM_ACTIONS + e as u64))
            .collect();
        let shuffle_rng = stream_rng(STREAM_SHUFFLE);

        let mut envs = Vec::with_capacity(hp.n_envs);
        let mut current_obs = Vec::with_capacity(hp.n_envs);
        let mut current_alive = Vec::with_capacity(hp.n_envs);
        for rng in env_seed_rngs.iter_mut() {
            let mut env = HighwayEnv::new(scenario.clone())?;
            let obs = env.reset(rng.next_u64())?;
            current_obs.push(flatten_masked(&obs, model_cfg.feature_mask, model_cfg.obs_width));
            current_alive.push(vec![true; model_cfg.n_agents]);
            envs.push(env);
        }

        Ok(Trainer {
            hp,
            scenario,
            model,
            envs,
            current_obs,
            current_alive,
            ep_crashed: vec![false; hp.n_envs],
            env_seed_rngs,
            action_rngs,
            shuffle_rng,
            adam,
            epoch: 0,
        })
    }

    pub fn hp(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn model(&self) -> &PolicyModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut PolicyModel {
        &mut self.model
    }

    /// Epochs trained so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Steps every environment `t_steps` times under the current policy,
    /// resetting at episode boundaries, then computes advantages, value
    /// targets, and normalized advantages for the whole batch.
    pub fn collect_rollout(&mut self) -> Result<RolloutBatch, TrainError> {
        let n_envs = self.hp.n_envs;
        let n_agents = self.model.cfg().n_agents;
        let k = self.model.cfg().feature_len();
        let scope = self.model.cfg().critic_scope;
        let mask = self.model.cfg().feature_mask;
        let width = self.model.cfg().obs_width;
        let mut batch = RolloutBatch::new(n_envs, self.hp.t_steps, n_agents, k, scope);

        for t in 0..self.hp.t_steps {
            // Stage the current observations into the batch first, then
            // run the networks on those exact slices: what is stored is
            // literally what was encoded.
            for e in 0..n_envs {
                let start = batch.sample_index(e, t, 0) * k;
                batch.obs[start..start + n_agents * k].copy_from_slice(&self.current_obs[e]);
            }

            let (logits_rows, step_values) = {
                let mut tape = Tape::new();
                let actor_in = (0..n_envs)
                    .flat_map(|e| (0..n_agents).map(move |i| (e, i)))
                    .map(|(e, i)| batch.obs_at(e, t, i));
                let logits = self.model.actor_logits(&mut tape, actor_in)?;
                let values = match scope {
                    CriticScope::Joint => {
                        let groups = (0..n_envs).map(|e| batch.joint_obs_at(e, t));
                        self.model.joint_values(&mut tape, groups)?
                    }
                    CriticScope::Local => {
                        let rows = (0..n_envs)
                            .flat_map(|e| (0..n_agents).map(move |i| (e, i)))
                            .map(|(e, i)| batch.obs_at(e, t, i));
                        self.model.local_values(&mut tape, rows)?
                    }
                };
                (
                    tape.value(logits).clone(),
                    tape.value(values).data().to_vec(),
                )
            };
            let dist = ActionDistribution::from_logits(&logits_rows);

            for e in 0..n_envs {
                match scope {
                    CriticScope::Joint => {
                        let s = batch.step_index(e, t);
                        batch.values[s] = step_values[e];
                    }
                    CriticScope::Local => {
                        for i in 0..n_agents {
                            let a = batch.sample_index(e, t, i);
                            batch.values[a] = if self.current_alive[e][i] {
                                step_values[e * n_agents + i]
                            } else {
                                0.0
                            };
                        }
                    }
                }

                // The environment takes actions for live agents only, in
                // agent-id order.
                let mut acts = Vec::with_capacity(n_agents);
                for i in 0..n_agents {
                    let row = e * n_agents + i;
                    let a = batch.sample_index(e, t, i);
                    if self.current_alive[e][i] {
                        let action = dist.sample(row, &mut self.action_rngs[e]);
                        acts.push(
                            AgentAction::from_index(action).expect("sampled action index in range"),
                        );
                        batch.actions[a] = action;
                        batch.logp_old[a] = dist.log_prob(row, action);
                        batch.alive[a] = true;
                    } else {
                        batch.actions[a] = AgentAction::Idle.index();
                        batch.logp_old[a] = 0.0;
                        batch.alive[a] = false;
                    }
                }

                let out = self.envs[e].step(&acts)?;
                let s = batch.step_index(e, t);
                batch.rewards[s] = out.reward;
                batch.dones[s] = out.done;
                for i in 0..n_agents {
                    let a = batch.sample_index(e, t, i);
                    batch.agent_terminal[a] =
                        self.current_alive[e][i] && !out.agent_alive[i];
                }
                if out
                    .crashes
                    .iter()
                    .any(|&(x, y)| (x as usize) < n_agents || (y as usize) < n_agents)
                {
                    self.ep_crashed[e] = true;
                }

                if out.done {
                    batch.episodes_completed += 1;
                    if self.ep_crashed[e] {
                        batch.episodes_crashed += 1;
                    }
                    self.ep_crashed[e] = false;
                    let seed = self.env_seed_rngs[e].next_u64();
                    let obs = self.envs[e].reset(seed)?;
                    self.current_obs[e] = flatten_masked(&obs, mask, width);
                    self.current_alive[e] = vec![true; n_agents];
                } else {
                    self.current_obs[e] = flatten_masked(&out.obs, mask, width);
                    self.current_alive[e] = out.agent_alive.clone();
                }
            }
        }

        // Value of the observation after the last step, for streams that
        // ran off the end of the window mid-episode.
        {
            let mut tape = Tape::new();
            match scope {
                CriticScope::Joint => {
                    let groups = self.current_obs.iter().map(|o| o.as_slice());
                    let node = self.model.joint_values(&mut tape, groups)?;
                    let vals = tape.value(node).data().to_vec();
                    batch.bootstrap.copy_from_slice(&vals);
                }
                CriticScope::Local => {
                    let rows = self
                        .current_obs
                        .iter()
                        .flat_map(|o| o.chunks_exact(k));
                    let node = self.model.local_values(&mut tape, rows)?;
                    let vals = tape.value(node).data().to_vec();
                    for e in 0..n_envs {
                        for i in 0..n_agents {
                            let idx = e * n_agents + i;
                            batch.bootstrap[idx] = if self.current_alive[e][i] {
                                vals[idx]
                            } else {
                                0.0
                            };
                        }
                    }
                }
            }
        }

        batch.compute_gae(self.hp.gamma, self.hp.lam);
        batch.normalize_advantages(self.hp.adv_std_floor);
        Ok(batch)
    }

    /// Runs the configured passes of shuffled-minibatch updates over one
    /// rollout. Returns `(policy_loss, value_loss, entropy, clip_fraction)`
    /// averaged over all updates.
    pub fn update(&mut self, batch: &RolloutBatch) -> Result<(f64, f64, f64, f64), TrainError> {
        let n_agents = self.model.cfg().n_agents;
        let scope = self.model.cfg().critic_scope;
        let stepsid: Vec<usize> = (0..self.hp.n_envs * self.hp.t_steps).collect();

        let mut policy_sum = 0.0;
        let mut value_sum = 0.0;
        let mut entropy_sum = 0.0;
        let mut clip_sum = 0.0;
        let mut n_updates = 0usize;

        for _ in 0..self.hp.passes {
            let order = steps_shuffled(&stepsid, &mut self.shuffle_rng);
            for chunk in split_chunks(&order, self.hp.minibatches) {
                // Gather the minibatch sample lists.
                let mut pol_obs: Vec<&[f64]> = Vec::new();
                let mut actions: Vec<usize> = Vec::new();
                let mut logp_old: Vec<f64> = Vec::new();
                let mut advantages: Vec<f64> = Vec::new();
                let mut val_obs: Vec<&[f64]> = Vec::new();
                let mut value_old: Vec<f64> = Vec::new();
                let mut value_targets: Vec<f64> = Vec::new();

                for &step in chunk.iter() {
                    let e = step / self.hp.t_steps;
                    let t = step % self.hp.t_steps;
                    for i in 0..n_agents {
                        let a = batch.sample_index(e, t, i);
                        if !batch.alive[a] {
                            continue;
                        }
                        pol_obs.push(batch.obs_at(e, t, i));
                        actions.push(batch.actions[a]);
                        logp_old.push(batch.logp_old[a]);
                        advantages.push(batch.advantage_for(e, t, i));
                        if scope == CriticScope::Local {
                            val_obs.push(batch.obs_at(e, t, i));
                            let target = batch.return_for(e, t, i);
                            let v_old = batch.value_for(e, t, i);
                            assert_eq!(
                                target.to_bits(),
                                (batch.raw_advantage_for(e, t, i) + v_old).to_bits(),
                                "value target must equal advantage + value"
                            );
                            value_old.push(v_old);
                            value_targets.push(target);
                        }
                    }
                    if scope == CriticScope::Joint {
                        val_obs.push(batch.joint_obs_at(e, t));
                        let s = batch.step_index(e, t);
                        let target = batch.returns[s];
                        assert_eq!(
                            target.to_bits(),
                            (batch.adv_raw[s] + batch.values[s]).to_bits(),
                            "value target must equal advantage + value"
                        );
                        value_old.push(batch.values[s]);
                        value_targets.push(target);
                    }
                }

                let mut tape = Tape::new();
                let logits = self.model.actor_logits(&mut tape, pol_obs.iter().copied())?;
                let values = match scope {
                    CriticScope::Joint => {
                        self.model.joint_values(&mut tape, val_obs.iter().copied())?
                    }
                    CriticScope::Local => {
                        self.model.local_values(&mut tape, val_obs.iter().copied())?
                    }
                };
                let loss = build_ppo_loss(
                    &mut tape,
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
                    self.hp.clip_eps,
                    self.hp.value_coef,
                    self.hp.entropy_coef,
                )?;

                let total = tape.value(loss.total).value();
                let policy = tape.value(loss.policy).value();
                let critic = tape.value(loss.critic).value();
                let entropy = tape.value(loss.entropy).value();
                if !(total.is_finite() && policy.is_finite() && critic.is_finite() && entropy.is_finite())
                {
                    return Err(TrainError::NonFinite {
                        epoch: self.epoch,
                        context: format!(
                            "loss (total {total}, surrogate {policy}, value {critic}, entropy {entropy})"
                        ),
                    });
                }
                clip_sum += clip_fraction(tape.value(loss.ratios), self.hp.clip_eps);
                policy_sum += -policy;
                value_sum += critic;
                entropy_sum += entropy;
                n_updates += 1;

                let mut grads = tape.backward(loss.total)?;
                let grad_norm = clip_grad_norm(&mut grads, self.hp.max_grad_norm);
                
                if !grad_norm.is_finite() {
                    return Err(TrainError::NonFinite {
                        epoch: self.epoch,
                        context: format!("gradient norm {grad_norm}"),
                    });
                }
                adam_step(self.model.store_mut(), &grads, &mut self.adam)?;
            }
        }

        let n = n_updates.max(1) as f64;
        Ok((
            policy_sum / n,
            value_sum / n,
            entropy_sum / n,
            clip_sum / n,
        ))
    }

    /// One full epoch: rollout, then updates, then a metrics row.
    pub fn train_epoch(&mut self) -> Result<EpochMetrics, TrainError> {
        let t = self.epoch + 1;
        let warmup = self.hp.lr_warmup_epochs;
        if warmup > 0 && t <= warmup {
            self.adam.set_lr(self.hp.lr * t as f64 / warmup as f64);
        } else if self.hp.lr_anneal_epochs > 0 {
            let span = (self.hp.lr_anneal_epochs - warmup) as f64;
            let frac = 1.0 - (t - 1 - warmup) as f64 / span;
            self.adam.set_lr(self.hp.lr * frac.max(0.0));
        } else if warmup > 0 {
            self.adam.set_lr(self.hp.lr);
        }
        let batch = self.collect_rollout()?;
        let (policy_loss, value_loss, entropy, clip_frac) = self.update(&batch)?;
        self.epoch += 1;
        let crash_rate = if batch.episodes_completed == 0 {
            0.0
        } else {
            batch.episodes_crashed as f64 / batch.episodes_completed as f64
        };
        Ok(EpochMetrics {
            epoch: self.epoch,
            mean_reward_norm: batch.mean_reward(),
            policy_loss,
            value_loss,
            entropy,
            clip_fraction: clip_frac,
            crash_rate,
        })
    }

    /// Greedy evaluation on fresh environments; see [`evaluate_policy`].
    pub fn evaluate(&self, episodes: usize, seed: u64) -> Result<EvalReport, TrainError> {
        evaluate_policy(&self.model, &self.scenario, episodes, seed)
    }
}

/// Rolls out `episodes` full episodes under greedy (argmax) action
/// selection and reports aggregate driving quality. Ties in the argmax go
/// to the lowest action index. `seed` drives the episode-seed stream only;
/// greedy selection consumes no randomness.
pub fn evaluate_policy(
    model: &PolicyModel,
    scenario: &ScenarioConfig,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, TrainError> {
    if episodes == 0 {
        return Err(TrainError::Config("evaluation needs at least one episode".into()));
    }
    let cfg = model.cfg();
    if cfg.n_agents != scenario.n_cav
        || cfg.obs_rows != scenario.n_obs
        || cfg.obs_width != scenario.obs_width()
    {
        return Err(TrainError::Config(
            "model architecture does not match the scenario's observation shape".into(),
        ));
    }
    let n_agents = cfg.n_agents;
    let k = cfg.feature_len();
    let mut env = HighwayEnv::new(scenario.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_ENV_SEEDS);

    let pv_target = scenario.speeds.pv_target;
    let mut reward_sum = 0.0;
    let mut steps_total = 0usize;
    let mut crashed_eps = 0usize;
    let mut speed_sum = 0.0;
    let mut speed_count = 0usize;
    let mut delay_sum = 0.0;

    for _ in 0..episodes {
        let obs = env.reset(rng.next_u64())?;
        let mut flat = flatten_masked(&obs, cfg.feature_mask, cfg.obs_width);
        let mut alive = vec![true; n_agents];
        let mut crashed = false;
        loop {
            let logits = {
                let mut tape = Tape::new();
                let node = model.actor_logits(&mut tape, flat.chunks_exact(k))?;
                tape.value(node).clone()
            };
            let dist = ActionDistribution::from_logits(&logits);
            let acts: Vec<AgentAction> = (0..n_agents)
                .filter(|&i| alive[i])
                .map(|i| AgentAction::from_index(dist.greedy(i)).expect("greedy action in range"))
                .collect();
            let out = env.step(&acts)?;
            reward_sum += out.reward;
            steps_total += 1;
            if out
                .crashes
                .iter()
                .any(|&(x, y)| (x as usize) < n_agents || (y as usize) < n_agents)
            {
                crashed = true;
            }
            for v in env.vehicles() {
                match v.kind {
                    VehicleKind::Cav if v.alive => {
                        speed_sum += v.vx;
                        speed_count += 1;
                    }
                    VehicleKind::Pv => {
                        delay_sum += ((pv_target - v.vx) / pv_target).clamp(0.0, 1.0);
                    }
                    _ => {}
                }
            }
            if out.done {
                break;
            }
            flat = flatten_masked(&out.obs, cfg.feature_mask, cfg.obs_width);
            alive = out.agent_alive;
        }
        if crashed {
            crashed_eps += 1;
        }
    }

    Ok(EvalReport {
        episodes,
        mean_reward: reward_sum / steps_total as f64,
        crash_rate: crashed_eps as f64 / episodes as f64,
        mean_cav_speed: if speed_count == 0 {
            0.0
        } else {
            speed_sum / speed_count as f64
        },
        pv_delay: delay_sum / steps_total as f64,
    })
}

/// Flattens per-agent observation matrices into one masked row-major
/// buffer, agent blocks in id order.
fn flatten_masked(obs: &[ObservationMatrix], mask: FeatureMask, width: usize) -> Vec<f64> {
    let mut flat = Vec::with_capacity(obs.iter().map(|o| o.data().len()).sum());
    for o in obs {
        let start = flat.len();
        flat.extend_from_slice(o.data());
        mask.apply(&mut flat[start..], width);
    }
    flat
}

fn steps_shuffled(steps: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order = steps.to_vec();
    order.shuffle(rng);
    order
}

/// Splits `order` into `n` near-equal contiguous chunks (the first
/// `len % n` chunks get the extra element).
fn split_chunks(order: &[usize], n: usize) -> Vec<&[usize]> {
    let len = order.len();
    let base = len / n;
    let rem = len % n;
    let mut chunks = Vec::with_capacity(n);
    let mut rest: &[usize] = order;
    for j in 0..n {
        let size = base + usize::from(j < rem);
        let (head, tail) = rest.split_at(size);
        if !head.is_empty() {
            chunks.push(head);
        }
        rest = tail;
    }
    chunks
}
