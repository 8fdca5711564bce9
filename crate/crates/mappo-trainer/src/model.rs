use lsa_encoder::{LsaConfig, LsaEncoder};
use policy_nets::Mlp;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use tensor_core::{
    load_params_from_path, save_params_to_path, NodeId, ParamStore, Tape, Tensor, TensorError,
};

/// How raw observation rows are turned into the flat feature vector the
/// policy and value heads consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncoderKind {
    /// Multi-head self-attention over observation rows, flattened, then a
    /// square linear layer.
    Lsa,
    /// Raw row-major flattening; no parameters.
    Flatten,
}

impl EncoderKind {
    pub fn label(self) -> &'static str {
        match self {
            EncoderKind::Lsa => "lsa",
            EncoderKind::Flatten => "flatten",
        }
    }
}

impl fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EncoderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lsa" => Ok(EncoderKind::Lsa),
            "flatten" => Ok(EncoderKind::Flatten),
            other => Err(format!("unknown encoder `{other}` (expected lsa|flatten)")),
        }
    }
}

/// What the value head is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriticScope {
    /// Only the acting agent's own encoded observation (independent
    /// learners; one value per agent per step).
    Local,
    /// The concatenated encodings of every agent in fixed id order
    /// (centralized training; one shared value per environment step).
    Joint,
}

impl CriticScope {
    pub fn label(self) -> &'static str {
        match self {
            CriticScope::Local => "local",
            CriticScope::Joint => "joint",
        }
    }
}

impl fmt::Display for CriticScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CriticScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "local" => Ok(CriticScope::Local),
            "joint" => Ok(CriticScope::Joint),
            other => Err(format!("unknown critic scope `{other}` (expected local|joint)")),
        }
    }
}

/// Input ablations. Masked columns are zeroed in every observation row
/// before encoding; the tensor shape never changes, so the same network
/// architecture runs every ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMask {
    /// All six base columns.
    Full,
    /// Zeroes the relative-position columns (2 and 3).
    NoPosition,
    /// Zeroes the presence and priority-flag columns (0 and 1).
    NoPresencePriority,
    /// Zeroes the relative-velocity columns (4 and 5).
    NoVelocity,
    /// Keeps all base columns and expects the two extra heading columns
    /// (observation width 8 instead of 6).
    AddAngles,
}

impl FeatureMask {
    pub const ALL: [FeatureMask; 5] = [
        FeatureMask::Full,
        FeatureMask::NoPosition,
        FeatureMask::NoPresencePriority,
        FeatureMask::NoVelocity,
        FeatureMask::AddAngles,
    ];

    /// Column indices zeroed by this mask.
    pub fn zeroed_columns(self) -> &'static [usize] {
        match self {
            FeatureMask::Full | FeatureMask::AddAngles => &[],
            FeatureMask::NoPosition => &[2, 3],
            FeatureMask::NoPresencePriority => &[0, 1],
            FeatureMask::NoVelocity => &[4, 5],
        }
    }

    /// Whether this mask runs on the widened observation layout that
    /// includes the two heading columns.
    pub fn requires_angles(self) -> bool {
        matches!(self, FeatureMask::AddAngles)
    }

    /// Expected observation width for this mask.
    pub fn expected_width(self) -> usize {
        if self.requires_angles() {
            8
        } else {
            6
        }
    }

    /// Zeroes the masked columns of a flat row-major `rows x width` slice
    /// in place.
    pub fn apply(self, flat: &mut [f64], width: usize) {
        let cols = self.zeroed_columns();
        if cols.is_empty() {
            return;
        }
        for row in flat.chunks_exact_mut(width) {
            for &c in cols {
                row[c] = 0.0;
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FeatureMask::Full => "full",
            FeatureMask::NoPosition => "no_position",
            FeatureMask::NoPresencePriority => "no_presence_priority",
            FeatureMask::NoVelocity => "no_velocity",
            FeatureMask::AddAngles => "add_angles",
        }
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureMask {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(FeatureMask::Full),
            "no_position" => Ok(FeatureMask::NoPosition),
            "no_presence_priority" => Ok(FeatureMask::NoPresencePriority),
            "no_velocity" => Ok(FeatureMask::NoVelocity),
            "add_angles" => Ok(FeatureMask::AddAngles),
            other => Err(format!(
                "unknown feature mask `{other}` (expected full|no_position|no_presence_priority|no_velocity|add_angles)"
            )),
        }
    }
}

/// Architecture description for one shared policy/value network pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub encoder: EncoderKind,
    pub critic_scope: CriticScope,
    pub feature_mask: FeatureMask,
    /// Number of controlled agents sharing these parameters.
    pub n_agents: usize,
    /// Observation rows per agent (self row plus neighbor slots).
    pub obs_rows: usize,
    /// Observation columns per row.
    pub obs_width: usize,
    /// Hidden width of both three-layer heads.
    pub hidden: usize,
    /// Discrete action count.
    pub n_actions: usize,
    /// Attention blocks in each encoder.
    pub blocks: usize,
    /// When true the value head reads the actor's encoder instead of
    /// keeping its own copy.
    pub share_encoder: bool,
}

impl ModelConfig {
    pub fn new(
        encoder: EncoderKind,
        critic_scope: CriticScope,
        feature_mask: FeatureMask,
        n_agents: usize,
        obs_rows: usize,
        obs_width: usize,
    ) -> Self {
        ModelConfig {
            encoder,
            critic_scope,
            feature_mask,
            n_agents,
            obs_rows,
            obs_width,
            hidden: 256,
            n_actions: 5,
            blocks: 1,
            share_encoder: false,
        }
    }

    /// Flat feature length per agent.
    pub fn feature_len(&self) -> usize {
        self.obs_rows * self.obs_width
    }

    /// Input width of the value head.
    pub fn critic_input(&self) -> usize {
        match self.critic_scope {
            CriticScope::Local => self.feature_len(),
            CriticScope::Joint => self.n_agents * self.feature_len(),
        }
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        let fail = |msg: String| TensorError::InvalidArgument {
            op: "model_config",
            msg,
        };
        if self.n_agents == 0 {
            return Err(fail("n_agents must be positive".into()));
        }
        if self.obs_rows == 0 {
            return Err(fail("obs_rows must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(fail("hidden width must be positive".into()));
        }
        if self.n_actions < 2 {
            return Err(fail("need at least two actions".into()));
        }
        if self.blocks == 0 {
            return Err(fail("need at least one encoder block".into()));
        }
        let want = self.feature_mask.expected_width();
        if self.obs_width != want {
            return Err(fail(format!(
                "feature mask `{}` runs on width-{} observations, got width {}",
                self.feature_mask, want, self.obs_width
            )));
        }
        if self.encoder == EncoderKind::Lsa {
            let mut lsa = LsaConfig::new(self.obs_rows, self.obs_width);
            lsa.blocks = self.blocks;
            lsa.validate()?;
        }
        Ok(())
    }
}

/// Shared-parameter actor plus a value head, with optional attention
/// encoders in front of each. All parameters live in one store so a single
/// optimizer step covers everything.
pub struct PolicyModel {
    cfg: ModelConfig,
    store: ParamStore,
    actor_encoder: Option<LsaEncoder>,
    critic_encoder: Option<LsaEncoder>,
    actor: Mlp,
    critic: Mlp,
}

impl PolicyModel {
    /// Builds the network and initializes every parameter from `seed`.
    /// Registration order is fixed (actor encoder, actor head, value
    /// encoder, value head) so equal seeds give bitwise-equal parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self, TensorError> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.feature_len();

        let mut lsa_cfg = LsaConfig::new(cfg.obs_rows, cfg.obs_width);
        lsa_cfg.blocks = cfg.blocks;

        let actor_encoder = match cfg.encoder {
            EncoderKind::Lsa => {
                let enc = LsaEncoder::new(lsa_cfg, "lsa")?;
                enc.register_params(&mut store, &mut rng)?;
                Some(enc)
            }
            EncoderKind::Flatten => None,
        };

        let actor = Mlp::actor(k, cfg.hidden, cfg.n_actions)?;
        actor.register_params(&mut store, &mut rng)?;

        let critic_encoder = match cfg.encoder {
            EncoderKind::Lsa if !cfg.share_encoder => {
                let enc = LsaEncoder::new(lsa_cfg, "critic.lsa")?;
                enc.register_params(&mut store, &mut rng)?;
                Some(enc)
            }
            _ => None,
        };

        let critic = Mlp::critic(cfg.critic_input(), cfg.hidden)?;
        critic.register_params(&mut store, &mut rng)?;

        Ok(PolicyModel {
            cfg,
            store,
            actor_encoder,
            critic_encoder,
            actor,
            critic,
        })
    }

    pub fn cfg(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    /// Mutable access to the parameters, for optimizer steps and tests.
    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Total scalar parameter count.
    pub fn num_scalars(&self) -> usize {
        self.store.num_scalars()
    }

    fn encode_agent(
        &self,
        tape: &mut Tape,
        flat: &[f64],
        critic_side: bool,
    ) -> Result<NodeId, TensorError> {
        let k = self.cfg.feature_len();
        if flat.len() != k {
            return Err(TensorError::InvalidArgument {
                op: "encode_agent",
                msg: format!("expected {k} observation scalars, got {}", flat.len()),
            });
        }
        let obs = Tensor::new(self.cfg.obs_rows, self.cfg.obs_width, flat.to_vec())?;
        let node = tape.constant(obs);
        match self.cfg.encoder {
            EncoderKind::Flatten => tape.reshape(node, 1, k),
            EncoderKind::Lsa => {
                let enc = if critic_side {
                    self.critic_encoder
                        .as_ref()
                        .or(self.actor_encoder.as_ref())
                } else {
                    self.actor_encoder.as_ref()
                };
                let enc = enc.expect("attention encoder present for Lsa models");
                enc.encode(tape, &self.store, node)
            }
        }
    }

    /// Builds action logits for a batch of per-agent observations, one row
    /// per sample, in the order given.
    pub fn actor_logits<'a, I>(&self, tape: &mut Tape, samples: I) -> Result<NodeId, TensorError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<NodeId> = samples
            .into_iter()
            .map(|flat| self.encode_agent(tape, flat, false))
            .collect::<Result<_, _>>()?;
        if rows.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "actor_logits",
                msg: "empty sample batch".into(),
            });
        }
        let x = tape.concat_rows(&rows)?;
        self.actor.forward(tape, &self.store, x)
    }

    /// Value estimates for per-agent observations (local critic scope).
    pub fn local_values<'a, I>(&self, tape: &mut Tape, samples: I) -> Result<NodeId, TensorError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        if self.cfg.critic_scope != CriticScope::Local {
            return Err(TensorError::InvalidArgument {
                op: "local_values",
                msg: "model uses a joint critic".into(),
            });
        }
        let rows: Vec<NodeId> = samples
            .into_iter()
            .map(|flat| self.encode_agent(tape, flat, true))
            .collect::<Result<_, _>>()?;
        if rows.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "local_values",
                msg: "empty sample batch".into(),
            });
        }
        let x = tape.concat_rows(&rows)?;
        self.critic.forward(tape, &self.store, x)
    }

    /// Value estimates for whole environment steps (joint critic scope).
    /// Each sample is the concatenation of every agent's flat observation
    /// in agent-id order; agents that have crashed contribute all-zero
    /// rows, which encode to exactly zero features.
    pub fn joint_values<'a, I>(&self, tape: &mut Tape, samples: I) -> Result<NodeId, TensorError>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        if self.cfg.critic_scope != CriticScope::Joint {
            return Err(TensorError::InvalidArgument {
                op: "joint_values",
                msg: "model uses a local critic".into(),
            });
        }
        let k = self.cfg.feature_len();
        let want = self.cfg.n_agents * k;
        let mut rows = Vec::new();
        for group in samples {
            if group.len() != want {
                return Err(TensorError::InvalidArgument {
                    op: "joint_values",
                    msg: format!("expected {want} scalars per step sample, got {}", group.len()),
                });
            }
            let parts: Vec<NodeId> = group
                .chunks_exact(k)
                .map(|flat| self.encode_agent(tape, flat, true))
                .collect::<Result<_, _>>()?;
            rows.push(tape.concat_cols(&parts)?);
        }
        if rows.is_empty() {
            return Err(TensorError::InvalidArgument {
                op: "joint_values",
                msg: "empty sample batch".into(),
            });
        }
        let x = tape.concat_rows(&rows)?;
        self.critic.forward(tape, &self.store, x)
    }

    /// Writes every parameter to a snapshot file.
    pub fn save_snapshot(&self, path: &Path) -> Result<(), TensorError> {
        save_params_to_path(&self.store, path)
    }

    /// Loads a snapshot written by a model with this exact architecture.
    /// Every stored name and shape must match the registered parameters.
    pub fn load_snapshot(&mut self, path: &Path) -> Result<(), TensorError> {
        let loaded = load_params_from_path(path)?;
        if loaded.len() != self.store.len() {
            return Err(TensorError::InvalidArgument {
                op: "load_snapshot",
                msg: format!(
                    "snapshot holds {} tensors, model registers {}",
                    loaded.len(),
                    self.store.len()
                ),
            });
        }
        for (_, name, tensor) in loaded.iter() {
            let id = self.store.id(name)?;
            if self.store.get(id).shape() != tensor.shape() {
                return Err(TensorError::InvalidArgument {
                    op: "load_snapshot",
                    msg: format!("shape mismatch for `{name}`"),
                });
            }
            self.store.set(id, tensor.clone())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::new(
            EncoderKind::Lsa,
            CriticScope::Joint,
            FeatureMask::Full,
            2,
            4,
            6,
        );
        cfg.hidden = 16;
        cfg
    }

    #[test]
    fn registration_is_seed_deterministic() {
        let a = PolicyModel::new(small_cfg(), 7).unwrap();
        let b = PolicyModel::new(small_cfg(), 7).unwrap();
        let c = PolicyModel::new(small_cfg(), 8).unwrap();
        assert_eq!(a.num_scalars(), b.num_scalars());
        let mut any_diff = false;
        for ((_, na, ta), (_, nb, tb)) in a.store().iter().zip(b.store().iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data());
        }
        for ((_, _, ta), (_, _, tc)) in a.store().iter().zip(c.store().iter()) {
            if ta.data() != tc.data() {
                any_diff = true;
            }
        }
        assert!(any_diff, "different seeds should differ somewhere");
    }

    #[test]
    fn separate_value_encoder_by_default() {
        let m = PolicyModel::new(small_cfg(), 1).unwrap();
        assert!(m.store().get_by_name("lsa.block1.WFF").is_ok());
        assert!(m.store().get_by_name("critic.lsa.block1.WFF").is_ok());

        let mut shared = small_cfg();
        shared.share_encoder = true;
        let m = PolicyModel::new(shared, 1).unwrap();
        assert!(m.store().get_by_name("critic.lsa.block1.WFF").is_err());
    }

    #[test]
    fn flatten_models_have_no_encoder_params() {
        let mut cfg = small_cfg();
        cfg.encoder = EncoderKind::Flatten;
        let m = PolicyModel::new(cfg, 1).unwrap();
        for (_, name, _) in m.store().iter() {
            assert!(
                name.starts_with("actor.") || name.starts_with("critic.l"),
                "unexpected parameter {name}"
            );
        }
    }

    #[test]
    fn mask_zeroes_expected_columns() {
        let width = 6;
        let mut flat: Vec<f64> = (0..12).map(|i| i as f64 + 1.0).collect();
        FeatureMask::NoVelocity.apply(&mut flat, width);
        for r in 0..2 {
            assert_eq!(flat[r * width + 4], 0.0);
            assert_eq!(flat[r * width + 5], 0.0);
            assert_ne!(flat[r * width], 0.0);
        }
    }

    #[test]
    fn mask_width_mismatch_is_rejected() {
        let mut cfg = small_cfg();
        cfg.feature_mask = FeatureMask::AddAngles;
        assert!(cfg.validate().is_err());
        cfg.obs_width = 8;
        cfg.validate().unwrap();
    }

    #[test]
    fn snapshot_roundtrip_is_bitwise() {
        let dir = std::env::temp_dir().join("policy-model-snapshot-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        let a = PolicyModel::new(small_cfg(), 3).unwrap();
        a.save_snapshot(&path).unwrap();
        let mut b = PolicyModel::new(small_cfg(), 999).unwrap();
        b.load_snapshot(&path).unwrap();
        for ((_, _, ta), (_, _, tb)) in a.store().iter().zip(b.store().iter()) {
            assert_eq!(ta.data(), tb.data());
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn snapshot_shape_mismatch_is_rejected() {
        let dir = std::env::temp_dir().join("policy-model-snapshot-mismatch");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.bin");
        let a = PolicyModel::new(small_cfg(), 3).unwrap();
        a.save_snapshot(&path).unwrap();
        let mut other = small_cfg();
        other.hidden = 32;
        let mut b = PolicyModel::new(other, 0).unwrap();
        assert!(b.load_snapshot(&path).is_err());
        std::fs::remove_file(&path).ok();
    }
}
