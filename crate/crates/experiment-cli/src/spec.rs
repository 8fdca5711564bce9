//! Experiment descriptions: which scenario, algorithm, encoder, observation
//! mask, seeds, and training length a run uses, plus the directory naming
//! scheme that ties runs to their artifacts.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use highway_sim::{ConfigError, ScenarioConfig};
use mappo_trainer::{CriticScope, EncoderKind, FeatureMask, Hyperparams, ModelConfig};
use serde::{Deserialize, Serialize};

/// Algorithm variants: the cross product of critic scope (joint vs. local)
/// and default observation encoder (attention vs. raw flatten).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Joint-observation critic, attention encoder.
    MappoLsa,
    /// Joint-observation critic, flattened raw observations.
    Mappo,
    /// Per-agent local critic, attention encoder.
    IppoLsa,
    /// Per-agent local critic, flattened raw observations.
    Ippo,
}

pub const ALGORITHM_NAMES: [&str; 4] = ["mappo_lsa", "mappo", "ippo_lsa", "ippo"];

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::MappoLsa,
        Algorithm::Mappo,
        Algorithm::IppoLsa,
        Algorithm::Ippo,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::MappoLsa => "mappo_lsa",
            Algorithm::Mappo => "mappo",
            Algorithm::IppoLsa => "ippo_lsa",
            Algorithm::Ippo => "ippo",
        }
    }

    pub fn critic_scope(self) -> CriticScope {
        match self {
            Algorithm::MappoLsa | Algorithm::Mappo => CriticScope::Joint,
            Algorithm::IppoLsa | Algorithm::Ippo => CriticScope::Local,
        }
    }

    pub fn default_encoder(self) -> EncoderKind {
        match self {
            Algorithm::MappoLsa | Algorithm::IppoLsa => EncoderKind::Lsa,
            Algorithm::Mappo | Algorithm::Ippo => EncoderKind::Flatten,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mappo_lsa" => Ok(Algorithm::MappoLsa),
            "mappo" => Ok(Algorithm::Mappo),
            "ippo_lsa" => Ok(Algorithm::IppoLsa),
            "ippo" => Ok(Algorithm::Ippo),
            other => Err(format!(
                "unknown algorithm '{other}' (valid: {})",
                ALGORITHM_NAMES.join(", ")
            )),
        }
    }
}

/// Fully resolved description of one experiment (one model configuration
/// trained over one or more seeds).
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub scenario: u8,
    pub algorithm: Algorithm,
    pub encoder: EncoderKind,
    /// Override for the maximum number of observable vehicles.
    pub n_obs: Option<usize>,
    pub mask: FeatureMask,
    pub seeds: Vec<u64>,
    pub epochs: u32,
    pub out: PathBuf,
    pub hyper: Hyperparams,
    /// Save an intermediate parameter snapshot every this many epochs
    /// (the final snapshot is always written).
    pub checkpoint_every: Option<u32>,
}

impl ExperimentSpec {
    /// Directory-safe identifier: scenario, algorithm (annotated when the
    /// encoder overrides the algorithm's default), observable-vehicle count,
    /// and mask, e.g. `s1_mappo_lsa_n4_full`.
    pub fn spec_id(&self) -> String {
        let algo = if self.encoder == self.algorithm.default_encoder() {
            self.algorithm.label().to_string()
        } else {
            format!("{}-{}", self.algorithm.label(), self.encoder.label())
        };
        let n = self.effective_n_obs();
        format!("s{}_{}_n{}_{}", self.scenario, algo, n, self.mask.label())
    }

    pub fn effective_n_obs(&self) -> usize {
        self.n_obs.unwrap_or_else(|| default_n_obs(self.scenario))
    }

    /// Scenario configuration with the mask's width requirement and any
    /// observable-vehicle override applied.
    pub fn scenario_config(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::preset(self.scenario)?;
        cfg.include_angles = self.mask.requires_angles();
        if let Some(n) = self.n_obs {
            cfg.n_obs = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn model_config(&self, scenario: &ScenarioConfig) -> ModelConfig {
        ModelConfig::new(
            self.encoder,
            self.algorithm.critic_scope(),
            self.mask,
            scenario.n_cav,
            scenario.n_obs,
            scenario.obs_width(),
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=5).contains(&self.scenario) {
            return Err(format!(
                "unknown scenario '{}' (valid: 1, 2, 3, 4, 5)",
                self.scenario
            ));
        }
        if self.seeds.is_empty() {
            return Err("at least one seed is required".into());
        }
        if self.epochs == 0 {
            return Err("epochs must be at least 1".into());
        }
        if let Some(n) = self.n_obs {
            if n == 0 {
                return Err("n-obs must be at least 1".into());
            }
        }
        self.hyper.validate()?;
        Ok(())
    }
}

/// Default maximum observable vehicles per scenario.
pub fn default_n_obs(scenario: u8) -> usize {
    match scenario {
        1 | 2 => 4,
        _ => 6,
    }
}

pub fn parse_encoder(s: &str) -> Result<EncoderKind, String> {
    s.parse::<EncoderKind>()
        .map_err(|_| format!("unknown encoder '{s}' (valid: lsa, flatten)"))
}

pub fn parse_mask(s: &str) -> Result<FeatureMask, String> {
    s.parse::<FeatureMask>().map_err(|_| {
        format!(
            "unknown mask '{s}' (valid: {})",
            FeatureMask::ALL
                .iter()
                .map(|m| m.label())
                .collect::<Vec<_>>()
                .join(", ")
        )
    })
}

/// Optional hyperparameter overrides, applied on top of the defaults.
/// Every training knob is exposed here so a config file can pin a full
/// training recipe.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperOverrides {
    pub gamma: Option<f64>,
    pub lam: Option<f64>,
    pub clip_eps: Option<f64>,
    pub value_coef: Option<f64>,
    pub entropy_coef: Option<f64>,
    pub lr: Option<f64>,
    pub t_steps: Option<usize>,
    pub n_envs: Option<usize>,
    pub passes: Option<usize>,
    pub minibatches: Option<usize>,
    pub max_grad_norm: Option<f64>,
    pub adv_std_floor: Option<f64>,
    pub lr_anneal_epochs: Option<usize>,
    pub lr_warmup_epochs: Option<usize>,
}

impl HyperOverrides {
    pub fn apply(&self, base: &mut Hyperparams) {
        if let Some(v) = self.gamma {
            base.gamma = v;
        }
        if let Some(v) = self.lam {
            base.lam = v;
        }
        if let Some(v) = self.clip_eps {
            base.clip_eps = v;
        }
        if let Some(v) = self.value_coef {
            base.value_coef = v;
        }
        if let Some(v) = self.entropy_coef {
            base.entropy_coef = v;
        }
        if let Some(v) = self.lr {
            base.lr = v;
        }
        if let Some(v) = self.t_steps {
            base.t_steps = v;
        }
        if let Some(v) = self.n_envs {
            base.n_envs = v;
        }
        if let Some(v) = self.passes {
            base.passes = v;
        }
        if let Some(v) = self.minibatches {
            base.minibatches = v;
        }
        if let Some(v) = self.max_grad_norm {
            base.max_grad_norm = v;
        }
        if let Some(v) = self.adv_std_floor {
            base.adv_std_floor = v;
        }
        if let Some(v) = self.lr_anneal_epochs {
            base.lr_anneal_epochs = v;
        }
        if let Some(v) = self.lr_warmup_epochs {
            base.lr_warmup_epochs = v;
        }
    }
}

/// Serializable mirror of [`Hyperparams`] used when echoing the resolved
/// configuration into a run directory.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HyperTable {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    pub t_steps: usize,
    pub n_envs: usize,
    pub passes: usize,
    pub minibatches: usize,
    pub max_grad_norm: f64,
    pub adv_std_floor: f64,
    pub lr_anneal_epochs: usize,
    pub lr_warmup_epochs: usize,
}

impl From<Hyperparams> for HyperTable {
    fn from(h: Hyperparams) -> Self {
        HyperTable {
            gamma: h.gamma,
            lam: h.lam,
            clip_eps: h.clip_eps,
            value_coef: h.value_coef,
            entropy_coef: h.entropy_coef,
            lr: h.lr,
            t_steps: h.t_steps,
            n_envs: h.n_envs,
            passes: h.passes,
            minibatches: h.minibatches,
            max_grad_norm: h.max_grad_norm,
            adv_std_floor: h.adv_std_floor,
            lr_anneal_epochs: h.lr_anneal_epochs,
            lr_warmup_epochs: h.lr_warmup_epochs,
        }
    }
}

/// Contents of an experiment config file. Every command-line flag has a
/// counterpart here; explicit flags take precedence over file values.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<u8>,
    pub algo: Option<String>,
    pub encoder: Option<String>,
    pub n_obs: Option<usize>,
    pub mask: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<u32>,
    pub out: Option<String>,
    pub checkpoint_every: Option<u32>,
    pub hyper: Option<HyperOverrides>,
}

impl FileConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config file {}: {e}", path.display()))
    }
}

/// Raw, possibly-absent settings gathered from command-line flags before
/// merging with a config file. Flags always win over file values; anything
/// still unset falls back to the documented default.
#[derive(Clone, Debug, Default)]
pub struct RawSpecArgs {
    pub scenario: Option<u8>,
    pub algo: Option<String>,
    pub encoder: Option<String>,
    pub n_obs: Option<usize>,
    pub mask: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub epochs: Option<u32>,
    pub out: Option<PathBuf>,
}

/// Merges flags over an optional config file into a validated spec.
pub fn resolve_spec(raw: &RawSpecArgs, file: Option<&FileConfig>) -> Result<ExperimentSpec, String> {
    let file_default = FileConfig::default();
    let file = file.unwrap_or(&file_default);

    let scenario = raw
        .scenario
        .or(file.scenario)
        .ok_or("missing scenario (pass --scenario 1..5 or set it in the config file)")?;
    let algorithm = match raw.algo.as_deref().or(file.algo.as_deref()) {
        Some(name) => name.parse::<Algorithm>()?,
        None => Algorithm::MappoLsa,
    };
    let encoder = match raw.encoder.as_deref().or(file.encoder.as_deref()) {
        Some(name) => parse_encoder(name)?,
        None => algorithm.default_encoder(),
    };
    let mask = match raw.mask.as_deref().or(file.mask.as_deref()) {
        Some(name) => parse_mask(name)?,
        None => FeatureMask::Full,
    };
    let mut hyper = Hyperparams::default();
    if let Some(over) = &file.hyper {
        over.apply(&mut hyper);
    }
    let spec = ExperimentSpec {
        scenario,
        algorithm,
        encoder,
        n_obs: raw.n_obs.or(file.n_obs),
        mask,
        seeds: raw
            .seeds
            .clone()
            .or_else(|| file.seeds.clone())
            .unwrap_or_else(|| vec![0]),
        epochs: raw.epochs.or(file.epochs).unwrap_or(200),
        out: raw
            .out
            .clone()
            .or_else(|| file.out.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs")),
        hyper,
        checkpoint_every: file.checkpoint_every,
    };
    spec.validate()?;
    Ok(spec)
}
