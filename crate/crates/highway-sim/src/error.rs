use thiserror::Error;

/// Configuration construction / loading failures.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown scenario id {0}, expected 1..=5")]
    UnknownScenario(u8),

    #[error("invalid config value for `{key}`: {msg}")]
    InvalidValue { key: &'static str, msg: String },

    #[error("spawn range on lane {lane} too small: placing {count} vehicles needs {needed:.1} m but only {available:.1} m are available")]
    SpawnCapacity {
        lane: usize,
        count: usize,
        needed: f64,
        available: f64,
    },

    #[error("config file i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("config file parse: {0}")]
    Parse(#[from] toml::de::Error),
}

/// Runtime simulation failures. These are contract violations by the caller,
/// not physics events; crashes inside the world are ordinary outcomes.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("environment must be reset before stepping")]
    NotReset,

    #[error("episode already done; call reset to start a new one")]
    EpisodeDone,

    #[error("expected {expected} actions (one per alive agent), got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("no vehicle with id {0}")]
    UnknownAgent(u32),

    #[error("vehicle {0} is not a controllable agent")]
    NotAnAgent(u32),

    #[error("agent {0} is no longer alive")]
    DeadAgent(u32),

    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("trajectory i/o: {0}")]
    Io(#[from] std::io::Error),
}
