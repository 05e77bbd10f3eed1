//! Engine configuration (`curio.toml`). Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::policy::PolicyConfig;
use crate::semantic::SemanticConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Probability of assigning arm A.
    pub split: f64,
    pub salt: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            split: 0.711,
            salt: "curio-ab-v1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub idle_timeout_secs: u64,
    pub deny_ack: String,
    /// Step-level text matches kept per step for the fallback pool.
    pub text_top_m: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            idle_timeout_secs: 1800,
            deny_ack: "No problem. To continue, say 'next'.".into(),
            text_top_m: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub policy: PolicyConfig,
    pub semantic: SemanticConfig,
    pub experiment: ExperimentConfig,
    pub session: SessionConfig,
}

impl EngineConfig {
    pub fn from_toml(input: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(input)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let input = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&input)
    }
}
