//! Run configuration: a versioned TOML document with one table per concern.
//! Every field has a default, so an empty file is a valid configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::report::SummaryConfig;
use crate::sampler::SamplerConfig;
use crate::simbench::ScenarioSpec;
use crate::strata::Schema;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub replicates: usize,
    pub trees: Vec<usize>,
    pub cohort: ScenarioSpec,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            replicates: 1,
            trees: vec![5],
            cohort: ScenarioSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub sampler: SamplerConfig,
    pub data: Schema,
    pub summary: SummaryConfig,
    pub simulation: SimulationConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            sampler: SamplerConfig::default(),
            data: Schema::default(),
            summary: SummaryConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config file {path} not found")]
    Missing { path: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Version { path: String, found: u32 },
    #[error("configuration cannot be written as TOML: {0}")]
    Serialize(String),
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                path: origin.to_string(),
                found: cfg.schema_version,
            });
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                ConfigError::Missing { path: shown.clone() }
            } else {
                ConfigError::Io {
                    path: shown.clone(),
                    source,
                }
            }
        })?;
        Self::from_toml(&text, &shown)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Serialize(e.to_string()))
    }
}
