use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::endpoint::EndpointConfig;

pub const ENV_LLM_URL: &str = "SWARMCOMMAND_LLM_URL";
pub const ENV_TRANSLATOR_URL: &str = "SWARMCOMMAND_TRANSLATOR_URL";
pub const ENV_SAFETY_URL: &str = "SWARMCOMMAND_SAFETY_URL";

/// What happens to a command that arrives while a tree is running.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandMode {
    /// Halt the running tree (its trace ends as Stopped) and start the new one.
    #[default]
    Preempt,
    /// Start the new tree once the running one has finished.
    Queue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub llm: EndpointConfig,
    pub translator: Option<EndpointConfig>,
    pub safety: Option<EndpointConfig>,
    pub blocklist_path: Option<PathBuf>,
    pub shots: u8,
    pub command_mode: CommandMode,
    /// Tick budget per executed tree before it is reported as Timeout.
    pub max_ticks: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            llm: EndpointConfig::default(),
            translator: None,
            safety: None,
            blocklist_path: None,
            shots: 0,
            command_mode: CommandMode::Preempt,
            max_ticks: 2000,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

impl PipelineConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Applies base-url overrides from `lookup` (normally the process
    /// environment). An override for an absent endpoint creates it.
    pub fn apply_overrides(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        if let Some(url) = lookup(ENV_LLM_URL) {
            self.llm.base_url = url;
        }
        for (key, slot) in [(ENV_TRANSLATOR_URL, &mut self.translator), (ENV_SAFETY_URL, &mut self.safety)] {
            if let Some(url) = lookup(key) {
                slot.get_or_insert_with(EndpointConfig::default).base_url = url;
            }
        }
    }

    pub fn with_env_overrides(mut self) -> Self {
        self.apply_overrides(|k| std::env::var(k).ok().filter(|v| !v.is_empty()));
        self
    }
}
