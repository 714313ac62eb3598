use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid backend config: {0}")]
    Invalid(String),
}

/// Connection and sampling settings for an OpenAI-compatible endpoint.
///
/// The API key is never stored here; it is read from the environment
/// variable named by `api_key_env` when a client is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model_name: String,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// First backoff delay; doubles on every retry.
    pub retry_base_ms: u64,
    /// Sampling temperature for translation requests.
    pub temperature: f32,
    pub summary_temperature: f32,
    pub max_output_tokens: u32,
    pub parallelism: usize,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model_name: "gemma-2-27b-it".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            retry_base_ms: 500,
            temperature: 0.0,
            summary_temperature: 0.3,
            max_output_tokens: 512,
            parallelism: 4,
        }
    }
}

impl BackendConfig {
    pub const MAX_RETRIES_LIMIT: u32 = 5;

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn retry_base(&self) -> Duration {
        Duration::from_millis(self.retry_base_ms)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ConfigError::Invalid("timeout_secs must be > 0".into()));
        }
        if self.max_retries > Self::MAX_RETRIES_LIMIT {
            return Err(ConfigError::Invalid(format!(
                "max_retries must be <= {}",
                Self::MAX_RETRIES_LIMIT
            )));
        }
        for (name, t) in [("temperature", self.temperature), ("summary_temperature", self.summary_temperature)] {
            if !(0.0..=2.0).contains(&t) {
                return Err(ConfigError::Invalid(format!("{name} must be within [0, 2]")));
            }
        }
        if self.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be >= 1".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(ConfigError::Invalid("max_output_tokens must be >= 1".into()));
        }
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(ConfigError::Invalid(format!("endpoint `{}` is not an http(s) URL", self.endpoint)));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: BackendConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}
