//! OpenAI-style chat-completions client with bounded retries.

use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::limiter::AdmissionLimiter;
use super::{validate_messages, BackendConfig, BackendError, BackendResult, ChatBackend, ChatMessage, ConfigError, Purpose};

#[derive(Serialize)]
struct RequestBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f32,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct ResponseBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

fn is_retryable_status(status: u16) -> bool {
    matches!(status, 408 | 429) || (500..600).contains(&status)
}

pub struct HttpBackend {
    config: BackendConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: AdmissionLimiter,
}

impl HttpBackend {
    /// Builds a client, reading the API key from the configured variable.
    pub fn new(config: BackendConfig) -> Result<Self, ConfigError> {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: BackendConfig, api_key: Option<String>) -> Result<Self, ConfigError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            limiter: AdmissionLimiter::new(config.parallelism),
            config,
            api_key,
            agent,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.retry_base().as_secs_f64() * 2f64.powi(retry as i32);
        let jitter = rand::thread_rng().gen_range(0.0..0.25);
        Duration::from_secs_f64(base * (1.0 + jitter))
    }

    fn attempt(&self, body: &RequestBody<'_>, attempts: u32) -> Result<(String, String), Failure> {
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let response = request.send_json(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => Failure::Retryable(BackendError::Timeout { attempts }),
            ureq::Error::Json(e) => Failure::Fatal(BackendError::InvalidRequest(e.to_string())),
            other => Failure::Retryable(BackendError::Transport { attempts, message: other.to_string() }),
        })?;

        let status = response.status().as_u16();
        let text = response.into_body().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => Failure::Retryable(BackendError::Timeout { attempts }),
            other => Failure::Retryable(BackendError::Transport { attempts, message: other.to_string() }),
        })?;

        if status == 401 || status == 403 {
            return Err(Failure::Fatal(BackendError::AuthError { status }));
        }
        if !(200..300).contains(&status) {
            let err = BackendError::HttpError { status, attempts, body: truncate_body(&text) };
            return Err(if is_retryable_status(status) { Failure::Retryable(err) } else { Failure::Fatal(err) });
        }

        let parsed: ResponseBody = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(BackendError::ProtocolError(e.to_string())))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Failure::Fatal(BackendError::ProtocolError("response has no choices".into())))?;
        let content = choice
            .message
            .content
            .ok_or_else(|| Failure::Fatal(BackendError::ProtocolError("choice has no message content".into())))?;
        Ok((content, choice.finish_reason.unwrap_or_default()))
    }
}

fn truncate_body(body: &str) -> String {
    body.chars().take(300).collect()
}

impl ChatBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage], purpose: Purpose) -> Result<BackendResult, BackendError> {
        validate_messages(messages)?;
        let body = RequestBody {
            model: &self.config.model_name,
            messages,
            temperature: match purpose {
                Purpose::Translation => self.config.temperature,
                Purpose::Summary => self.config.summary_temperature,
            },
            max_tokens: self.config.max_output_tokens,
        };

        let _permit = self.limiter.acquire();
        let started = Instant::now();
        let max_attempts = self.config.max_retries + 1;
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts) {
                Ok((content, finish_reason)) => {
                    return Ok(BackendResult {
                        text: content.trim().to_string(),
                        latency: started.elapsed(),
                        attempts,
                        raw_finish_reason: finish_reason,
                    })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    if attempts >= max_attempts {
                        return Err(e);
                    }
                    let delay = self.backoff(attempts - 1);
                    tracing::debug!(attempt = attempts, ?delay, error = %e, "retrying chat completion");
                    std::thread::sleep(delay);
                }
            }
        }
    }
}
