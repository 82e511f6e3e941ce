//! Uniform access to text-embedding and chat-completion providers.
//!
//! [`Gateway`] wraps a [`Provider`] and adds input validation, bounded
//! parallelism and retries. Two providers ship with the crate: the
//! deterministic [`MockProvider`] used by tests and offline runs, and
//! [`RemoteProvider`], which speaks the common `/embeddings` and
//! `/chat/completions` JSON wire format.

mod mock;
mod remote;

use std::env;
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use thiserror::Error;

use crate::corpus::{EmbeddingVector, DEFAULT_EMBEDDING_DIM};

pub use mock::{MockProvider, TOPICS_MARKER, TOPIC_KEYWORDS};
pub use remote::RemoteProvider;

/// Temperature used for topic extraction and summaries.
pub const TOPIC_TEMPERATURE: f64 = 0.2;
/// Temperature used for idea generation.
pub const IDEA_TEMPERATURE: f64 = 0.9;

pub const DEFAULT_EMBED_MODEL: &str = "text-embedding-ada-002";
pub const DEFAULT_CHAT_MODEL: &str = "gpt-3.5-turbo";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider returned {got} values, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("provider returned an empty response")]
    EmptyResponse,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid provider config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderKind {
    Remote,
    Mock,
}

impl std::str::FromStr for ProviderKind {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(ProviderKind::Mock),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(GatewayError::InvalidConfig(format!("unknown provider {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub endpoint: Option<String>,
    pub api_key: Option<String>,
    pub embed_model: String,
    pub chat_model: String,
    pub max_concurrency: usize,
    pub retry_limit: u32,
    pub dimension: usize,
    /// First backoff delay; doubles per retry up to [`MAX_BACKOFF`].
    pub retry_base: Duration,
}

pub const MAX_BACKOFF: Duration = Duration::from_secs(30);

impl Default for ProviderConfig {
    fn default() -> Self {
        Self::mock()
    }
}

impl ProviderConfig {
    pub fn mock() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: None,
            api_key: None,
            embed_model: DEFAULT_EMBED_MODEL.into(),
            chat_model: DEFAULT_CHAT_MODEL.into(),
            max_concurrency: 4,
            retry_limit: 3,
            dimension: DEFAULT_EMBEDDING_DIM,
            retry_base: Duration::from_secs(1),
        }
    }

    /// Reads `LL_PROVIDER`, `LL_API_KEY`, `LL_ENDPOINT`, `LL_EMBED_MODEL` and
    /// `LL_CHAT_MODEL` on top of the mock defaults.
    pub fn from_env() -> Result<Self, GatewayError> {
        Self::from_lookup(|k| env::var(k).ok())
    }

    /// [`ProviderConfig::from_env`] over an arbitrary variable lookup.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, GatewayError> {
        let mut cfg = Self::mock().with_env_settings(&lookup);
        if let Some(kind) = lookup("LL_PROVIDER") {
            cfg.kind = kind.parse()?;
        }
        if cfg.kind == ProviderKind::Remote && cfg.endpoint.is_none() {
            cfg.endpoint = Some(DEFAULT_ENDPOINT.to_string());
        }
        Ok(cfg)
    }

    /// Applies key, endpoint and model variables, leaving the kind alone.
    pub fn with_env_settings(mut self, lookup: impl Fn(&str) -> Option<String>) -> Self {
        let get = |k: &str| lookup(k).filter(|v| !v.is_empty());
        if let Some(key) = get("LL_API_KEY") {
            self.api_key = Some(key);
        }
        if let Some(endpoint) = get("LL_ENDPOINT") {
            self.endpoint = Some(endpoint);
        }
        if let Some(model) = get("LL_EMBED_MODEL") {
            self.embed_model = model;
        }
        if let Some(model) = get("LL_CHAT_MODEL") {
            self.chat_model = model;
        }
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_concurrency == 0 {
            return Err(GatewayError::InvalidConfig("max_concurrency must be >= 1".into()));
        }
        if self.dimension == 0 {
            return Err(GatewayError::InvalidConfig("dimension must be >= 1".into()));
        }
        if self.kind == ProviderKind::Remote {
            if self.endpoint.as_deref().is_none_or(str::is_empty) {
                return Err(GatewayError::InvalidConfig("remote provider needs an endpoint".into()));
            }
            if self.api_key.as_deref().is_none_or(str::is_empty) {
                return Err(GatewayError::InvalidConfig(
                    "remote provider needs an api key (LL_API_KEY)".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(system: impl Into<String>, user: impl Into<String>, temperature: f64) -> Self {
        Self {
            system: system.into(),
            user: user.into(),
            temperature,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("user message is empty".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// A backend able to embed text and answer chat requests.
///
/// Implementations report transient failures as
/// [`GatewayError::ProviderUnavailable`]; the gateway retries only those.
pub trait Provider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError>;
    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError>;
}

/// Counting semaphore bounding in-flight provider calls.
#[derive(Debug)]
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            max,
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

/// Validating, rate-bounded, retrying front for a [`Provider`].
pub struct Gateway {
    provider: Box<dyn Provider>,
    limiter: Limiter,
    retry_limit: u32,
    retry_base: Duration,
    dimension: usize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("max_concurrency", &self.limiter.max)
            .field("retry_limit", &self.retry_limit)
            .field("dimension", &self.dimension)
            .finish()
    }
}

impl Gateway {
    pub fn from_config(cfg: &ProviderConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let provider: Box<dyn Provider> = match cfg.kind {
            ProviderKind::Mock => Box::new(MockProvider::new(cfg.dimension)),
            ProviderKind::Remote => Box::new(RemoteProvider::new(cfg)?),
        };
        Ok(Self::with_provider(provider, cfg))
    }

    /// Mock gateway with default limits and no retry delay.
    pub fn mock() -> Self {
        let cfg = ProviderConfig {
            retry_base: Duration::ZERO,
            ..ProviderConfig::mock()
        };
        Self::with_provider(Box::new(MockProvider::new(cfg.dimension)), &cfg)
    }

    /// Wraps any provider with the limits and retry policy from `cfg`.
    /// `cfg.kind`, endpoint and key are ignored.
    pub fn with_provider(provider: Box<dyn Provider>, cfg: &ProviderConfig) -> Self {
        Self {
            provider,
            limiter: Limiter::new(cfg.max_concurrency.max(1)),
            retry_limit: cfg.retry_limit,
            retry_base: cfg.retry_base,
            dimension: cfg.dimension,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_concurrency(&self) -> usize {
        self.limiter.max
    }

    pub fn embed_text(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyInput);
        }
        let values = self.with_retries(|| self.provider.embed(text))?;
        if values.len() != self.dimension {
            return Err(GatewayError::DimensionMismatch {
                expected: self.dimension,
                got: values.len(),
            });
        }
        EmbeddingVector::new(values)
            .map_err(|e| GatewayError::ProviderUnavailable(format!("provider returned {e}")))
    }

    pub fn complete_chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        req.validate()?;
        let reply = self.with_retries(|| self.provider.chat(req))?;
        if reply.trim().is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        Ok(reply)
    }

    /// One attempt plus up to `retry_limit` retries on `ProviderUnavailable`.
    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut delay = self.retry_base;
        let mut attempt = 0;
        loop {
            let result = {
                let _permit = self.limiter.acquire();
                call()
            };
            match result {
                Err(GatewayError::ProviderUnavailable(why)) if attempt < self.retry_limit => {
                    attempt += 1;
                    tracing::warn!(attempt, %why, "provider call failed, retrying");
                    if !delay.is_zero() {
                        thread::sleep(delay);
                    }
                    delay = (delay * 2).min(MAX_BACKOFF);
                }
                other => return other,
            }
        }
    }
}
