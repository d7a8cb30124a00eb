//! Uniform interface to completion providers: a real HTTP client for
//! OpenAI-compatible endpoints plus deterministic scripted and oracle clients
//! for offline runs, with token accounting, caching, and retries.

mod cache;
mod http;
mod oracle;
mod scripted;
mod tokens;

pub use cache::{CachedClient, DiskCache, LedgerEntry, UsageLedger};
pub use http::HttpClient;
pub use oracle::OracleClient;
pub use scripted::ScriptedClient;
pub use tokens::count_tokens;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("request rejected: {0}")]
    InvalidRequest(String),
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider rejected the request (status {status}): {message}")]
    Provider { status: u16, message: String },
    #[error("malformed provider reply: {0}")]
    MalformedReply(String),
    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    RetriesExhausted { attempts: u32, last_error: String },
    #[error("unscripted prompt: {0}")]
    UnscriptedPrompt(String),
    #[error("unrecognized prompt shape: {0}")]
    UnrecognizedPrompt(String),
    #[error("cache io: {0}")]
    CacheIo(String),
}

/// How the endpoint expects its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ApiStyle {
    #[default]
    Chat,
    Completions,
}

/// Configuration for one model endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key; empty means the
    /// endpoint needs no credential. Credential values never appear in
    /// configs or manifests.
    #[serde(default)]
    pub credential_ref: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Client-side rate limit in requests per minute; 0 disables it.
    #[serde(default)]
    pub rate_limit_rpm: u32,
    #[serde(default)]
    pub api_style: ApiStyle,
}

fn default_timeout_secs() -> u64 {
    60
}

fn default_max_retries() -> u32 {
    3
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint_url: String::new(),
            model_name: String::new(),
            credential_ref: String::new(),
            temperature: 0.0,
            max_output_tokens: None,
            request_timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            rate_limit_rpm: 0,
            api_style: ApiStyle::Chat,
        }
    }
}

/// One prompt sent to a model. The system message is empty for the built-in
/// templates, which carry their instructions in the user message.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LlmRequest {
    pub system_message: Option<String>,
    pub user_message: String,
}

impl LlmRequest {
    pub fn user(message: impl Into<String>) -> Self {
        Self { system_message: None, user_message: message.into() }
    }

    pub(crate) fn validate(&self) -> Result<(), GatewayError> {
        if self.user_message.is_empty() {
            return Err(GatewayError::InvalidRequest("user_message is empty".to_string()));
        }
        Ok(())
    }
}

/// A completion plus its usage accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Provider-side latency in milliseconds; deterministic clients report 0.
    pub latency_ms: u64,
    /// Whether the token counts came from the provider rather than the local
    /// approximation.
    pub provider_reported: bool,
}

/// What identifies a client's responses for caching and manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientIdentity {
    pub model: String,
    pub temperature: f64,
}

/// A completion endpoint. Implementations must be safe to call from several
/// threads at once.
pub trait LlmClient: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError>;
    fn identity(&self) -> ClientIdentity;
}

impl<T: LlmClient + ?Sized> LlmClient for &T {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        (**self).complete(request)
    }

    fn identity(&self) -> ClientIdentity {
        (**self).identity()
    }
}

impl<T: LlmClient + ?Sized> LlmClient for Box<T> {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        (**self).complete(request)
    }

    fn identity(&self) -> ClientIdentity {
        (**self).identity()
    }
}

/// Builds a response around locally counted tokens, for offline clients.
pub(crate) fn local_response(request: &LlmRequest, text: String) -> LlmResponse {
    let mut input = count_tokens(&request.user_message) as u64;
    if let Some(system) = &request.system_message {
        input += count_tokens(system) as u64;
    }
    let output = count_tokens(&text) as u64;
    LlmResponse {
        text,
        input_tokens: input,
        output_tokens: output,
        latency_ms: 0,
        provider_reported: false,
    }
}
