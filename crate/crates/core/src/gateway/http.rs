use super::{
    count_tokens, ApiStyle, ClientIdentity, GatewayError, LlmClient, LlmRequest, LlmResponse,
    ModelConfig,
};
use serde::Deserialize;
use std::sync::Mutex;
use std::time::{Duration, Instant};

const BACKOFF_BASE_MS: u64 = 250;
const BACKOFF_CAP_MS: u64 = 8_000;

/// Blocking client for OpenAI-compatible chat/completions endpoints with
/// retries, client-side rate limiting, and token accounting.
pub struct HttpClient {
    config: ModelConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
    bucket: Option<Mutex<TokenBucket>>,
}

impl HttpClient {
    /// Resolves the credential from the environment variable named in the
    /// config. An empty `credential_ref` means no credential is needed.
    pub fn new(config: ModelConfig) -> Result<Self, GatewayError> {
        let api_key = if config.credential_ref.is_empty() {
            None
        } else {
            match std::env::var(&config.credential_ref) {
                Ok(v) if !v.is_empty() => Some(v),
                _ => return Err(GatewayError::MissingCredential(config.credential_ref.clone())),
            }
        };
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| GatewayError::MalformedReply(format!("http client: {e}")))?;
        let bucket = if config.rate_limit_rpm > 0 {
            Some(Mutex::new(TokenBucket::new(config.rate_limit_rpm)))
        } else {
            None
        };
        Ok(Self { config, api_key, http, bucket })
    }

    fn body_for(&self, request: &LlmRequest) -> serde_json::Value {
        match self.config.api_style {
            ApiStyle::Chat => {
                let mut messages = Vec::new();
                if let Some(system) = &request.system_message {
                    messages.push(serde_json::json!({"role": "system", "content": system}));
                }
                messages.push(serde_json::json!({"role": "user", "content": request.user_message}));
                let mut body = serde_json::json!({
                    "model": self.config.model_name,
                    "messages": messages,
                    "temperature": self.config.temperature,
                });
                if let Some(max) = self.config.max_output_tokens {
                    body["max_tokens"] = serde_json::json!(max);
                }
                body
            }
            ApiStyle::Completions => {
                let prompt = match &request.system_message {
                    Some(system) => format!("{system}\n\n{}", request.user_message),
                    None => request.user_message.clone(),
                };
                let mut body = serde_json::json!({
                    "model": self.config.model_name,
                    "prompt": prompt,
                    "temperature": self.config.temperature,
                });
                if let Some(max) = self.config.max_output_tokens {
                    body["max_tokens"] = serde_json::json!(max);
                }
                body
            }
        }
    }

    fn send_once(&self, body: &serde_json::Value) -> Attempt {
        let mut req = self.http.post(&self.config.endpoint_url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let started = Instant::now();
        match req.send() {
            Ok(resp) => {
                let status = resp.status();
                let text = resp.text().unwrap_or_default();
                if status.is_success() {
                    Attempt::Success { text, latency: started.elapsed() }
                } else if status.as_u16() == 401 || status.as_u16() == 403 {
                    Attempt::Fatal(GatewayError::Auth(trimmed(&text)))
                } else if status.as_u16() == 429 || status.as_u16() == 408 || status.is_server_error() {
                    Attempt::Transient(format!("status {status}: {}", trimmed(&text)))
                } else {
                    Attempt::Fatal(GatewayError::Provider {
                        status: status.as_u16(),
                        message: trimmed(&text),
                    })
                }
            }
            Err(e) if e.is_timeout() || e.is_connect() || e.is_request() => {
                Attempt::Transient(e.to_string())
            }
            Err(e) => Attempt::Fatal(GatewayError::MalformedReply(e.to_string())),
        }
    }

    fn parse_reply(&self, request: &LlmRequest, raw: &str, latency: Duration) -> Result<LlmResponse, GatewayError> {
        let reply: ProviderReply = serde_json::from_str(raw)
            .map_err(|e| GatewayError::MalformedReply(format!("{e}; body: {}", trimmed(raw))))?;
        let choice = reply
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::MalformedReply("reply has no choices".to_string()))?;
        let text = match self.config.api_style {
            ApiStyle::Chat => choice
                .message
                .and_then(|m| m.content)
                .ok_or_else(|| GatewayError::MalformedReply("choice has no message content".to_string()))?,
            ApiStyle::Completions => choice
                .text
                .ok_or_else(|| GatewayError::MalformedReply("choice has no text".to_string()))?,
        };
        let (input, output, provider_reported) = match reply.usage {
            Some(u) => (u.prompt_tokens, u.completion_tokens, true),
            None => {
                let mut input = count_tokens(&request.user_message) as u64;
                if let Some(system) = &request.system_message {
                    input += count_tokens(system) as u64;
                }
                (input, count_tokens(&text) as u64, false)
            }
        };
        Ok(LlmResponse {
            text,
            input_tokens: input,
            output_tokens: output,
            latency_ms: latency.as_millis() as u64,
            provider_reported,
        })
    }
}

enum Attempt {
    Success { text: String, latency: Duration },
    Transient(String),
    Fatal(GatewayError),
}

impl LlmClient for HttpClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        let body = self.body_for(request);
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if let Some(bucket) = &self.bucket {
                let wait = bucket.lock().expect("rate limiter lock").acquire();
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            match self.send_once(&body) {
                Attempt::Success { text, latency } => return self.parse_reply(request, &text, latency),
                Attempt::Fatal(err) => return Err(err),
                Attempt::Transient(err) => {
                    last_error = err;
                    if attempt + 1 < attempts {
                        let backoff = (BACKOFF_BASE_MS << attempt.min(6)).min(BACKOFF_CAP_MS);
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(GatewayError::RetriesExhausted { attempts, last_error })
    }

    fn identity(&self) -> ClientIdentity {
        ClientIdentity {
            model: self.config.model_name.clone(),
            temperature: self.config.temperature,
        }
    }
}

#[derive(Deserialize)]
struct ProviderReply {
    choices: Vec<ProviderChoice>,
    usage: Option<ProviderUsage>,
}

#[derive(Deserialize)]
struct ProviderChoice {
    message: Option<ProviderMessage>,
    text: Option<String>,
}

#[derive(Deserialize)]
struct ProviderMessage {
    content: Option<String>,
}

#[derive(Deserialize)]
struct ProviderUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

fn trimmed(text: &str) -> String {
    let t: String = text.chars().take(200).collect();
    t.trim().to_string()
}

/// Requests-per-minute token bucket. `acquire` returns how long the caller
/// must sleep before proceeding; refill is continuous at rpm/60 per second.
struct TokenBucket {
    capacity: f64,
    tokens: f64,
    refill_per_sec: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rpm: u32) -> Self {
        Self {
            capacity: rpm as f64,
            tokens: rpm as f64,
            refill_per_sec: rpm as f64 / 60.0,
            last: Instant::now(),
        }
    }

    fn acquire(&mut self) -> Duration {
        let now = Instant::now();
        let elapsed = now.duration_since(self.last).as_secs_f64();
        self.last = now;
        self.tokens = (self.tokens + elapsed * self.refill_per_sec).min(self.capacity);
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            let deficit = 1.0 - self.tokens;
            self.tokens = 0.0;
            Duration::from_secs_f64(deficit / self.refill_per_sec)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_spends_then_waits() {
        let mut bucket = TokenBucket::new(60);
        for _ in 0..60 {
            assert_eq!(bucket.acquire(), Duration::ZERO);
        }
        let wait = bucket.acquire();
        assert!(wait > Duration::ZERO);
        assert!(wait <= Duration::from_secs(2));
    }

    #[test]
    fn missing_credential_is_rejected() {
        let config = ModelConfig {
            endpoint_url: "http://localhost:1/v1/chat/completions".to_string(),
            model_name: "m".to_string(),
            credential_ref: "TABGEN_TEST_NO_SUCH_VAR".to_string(),
            ..ModelConfig::default()
        };
        assert!(matches!(HttpClient::new(config), Err(GatewayError::MissingCredential(_))));
    }
}
