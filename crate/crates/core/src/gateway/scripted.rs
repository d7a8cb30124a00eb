use super::{local_response, ClientIdentity, GatewayError, LlmClient, LlmRequest, LlmResponse};
use std::collections::HashMap;
use std::path::Path;

/// A client that replays a fixed prompt -> response transcript. Any prompt
/// outside the transcript is an error, which makes tests fail loudly when a
/// template drifts.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    transcript: HashMap<String, String>,
}

impl ScriptedClient {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        Self { transcript: pairs.into_iter().collect() }
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self::new(pairs.iter().map(|(p, r)| (p.to_string(), r.to_string())))
    }

    /// Loads a transcript from a JSON object mapping prompt text to response
    /// text.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| GatewayError::InvalidRequest(format!("cannot read transcript: {e}")))?;
        let transcript: HashMap<String, String> = serde_json::from_str(&text)
            .map_err(|e| GatewayError::InvalidRequest(format!("transcript is not a JSON object of strings: {e}")))?;
        Ok(Self { transcript })
    }
}

impl LlmClient for ScriptedClient {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        request.validate()?;
        match self.transcript.get(&request.user_message) {
            Some(text) => Ok(local_response(request, text.clone())),
            None => {
                let head: String = request.user_message.chars().take(80).collect();
                Err(GatewayError::UnscriptedPrompt(head))
            }
        }
    }

    fn identity(&self) -> ClientIdentity {
        ClientIdentity { model: "scripted".to_string(), temperature: 0.0 }
    }
}
