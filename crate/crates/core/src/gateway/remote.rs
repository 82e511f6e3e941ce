use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{ChatRequest, GatewayError, Provider, ProviderConfig};

/// HTTP provider for the common `/embeddings` + `/chat/completions` API shape
/// with bearer-token auth.
#[derive(Debug)]
pub struct RemoteProvider {
    client: Client,
    endpoint: String,
    api_key: String,
    embed_model: String,
    chat_model: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f32>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

impl RemoteProvider {
    pub fn new(cfg: &ProviderConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let client = Client::builder()
            .timeout(Duration::from_secs(60))
            .connect_timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| GatewayError::InvalidConfig(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: cfg.endpoint.clone().unwrap_or_default().trim_end_matches('/').to_string(),
            api_key: cfg.api_key.clone().unwrap_or_default(),
            embed_model: cfg.embed_model.clone(),
            chat_model: cfg.chat_model.clone(),
        })
    }

    fn post<T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: serde_json::Value,
    ) -> Result<T, GatewayError> {
        let url = format!("{}/{}", self.endpoint, path);
        let resp = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| GatewayError::ProviderUnavailable(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let msg = format!("{url} answered {status}");
            // Auth and request-shape errors will not heal on retry.
            return Err(if status.is_client_error() && status != StatusCode::TOO_MANY_REQUESTS {
                GatewayError::InvalidRequest(msg)
            } else {
                GatewayError::ProviderUnavailable(msg)
            });
        }
        resp.json::<T>()
            .map_err(|e| GatewayError::ProviderUnavailable(format!("bad response body: {e}")))
    }
}

impl Provider for RemoteProvider {
    fn embed(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        let resp: EmbeddingResponse = self.post(
            "embeddings",
            json!({ "model": self.embed_model, "input": text }),
        )?;
        resp.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or(GatewayError::EmptyResponse)
    }

    fn chat(&self, req: &ChatRequest) -> Result<String, GatewayError> {
        let resp: ChatResponse = self.post(
            "chat/completions",
            json!({
                "model": self.chat_model,
                "temperature": req.temperature,
                "messages": [
                    { "role": "system", "content": req.system },
                    { "role": "user", "content": req.user },
                ],
            }),
        )?;
        resp.choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or(GatewayError::EmptyResponse)
    }
}
