use std::path::Path;
use std::time::Duration;

use serde_json::{json, Value};

use super::{Backend, Completion, GatewayError, LlmRequestParams, Usage};

/// OpenAI-compatible `POST {base_url}/chat/completions` client.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> Result<Self, GatewayError> {
        Self::with_timeout(base_url, api_key, Duration::from_secs(120))
    }

    pub fn with_timeout(
        base_url: impl Into<String>,
        api_key: impl Into<String>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let api_key = api_key.into();
        if api_key.trim().is_empty() {
            return Err(GatewayError::AuthMissing("empty API key".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(Self { client, base_url: base_url.into().trim_end_matches('/').to_string(), api_key: api_key.trim().into() })
    }

    /// Reads the key from `key_file` if given, else from the `env_var` environment variable.
    pub fn resolve_api_key(key_file: Option<&Path>, env_var: &str) -> Result<String, GatewayError> {
        if let Some(path) = key_file {
            let key = std::fs::read_to_string(path)
                .map_err(|e| GatewayError::AuthMissing(format!("{}: {e}", path.display())))?;
            if !key.trim().is_empty() {
                return Ok(key.trim().to_string());
            }
            return Err(GatewayError::AuthMissing(format!("{} is empty", path.display())));
        }
        match std::env::var(env_var) {
            Ok(k) if !k.trim().is_empty() => Ok(k.trim().to_string()),
            _ => Err(GatewayError::AuthMissing(format!("set {env_var} or provide a key file"))),
        }
    }

    fn request_body(prompt: &str, params: &LlmRequestParams) -> Value {
        let mut messages = Vec::new();
        if let Some(system) = &params.system_message {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": prompt}));
        let mut body = json!({
            "model": params.model_id,
            "temperature": params.temperature,
            "messages": messages,
        });
        if let Some(n) = params.max_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str, params: &LlmRequestParams) -> Result<Completion, GatewayError> {
        let response = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&Self::request_body(prompt, params))
            .send()
            .map_err(|e| GatewayError::Transport { attempts: 1, message: e.to_string() })?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| GatewayError::Transport { attempts: 1, message: e.to_string() })?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::Unauthorized(status)),
            429 => return Err(GatewayError::RateLimited { attempts: 1 }),
            500..=599 => return Err(GatewayError::Server { status, attempts: 1, body }),
            _ if body.contains("context_length_exceeded") => return Err(GatewayError::ChunkTooLarge(body)),
            _ => return Err(GatewayError::Http { status, body }),
        }
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| GatewayError::MalformedJson(format!("chat completion envelope: {e}")))?;
        let choice = &v["choices"][0];
        let text = choice["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::MalformedJson("chat completion has no choices[0].message.content".into()))?;
        let usage = v.get("usage").map(|u| Usage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0),
            total_tokens: u["total_tokens"].as_u64().unwrap_or(0),
        });
        Ok(Completion {
            text: text.to_string(),
            finish_reason: choice["finish_reason"].as_str().map(str::to_string),
            usage,
        })
    }

    fn name(&self) -> &str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_carries_system_and_user_messages() {
        let body = HttpBackend::request_body("hi", &LlmRequestParams::default());
        assert_eq!(body["temperature"], json!(0.0));
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][1], json!({"role": "user", "content": "hi"}));
        assert!(body.get("max_tokens").is_none());
    }

    #[test]
    fn key_file_wins_over_env() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("key");
        std::fs::write(&file, "  from-file\n").unwrap();
        let key = HttpBackend::resolve_api_key(Some(&file), "PATH").unwrap();
        assert_eq!(key, "from-file");
    }

    #[test]
    fn missing_key_is_auth_missing() {
        let err = HttpBackend::resolve_api_key(None, "SAFER_TEST_SURELY_UNSET_VAR").unwrap_err();
        assert!(matches!(err, GatewayError::AuthMissing(_)));
        assert!(matches!(HttpBackend::new("http://x", " "), Err(GatewayError::AuthMissing(_))));
    }
}
