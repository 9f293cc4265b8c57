//! Chat-completion client for a hosted model.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{GeneratorClient, PromptBundle, DEFAULT_TEMPERATURE};
use crate::error::{Error, Result};

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}
fn default_timeout() -> u64 {
    120
}
fn default_auth_header() -> String {
    "Authorization".into()
}
fn default_auth_prefix() -> String {
    "Bearer ".into()
}

/// Provider settings. Nothing provider-specific lives in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_auth_header")]
    pub auth_header: String,
    #[serde(default = "default_auth_prefix")]
    pub auth_prefix: String,
    #[serde(default)]
    pub max_tokens: Option<u32>,
}

impl ProviderConfig {
    /// Reads TOML or JSON, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug)]
pub struct HttpClient {
    config: ProviderConfig,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    /// Fails fast, before any network traffic, when the key is missing.
    pub fn new(config: ProviderConfig) -> Result<Self> {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::Auth(format!("environment variable {} is not set", config.api_key_env)))?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build();
        Ok(HttpClient { config, api_key, agent })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn body(&self, prompt: &PromptBundle, temperature: f64) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "temperature": temperature,
            "messages": [
                {"role": "system", "content": prompt.system_text},
                {"role": "user", "content": prompt.user_text},
            ],
        });
        if let Some(n) = self.config.max_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

/// Pulls the reply text out of the common response shapes.
pub fn response_text(v: &Value) -> Option<String> {
    if let Some(s) = v.pointer("/choices/0/message/content").and_then(Value::as_str) {
        return Some(s.to_string());
    }
    let parts = v.get("content")?.as_array()?;
    let text: String = parts
        .iter()
        .filter_map(|p| p.get("text").and_then(Value::as_str))
        .collect();
    (!text.is_empty()).then_some(text)
}

impl GeneratorClient for HttpClient {
    fn complete(&mut self, prompt: &PromptBundle, temperature: f64) -> Result<String> {
        let resp = self
            .agent
            .post(&self.config.endpoint)
            .set(&self.config.auth_header, &format!("{}{}", self.config.auth_prefix, self.api_key))
            .send_json(self.body(prompt, temperature))
            .map_err(|e| Error::Client(e.to_string()))?;
        let v: Value = resp.into_json()?;
        response_text(&v).ok_or_else(|| Error::Client(format!("unrecognized response: {v}")))
    }

    fn describe(&self) -> String {
        format!("http:{}", self.config.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(var: &str) -> ProviderConfig {
        toml::from_str(&format!(
            "endpoint = \"http://127.0.0.1:9/v1/chat\"\nmodel = \"m\"\napi_key_env = \"{var}\"\n"
        ))
        .unwrap()
    }

    #[test]
    fn defaults_and_missing_key() {
        let c = cfg("REWARDLAB_TEST_KEY_THAT_IS_NOT_SET");
        assert_eq!(c.temperature, 0.4);
        assert_eq!(c.auth_header, "Authorization");
        assert!(matches!(HttpClient::new(c), Err(Error::Auth(_))));
    }

    #[test]
    fn parses_both_response_shapes() {
        let a = json!({"choices": [{"message": {"content": "hi"}}]});
        let b = json!({"content": [{"type": "text", "text": "h"}, {"type": "text", "text": "i"}]});
        assert_eq!(response_text(&a).as_deref(), Some("hi"));
        assert_eq!(response_text(&b).as_deref(), Some("hi"));
        assert_eq!(response_text(&json!({})), None);
    }
}
