//! Chat-completion client for the pairwise LLM baseline.

use std::time::Duration;

use fatlens_core::mlcore::ChatEndpoint;
use serde_json::{json, Value};

use crate::config::LlmSection;
use crate::error::{CliError, Result};

pub struct HttpChat {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    retries: u32,
}

impl HttpChat {
    /// Fails with a config error when no endpoint is set or the key
    /// variable is named but unset.
    pub fn new(config: &LlmSection) -> Result<Self> {
        let endpoint = config
            .endpoint
            .clone()
            .ok_or_else(|| CliError::Config("llm.endpoint is not set".into()))?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| CliError::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self { agent, endpoint, model: config.model.clone(), api_key, retries: config.retries })
    }

    fn once(&self, prompt: &str) -> std::result::Result<String, String> {
        let body = json!({ "model": self.model, "messages": [{ "role": "user", "content": prompt }] });
        let mut req = self.agent.post(&self.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        if !status.is_success() {
            return Err(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| format!("bad JSON reply: {e}"))?;
        reply_text(&v).ok_or_else(|| "reply has no choices[0].message.content".to_string())
    }
}

/// Text of the first choice, in chat or plain completion form.
pub fn reply_text(v: &Value) -> Option<String> {
    let first = v.get("choices")?.get(0)?;
    first
        .pointer("/message/content")
        .or_else(|| first.get("text"))
        .and_then(Value::as_str)
        .map(String::from)
}

impl ChatEndpoint for HttpChat {
    fn complete(&mut self, prompt: &str) -> std::result::Result<String, String> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(200 << attempt.min(5)));
            }
            match self.once(prompt) {
                Ok(s) => return Ok(s),
                Err(e) => last = e,
            }
        }
        Err(format!("{} attempts failed, last: {last}", self.retries + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_forms() {
        let chat = json!({"choices": [{"message": {"role": "assistant", "content": "Note 2"}}]});
        assert_eq!(reply_text(&chat).as_deref(), Some("Note 2"));
        assert_eq!(reply_text(&json!({"choices": [{"text": "x"}]})).as_deref(), Some("x"));
        assert_eq!(reply_text(&json!({"choices": []})), None);
    }

    #[test]
    fn missing_endpoint_is_config_error() {
        let err = HttpChat::new(&LlmSection::default()).err().unwrap();
        assert_eq!(err.exit_code(), 3);
    }
}
