use std::collections::BTreeMap;
use std::time::Duration;

use serde_json::{json, Value as Json};

use super::catalog::Message;

/// Everything a backend may look at when producing a completion.
pub struct BackendRequest<'a> {
    pub template: &'a str,
    pub slots: &'a BTreeMap<String, String>,
    pub messages: &'a [Message],
    pub temperature: f64,
    pub sample_index: u32,
    pub max_tokens: u32,
}

pub trait Backend: Send + Sync {
    fn complete(&self, req: &BackendRequest<'_>) -> Result<String, String>;
}

/// Chat-completions client for any OpenAI-compatible endpoint.
pub struct OpenAiBackend {
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retries: u32,
}

impl OpenAiBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        OpenAiBackend {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            agent,
            retries: 3,
        }
    }

    fn call_once(&self, req: &BackendRequest<'_>) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "messages": req.messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "seed": req.sample_index,
        });
        let url = format!("{}/chat/completions", self.endpoint);
        let mut call = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(|e| e.to_string())?;
        let v: Json = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        v.pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("response without message content: {v}"))
    }
}

impl Backend for OpenAiBackend {
    fn complete(&self, req: &BackendRequest<'_>) -> Result<String, String> {
        let mut last = String::new();
        for attempt in 0..self.retries {
            match self.call_once(req) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    tracing::warn!(attempt, error = %e, "backend call failed");
                    last = e;
                    std::thread::sleep(Duration::from_millis(500 << attempt));
                }
            }
        }
        Err(last)
    }
}

type Script = dyn Fn(&BackendRequest<'_>) -> Result<String, String> + Send + Sync;

/// Backend driven by a closure; used for fixtures and tests.
pub struct ScriptedBackend {
    script: Box<Script>,
}

impl ScriptedBackend {
    pub fn new(f: impl Fn(&BackendRequest<'_>) -> Result<String, String> + Send + Sync + 'static) -> Self {
        ScriptedBackend { script: Box::new(f) }
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, req: &BackendRequest<'_>) -> Result<String, String> {
        (self.script)(req)
    }
}
