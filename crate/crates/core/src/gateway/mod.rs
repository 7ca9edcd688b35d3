//! Access to chat models: prompt rendering, sampling, record/replay caching,
//! and typed retrieval.

pub mod backend;
pub mod cache;
pub mod catalog;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

pub use backend::{Backend, BackendRequest, OpenAiBackend, ScriptedBackend};
pub use cache::{cache_key, Cache, CacheError, CacheRecord};
pub use catalog::{Catalog, Message, PromptTemplate, Role};

use crate::typed::{TypedValue, ValueKind};

/// Sampling temperature for inference, programs, and retrieval.
pub const INFERENCE_TEMPERATURE: f64 = 0.7;
/// Sampling temperature for similar-question generation.
pub const GENERATION_TEMPERATURE: f64 = 1.0;
pub const RETRIEVAL_ATTEMPTS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` has no value for placeholder `{slot}`")]
    UnboundPlaceholder { template: String, slot: String },
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("no cached response for key {key} (template `{template}`)")]
    ReplayMiss { key: String, template: String },
    #[error("typed retrieval failed after {attempts} attempts for query {query:?}")]
    RetrievalExhausted { query: String, attempts: u32 },
    #[error("cache error: {0}")]
    Cache(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Record,
    #[default]
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub template: String,
    pub slots: BTreeMap<String, String>,
    pub temperature: f64,
    pub sample_index: u32,
    /// `None` uses the template's default.
    pub max_tokens: Option<u32>,
}

impl LlmRequest {
    pub fn new(template: &str, slots: BTreeMap<String, String>, temperature: f64, sample_index: u32) -> Self {
        LlmRequest {
            template: template.to_string(),
            slots,
            temperature,
            sample_index,
            max_tokens: None,
        }
    }

    pub fn key(&self) -> String {
        cache_key(&self.template, &self.slots, self.temperature, self.sample_index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub text: String,
    pub source: Source,
    pub key: String,
}

/// Builds a slot map from `(name, value)` pairs.
pub fn slots<K: ToString, V: ToString>(pairs: impl IntoIterator<Item = (K, V)>) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// A chat model behind the catalog.
pub trait Llm: Sync {
    fn catalog(&self) -> &Catalog;

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, GatewayError>;

    fn render(&self, template: &str, slots: &BTreeMap<String, String>) -> Result<Vec<Message>, GatewayError> {
        self.catalog().render(template, slots)
    }

    /// `n` samples with indices `0..n`, returned in index order.
    fn sample_n(
        &self,
        template: &str,
        slots: &BTreeMap<String, String>,
        n: u32,
        temperature: f64,
    ) -> Result<Vec<LlmResponse>, GatewayError> {
        (0..n)
            .into_par_iter()
            .map(|i| self.complete(&LlmRequest::new(template, slots.clone(), temperature, i)))
            .collect()
    }

    /// Asks a short question and casts the answer to `kind`, resampling on
    /// malformed replies.
    fn ask_typed(&self, query: &str, kind: ValueKind) -> Result<TypedValue, GatewayError> {
        let s = slots([("query", query), ("kind", kind.label())]);
        for attempt in 0..RETRIEVAL_ATTEMPTS {
            let req = LlmRequest::new(catalog::ASK_TYPED, s.clone(), INFERENCE_TEMPERATURE, attempt);
            let resp = self.complete(&req)?;
            if let Some(v) = parse_typed_answer(&resp.text, kind) {
                return Ok(v);
            }
            tracing::debug!(attempt, query, "malformed typed answer");
        }
        Err(GatewayError::RetrievalExhausted {
            query: query.to_string(),
            attempts: RETRIEVAL_ATTEMPTS,
        })
    }
}

/// Extracts the `answer` field of the first JSON object in `text` and casts it.
pub fn parse_typed_answer(text: &str, kind: ValueKind) -> Option<TypedValue> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Json>();
        if let Some(Ok(Json::Object(obj))) = stream.next() {
            if let Some(v) = obj.get("answer") {
                return TypedValue::cast(kind, v);
            }
        }
    }
    // replies shaped like {"answer": singer}
    static LOOSE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = LOOSE.get_or_init(|| Regex::new(r#"\{\s*['"]answer['"]\s*:\s*([^{}\[\]]*?)\s*\}"#).expect("valid regex"));
    let raw = re.captures(text)?.get(1)?.as_str();
    let raw = raw.trim_matches(|c| c == '"' || c == '\'').trim();
    if raw.is_empty() {
        return None;
    }
    TypedValue::cast(kind, &Json::String(raw.to_string()))
}

pub struct Gateway {
    catalog: Catalog,
    mode: Mode,
    backend: Option<Box<dyn Backend>>,
    cache: Cache,
}

impl Gateway {
    pub fn new(catalog: Catalog, mode: Mode, backend: Option<Box<dyn Backend>>, cache: Cache) -> Self {
        Gateway {
            catalog,
            mode,
            backend,
            cache,
        }
    }

    pub fn replay(cache: Cache) -> Self {
        Gateway::new(Catalog::standard(), Mode::Replay, None, cache)
    }

    pub fn recording(backend: impl Backend + 'static, cache: Cache) -> Self {
        Gateway::new(Catalog::standard(), Mode::Record, Some(Box::new(backend)), cache)
    }

    pub fn from_config(cfg: &BackendConfig) -> Result<Self, GatewayError> {
        let cache = match &cfg.cache {
            Some(path) if cfg.mode == Mode::Replay => Cache::open_read_only(path),
            Some(path) => Cache::open(path),
            None => Ok(Cache::in_memory()),
        }
        .map_err(|e| GatewayError::Cache(e.to_string()))?;
        let backend: Option<Box<dyn Backend>> = match cfg.mode {
            Mode::Replay => None,
            Mode::Live | Mode::Record => {
                let key = match &cfg.api_key_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| {
                        GatewayError::BackendUnavailable(format!("environment variable {var} is not set"))
                    })?),
                    None => None,
                };
                Some(Box::new(OpenAiBackend::new(
                    &cfg.endpoint,
                    &cfg.model,
                    key,
                    Duration::from_secs(cfg.timeout_secs),
                )))
            }
        };
        Ok(Gateway::new(Catalog::standard(), cfg.mode, backend, cache))
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn cache(&self) -> &Cache {
        &self.cache
    }

    fn call_backend(&self, req: &LlmRequest, key: &str) -> Result<String, GatewayError> {
        let backend = self
            .backend
            .as_ref()
            .ok_or_else(|| GatewayError::BackendUnavailable("no backend configured".into()))?;
        let template = self.catalog.get(&req.template)?;
        let messages = template.render(&req.slots)?;
        let breq = BackendRequest {
            template: &req.template,
            slots: &req.slots,
            messages: &messages,
            temperature: req.temperature,
            sample_index: req.sample_index,
            max_tokens: req.max_tokens.unwrap_or(template.max_tokens),
        };
        backend.complete(&breq).map_err(|e| {
            tracing::warn!(key, error = %e, "backend failure");
            GatewayError::BackendUnavailable(e)
        })
    }
}

impl Llm for Gateway {
    fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        // unknown templates and unbound slots fail in every mode
        self.catalog.render(&req.template, &req.slots)?;
        let key = req.key();
        match self.mode {
            Mode::Live => Ok(LlmResponse {
                text: self.call_backend(req, &key)?,
                source: Source::Live,
                key,
            }),
            Mode::Replay => match self.cache.get(&key) {
                Some(text) => Ok(LlmResponse {
                    text,
                    source: Source::Replay,
                    key,
                }),
                None => Err(GatewayError::ReplayMiss {
                    key,
                    template: req.template.clone(),
                }),
            },
            Mode::Record => {
                if let Some(text) = self.cache.get(&key) {
                    return Ok(LlmResponse {
                        text,
                        source: Source::Replay,
                        key,
                    });
                }
                let text = self.call_backend(req, &key)?;
                let timestamp = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                let stored = self
                    .cache
                    .insert(CacheRecord {
                        key_hash: key.clone(),
                        template: req.template.clone(),
                        slots: req.slots.clone(),
                        temperature: req.temperature,
                        sample_index: req.sample_index,
                        response: text,
                        timestamp,
                    })
                    .map_err(|e| GatewayError::Cache(e.to_string()))?;
                Ok(LlmResponse {
                    text: stored,
                    source: Source::Live,
                    key,
                })
            }
        }
    }
}

/// Wraps a model and remembers every cache key it served.
pub struct Recorder<'a> {
    inner: &'a dyn Llm,
    keys: Mutex<BTreeSet<String>>,
    calls: std::sync::atomic::AtomicUsize,
}

impl<'a> Recorder<'a> {
    pub fn new(inner: &'a dyn Llm) -> Self {
        Recorder {
            inner,
            keys: Mutex::new(BTreeSet::new()),
            calls: std::sync::atomic::AtomicUsize::new(0),
        }
    }

    pub fn keys(&self) -> Vec<String> {
        self.keys.lock().expect("recorder poisoned").iter().cloned().collect()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(std::sync::atomic::Ordering::SeqCst)
    }
}

impl Llm for Recorder<'_> {
    fn catalog(&self) -> &Catalog {
        self.inner.catalog()
    }

    fn complete(&self, req: &LlmRequest) -> Result<LlmResponse, GatewayError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        let resp = self.inner.complete(req)?;
        self.keys.lock().expect("recorder poisoned").insert(resp.key.clone());
        Ok(resp)
    }
}

fn default_endpoint() -> String {
    "https://api.openai.com/v1".into()
}

fn default_model() -> String {
    "gpt-3.5-turbo".into()
}

fn default_timeout() -> u64 {
    120
}

/// `[backend]` section of the run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_endpoint")]
    pub endpoint: String,
    #[serde(default = "default_model")]
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            mode: Mode::Replay,
            endpoint: default_endpoint(),
            model: default_model(),
            api_key_env: None,
            cache: None,
            timeout_secs: default_timeout(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn echo_backend(counter: Arc<AtomicUsize>) -> ScriptedBackend {
        ScriptedBackend::new(move |r| {
            counter.fetch_add(1, Ordering::SeqCst);
            Ok(format!("reply {} {}", r.template, r.sample_index))
        })
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let calls = Arc::new(AtomicUsize::new(0));
        let req = LlmRequest::new("cot", slots([("question", "Q?")]), 0.7, 0);
        let first = {
            let g = Gateway::recording(echo_backend(calls.clone()), Cache::open(&path).unwrap());
            let a = g.complete(&req).unwrap();
            let b = g.complete(&req).unwrap();
            assert_eq!(a.text, b.text);
            assert_eq!(b.source, Source::Replay);
            a.text
        };
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let g = Gateway::replay(Cache::open_read_only(&path).unwrap());
        let r = g.complete(&req).unwrap();
        assert_eq!(r.text, first);
        assert_eq!(r.source, Source::Replay);
    }

    #[test]
    fn replay_miss() {
        let g = Gateway::replay(Cache::in_memory());
        let req = LlmRequest::new("cot", slots([("question", "unseen")]), 0.7, 0);
        assert!(matches!(g.complete(&req), Err(GatewayError::ReplayMiss { .. })));
    }

    #[test]
    fn sample_indices_are_distinct_entries() {
        let g = Gateway::recording(echo_backend(Arc::new(AtomicUsize::new(0))), Cache::in_memory());
        let s = slots([("question", "Q?")]);
        g.complete(&LlmRequest::new("cot", s.clone(), 0.7, 0)).unwrap();
        g.complete(&LlmRequest::new("cot", s, 0.7, 1)).unwrap();
        let recs = g.cache().records();
        assert_eq!(recs.len(), 2);
        assert_ne!(recs[0].key_hash, recs[1].key_hash);
        assert_eq!(recs.iter().map(|r| r.sample_index).collect::<Vec<_>>(), [0, 1]);
    }

    #[test]
    fn sample_n_orders_by_index() {
        let g = Gateway::recording(echo_backend(Arc::new(AtomicUsize::new(0))), Cache::in_memory());
        let out = g.sample_n("cot", &slots([("question", "Q?")]), 10, INFERENCE_TEMPERATURE).unwrap();
        assert_eq!(out.len(), 10);
        for (i, r) in out.iter().enumerate() {
            assert_eq!(r.text, format!("reply cot {i}"));
        }
        assert_eq!(g.sample_n("cot", &slots([("question", "Q?")]), 1, 0.7).unwrap().len(), 1);
    }

    #[test]
    fn ask_typed_reference_examples() {
        let g = Gateway::recording(
            ScriptedBackend::new(|r| {
                Ok(match r.slots["query"].as_str() {
                    "How many people today are related to Genghis Khan?" => "{\"answer\": 35000000}".into(),
                    _ => "{\"answer\": false}".into(),
                })
            }),
            Cache::in_memory(),
        );
        assert_eq!(
            g.ask_typed("How many people today are related to Genghis Khan?", ValueKind::Integer).unwrap(),
            TypedValue::Integer(35000000)
        );
        assert_eq!(
            g.ask_typed("Does anchors on KBS speak Arabic?", ValueKind::Boolean).unwrap(),
            TypedValue::Boolean(false)
        );
    }

    #[test]
    fn ask_typed_retry_bound() {
        let calls = Arc::new(AtomicUsize::new(0));
        let c = calls.clone();
        let g = Gateway::recording(
            ScriptedBackend::new(move |_| {
                c.fetch_add(1, Ordering::SeqCst);
                Ok("I am not sure.".into())
            }),
            Cache::in_memory(),
        );
        let e = g.ask_typed("Q", ValueKind::Integer).unwrap_err();
        assert!(matches!(e, GatewayError::RetrievalExhausted { attempts: 10, .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 10);
    }

    #[test]
    fn typed_answer_parsing() {
        assert_eq!(
            parse_typed_answer("{\"answer\": singer}", ValueKind::Text),
            Some(TypedValue::Text("singer".into()))
        );
        assert_eq!(
            parse_typed_answer("Sure! {\"answer\": [\"a\", \"b\"]} hope it helps", ValueKind::TextList),
            Some(TypedValue::TextList(vec!["a".into(), "b".into()]))
        );
        assert_eq!(parse_typed_answer("{\"answer\": \"yes\"}", ValueKind::Boolean), Some(TypedValue::Boolean(true)));
        assert_eq!(parse_typed_answer("{\"answer\": 2.5}", ValueKind::Integer), None);
        assert_eq!(parse_typed_answer("no json here", ValueKind::Text), None);
    }

    #[test]
    fn recorder_collects_keys() {
        let g = Gateway::recording(echo_backend(Arc::new(AtomicUsize::new(0))), Cache::in_memory());
        let rec = Recorder::new(&g);
        rec.sample_n("cot", &slots([("question", "Q?")]), 3, 0.7).unwrap();
        assert_eq!(rec.keys().len(), 3);
        assert_eq!(rec.calls(), 3);
    }
}
