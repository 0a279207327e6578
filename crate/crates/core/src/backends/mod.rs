//! Model backends: OpenAI-compatible completion/chat endpoints, a minimal
//! fill-mask endpoint, and deterministic local stubs. Responses are cached
//! on disk and dispatched with bounded parallelism.

mod cache;
mod dispatch;
mod wire;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cache::{CachedEntry, ResponseCache};
pub use dispatch::{dispatch, DispatchOutcome};
pub use wire::WireBackend;

use crate::error::{Error, Result};
use crate::prompts::{Family, RenderedPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Completion,
    Chat,
    FillMask,
    StubEchoGold,
    StubConstant,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Completion => "completion",
            BackendKind::Chat => "chat",
            BackendKind::FillMask => "fill_mask",
            BackendKind::StubEchoGold => "stub_echo_gold",
            BackendKind::StubConstant => "stub_constant",
        }
    }

    pub fn is_stub(self) -> bool {
        matches!(self, BackendKind::StubEchoGold | BackendKind::StubConstant)
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_max_output_tokens() -> u32 {
    16
}
fn default_timeout_secs() -> f64 {
    60.0
}
fn default_max_retries() -> u32 {
    3
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_top_k() -> usize {
    10
}
fn default_retry_base_ms() -> u64 {
    500
}
fn default_mask_token() -> String {
    "[MASK]".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub_constant_text: Option<String>,
    /// Prompt family this backend consumes; defaults by kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    /// Literal substituted for `{MASK}` in masked templates.
    #[serde(default = "default_mask_token")]
    pub mask_token: String,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_delay_ms: u64,
}

impl BackendConfig {
    pub fn new(backend_id: impl Into<String>, kind: BackendKind) -> Self {
        BackendConfig {
            backend_id: backend_id.into(),
            kind,
            endpoint_url: None,
            model_name: String::new(),
            max_output_tokens: default_max_output_tokens(),
            temperature: 0.0,
            request_timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            stub_constant_text: None,
            family: None,
            mask_token: default_mask_token(),
            top_k: default_top_k(),
            api_key_env: default_api_key_env(),
            requests_per_second: None,
            retry_base_delay_ms: default_retry_base_ms(),
        }
    }

    pub fn stub_echo_gold(backend_id: impl Into<String>) -> Self {
        BackendConfig::new(backend_id, BackendKind::StubEchoGold)
    }

    pub fn stub_constant(backend_id: impl Into<String>, text: impl Into<String>) -> Self {
        BackendConfig {
            stub_constant_text: Some(text.into()),
            ..BackendConfig::new(backend_id, BackendKind::StubConstant)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("backend `{}`: {msg}", self.backend_id)));
        if self.backend_id.trim().is_empty() {
            return Err(Error::Config("backend id must not be empty".into()));
        }
        match (self.kind.is_stub(), &self.endpoint_url) {
            (false, None) => return bad("wire backends need an endpoint_url"),
            (true, Some(_)) => return bad("stub backends must not set an endpoint_url"),
            _ => {}
        }
        if self.kind == BackendKind::StubConstant && self.stub_constant_text.is_none() {
            return bad("stub_constant needs stub_constant_text");
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return bad("temperature must be a non-negative number");
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return bad("request_timeout_secs must be positive");
        }
        if self.requests_per_second.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
            return bad("requests_per_second must be positive");
        }
        if self.kind == BackendKind::FillMask && self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        let family = self.family();
        if !self.accepts(family) {
            return bad(&format!("kind {} cannot serve the {family} prompt family", self.kind));
        }
        Ok(())
    }

    /// Prompt family consumed by this backend.
    pub fn family(&self) -> Family {
        self.family.unwrap_or(match self.kind {
            BackendKind::FillMask => Family::Masked,
            BackendKind::Completion | BackendKind::Chat => Family::Causal,
            BackendKind::StubEchoGold | BackendKind::StubConstant => Family::Seq2seq,
        })
    }

    pub fn accepts(&self, family: Family) -> bool {
        match self.kind {
            BackendKind::FillMask => family == Family::Masked,
            BackendKind::Completion | BackendKind::Chat => family != Family::Masked,
            BackendKind::StubEchoGold | BackendKind::StubConstant => true,
        }
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedToken {
    pub token: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Text(String),
    Ranked(Vec<RankedToken>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub item_id: String,
    pub template_id: String,
    pub backend_id: String,
    pub payload: Payload,
    pub latency_ms: u64,
    pub from_cache: bool,
}

/// A rendered prompt plus the gold answer text (used only by the echo stub).
#[derive(Debug, Clone, PartialEq)]
pub struct InvokeRequest {
    pub prompt: RenderedPrompt,
    pub gold_hint: Option<String>,
}

/// Something that turns a prompt into a raw response.
pub trait Invoker: Sync {
    fn config(&self) -> &BackendConfig;
    fn invoke(&self, request: &InvokeRequest) -> Result<RawResponse>;
    /// Wire requests issued so far, retries included.
    fn wire_requests(&self) -> usize {
        0
    }
}

/// Deterministic local backend.
pub struct StubBackend {
    config: BackendConfig,
}

impl StubBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        if !config.kind.is_stub() {
            return Err(Error::Config(format!("backend `{}` is not a stub", config.backend_id)));
        }
        Ok(StubBackend { config })
    }
}

impl Invoker for StubBackend {
    fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn invoke(&self, request: &InvokeRequest) -> Result<RawResponse> {
        let text = match self.config.kind {
            BackendKind::StubEchoGold => request.gold_hint.clone().unwrap_or_default(),
            _ => self.config.stub_constant_text.clone().unwrap_or_default(),
        };
        Ok(RawResponse {
            item_id: request.prompt.item_id.clone(),
            template_id: request.prompt.template_id.clone(),
            backend_id: self.config.backend_id.clone(),
            payload: Payload::Text(text),
            latency_ms: 0,
            from_cache: false,
        })
    }
}

/// Build the backend named by a config.
pub fn connect(config: &BackendConfig) -> Result<Box<dyn Invoker>> {
    if config.kind.is_stub() {
        Ok(Box::new(StubBackend::new(config.clone())?))
    } else {
        Ok(Box::new(WireBackend::new(config.clone())?))
    }
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model_name: &'a str,
    kind: BackendKind,
    temperature: f64,
    max_output_tokens: u32,
    prompt: &'a str,
}

/// SHA-256 over (model, kind, temperature, max output tokens, prompt text).
pub fn cache_key(config: &BackendConfig, prompt: &RenderedPrompt) -> String {
    let material = KeyMaterial {
        model_name: &config.model_name,
        kind: config.kind,
        temperature: config.temperature,
        max_output_tokens: config.max_output_tokens,
        prompt: &prompt.text,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Serve from the cache when possible, otherwise invoke and persist. Stub
/// backends bypass the cache.
pub fn invoke_cached(invoker: &dyn Invoker, request: &InvokeRequest, cache: Option<&ResponseCache>) -> Result<RawResponse> {
    let config = invoker.config();
    let Some(cache) = cache.filter(|_| !config.kind.is_stub()) else {
        return invoker.invoke(request);
    };
    let key = cache_key(config, &request.prompt);
    if let Some(hit) = cache.get(&key)? {
        return Ok(RawResponse {
            item_id: request.prompt.item_id.clone(),
            template_id: request.prompt.template_id.clone(),
            backend_id: config.backend_id.clone(),
            payload: hit.payload,
            latency_ms: hit.latency_ms,
            from_cache: true,
        });
    }
    let response = invoker.invoke(request)?;
    cache.put(&CachedEntry {
        key,
        payload: response.payload.clone(),
        latency_ms: response.latency_ms,
    })?;
    Ok(response)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt {
            template_id: "t".into(),
            item_id: "i".into(),
            text: text.into(),
            mask_token_used: None,
        }
    }

    fn request(text: &str, gold: Option<&str>) -> InvokeRequest {
        InvokeRequest {
            prompt: prompt(text),
            gold_hint: gold.map(str::to_string),
        }
    }

    #[test]
    fn stubs_answer_deterministically() {
        let echo = StubBackend::new(BackendConfig::stub_echo_gold("echo")).unwrap();
        let r = echo.invoke(&request("x", Some("noun"))).unwrap();
        assert_eq!(r.payload, Payload::Text("noun".into()));
        let constant = StubBackend::new(BackendConfig::stub_constant("c", "false")).unwrap();
        assert_eq!(constant.invoke(&request("y", None)).unwrap().payload, Payload::Text("false".into()));
    }

    #[test]
    fn config_invariants() {
        let mut c = BackendConfig::new("w", BackendKind::Completion);
        assert!(c.validate().unwrap_err().is_config());
        c.endpoint_url = Some("http://localhost:1/v1/completions".into());
        c.validate().unwrap();
        c.family = Some(Family::Masked);
        assert!(c.validate().is_err());
        let mut s = BackendConfig::stub_echo_gold("s");
        s.endpoint_url = Some("http://x".into());
        assert!(s.validate().is_err());
        assert!(BackendConfig::new("k", BackendKind::StubConstant).validate().is_err());
    }

    #[test]
    fn cache_key_tracks_every_field() {
        let base = BackendConfig {
            model_name: "m".into(),
            ..BackendConfig::new("b", BackendKind::Completion)
        };
        let p = prompt("hello");
        assert_eq!(cache_key(&base, &p), cache_key(&base.clone(), &p.clone()));
        let warm = BackendConfig { temperature: 0.7, ..base.clone() };
        assert_ne!(cache_key(&base, &p), cache_key(&warm, &p));
        let longer = BackendConfig { max_output_tokens: 17, ..base.clone() };
        assert_ne!(cache_key(&base, &p), cache_key(&longer, &p));
        let chat = BackendConfig { kind: BackendKind::Chat, ..base.clone() };
        assert_ne!(cache_key(&base, &p), cache_key(&chat, &p));
        let other = BackendConfig { model_name: "n".into(), ..base.clone() };
        assert_ne!(cache_key(&base, &p), cache_key(&other, &p));
        assert_ne!(cache_key(&base, &p), cache_key(&base, &prompt("hello ")));
        // The backend id is not part of the key.
        let renamed = BackendConfig { backend_id: "b2".into(), ..base.clone() };
        assert_eq!(cache_key(&base, &p), cache_key(&renamed, &p));
    }

    #[test]
    fn thousand_distinct_prompts_give_distinct_keys() {
        let c = BackendConfig::new("b", BackendKind::Chat);
        let keys: BTreeSet<String> = (0..1000).map(|i| cache_key(&c, &prompt(&format!("prompt {i}")))).collect();
        assert_eq!(keys.len(), 1000);
    }

    struct Counting {
        config: BackendConfig,
        calls: AtomicUsize,
    }

    impl Invoker for Counting {
        fn config(&self) -> &BackendConfig {
            &self.config
        }
        fn invoke(&self, request: &InvokeRequest) -> Result<RawResponse> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(RawResponse {
                item_id: request.prompt.item_id.clone(),
                template_id: request.prompt.template_id.clone(),
                backend_id: self.config.backend_id.clone(),
                payload: Payload::Text(format!("echo {}", request.prompt.text)),
                latency_ms: 5,
                from_cache: false,
            })
        }
        fn wire_requests(&self) -> usize {
            self.calls.load(Ordering::SeqCst)
        }
    }

    #[test]
    fn second_identical_call_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let inv = Counting {
            config: BackendConfig {
                endpoint_url: Some("http://unused".into()),
                ..BackendConfig::new("fake", BackendKind::Completion)
            },
            calls: AtomicUsize::new(0),
        };
        let cache = ResponseCache::open(dir.path(), "fake").unwrap();
        let first = invoke_cached(&inv, &request("q", None), Some(&cache)).unwrap();
        let second = invoke_cached(&inv, &request("q", None), Some(&cache)).unwrap();
        assert!(!first.from_cache && second.from_cache);
        assert_eq!(first.payload, second.payload);
        assert_eq!(first.latency_ms, second.latency_ms);
        assert_eq!(inv.wire_requests(), 1);

        let fresh_dir = tempfile::tempdir().unwrap();
        let cleared = ResponseCache::open(fresh_dir.path(), "fake").unwrap();
        invoke_cached(&inv, &request("q", None), Some(&cleared)).unwrap();
        assert_eq!(inv.wire_requests(), 2);
    }

    #[test]
    fn stubs_bypass_the_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::open(dir.path(), "echo").unwrap();
        let echo = StubBackend::new(BackendConfig::stub_echo_gold("echo")).unwrap();
        let r = invoke_cached(&echo, &request("x", Some("verb")), Some(&cache)).unwrap();
        assert!(!r.from_cache);
        assert!(cache.is_empty());
    }
}
