use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use reqwest::blocking::Client;
use serde_json::{json, Value};

use super::{BackendConfig, BackendKind, InvokeRequest, Invoker, Payload, RankedToken, RawResponse};
use crate::error::{Error, Result};

const BODY_LIMIT: usize = 512;
const MAX_BACKOFF: Duration = Duration::from_secs(30);

struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        let capacity = rate.max(1.0);
        TokenBucket {
            rate,
            capacity,
            tokens: capacity,
            last: Instant::now(),
        }
    }

    /// Time to wait before a token is available; takes it when zero.
    fn take(&mut self) -> Duration {
        let now = Instant::now();
        self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.rate).min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - self.tokens) / self.rate)
        }
    }
}

enum Attempt {
    Done(Payload),
    Retry(Error),
    Fail(Error),
}

fn truncate(body: &str) -> String {
    if body.len() <= BODY_LIMIT {
        return body.to_string();
    }
    let mut end = BODY_LIMIT;
    while !body.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &body[..end])
}

/// OpenAI-compatible completion/chat client, or the fill-mask JSON shape.
pub struct WireBackend {
    config: BackendConfig,
    client: Client,
    api_key: Option<String>,
    requests: AtomicUsize,
    bucket: Option<Mutex<TokenBucket>>,
}

impl WireBackend {
    pub fn new(config: BackendConfig) -> Result<Self> {
        config.validate()?;
        if config.kind.is_stub() {
            return Err(Error::Config(format!("backend `{}` is a stub", config.backend_id)));
        }
        let client = Client::builder()
            .timeout(config.request_timeout())
            .build()
            .map_err(|e| Error::Config(format!("cannot build HTTP client: {e}")))?;
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        let bucket = config.requests_per_second.map(|r| Mutex::new(TokenBucket::new(r)));
        Ok(WireBackend {
            config,
            client,
            api_key,
            requests: AtomicUsize::new(0),
            bucket,
        })
    }

    fn body(&self, prompt: &str) -> Value {
        let c = &self.config;
        match c.kind {
            BackendKind::Completion => json!({
                "model": c.model_name,
                "prompt": prompt,
                "temperature": c.temperature,
                "max_tokens": c.max_output_tokens,
            }),
            BackendKind::Chat => json!({
                "model": c.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": c.temperature,
                "max_tokens": c.max_output_tokens,
            }),
            _ => json!({
                "model": c.model_name,
                "inputs": prompt,
                "mask_token": c.mask_token,
                "top_k": c.top_k,
            }),
        }
    }

    fn throttle(&self) {
        let Some(bucket) = &self.bucket else { return };
        loop {
            let wait = bucket.lock().expect("rate limiter lock").take();
            if wait.is_zero() {
                return;
            }
            thread::sleep(wait);
        }
    }

    fn attempt(&self, body: &Value) -> Attempt {
        self.throttle();
        self.requests.fetch_add(1, Ordering::SeqCst);
        let url = self.config.endpoint_url.as_deref().expect("validated");
        log::debug!("POST {url} {body}");
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = match req.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout { attempts: 0 }),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        let status = resp.status();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout { attempts: 0 }),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        log::debug!("{url} -> {status} {}", truncate(&text));
        if !status.is_success() {
            let err = Error::Backend {
                status: status.as_u16(),
                body: truncate(&text),
            };
            return if status.as_u16() == 429 || status.is_server_error() {
                Attempt::Retry(err)
            } else {
                Attempt::Fail(err)
            };
        }
        match self.parse(&text) {
            Ok(p) => Attempt::Done(p),
            Err(e) => Attempt::Fail(e),
        }
    }

    fn parse(&self, text: &str) -> Result<Payload> {
        let v: Value = serde_json::from_str(text)
            .map_err(|e| Error::Transport(format!("response is not JSON ({e}): {}", truncate(text))))?;
        let shape = |what: &str| Error::Transport(format!("response lacks {what}: {}", truncate(text)));
        match self.config.kind {
            BackendKind::Completion => v["choices"][0]["text"]
                .as_str()
                .map(|s| Payload::Text(s.to_string()))
                .ok_or_else(|| shape("choices[0].text")),
            BackendKind::Chat => v["choices"][0]["message"]["content"]
                .as_str()
                .map(|s| Payload::Text(s.to_string()))
                .ok_or_else(|| shape("choices[0].message.content")),
            _ => {
                let list = v.as_array().or_else(|| v["predictions"].as_array()).ok_or_else(|| shape("a prediction list"))?;
                let mut tokens: Vec<RankedToken> = list
                    .iter()
                    .filter_map(|p| {
                        let token = p["token_str"].as_str().or_else(|| p["token"].as_str())?;
                        Some(RankedToken {
                            token: token.to_string(),
                            score: p["score"].as_f64()?,
                        })
                    })
                    .collect();
                if tokens.is_empty() {
                    return Err(shape("ranked tokens"));
                }
                tokens.sort_by(|a, b| b.score.total_cmp(&a.score));
                Ok(Payload::Ranked(tokens))
            }
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = Duration::from_millis(self.config.retry_base_delay_ms);
        base.saturating_mul(1u32 << attempt.min(16)).min(MAX_BACKOFF)
    }
}

impl Invoker for WireBackend {
    fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn invoke(&self, request: &InvokeRequest) -> Result<RawResponse> {
        let body = self.body(&request.prompt.text);
        let attempts = self.config.max_retries + 1;
        let start = Instant::now();
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff(attempt - 1));
            }
            match self.attempt(&body) {
                Attempt::Done(payload) => {
                    return Ok(RawResponse {
                        item_id: request.prompt.item_id.clone(),
                        template_id: request.prompt.template_id.clone(),
                        backend_id: self.config.backend_id.clone(),
                        payload,
                        latency_ms: start.elapsed().as_millis() as u64,
                        from_cache: false,
                    })
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!("{}: attempt {} of {attempts} failed: {e}", self.config.backend_id, attempt + 1);
                    last = Some(e);
                }
            }
        }
        Err(match last {
            Some(Error::Timeout { .. }) => Error::Timeout {
                attempts: attempts as usize,
            },
            Some(e) => e,
            None => Error::Transport("no attempts made".into()),
        })
    }

    fn wire_requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_refills_at_rate() {
        let mut b = TokenBucket::new(2.0);
        assert!(b.take().is_zero());
        assert!(b.take().is_zero());
        let wait = b.take();
        assert!(wait > Duration::from_millis(100) && wait <= Duration::from_millis(500), "{wait:?}");
    }

    #[test]
    fn bodies_follow_the_wire_shapes() {
        let mut c = BackendConfig::new("w", BackendKind::Chat);
        c.endpoint_url = Some("http://127.0.0.1:9/v1/chat/completions".into());
        c.model_name = "m".into();
        let w = WireBackend::new(c.clone()).unwrap();
        assert_eq!(w.body("hi")["messages"][0]["content"], "hi");
        assert_eq!(w.body("hi")["temperature"], 0.0);
        c.kind = BackendKind::FillMask;
        let w = WireBackend::new(c).unwrap();
        assert_eq!(w.body("a [MASK]")["top_k"], 10);
        let ranked = w.parse(r#"[{"token_str":"true","score":0.3},{"token_str":"false","score":0.6}]"#).unwrap();
        assert_eq!(
            ranked,
            Payload::Ranked(vec![
                RankedToken { token: "false".into(), score: 0.6 },
                RankedToken { token: "true".into(), score: 0.3 },
            ])
        );
        assert!(w.parse("[]").is_err());
    }

    #[test]
    fn long_bodies_are_truncated_on_char_boundaries() {
        let body = "é".repeat(400);
        let t = truncate(&body);
        assert!(t.len() <= BODY_LIMIT + 3 && t.ends_with("..."));
    }
}
