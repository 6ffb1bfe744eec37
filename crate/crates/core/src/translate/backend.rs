use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything a backend may need for one completion. Mock backends look at
/// `source_text` directly instead of parsing the prompt.
#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub source_text: &'a str,
    pub max_tokens: u32,
    pub temperature: f32,
    /// Per-request seed; deterministic backends may use it to pick output.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Response(String),
    #[error("{0}")]
    Other(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) | BackendError::Other(_) => true,
            BackendError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            BackendError::Response(_) => false,
        }
    }
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(req)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (**self).complete(req)
    }
}

/// Returns the source text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoBackend;

impl CompletionBackend for EchoBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(req.source_text.to_string())
    }
}

/// ROT13 over ASCII letters: a reversible stand-in for a language change.
#[derive(Debug, Clone, Copy, Default)]
pub struct CipherBackend;

impl CipherBackend {
    pub fn encode(text: &str) -> String {
        text.chars()
            .map(|c| match c {
                'a'..='z' => (((c as u8 - b'a') + 13) % 26 + b'a') as char,
                'A'..='Z' => (((c as u8 - b'A') + 13) % 26 + b'A') as char,
                _ => c,
            })
            .collect()
    }

    /// ROT13 is its own inverse.
    pub fn decode(text: &str) -> String {
        Self::encode(text)
    }
}

impl CompletionBackend for CipherBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(Self::encode(req.source_text))
    }
}

/// Picks `outputs[seed % len]`; deterministic under any request order.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    outputs: Vec<String>,
}

impl ScriptedBackend {
    pub fn new<I, S>(outputs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let outputs: Vec<String> = outputs.into_iter().map(Into::into).collect();
        assert!(!outputs.is_empty(), "scripted backend needs at least one output");
        Self { outputs }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        Ok(self.outputs[(req.seed % self.outputs.len() as u64) as usize].clone())
    }
}

/// Backend from a closure; handy for fault injection.
pub struct FnBackend<F>(pub F);

impl<F> CompletionBackend for FnBackend<F>
where
    F: Fn(&CompletionRequest<'_>) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        (self.0)(req)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Full URL of the completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Dotted path to the generated text in the response, e.g. `choices.0.text`.
    pub response_path: String,
    pub timeout_secs: u64,
    /// Name of an environment variable holding a bearer token, if any.
    pub api_key_env: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/completions".into(),
            model: String::new(),
            response_path: "choices.0.text".into(),
            timeout_secs: 120,
            api_key_env: None,
        }
    }
}

/// OpenAI-compatible `/v1/completions` client.
pub struct HttpBackend {
    agent: ureq::Agent,
    config: HttpConfig,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = config.api_key_env.as_deref().and_then(|v| std::env::var(v).ok());
        Self { agent, config, api_key }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = request.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Status { status, body });
        }
        let json: Value = resp.body_mut().read_json().map_err(|e| BackendError::Response(e.to_string()))?;
        extract_text(&json, &self.config.response_path)
    }
}

/// Follows a dotted path (`choices.0.text`) to a string.
pub fn extract_text(json: &Value, path: &str) -> Result<String, BackendError> {
    let mut cur = json;
    for key in path.split('.').filter(|k| !k.is_empty()) {
        let next = match key.parse::<usize>() {
            Ok(i) => cur.get(i),
            Err(_) => cur.get(key),
        };
        cur = next.ok_or_else(|| BackendError::Response(format!("no `{key}` in path `{path}`")))?;
    }
    cur.as_str().map(str::to_string).ok_or_else(|| BackendError::Response(format!("`{path}` is not a string")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff_ms: 1000, multiplier: 2.0 }
    }
}

impl RetryPolicy {
    pub fn no_backoff(attempts: u32) -> Self {
        Self { attempts, initial_backoff_ms: 0, multiplier: 1.0 }
    }

    /// Calls `backend` up to `attempts` times, sleeping between retryable
    /// failures. Returns the last error.
    pub fn call(&self, backend: &dyn CompletionBackend, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut backoff = self.initial_backoff_ms as f64;
        let mut attempt = 1;
        loop {
            match backend.complete(req) {
                Ok(text) => return Ok(text),
                Err(e) if attempt >= self.attempts.max(1) || !e.is_retryable() => return Err(e),
                Err(e) => {
                    log::debug!("attempt {attempt} failed: {e}; retrying in {backoff:.0} ms");
                    thread::sleep(Duration::from_millis(backoff as u64));
                    backoff *= self.multiplier;
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicU32, Ordering};

    use super::*;

    fn req(text: &str) -> CompletionRequest<'_> {
        CompletionRequest { prompt: text, source_text: text, max_tokens: 10, temperature: 0.0, seed: 0 }
    }

    #[test]
    fn cipher_round_trips() {
        let s = "Hello, Wörld! 123";
        let enc = CipherBackend.complete(&req(s)).unwrap();
        assert_ne!(enc, s);
        assert_eq!(CipherBackend::decode(&enc), s);
    }

    #[test]
    fn retry_stops_after_attempts() {
        let calls = AtomicU32::new(0);
        let b = FnBackend(|_: &CompletionRequest<'_>| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Transport("down".into()))
        });
        let err = RetryPolicy::no_backoff(3).call(&b, &req("x")).unwrap_err();
        assert_eq!(err, BackendError::Transport("down".into()));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn retry_recovers_and_skips_permanent_errors() {
        let calls = AtomicU32::new(0);
        let flaky = FnBackend(|_: &CompletionRequest<'_>| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(BackendError::Status { status: 503, body: String::new() })
            } else {
                Ok("ok".into())
            }
        });
        assert_eq!(RetryPolicy::no_backoff(3).call(&flaky, &req("x")).unwrap(), "ok");

        let calls = AtomicU32::new(0);
        let bad = FnBackend(|_: &CompletionRequest<'_>| {
            calls.fetch_add(1, Ordering::SeqCst);
            Err(BackendError::Status { status: 400, body: String::new() })
        });
        assert!(RetryPolicy::no_backoff(3).call(&bad, &req("x")).is_err());
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn json_path_extraction() {
        let v: Value = serde_json::json!({"choices": [{"text": "bonjour"}]});
        assert_eq!(extract_text(&v, "choices.0.text").unwrap(), "bonjour");
        assert!(extract_text(&v, "choices.1.text").is_err());
        assert!(extract_text(&v, "choices").is_err());
    }
}
