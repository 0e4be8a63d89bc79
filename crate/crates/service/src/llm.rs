//! Judge and rewriter backed by a remote chat-completions endpoint.
//!
//! Both are synchronous, as the engine expects, and must be called from a
//! blocking thread (`spawn_blocking`), never from an async task.

use std::sync::Arc;
use std::time::Duration;

use meddm_core::engine::{parse_verdict, render_judge_prompt, Judge, Verdict};
use meddm_core::retrieval::Rewriter;
use meddm_core::DialogueHistory;
use serde_json::{json, Value};
use thiserror::Error;
use tokio::runtime::Handle;
use tokio::sync::Semaphore;

use crate::config::{ConfigError, LlmConfig};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("request failed: {0}")]
    Http(String),
    #[error("endpoint returned status {0}")]
    Status(u16),
    #[error("unexpected reply: {0}")]
    Format(String),
}

pub const REWRITE_PROMPT: &str = "Summarize the following doctor-patient dialogue as one short description of \
the patient's complaint and symptoms. Reply with the description only.\n\n";

#[derive(Debug)]
pub struct LlmClient {
    http: reqwest::Client,
    cfg: LlmConfig,
    token: Option<String>,
    permits: Semaphore,
    handle: Handle,
}

impl LlmClient {
    /// Must be called inside a tokio runtime; that runtime carries the
    /// requests later on.
    pub fn new(cfg: LlmConfig) -> Result<Self, ConfigError> {
        let token = match &cfg.token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ConfigError::Invalid(format!("environment variable `{var}` for the llm token is not set"))
            })?),
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ConfigError::Invalid(format!("cannot build http client: {e}")))?;
        let handle = Handle::try_current()
            .map_err(|_| ConfigError::Invalid("llm client needs a running tokio runtime".into()))?;
        Ok(LlmClient { http, permits: Semaphore::new(cfg.max_in_flight), cfg, token, handle })
    }

    async fn attempt(&self, prompt: &str) -> Result<String, LlmError> {
        let _permit = self.permits.acquire().await.expect("semaphore is never closed");
        let body = json!({
            "model": self.cfg.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.http.post(&self.cfg.endpoint).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.map_err(|e| LlmError::Http(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(LlmError::Status(resp.status().as_u16()));
        }
        let v: Value = resp.json().await.map_err(|e| LlmError::Format(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::Format("no choices[0].message.content".into()))
    }

    /// Sends one prompt, retrying failed attempts.
    pub fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.handle.block_on(async {
            let mut last = None;
            for i in 0..=self.cfg.retries {
                if i > 0 {
                    tokio::time::sleep(Duration::from_millis(100 * u64::from(i))).await;
                }
                match self.attempt(prompt).await {
                    Ok(s) => return Ok(s),
                    Err(e) => {
                        tracing::warn!(attempt = i + 1, error = %e, "llm request failed");
                        last = Some(e);
                    }
                }
            }
            Err(last.expect("at least one attempt"))
        })
    }
}

pub struct LlmJudge(pub Arc<LlmClient>);

impl Judge for LlmJudge {
    fn judge(&self, condition: &str, labels: &[String], complaint: &str, history: &DialogueHistory) -> Verdict {
        let prompt = render_judge_prompt(condition, labels, complaint, history);
        match self.0.complete(&prompt) {
            Ok(reply) => parse_verdict(&reply, labels),
            Err(e) => {
                tracing::warn!(error = %e, "llm judge unavailable, treating as unable");
                Verdict::Unable
            }
        }
    }
}

pub struct LlmRewriter(pub Arc<LlmClient>);

impl Rewriter for LlmRewriter {
    fn rewrite(&self, dialogue: &str) -> Result<String, String> {
        let out = self.0.complete(&format!("{REWRITE_PROMPT}{dialogue}")).map_err(|e| e.to_string())?;
        let out = out.trim();
        if out.is_empty() {
            return Err("empty rewrite".into());
        }
        Ok(out.to_string())
    }
}
