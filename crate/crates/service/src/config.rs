use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config is not valid: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeKind {
    Scripted,
    #[default]
    Keyword,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmConfig {
    /// Chat-completions style endpoint.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Also rewrite the dialogue before retrieval.
    #[serde(default)]
    pub rewrite_dialogue: bool,
}

fn default_timeout() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

fn default_in_flight() -> usize {
    8
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_turn_limit() -> usize {
    meddm_core::engine::DEFAULT_TURN_LIMIT
}

fn default_ttl() -> u64 {
    3600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub kb_dir: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub judge: JudgeKind,
    /// Verdict script, used with the scripted judge.
    #[serde(default)]
    pub judge_script: Option<PathBuf>,
    #[serde(default)]
    pub llm: Option<LlmConfig>,
    #[serde(default = "default_turn_limit")]
    pub turn_limit: usize,
    #[serde(default = "default_ttl")]
    pub session_ttl_secs: u64,
    /// Append-only event log, one JSON object per line.
    #[serde(default)]
    pub transcript_log: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn new(kb_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            kb_dir: kb_dir.into(),
            bind: default_bind(),
            judge: JudgeKind::Keyword,
            judge_script: None,
            llm: None,
            turn_limit: default_turn_limit(),
            session_ttl_secs: default_ttl(),
            transcript_log: None,
        }
    }

    pub fn from_json(raw: &str) -> Result<Self, ConfigError> {
        let cfg: ServiceConfig = serde_json::from_str(raw)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative paths in the file are taken relative to the file itself.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg = Self::from_json(&raw)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.kb_dir);
        if let Some(p) = cfg.judge_script.as_mut() {
            fix(p);
        }
        if let Some(p) = cfg.transcript_log.as_mut() {
            fix(p);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.into()));
        match (self.judge, &self.llm) {
            (JudgeKind::Llm, None) => return bad("judge `llm` requires an `llm` section"),
            (JudgeKind::Scripted | JudgeKind::Keyword, Some(_)) => {
                return bad("an `llm` section is only allowed with judge `llm`")
            }
            _ => {}
        }
        match (self.judge, &self.judge_script) {
            (JudgeKind::Scripted, None) => return bad("judge `scripted` requires `judge_script`"),
            (JudgeKind::Keyword | JudgeKind::Llm, Some(_)) => {
                return bad("`judge_script` is only allowed with judge `scripted`")
            }
            _ => {}
        }
        if let Some(llm) = &self.llm {
            if llm.endpoint.trim().is_empty() || llm.model.trim().is_empty() {
                return bad("llm endpoint and model must be non-empty");
            }
            if llm.timeout_secs == 0 {
                return bad("llm timeout_secs must be positive");
            }
            if llm.max_in_flight == 0 {
                return bad("llm max_in_flight must be positive");
            }
        }
        if self.session_ttl_secs == 0 {
            return bad("session_ttl_secs must be positive");
        }
        Ok(())
    }
}
