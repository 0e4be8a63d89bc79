//! HTTP service over a guidance-tree knowledge base: tree listing,
//! retrieval and multi-turn consultation sessions.

pub mod api;
pub mod config;
pub mod error;
pub mod llm;
pub mod store;

use std::fs::OpenOptions;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use meddm_core::engine::{EngineConfig, KeywordJudge, ScriptedJudge};
use meddm_core::kb::KbError;
use meddm_core::retrieval::Rewriter;
use meddm_core::{Judge, Kb};
use thiserror::Error;

pub use api::{router, AppState};
pub use config::{ConfigError, JudgeKind, LlmConfig, ServiceConfig};
pub use error::ApiError;
pub use store::{IdSource, SessionStore};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

impl AppState {
    /// An in-memory state with the given judge and no log.
    pub fn new(kb: Kb, judge: Arc<dyn Judge>, engine: EngineConfig, ttl: Duration, ids: IdSource) -> Self {
        AppState { kb: Arc::new(kb), judge, rewriter: None, store: SessionStore::new(ttl, ids), engine, log: None }
    }

    /// Loads the kb and builds the judge a config asks for. An llm judge
    /// needs to be built inside a tokio runtime.
    pub fn from_config(cfg: &ServiceConfig) -> Result<Self, StartupError> {
        cfg.validate()?;
        let kb = Kb::load_dir(&cfg.kb_dir)?;
        let mut rewriter: Option<Arc<dyn Rewriter>> = None;
        let judge: Arc<dyn Judge> = match cfg.judge {
            JudgeKind::Keyword => Arc::new(KeywordJudge),
            JudgeKind::Scripted => {
                let path = cfg.judge_script.as_ref().expect("validated");
                let raw = std::fs::read_to_string(path)
                    .map_err(|source| StartupError::Io { context: format!("reading {}", path.display()), source })?;
                Arc::new(
                    ScriptedJudge::from_json(&raw)
                        .map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?,
                )
            }
            JudgeKind::Llm => {
                let llm = cfg.llm.clone().expect("validated");
                let rewrite = llm.rewrite_dialogue;
                let client = Arc::new(llm::LlmClient::new(llm)?);
                if rewrite {
                    rewriter = Some(Arc::new(llm::LlmRewriter(client.clone())));
                }
                Arc::new(llm::LlmJudge(client))
            }
        };
        let log =
            match &cfg.transcript_log {
                Some(path) => {
                    Some(Mutex::new(OpenOptions::new().create(true).append(true).open(path).map_err(|source| {
                        StartupError::Io { context: format!("opening {}", path.display()), source }
                    })?))
                }
                None => None,
            };
        let mut state = AppState::new(
            kb,
            judge,
            EngineConfig { turn_limit: cfg.turn_limit },
            Duration::from_secs(cfg.session_ttl_secs),
            IdSource::Os,
        );
        state.rewriter = rewriter;
        state.log = log;
        Ok(state)
    }
}

/// Serves until the process is stopped.
pub async fn serve(cfg: &ServiceConfig) -> Result<(), StartupError> {
    let state = Arc::new(AppState::from_config(cfg)?);
    let listener = tokio::net::TcpListener::bind(&cfg.bind)
        .await
        .map_err(|source| StartupError::Io { context: format!("binding {}", cfg.bind), source })?;
    tracing::info!(addr = %cfg.bind, trees = state.kb.trees().len(), "serving");

    let sweeper = state.clone();
    let every = sweeper.store.ttl().min(Duration::from_secs(60));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(every);
        loop {
            tick.tick().await;
            let n = sweeper.store.evict_expired();
            if n > 0 {
                tracing::debug!(evicted = n, "expired sessions dropped");
            }
        }
    });

    axum::serve(listener, router(state)).await.map_err(|source| StartupError::Io { context: "serving".into(), source })
}
