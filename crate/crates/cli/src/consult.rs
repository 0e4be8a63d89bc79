use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use meddm_core::engine::{self, EngineConfig, EngineError, KeywordJudge, ScriptedJudge};
use meddm_core::{Cgt, Event, Judge, Kb, Status};
use meddm_service::llm::{LlmClient, LlmJudge};
use meddm_service::ServiceConfig;

use crate::{io_err, Failure, Res};

pub struct Options {
    pub tree: Option<String>,
    pub judge: String,
    pub config: Option<PathBuf>,
    pub complaint: Option<String>,
    pub turn_limit: usize,
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

/// The judge plus whatever runtime it needs kept alive.
fn build_judge(opts: &Options) -> Res<(Box<dyn Judge>, Option<tokio::runtime::Runtime>)> {
    if opts.judge == "keyword" {
        return Ok((Box::new(KeywordJudge), None));
    }
    if let Some(file) = opts.judge.strip_prefix("scripted:") {
        let raw = std::fs::read_to_string(file).with_context(|| format!("reading {file}")).map_err(config_err)?;
        let j = ScriptedJudge::from_json(&raw).with_context(|| format!("judge script {file}")).map_err(config_err)?;
        return Ok((Box::new(j), None));
    }
    if opts.judge == "llm" {
        let path = opts.config.as_ref().ok_or_else(|| config_err(anyhow!("--judge llm needs --config")))?;
        let cfg = ServiceConfig::load(path).map_err(config_err)?;
        let llm = cfg.llm.ok_or_else(|| config_err(anyhow!("{} has no llm section", path.display())))?;
        let rt = tokio::runtime::Runtime::new().context("starting runtime").map_err(io_err)?;
        let client = {
            let _guard = rt.enter();
            LlmClient::new(llm).map_err(config_err)?
        };
        return Ok((Box::new(LlmJudge(Arc::new(client))), Some(rt)));
    }
    Err(config_err(anyhow!("unknown judge `{}`; use keyword, scripted:<file> or llm", opts.judge)))
}

fn show(out: &mut dyn Write, tree: &Cgt, ev: &Event) -> std::io::Result<()> {
    match ev {
        Event::Moved { .. } => Ok(()),
        Event::Ask { question, .. } => writeln!(out, "System: {question}"),
        Event::Diagnosis { text, path, .. } => {
            writeln!(out, "Diagnosis: {text}")?;
            let steps: Vec<String> = path
                .iter()
                .map(|p| {
                    let text = tree.node(p.node_id).map_or("?", |n| n.text.as_str());
                    match &p.label {
                        Some(l) => format!("--{l}--> {text}"),
                        None => text.to_string(),
                    }
                })
                .collect();
            writeln!(out, "Path: {}", steps.join(" "))
        }
        Event::Hypotheses { candidates, ieet, .. } => {
            writeln!(out, "Possible diagnoses:")?;
            for c in candidates {
                writeln!(out, "  - {c}")?;
            }
            writeln!(out, "Remaining guidance:")?;
            write!(out, "{ieet}")
        }
    }
}

fn read_line(input: &mut dyn BufRead) -> Res<Option<String>> {
    let mut line = String::new();
    let n = input.read_line(&mut line).context("reading input").map_err(io_err)?;
    Ok((n > 0).then(|| line.trim_end_matches(['\n', '\r']).to_string()))
}

pub fn run(kb: &Kb, opts: &Options, input: &mut dyn BufRead, out: &mut dyn Write) -> Res {
    let (judge, _rt) = build_judge(opts)?;
    let w = |r: std::io::Result<()>| r.context("writing output").map_err(io_err);
    let complaint = match &opts.complaint {
        Some(c) => c.clone(),
        None => {
            w(write!(out, "Complaint: ").and_then(|_| out.flush()))?;
            read_line(input)?.ok_or_else(|| crate::invalid("no complaint given"))?
        }
    };
    let cfg = EngineConfig { turn_limit: opts.turn_limit };
    let (mut session, ev) = engine::start(kb, "terminal", &complaint, opts.tree.as_deref(), judge.as_ref(), &cfg)
        .map_err(|e| match e {
            EngineError::UnknownTree(_) | EngineError::EmptyComplaint => Failure::Validation(e.into()),
            other => io_err(other),
        })?;
    let tree = kb.get(&session.tree_id).expect("session tree is in the kb");
    w(writeln!(out, "Guidance tree: {} ({})", tree.title, tree.id))?;
    w(show(out, tree, &ev))?;
    while session.status == Status::AwaitingAnswer {
        w(write!(out, "> ").and_then(|_| out.flush()))?;
        let Some(reply) = read_line(input)? else {
            w(writeln!(out))?;
            return Ok(());
        };
        let ev = engine::answer(&mut session, tree, judge.as_ref(), &reply).map_err(io_err)?;
        w(show(out, tree, &ev))?;
    }
    Ok(())
}
