//! Consultation engine: walks a guidance tree with a judge's verdicts and
//! the patient's answers.
//!
//! From the current node the judge picks one outgoing label or gives up.
//! The first give-up at a node produces a follow-up question; a second one,
//! or an "I don't know" answer, ends the session with the node's subtree as
//! a list of hypotheses.

mod judge;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgt::{subtree, Cgt, CgtError, CgtNode, NodeId, NodeKind};
use crate::ieet::{serialize, IeetError};
use crate::kb::Kb;

pub use judge::{
    keyword_judge, parse_verdict, render_judge_prompt, FixedJudge, Judge, KeywordJudge, ScriptError, ScriptedJudge,
    Verdict, JUDGE_PROMPT_TEMPLATE,
};

pub const DEFAULT_TURN_LIMIT: usize = 20;

const DONT_KNOW: [&str; 6] = ["i don't know", "don't know", "dont know", "unsure", "not sure", "不知道"];

/// Whether an answer means the patient cannot tell.
pub fn is_dont_know(text: &str) -> bool {
    let t = text.trim().replace('\u{2019}', "'").to_lowercase();
    let t = t.trim_end_matches(['.', '!', '?', '。', '！', '？']).trim();
    DONT_KNOW.contains(&t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Patient,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DialogueHistory(Vec<Turn>);

impl DialogueHistory {
    pub fn push(&mut self, role: Role, text: impl Into<String>) {
        let index = self.0.len();
        self.0.push(Turn { role, text: text.into(), index });
    }

    pub fn turns(&self) -> &[Turn] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn patient_turns(&self) -> impl Iterator<Item = &Turn> {
        self.0.iter().filter(|t| t.role == Role::Patient)
    }

    pub fn last_patient(&self) -> Option<&Turn> {
        self.0.iter().rev().find(|t| t.role == Role::Patient)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Active,
    AwaitingAnswer,
    Diagnosed,
    Hypothesized,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEntry {
    pub node_id: NodeId,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Moved { node_id: NodeId },
    Ask { node_id: NodeId, question: String },
    Diagnosis { node_id: NodeId, text: String, path: Vec<PathEntry> },
    Hypotheses { node_id: NodeId, ieet: String, candidates: Vec<String> },
}

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error("unknown tree `{0}`")]
    UnknownTree(String),
    #[error("complaint is empty")]
    EmptyComplaint,
    #[error("session is {0:?}; operation not allowed")]
    WrongState(Status),
    #[error("session refers to node {0}, which is not in its tree")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Tree(#[from] CgtError),
    #[error(transparent)]
    Ieet(#[from] IeetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub tree_id: String,
    pub complaint: String,
    pub current: NodeId,
    pub history: DialogueHistory,
    pub path: Vec<PathEntry>,
    pub status: Status,
    pub asked_counts: BTreeMap<NodeId, u32>,
    pub turn_limit: usize,
    /// Every event emitted so far, moves included.
    pub events: Vec<Event>,
}

impl Session {
    /// One JSON object per event, newline terminated.
    pub fn transcript(&self) -> String {
        self.events.iter().map(|e| serde_json::to_string(e).expect("events serialize") + "\n").collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineConfig {
    pub turn_limit: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { turn_limit: DEFAULT_TURN_LIMIT }
    }
}

/// The follow-up question asked when the judge cannot decide.
pub fn ask_question(condition: &str, labels: &[String]) -> String {
    format!(
        "Regarding your condition: {condition} — which applies: {}? If unsure, say 'I don't know'.",
        labels.join("/")
    )
}

struct View<'a> {
    index: HashMap<NodeId, &'a CgtNode>,
    children: BTreeMap<NodeId, Vec<NodeId>>,
}

impl<'a> View<'a> {
    fn new(tree: &'a Cgt) -> Self {
        View { index: tree.nodes.iter().map(|n| (n.id, n)).collect(), children: tree.children_map() }
    }

    fn node(&self, id: NodeId) -> Result<&'a CgtNode, EngineError> {
        self.index.get(&id).copied().ok_or(EngineError::UnknownNode(id))
    }

    fn kids(&self, id: NodeId) -> Vec<&'a CgtNode> {
        self.children.get(&id).map(|cs| cs.iter().map(|c| self.index[c]).collect()).unwrap_or_default()
    }
}

/// Opens a session. Without `tree_id` the best retrieval match for the
/// complaint is used.
pub fn start(
    kb: &Kb,
    session_id: impl Into<String>,
    complaint: &str,
    tree_id: Option<&str>,
    judge: &dyn Judge,
    cfg: &EngineConfig,
) -> Result<(Session, Event), EngineError> {
    if kb.trees().is_empty() {
        return Err(EngineError::EmptyKb);
    }
    if complaint.trim().is_empty() {
        return Err(EngineError::EmptyComplaint);
    }
    let tree = match tree_id {
        Some(id) => kb.get(id).ok_or_else(|| EngineError::UnknownTree(id.to_string()))?,
        None => {
            let best = kb.retrieve(complaint, 1).map_err(|_| EngineError::EmptyKb)?;
            kb.get(&best[0].tree_id).expect("indexed tree exists")
        }
    };
    let (session, event) = start_on(tree, session_id, complaint, judge, cfg)?;
    Ok((session, event))
}

/// Opens a session on a given tree.
pub fn start_on(
    tree: &Cgt,
    session_id: impl Into<String>,
    complaint: &str,
    judge: &dyn Judge,
    cfg: &EngineConfig,
) -> Result<(Session, Event), EngineError> {
    if complaint.trim().is_empty() {
        return Err(EngineError::EmptyComplaint);
    }
    let root = tree.root().ok_or(EngineError::UnknownTree(tree.id.clone()))?;
    let mut history = DialogueHistory::default();
    history.push(Role::Patient, complaint);
    let mut session = Session {
        id: session_id.into(),
        tree_id: tree.id.clone(),
        complaint: complaint.to_string(),
        current: root.id,
        history,
        path: vec![PathEntry { node_id: root.id, label: None }],
        status: Status::Active,
        asked_counts: BTreeMap::new(),
        turn_limit: cfg.turn_limit,
        events: Vec::new(),
    };
    let event = step(&mut session, tree, judge)?;
    Ok((session, event))
}

fn hypotheses(session: &mut Session, tree: &Cgt, status: Status) -> Result<Event, EngineError> {
    let sub = subtree(tree, session.current)?;
    let ieet = serialize(&sub)?.text;
    let candidates = crate::cgt::paths(&sub)?
        .into_iter()
        .filter(|p| p.len() > 1)
        .map(|p| p.last().expect("non-empty path").text.clone())
        .collect();
    session.status = status;
    Ok(Event::Hypotheses { node_id: session.current, ieet, candidates })
}

fn emit(session: &mut Session, event: Event) -> Event {
    session.events.push(event.clone());
    event
}

/// Advances an active session until it asks, diagnoses or gives up.
pub fn step(session: &mut Session, tree: &Cgt, judge: &dyn Judge) -> Result<Event, EngineError> {
    if session.status != Status::Active {
        return Err(EngineError::WrongState(session.status));
    }
    let view = View::new(tree);
    loop {
        let node = view.node(session.current)?;
        if node.kind == NodeKind::Action {
            session.status = Status::Diagnosed;
            let ev = Event::Diagnosis { node_id: node.id, text: node.text.clone(), path: session.path.clone() };
            return Ok(emit(session, ev));
        }
        if session.history.len() > session.turn_limit {
            let ev = hypotheses(session, tree, Status::Exhausted)?;
            return Ok(emit(session, ev));
        }
        let kids = view.kids(node.id);
        let chosen = match kids.as_slice() {
            [] => {
                let ev = hypotheses(session, tree, Status::Exhausted)?;
                return Ok(emit(session, ev));
            }
            [only] if node.kind == NodeKind::Root => Some(*only),
            _ => {
                let labels: Vec<String> = kids.iter().map(|k| k.edge_label.clone().unwrap_or_default()).collect();
                match judge.judge(&node.text, &labels, &session.complaint, &session.history) {
                    Verdict::Match(l) => kids.iter().find(|k| k.edge_label.as_deref() == Some(l.as_str())).copied(),
                    Verdict::Unable => None,
                }
            }
        };
        match chosen {
            Some(child) => {
                session.current = child.id;
                session.path.push(PathEntry { node_id: child.id, label: child.edge_label.clone() });
                emit(session, Event::Moved { node_id: child.id });
            }
            None => {
                let asked = session.asked_counts.entry(node.id).or_insert(0);
                if *asked == 0 {
                    *asked += 1;
                    let labels: Vec<String> = kids.iter().map(|k| k.edge_label.clone().unwrap_or_default()).collect();
                    let question = ask_question(&node.text, &labels);
                    session.history.push(Role::System, question.clone());
                    session.status = Status::AwaitingAnswer;
                    return Ok(emit(session, Event::Ask { node_id: node.id, question }));
                }
                let ev = hypotheses(session, tree, Status::Hypothesized)?;
                return Ok(emit(session, ev));
            }
        }
    }
}

/// Feeds the patient's reply to a pending question.
pub fn answer(session: &mut Session, tree: &Cgt, judge: &dyn Judge, text: &str) -> Result<Event, EngineError> {
    if session.status != Status::AwaitingAnswer {
        return Err(EngineError::WrongState(session.status));
    }
    if is_dont_know(text) {
        let ev = hypotheses(session, tree, Status::Hypothesized)?;
        return Ok(emit(session, ev));
    }
    session.history.push(Role::Patient, text);
    session.status = Status::Active;
    step(session, tree, judge)
}
