use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DialogueHistory, Role};
use crate::retrieval::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "label", rename_all = "snake_case")]
pub enum Verdict {
    Match(String),
    Unable,
}

/// Decides which branch of a condition the patient's information supports.
pub trait Judge: Send + Sync {
    fn judge(&self, condition: &str, labels: &[String], complaint: &str, history: &DialogueHistory) -> Verdict;
}

const YES: [&str; 7] = ["yes", "yeah", "yep", "y", "true", "是", "有"];
const NO: [&str; 8] = ["no", "nope", "n", "never", "not", "false", "否", "没有"];

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Token match of the latest patient turn against the branch labels.
pub fn keyword_judge(_condition: &str, labels: &[String], complaint: &str, history: &DialogueHistory) -> Verdict {
    let latest = history.last_patient().map_or(complaint, |t| t.text.as_str());
    let tokens = tokenize(latest);
    for label in labels {
        let want = tokenize(label);
        let synonyms: &[&str] = match want.as_slice() {
            [w] if w == "yes" => &YES,
            [w] if w == "no" => &NO,
            _ => &[],
        };
        if contains_run(&tokens, &want) || tokens.iter().any(|t| synonyms.contains(&t.as_str())) {
            return Verdict::Match(label.clone());
        }
    }
    Verdict::Unable
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordJudge;

impl Judge for KeywordJudge {
    fn judge(&self, condition: &str, labels: &[String], complaint: &str, history: &DialogueHistory) -> Verdict {
        keyword_judge(condition, labels, complaint, history)
    }
}

/// Always answers the same way.
#[derive(Debug, Clone)]
pub enum FixedJudge {
    First,
    Unable,
    Label(String),
}

impl FixedJudge {
    pub fn first() -> Self {
        FixedJudge::First
    }

    pub fn unable() -> Self {
        FixedJudge::Unable
    }
}

impl Judge for FixedJudge {
    fn judge(&self, _: &str, labels: &[String], _: &str, _: &DialogueHistory) -> Verdict {
        match self {
            FixedJudge::First => labels.first().cloned().map_or(Verdict::Unable, Verdict::Match),
            FixedJudge::Unable => Verdict::Unable,
            FixedJudge::Label(l) => Verdict::Match(l.clone()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("judge script is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("judge script entry `{0}` has no verdicts")]
    Empty(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptValue {
    One(String),
    Many(Vec<String>),
}

/// Replays verdicts per condition text.
///
/// The n-th patient turn (complaint = 1st) gets the n-th verdict listed for
/// the condition; past the end the last one repeats. Unlisted conditions
/// are `Unable`. In the JSON form `"UNABLE"` stands for [`Verdict::Unable`]
/// and any other string is a label, and `"*"` applies to every condition
/// not listed explicitly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScriptedJudge {
    script: BTreeMap<String, Vec<Verdict>>,
}

impl ScriptedJudge {
    pub fn new(script: BTreeMap<String, Vec<Verdict>>) -> Self {
        ScriptedJudge { script }
    }

    pub fn from_json(raw: &str) -> Result<Self, ScriptError> {
        let parsed: BTreeMap<String, ScriptValue> = serde_json::from_str(raw)?;
        let mut script = BTreeMap::new();
        for (cond, v) in parsed {
            let list = match v {
                ScriptValue::One(s) => vec![s],
                ScriptValue::Many(v) => v,
            };
            if list.is_empty() {
                return Err(ScriptError::Empty(cond));
            }
            let verdicts =
                list.into_iter().map(|s| if s == "UNABLE" { Verdict::Unable } else { Verdict::Match(s) }).collect();
            script.insert(cond, verdicts);
        }
        Ok(ScriptedJudge { script })
    }
}

impl Judge for ScriptedJudge {
    fn judge(&self, condition: &str, _: &[String], _: &str, history: &DialogueHistory) -> Verdict {
        let Some(list) = self.script.get(condition).or_else(|| self.script.get("*")) else {
            return Verdict::Unable;
        };
        let turn = history.patient_turns().count().max(1) - 1;
        list[turn.min(list.len() - 1)].clone()
    }
}

pub const JUDGE_PROMPT_TEMPLATE: &str = "You are assisting a clinician who follows a clinical guidance tree.\n\
Decide whether the patient's information satisfies the condition below.\n\
\n\
Condition: {condition}\n\
Possible answers: {labels}\n\
\n\
Chief complaint: {complaint}\n\
Dialogue so far:\n\
{history}\n\
\n\
Reply with exactly one line: `VERDICT: <answer>` using one of the possible answers, \
or `VERDICT: UNABLE` if the information is insufficient.";

pub fn render_judge_prompt(condition: &str, labels: &[String], complaint: &str, history: &DialogueHistory) -> String {
    let dialogue = history
        .turns()
        .iter()
        .map(|t| match t.role {
            Role::Patient => format!("Patient: {}", t.text),
            Role::System => format!("System: {}", t.text),
        })
        .collect::<Vec<_>>()
        .join("\n");
    JUDGE_PROMPT_TEMPLATE
        .replace("{condition}", condition)
        .replace("{labels}", &labels.join(" | "))
        .replace("{complaint}", complaint)
        .replace("{history}", &dialogue)
}

/// Reads the last `VERDICT:` line of a model reply. Unknown labels and
/// replies without such a line count as `Unable`.
pub fn parse_verdict(reply: &str, labels: &[String]) -> Verdict {
    let Some(value) = reply.lines().rev().find_map(|l| l.trim().trim_matches('`').strip_prefix("VERDICT:")) else {
        return Verdict::Unable;
    };
    let value = value.trim().trim_matches('`').trim();
    if value.eq_ignore_ascii_case("unable") {
        return Verdict::Unable;
    }
    labels
        .iter()
        .find(|l| l.as_str() == value)
        .or_else(|| labels.iter().find(|l| l.to_lowercase() == value.to_lowercase()))
        .map_or(Verdict::Unable, |l| Verdict::Match(l.clone()))
}
