//! The If-Elif-Else Tree text format.
//!
//! ```text
//! TREE: dyspnea
//!     IF Have any fever symptom? == yes:
//!         ACTION: flu workup
//!     ELIF Have any fever symptom? == no:
//!         ACTION: cardiac workup
//! ```
//!
//! Every clause body holds exactly one `ACTION:` line or one IF/ELIF group.
//! Under `TREE:` a root whose only child hangs off a `next` edge is written
//! implicitly: the child's content sits directly at depth 1. Any other root
//! is written as a condition on its own text, so `IF <root text> == label:`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgt::{validate_cgt, Cgt, CgtNode, NodeId, NodeKind, TreeKind, Violation, DEFAULT_EDGE_LABEL};

const INDENT: &str = "    ";
const SEP: &str = " == ";
/// Label that a bare `ELSE:` clause stands for.
pub const ELSE_LABEL: &str = "otherwise";

#[derive(Debug, Error, PartialEq)]
pub enum IeetError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("tree is not valid: {0:?}")]
    InvalidTree(Vec<Violation>),
    #[error("node {node_id} cannot be written: {reason}")]
    UnserializableText { node_id: NodeId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IeetDocument {
    pub text: String,
    pub line_count: usize,
    pub tree_id: Option<String>,
}

fn check_text(node_id: NodeId, what: &str, s: &str) -> Result<(), IeetError> {
    let fail = |reason: &str| Err(IeetError::UnserializableText { node_id, reason: format!("{what} {reason}") });
    if s.is_empty() {
        return fail("is empty");
    }
    if s.contains(['\n', '\r', '\t']) {
        return fail("contains a newline or tab");
    }
    if s.trim() != s {
        return fail("has leading or trailing whitespace");
    }
    Ok(())
}

fn check_label(node_id: NodeId, label: &str) -> Result<(), IeetError> {
    check_text(node_id, "edge label", label)?;
    // the separator is found by its last occurrence, so no other may end
    // inside `" == " + label`
    if format!("{SEP}{label}").rfind(SEP) != Some(0) {
        return Err(IeetError::UnserializableText {
            node_id,
            reason: format!("edge label `{label}` would be confused with the `==` separator"),
        });
    }
    Ok(())
}

/// Whether the root's only child is written straight under `TREE:`.
fn implicit_child<'a>(root: &CgtNode, kids: &[&'a CgtNode]) -> Option<&'a CgtNode> {
    match kids {
        [only]
            if only.edge_label.as_deref() == Some(DEFAULT_EDGE_LABEL)
                && (only.kind == NodeKind::Action || only.text != root.text) =>
        {
            Some(only)
        }
        _ => None,
    }
}

pub fn serialize(tree: &Cgt) -> Result<IeetDocument, IeetError> {
    let report = validate_cgt(tree);
    if !report.ok {
        return Err(IeetError::InvalidTree(report.violations));
    }
    let index: BTreeMap<NodeId, &CgtNode> = tree.nodes.iter().map(|n| (n.id, n)).collect();
    for n in &tree.nodes {
        check_text(n.id, "node text", &n.text)?;
        if let Some(l) = &n.edge_label {
            check_label(n.id, l)?;
        }
    }
    let children: BTreeMap<NodeId, Vec<&CgtNode>> =
        tree.children_map().into_iter().map(|(id, cs)| (id, cs.iter().map(|c| index[c]).collect())).collect();
    let kids = |id: NodeId| children.get(&id).map(Vec::as_slice).unwrap_or(&[]);

    enum Item<'a> {
        Line(String),
        // content of a body: an action line or the clause group of a condition
        Content(&'a CgtNode, usize),
        Clauses(&'a CgtNode, usize),
    }
    let root = tree.root().expect("validated tree has a root");
    let mut lines = vec![format!("TREE: {}", root.text)];
    let mut stack = Vec::new();
    match implicit_child(root, kids(root.id)) {
        Some(child) => stack.push(Item::Content(child, 1)),
        None if !kids(root.id).is_empty() => stack.push(Item::Clauses(root, 1)),
        None => {}
    }
    while let Some(item) = stack.pop() {
        match item {
            Item::Line(l) => lines.push(l),
            Item::Content(n, depth) if n.kind == NodeKind::Action => {
                lines.push(format!("{}ACTION: {}", INDENT.repeat(depth), n.text));
            }
            Item::Content(n, depth) | Item::Clauses(n, depth) => {
                let pad = INDENT.repeat(depth);
                let mut batch = Vec::new();
                for (i, c) in kids(n.id).iter().enumerate() {
                    let kw = if i == 0 { "IF" } else { "ELIF" };
                    let label = c.edge_label.as_deref().expect("validated child has a label");
                    batch.push(Item::Line(format!("{pad}{kw} {}{SEP}{label}:", n.text)));
                    batch.push(Item::Content(c, depth + 1));
                }
                stack.extend(batch.into_iter().rev());
            }
        }
    }
    let line_count = lines.len();
    let mut text = lines.join("\n");
    text.push('\n');
    Ok(IeetDocument { text, line_count, tree_id: Some(tree.id.clone()) })
}

#[derive(Debug)]
enum Stmt<'a> {
    Tree(&'a str),
    Action(&'a str),
    If(&'a str, &'a str),
    Elif(&'a str, &'a str),
    Else,
}

fn syntax(line: usize, reason: impl Into<String>) -> IeetError {
    IeetError::Syntax { line, reason: reason.into() }
}

fn nonempty(line: usize, what: &str, s: &str) -> Result<(), IeetError> {
    if s.is_empty() {
        Err(syntax(line, format!("empty {what}")))
    } else if s.trim() != s {
        Err(syntax(line, format!("{what} has surrounding whitespace")))
    } else {
        Ok(())
    }
}

fn parse_clause(no: usize, rest: &str) -> Result<(&str, &str), IeetError> {
    let rest = rest.strip_suffix(':').ok_or_else(|| syntax(no, "clause must end with `:`"))?;
    let at = rest.rfind(SEP).ok_or_else(|| syntax(no, "clause is missing ` == `"))?;
    let (cond, label) = (&rest[..at], &rest[at + SEP.len()..]);
    nonempty(no, "condition text", cond)?;
    nonempty(no, "label", label)?;
    Ok((cond, label))
}

fn lex_line(no: usize, raw: &str) -> Result<(usize, Stmt<'_>), IeetError> {
    if raw.is_empty() {
        return Err(syntax(no, "blank line"));
    }
    if raw.contains(['\t', '\r']) {
        return Err(syntax(no, "tab or carriage return"));
    }
    if raw.ends_with(' ') {
        return Err(syntax(no, "trailing whitespace"));
    }
    let body = raw.trim_start_matches(' ');
    let spaces = raw.len() - body.len();
    if !spaces.is_multiple_of(INDENT.len()) {
        return Err(syntax(no, format!("indent of {spaces} spaces is not a multiple of 4")));
    }
    let depth = spaces / INDENT.len();
    let stmt = if let Some(t) = body.strip_prefix("TREE: ") {
        nonempty(no, "text", t)?;
        Stmt::Tree(t)
    } else if let Some(t) = body.strip_prefix("ACTION: ") {
        nonempty(no, "text", t)?;
        Stmt::Action(t)
    } else if let Some(rest) = body.strip_prefix("IF ") {
        let (c, l) = parse_clause(no, rest)?;
        Stmt::If(c, l)
    } else if let Some(rest) = body.strip_prefix("ELIF ") {
        let (c, l) = parse_clause(no, rest)?;
        Stmt::Elif(c, l)
    } else if body == "ELSE:" {
        Stmt::Else
    } else if body.starts_with("ELSE") {
        return Err(syntax(no, "ELSE takes no condition and must be written `ELSE:`"));
    } else {
        let kw = body.split([' ', ':']).next().unwrap_or("");
        return Err(syntax(no, format!("unknown keyword `{kw}`")));
    };
    Ok((depth, stmt))
}

enum Content {
    Empty,
    Action,
    Group { node: NodeId, text: String, labels: BTreeSet<String> },
}

struct Body {
    depth: usize,
    owner: NodeId,
    /// Label of the edge into this body's node; `None` for the root body.
    label: Option<String>,
    opened_at: usize,
    content: Content,
}

/// Parses an IEET document. Node ids are assigned in pre-order from 1 and
/// the title is the root text.
pub fn parse(doc: &str) -> Result<Cgt, IeetError> {
    let doc = doc.strip_suffix('\n').unwrap_or(doc);
    let mut lines = doc.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    let (first_no, first) = lines.next().expect("split yields at least one item");
    let root_text = match lex_line(first_no, first)? {
        (0, Stmt::Tree(t)) => t,
        _ => return Err(syntax(first_no, "first line must be `TREE: <text>` without indent")),
    };
    let mut nodes = vec![CgtNode::root(1, root_text)];
    let mut stack = vec![Body { depth: 1, owner: 1, label: None, opened_at: first_no, content: Content::Empty }];

    fn close(body: Body) -> Result<(), IeetError> {
        match (&body.content, &body.label) {
            (Content::Empty, Some(_)) => Err(syntax(body.opened_at, "clause has no body")),
            _ => Ok(()),
        }
    }

    for (no, raw) in lines {
        let (depth, stmt) = lex_line(no, raw)?;
        while stack.last().is_some_and(|b| b.depth > depth) {
            close(stack.pop().expect("checked non-empty"))?;
        }
        let body = match stack.last_mut() {
            Some(b) if b.depth == depth => b,
            _ => return Err(syntax(no, "unexpected indentation")),
        };
        let add_clause = |body: &mut Body, cond: &str, label: &str| -> Result<Body, IeetError> {
            let Content::Group { node, text, labels } = &mut body.content else { unreachable!() };
            if cond != text {
                return Err(syntax(no, format!("ELIF condition `{cond}` does not match `{text}`")));
            }
            if !labels.insert(label.to_string()) {
                return Err(syntax(no, format!("duplicate label `{label}` under one condition")));
            }
            Ok(Body {
                depth: depth + 1,
                owner: *node,
                label: Some(label.to_string()),
                opened_at: no,
                content: Content::Empty,
            })
        };
        let next = match stmt {
            Stmt::Tree(_) => return Err(syntax(no, "`TREE:` may only appear on the first line")),
            Stmt::Action(t) => {
                if !matches!(body.content, Content::Empty) {
                    return Err(syntax(no, "a body holds a single ACTION or a single IF group"));
                }
                let id = nodes.len() as NodeId + 1;
                let label = body.label.clone().unwrap_or_else(|| DEFAULT_EDGE_LABEL.to_string());
                nodes.push(CgtNode::child(id, NodeKind::Action, t, body.owner, label));
                body.content = Content::Action;
                None
            }
            Stmt::If(cond, label) => {
                if !matches!(body.content, Content::Empty) {
                    return Err(syntax(no, "a body holds a single ACTION or a single IF group"));
                }
                let node = if body.label.is_none() && cond == root_text {
                    1
                } else {
                    let id = nodes.len() as NodeId + 1;
                    let edge = body.label.clone().unwrap_or_else(|| DEFAULT_EDGE_LABEL.to_string());
                    nodes.push(CgtNode::child(id, NodeKind::Condition, cond, body.owner, edge));
                    id
                };
                body.content = Content::Group { node, text: cond.to_string(), labels: BTreeSet::new() };
                Some(add_clause(body, cond, label)?)
            }
            Stmt::Elif(cond, label) => {
                if !matches!(body.content, Content::Group { .. }) {
                    return Err(syntax(no, "ELIF without a preceding IF at the same indent"));
                }
                Some(add_clause(body, cond, label)?)
            }
            Stmt::Else => {
                let Content::Group { text, .. } = &body.content else {
                    return Err(syntax(no, "ELSE without a preceding IF at the same indent"));
                };
                let cond = text.clone();
                Some(add_clause(body, &cond, ELSE_LABEL)?)
            }
        };
        stack.extend(next);
    }
    while let Some(b) = stack.pop() {
        close(b)?;
    }

    let tree = Cgt {
        id: String::new(),
        title: root_text.to_string(),
        kind: TreeKind::DifferentialDiagnosis,
        department: String::new(),
        source: serde_json::Value::Null,
        nodes,
    };
    let report = validate_cgt(&tree);
    if !report.ok {
        return Err(IeetError::InvalidTree(report.violations));
    }
    Ok(tree)
}
