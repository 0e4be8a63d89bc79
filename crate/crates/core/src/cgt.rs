//! Clinical guidance tree (CGT) data model.
//!
//! A tree is stored as a flat list of nodes, each carrying the id of its
//! parent and the label of the edge leading into it. Children are always
//! visited in ascending id order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Per-tree node identifier. Must be positive.
pub type NodeId = u32;

/// Branch label used for edges that carry no label of their own.
pub const DEFAULT_EDGE_LABEL: &str = "next";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Root,
    Condition,
    Action,
}

/// Shape class of a flowchart detection. `Arrow` never becomes a tree node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Process,
    Decision,
    StartEnd,
    Scan,
    Arrow,
}

impl ShapeClass {
    pub fn is_arrow(self) -> bool {
        matches!(self, ShapeClass::Arrow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeKind {
    DifferentialDiagnosis,
    TreatmentSuggestion,
}

impl fmt::Display for TreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeKind::DifferentialDiagnosis => "differential_diagnosis",
            TreeKind::TreatmentSuggestion => "treatment_suggestion",
        })
    }
}

impl std::str::FromStr for TreeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "differential_diagnosis" | "differential" => Ok(TreeKind::DifferentialDiagnosis),
            "treatment_suggestion" | "treatment" => Ok(TreeKind::TreatmentSuggestion),
            other => Err(format!("unknown tree kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CgtNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub text: String,
    pub parent_id: Option<NodeId>,
    pub edge_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape_class: Option<ShapeClass>,
    /// Set on terminal copies created when a flowchart loop is cut.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_reference: bool,
}

impl CgtNode {
    pub fn root(id: NodeId, text: impl Into<String>) -> Self {
        CgtNode {
            id,
            kind: NodeKind::Root,
            text: text.into(),
            parent_id: None,
            edge_label: None,
            shape_class: None,
            is_reference: false,
        }
    }

    pub fn child(
        id: NodeId,
        kind: NodeKind,
        text: impl Into<String>,
        parent_id: NodeId,
        edge_label: impl Into<String>,
    ) -> Self {
        CgtNode {
            id,
            kind,
            text: text.into(),
            parent_id: Some(parent_id),
            edge_label: Some(edge_label.into()),
            shape_class: None,
            is_reference: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cgt {
    pub id: String,
    pub title: String,
    pub kind: TreeKind,
    pub department: String,
    /// Free-form provenance (document name, page, ...).
    #[serde(default)]
    pub source: serde_json::Value,
    pub nodes: Vec<CgtNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    MultiRoot,
    NoRoot,
    DanglingParent,
    Cycle,
    Disconnected,
    LeafNotAction,
    InternalNotCondition,
    DupSiblingLabel,
    EmptyText,
    InvalidText,
    DuplicateId,
    InvalidId,
    RootHasLabel,
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("violation code serializes");
        f.write_str(s.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub node_id: Option<NodeId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CgtError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid tree: {}", summarize(.0))]
    InvalidTree(Vec<Violation>),
}

fn summarize(v: &[Violation]) -> String {
    v.iter()
        .map(|v| match v.node_id {
            Some(id) => format!("{} at node {id}", v.code),
            None => v.code.to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// One step of a root-to-leaf path: the node text plus the label of the edge
/// that led into it (`None` for the root).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PathStep {
    pub text: String,
    pub label: Option<String>,
}

pub type TreePath = Vec<PathStep>;

pub(crate) fn text_is_valid(s: &str) -> bool {
    !s.chars().any(|c| matches!(c, '\n' | '\r' | '\t'))
}

impl Cgt {
    pub fn node(&self, id: NodeId) -> Option<&CgtNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// The first parentless node, if any.
    pub fn root(&self) -> Option<&CgtNode> {
        self.nodes.iter().find(|n| n.parent_id.is_none())
    }

    /// Child ids per parent, ascending.
    pub fn children_map(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut map: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in &self.nodes {
            if let Some(p) = n.parent_id {
                map.entry(p).or_default().push(n.id);
            }
        }
        for v in map.values_mut() {
            v.sort_unstable();
        }
        map
    }

    pub fn children(&self, id: NodeId) -> Vec<&CgtNode> {
        let mut out: Vec<&CgtNode> = self.nodes.iter().filter(|n| n.parent_id == Some(id)).collect();
        out.sort_by_key(|n| n.id);
        out
    }

    pub fn action_texts(&self) -> Vec<String> {
        let mut actions: Vec<&CgtNode> = self.nodes.iter().filter(|n| n.kind == NodeKind::Action).collect();
        actions.sort_by_key(|n| n.id);
        actions.into_iter().map(|n| n.text.clone()).collect()
    }

    /// Longest root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        let children = self.children_map();
        let Some(root) = self.root() else { return 0 };
        let mut best = 0;
        let mut stack = vec![(root.id, 0usize)];
        while let Some((id, d)) = stack.pop() {
            best = best.max(d);
            if let Some(cs) = children.get(&id) {
                stack.extend(cs.iter().map(|&c| (c, d + 1)));
            }
        }
        best
    }

    /// Structural equality ignoring node ids and tree metadata: texts, kinds,
    /// edge labels and the ordered parent/child shape must match.
    pub fn structurally_eq(&self, other: &Cgt) -> bool {
        match (self.canonical_shape(), other.canonical_shape()) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    fn canonical_shape(&self) -> Option<Shape> {
        let children = self.children_map();
        let index: HashMap<NodeId, &CgtNode> = self.nodes.iter().map(|n| (n.id, n)).collect();
        let root = self.root()?;
        fn build(
            id: NodeId,
            index: &HashMap<NodeId, &CgtNode>,
            children: &BTreeMap<NodeId, Vec<NodeId>>,
            budget: &mut usize,
        ) -> Option<Shape> {
            *budget = budget.checked_sub(1)?;
            let n = index.get(&id)?;
            let kids = children
                .get(&id)
                .map(|cs| cs.iter().map(|&c| build(c, index, children, budget)).collect::<Option<Vec<_>>>())
                .unwrap_or(Some(Vec::new()))?;
            Some(Shape { kind: n.kind, text: n.text.clone(), label: n.edge_label.clone(), children: kids })
        }
        let mut budget = self.nodes.len();
        build(root.id, &index, &children, &mut budget)
    }
}

#[derive(Debug, PartialEq)]
struct Shape {
    kind: NodeKind,
    text: String,
    label: Option<String>,
    children: Vec<Shape>,
}

/// Checks every tree invariant and reports all problems found.
pub fn validate_cgt(tree: &Cgt) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |code, node_id, message: String| violations.push(Violation { code, node_id, message });

    let mut seen = BTreeSet::new();
    for n in &tree.nodes {
        if n.id == 0 {
            push(ViolationCode::InvalidId, Some(0), "node ids must be positive".into());
        }
        if !seen.insert(n.id) {
            push(ViolationCode::DuplicateId, Some(n.id), format!("node id {} appears more than once", n.id));
        }
        if n.text.trim().is_empty() {
            push(ViolationCode::EmptyText, Some(n.id), "node text is empty".into());
        } else if !text_is_valid(&n.text) {
            push(ViolationCode::InvalidText, Some(n.id), "node text contains a newline or tab".into());
        }
        match (&n.parent_id, &n.edge_label) {
            (None, Some(_)) => {
                push(ViolationCode::RootHasLabel, Some(n.id), "parentless node carries an edge label".into())
            }
            (Some(_), None) => push(ViolationCode::EmptyText, Some(n.id), "edge label is missing".into()),
            (Some(_), Some(l)) if l.trim().is_empty() => {
                push(ViolationCode::EmptyText, Some(n.id), "edge label is empty".into())
            }
            (Some(_), Some(l)) if !text_is_valid(l) => {
                push(ViolationCode::InvalidText, Some(n.id), "edge label contains a newline or tab".into())
            }
            _ => {}
        }
    }

    let ids: BTreeSet<NodeId> = tree.nodes.iter().map(|n| n.id).collect();
    let parentless: Vec<&CgtNode> = tree.nodes.iter().filter(|n| n.parent_id.is_none()).collect();
    let root = parentless.iter().find(|n| n.kind == NodeKind::Root).or(parentless.first()).copied();
    match root {
        None => push(ViolationCode::NoRoot, None, "no parentless root node".into()),
        Some(r) if r.kind != NodeKind::Root => {
            push(ViolationCode::NoRoot, Some(r.id), format!("parentless node {} is not of kind root", r.id))
        }
        _ => {}
    }
    for n in &tree.nodes {
        let is_primary = root.is_some_and(|r| std::ptr::eq(r, n));
        if is_primary {
            continue;
        }
        if n.parent_id.is_none() {
            push(ViolationCode::MultiRoot, Some(n.id), format!("node {} has no parent", n.id));
        } else if n.kind == NodeKind::Root {
            push(ViolationCode::MultiRoot, Some(n.id), format!("node {} is of kind root but has a parent", n.id));
        }
        if let Some(p) = n.parent_id {
            if !ids.contains(&p) {
                push(ViolationCode::DanglingParent, Some(n.id), format!("parent {p} does not exist"));
            }
        }
    }

    let children = tree.children_map();
    let parent_of: HashMap<NodeId, NodeId> = tree.nodes.iter().filter_map(|n| n.parent_id.map(|p| (n.id, p))).collect();
    let mut reachable = BTreeSet::new();
    if let Some(r) = root {
        let mut stack = vec![r.id];
        while let Some(id) = stack.pop() {
            if reachable.insert(id) {
                if let Some(cs) = children.get(&id) {
                    stack.extend(cs.iter().copied());
                }
            }
        }
    }
    for n in &tree.nodes {
        if reachable.contains(&n.id) || n.parent_id.is_none() {
            continue;
        }
        if n.parent_id.is_some_and(|p| !ids.contains(&p)) {
            continue;
        }
        let mut cur = n.id;
        let mut steps = 0;
        let mut on_cycle = false;
        while let Some(&p) = parent_of.get(&cur) {
            steps += 1;
            if p == n.id {
                on_cycle = true;
                break;
            }
            if steps > tree.nodes.len() {
                break;
            }
            cur = p;
        }
        if on_cycle {
            push(ViolationCode::Cycle, Some(n.id), format!("node {} lies on a parent cycle", n.id));
        } else {
            push(ViolationCode::Disconnected, Some(n.id), format!("node {} is not reachable from the root", n.id));
        }
    }

    for n in &tree.nodes {
        if n.parent_id.is_none() {
            continue;
        }
        let has_children = children.get(&n.id).is_some_and(|c| !c.is_empty());
        if !has_children && n.kind != NodeKind::Action {
            push(ViolationCode::LeafNotAction, Some(n.id), format!("leaf {} is not an action node", n.id));
        }
        if has_children && n.kind != NodeKind::Condition {
            push(
                ViolationCode::InternalNotCondition,
                Some(n.id),
                format!("internal node {} is not a condition node", n.id),
            );
        }
    }

    let mut labels: HashMap<NodeId, BTreeSet<&str>> = HashMap::new();
    let mut sorted: Vec<&CgtNode> = tree.nodes.iter().collect();
    sorted.sort_by_key(|n| n.id);
    for n in sorted {
        if let (Some(p), Some(l)) = (n.parent_id, n.edge_label.as_deref()) {
            if !labels.entry(p).or_default().insert(l) {
                push(ViolationCode::DupSiblingLabel, Some(n.id), format!("label `{l}` is used twice under node {p}"));
            }
        }
    }

    ValidationReport { ok: violations.is_empty(), violations }
}

pub fn ensure_valid(tree: &Cgt) -> Result<(), CgtError> {
    let report = validate_cgt(tree);
    if report.ok {
        Ok(())
    } else {
        Err(CgtError::InvalidTree(report.violations))
    }
}

/// Extracts the subtree rooted at `node_id`; that node becomes the new root.
/// Node ids and tree metadata are kept.
pub fn subtree(tree: &Cgt, node_id: NodeId) -> Result<Cgt, CgtError> {
    let start = tree.node(node_id).ok_or(CgtError::UnknownNode(node_id))?;
    let children = tree.children_map();
    let mut keep = BTreeSet::new();
    let mut stack = vec![start.id];
    while let Some(id) = stack.pop() {
        if keep.insert(id) {
            if let Some(cs) = children.get(&id) {
                stack.extend(cs.iter().copied());
            }
        }
    }
    let nodes = tree
        .nodes
        .iter()
        .filter(|n| keep.contains(&n.id))
        .map(|n| {
            if n.id == node_id {
                CgtNode { kind: NodeKind::Root, parent_id: None, edge_label: None, ..n.clone() }
            } else {
                n.clone()
            }
        })
        .collect();
    Ok(Cgt { nodes, ..tree.clone() })
}

/// Every root-to-leaf path, depth-first with children in ascending id order.
pub fn paths(tree: &Cgt) -> Result<Vec<TreePath>, CgtError> {
    ensure_valid(tree)?;
    let children = tree.children_map();
    let index: HashMap<NodeId, &CgtNode> = tree.nodes.iter().map(|n| (n.id, n)).collect();
    let root = tree.root().expect("validated tree has a root");
    let mut out = Vec::new();
    let mut current = Vec::new();
    walk(root.id, &index, &children, &mut current, &mut out);
    Ok(out)
}

fn walk(
    id: NodeId,
    index: &HashMap<NodeId, &CgtNode>,
    children: &BTreeMap<NodeId, Vec<NodeId>>,
    current: &mut TreePath,
    out: &mut Vec<TreePath>,
) {
    let n = index[&id];
    current.push(PathStep { text: n.text.clone(), label: n.edge_label.clone() });
    match children.get(&id) {
        Some(cs) if !cs.is_empty() => {
            for &c in cs {
                walk(c, index, children, current, out);
            }
        }
        _ => out.push(current.clone()),
    }
    current.pop();
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(nodes: Vec<CgtNode>) -> Cgt {
        Cgt {
            id: "t".into(),
            title: "t".into(),
            kind: TreeKind::DifferentialDiagnosis,
            department: "Internal medicine".into(),
            source: serde_json::Value::Null,
            nodes,
        }
    }

    fn minimal() -> Cgt {
        tree(vec![
            CgtNode::root(1, "dyspnea"),
            CgtNode::child(2, NodeKind::Condition, "fever?", 1, "next"),
            CgtNode::child(3, NodeKind::Action, "flu workup", 2, "yes"),
            CgtNode::child(4, NodeKind::Action, "cardiac workup", 2, "no"),
        ])
    }

    /// root -> 2 -> {3 -> {5, 6}, 4, 7}
    fn seven() -> Cgt {
        tree(vec![
            CgtNode::root(1, "chest pain"),
            CgtNode::child(2, NodeKind::Condition, "radiating?", 1, "next"),
            CgtNode::child(3, NodeKind::Condition, "exertional?", 2, "yes"),
            CgtNode::child(4, NodeKind::Action, "musculoskeletal", 2, "no"),
            CgtNode::child(5, NodeKind::Action, "angina workup", 3, "yes"),
            CgtNode::child(6, NodeKind::Action, "ecg", 3, "no"),
            CgtNode::child(7, NodeKind::Action, "observe", 2, "unclear"),
        ])
    }

    fn codes(t: &Cgt) -> Vec<ViolationCode> {
        validate_cgt(t).violations.into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn minimal_tree_is_valid() {
        let r = validate_cgt(&minimal());
        assert!(r.ok, "{:?}", r.violations);
    }

    #[test]
    fn two_parentless_nodes_are_multi_root() {
        let t = tree(vec![CgtNode::root(1, "a"), CgtNode::root(2, "b")]);
        assert!(codes(&t).contains(&ViolationCode::MultiRoot));
    }

    #[test]
    fn condition_leaf_is_reported() {
        let mut t = minimal();
        t.nodes[3].kind = NodeKind::Condition;
        assert!(codes(&t).contains(&ViolationCode::LeafNotAction));
    }

    #[test]
    fn action_with_children_is_reported() {
        let mut t = minimal();
        t.nodes[1].kind = NodeKind::Action;
        assert!(codes(&t).contains(&ViolationCode::InternalNotCondition));
    }

    #[test]
    fn structural_problems_are_reported() {
        let t = tree(vec![]);
        assert_eq!(codes(&t), vec![ViolationCode::NoRoot]);

        let mut t = minimal();
        t.nodes[2].parent_id = Some(99);
        assert!(codes(&t).contains(&ViolationCode::DanglingParent));

        let mut t = minimal();
        t.nodes.push(CgtNode::child(5, NodeKind::Condition, "loop a", 6, "x"));
        t.nodes.push(CgtNode::child(6, NodeKind::Condition, "loop b", 5, "x"));
        let c = codes(&t);
        assert!(c.contains(&ViolationCode::Cycle), "{c:?}");

        let mut t = minimal();
        t.nodes[3].edge_label = Some("yes".into());
        assert!(codes(&t).contains(&ViolationCode::DupSiblingLabel));

        let mut t = minimal();
        t.nodes[2].text = "  ".into();
        assert!(codes(&t).contains(&ViolationCode::EmptyText));

        let mut t = minimal();
        t.nodes[2].text = "a\tb".into();
        assert!(codes(&t).contains(&ViolationCode::InvalidText));

        let mut t = minimal();
        t.nodes[2].id = 2;
        t.nodes[3].id = 2;
        assert!(codes(&t).contains(&ViolationCode::DuplicateId));
    }

    #[test]
    fn subtree_identity_and_leaf() {
        let t = seven();
        let s = subtree(&t, 1).unwrap();
        assert!(s.structurally_eq(&t));
        assert_eq!(s, t);

        let leaf = subtree(&t, 6).unwrap();
        assert_eq!(leaf.nodes.len(), 1);
        assert_eq!(leaf.nodes[0].kind, NodeKind::Root);
        assert_eq!(leaf.nodes[0].text, "ecg");
        assert!(validate_cgt(&leaf).ok);
    }

    #[test]
    fn subtree_at_depth_two_condition() {
        // descendants of 3 enumerated by hand: {5, 6}
        let s = subtree(&seven(), 3).unwrap();
        let ids: Vec<NodeId> = s.nodes.iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![3, 5, 6]);
        assert!(validate_cgt(&s).ok);
        assert_eq!(subtree(&seven(), 42), Err(CgtError::UnknownNode(42)));
    }

    #[test]
    fn paths_follow_ascending_ids() {
        let p = paths(&seven()).unwrap();
        let leaves: Vec<&str> = p.iter().map(|p| p.last().unwrap().text.as_str()).collect();
        assert_eq!(leaves, vec!["angina workup", "ecg", "musculoskeletal", "observe"]);
        assert_eq!(p[0].len(), 4);
        assert_eq!(p[0][3].label.as_deref(), Some("yes"));

        let single = tree(vec![CgtNode::root(1, "x")]);
        assert_eq!(paths(&single).unwrap().len(), 1);
        assert_eq!(paths(&minimal()).unwrap().len(), 2);

        let bad = tree(vec![CgtNode::root(1, "a"), CgtNode::root(2, "b")]);
        assert!(matches!(paths(&bad), Err(CgtError::InvalidTree(_))));
    }

    #[test]
    fn json_shape() {
        let t = minimal();
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["nodes"][0]["parent_id"], serde_json::Value::Null);
        assert_eq!(v["nodes"][0]["edge_label"], serde_json::Value::Null);
        assert_eq!(v["kind"], "differential_diagnosis");
        assert!(v["nodes"][0].get("is_reference").is_none());
        let back: Cgt = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
