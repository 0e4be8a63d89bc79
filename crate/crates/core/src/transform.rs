//! Normalization of a reconstructed flow graph into a clinical guidance tree.
//!
//! The pipeline is fixed: branch-label nodes are folded into edge labels,
//! loops are cut, nodes with several parents are replicated, and the
//! resulting tree is classified into root, condition and action nodes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgt::{validate_cgt, Cgt, CgtNode, NodeId, NodeKind, TreeKind, Violation, DEFAULT_EDGE_LABEL};
use crate::flowgraph::{FlowEdge, FlowGraph, FlowNode, FlowNodeId, FlowgraphError};

pub const DEFAULT_MAX_NODES: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("input graph has a cycle")]
    CyclicInput,
    #[error("output would exceed {limit} nodes")]
    SizeLimit { limit: usize },
    #[error("input graph is empty")]
    EmptyGraph,
    #[error(transparent)]
    InvalidGraph(#[from] FlowgraphError),
    #[error("transformed tree failed validation: {0:?}")]
    InvalidOutput(Vec<Violation>),
}

/// Node texts that denote a branch outcome rather than a step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelLexicon(BTreeSet<String>);

impl LabelLexicon {
    /// Entries are lowercased and trimmed; `None` when nothing remains.
    pub fn new<I, S>(entries: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> =
            entries.into_iter().map(|s| s.as_ref().trim().to_lowercase()).filter(|s| !s.is_empty()).collect();
        (!set.is_empty()).then_some(LabelLexicon(set))
    }

    pub fn contains(&self, text: &str) -> bool {
        self.0.contains(&text.trim().to_lowercase())
    }
}

impl Default for LabelLexicon {
    fn default() -> Self {
        LabelLexicon::new(["yes", "no", "y", "n", "是", "否"]).expect("default lexicon is non-empty")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub step: String,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn new(step: &str, code: &str, message: impl Into<String>) -> Self {
        Diagnostic { step: step.into(), code: code.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransformReport {
    pub labels_collapsed: usize,
    pub cycles_cut: usize,
    pub nodes_replicated: usize,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeMeta {
    pub id: String,
    pub title: String,
    pub kind: TreeKind,
    pub department: String,
    #[serde(default)]
    pub source: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransformConfig {
    pub max_nodes: usize,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig { max_nodes: DEFAULT_MAX_NODES }
    }
}

/// Folds label nodes ("Yes"/"No" boxes with exactly one unlabeled edge in
/// and out) into a single labeled edge. Returns the graph and the number of
/// nodes folded.
pub fn reconstruct_labels(g: &FlowGraph, lex: &LabelLexicon) -> (FlowGraph, usize) {
    let mut graph = g.clone();
    let mut ids: Vec<FlowNodeId> = graph.nodes.iter().map(|n| n.id).collect();
    ids.sort_unstable();
    let mut collapsed = 0;
    // Folding only labels edges or merges duplicates, so no node visited
    // earlier can become foldable later and one ascending sweep reaches the
    // fixpoint.
    for id in ids {
        let Some(node) = graph.node(id) else { continue };
        if !lex.contains(&node.text) {
            continue;
        }
        let text = node.text.trim().to_string();
        let incoming: Vec<usize> = (0..graph.edges.len()).filter(|&i| graph.edges[i].to == id).collect();
        let outgoing: Vec<usize> = (0..graph.edges.len()).filter(|&i| graph.edges[i].from == id).collect();
        let (&[inc], &[out]) = (incoming.as_slice(), outgoing.as_slice()) else { continue };
        if inc == out || graph.edges[inc].label.is_some() || graph.edges[out].label.is_some() {
            continue;
        }
        let merged = FlowEdge { from: graph.edges[inc].from, to: graph.edges[out].to, label: Some(text) };
        graph.edges =
            graph.edges.iter().enumerate().filter(|&(i, _)| i != inc && i != out).map(|(_, e)| e.clone()).collect();
        graph.edges.push(merged);
        graph.nodes.retain(|n| n.id != id);
        collapsed += 1;
    }
    graph.normalize();
    (graph, collapsed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleCut {
    pub graph: FlowGraph,
    pub entry: Option<FlowNodeId>,
    pub cycles_cut: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// The smallest-id node without incoming edges, falling back to the
/// smallest id overall (second value `true`).
pub fn entry_node(g: &FlowGraph) -> Option<(FlowNodeId, bool)> {
    let indeg = g.in_degrees();
    indeg
        .iter()
        .find(|(_, &d)| d == 0)
        .map(|(&id, _)| (id, false))
        .or_else(|| indeg.keys().next().map(|&id| (id, true)))
}

/// Cuts every loop found by depth-first search from the entry node.
///
/// An edge `u -> v` whose target is already on the current path is
/// redirected to a fresh terminal copy of `v` marked `is_reference`. Nodes
/// the entry cannot reach are searched afterwards, so the output is acyclic
/// for any input.
pub fn eliminate_cycles(g: &FlowGraph) -> CycleCut {
    let mut diagnostics = Vec::new();
    let Some((entry, fallback)) = entry_node(g) else {
        return CycleCut { graph: g.clone(), entry: None, cycles_cut: 0, diagnostics };
    };
    if fallback {
        diagnostics.push(Diagnostic::new(
            "eliminate_cycles",
            "NO_ENTRY",
            format!("every node has an incoming edge; using node {entry} as entry"),
        ));
    }

    let adj = g.adjacency();
    let indeg = g.in_degrees();
    let mut roots = vec![entry];
    roots.extend(indeg.iter().filter(|(&id, &d)| d == 0 && id != entry).map(|(&id, _)| id));
    roots.extend(indeg.iter().filter(|(_, &d)| d > 0).map(|(&id, _)| id).filter(|&id| id != entry));

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        New,
        OnPath,
        Done,
    }
    let mut state: HashMap<FlowNodeId, State> = g.nodes.iter().map(|n| (n.id, State::New)).collect();
    let mut cut: Vec<usize> = Vec::new();
    for root in roots {
        if state[&root] != State::New {
            continue;
        }
        state.insert(root, State::OnPath);
        let mut stack: Vec<(FlowNodeId, usize)> = vec![(root, 0)];
        while let Some(&mut (u, ref mut pos)) = stack.last_mut() {
            let out = &adj[&u];
            if *pos == out.len() {
                state.insert(u, State::Done);
                stack.pop();
                continue;
            }
            let ei = out[*pos];
            *pos += 1;
            let v = g.edges[ei].to;
            match state[&v] {
                State::OnPath => cut.push(ei),
                State::New => {
                    state.insert(v, State::OnPath);
                    stack.push((v, 0));
                }
                State::Done => {}
            }
        }
    }

    let mut graph = g.clone();
    for (&ei, id) in cut.iter().zip(g.max_id() + 1..) {
        let target = g.node(g.edges[ei].to).expect("edge target exists");
        graph.nodes.push(FlowNode { id, is_reference: true, ..target.clone() });
        graph.edges[ei].to = id;
    }
    graph.normalize();
    CycleCut { graph, entry: Some(entry), cycles_cut: cut.len(), diagnostics }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub graph: FlowGraph,
    pub nodes_replicated: usize,
}

/// (original id, parent id in the output, label of the incoming edge)
type Frame = (FlowNodeId, Option<(FlowNodeId, Option<String>)>);

/// Turns an acyclic graph into a forest by giving every parent its own copy
/// of a shared child together with that child's whole subtree.
pub fn replicate_shared_children(g: &FlowGraph, max_nodes: usize) -> Result<Replication, TransformError> {
    g.check()?;
    if g.has_cycle() {
        return Err(TransformError::CyclicInput);
    }
    let sources: Vec<FlowNodeId> = g.in_degrees().into_iter().filter(|&(_, d)| d == 0).map(|(id, _)| id).collect();
    unfold(g, &sources, max_nodes)
}

fn unfold(g: &FlowGraph, roots: &[FlowNodeId], max_nodes: usize) -> Result<Replication, TransformError> {
    let adj = g.adjacency();
    let index: HashMap<FlowNodeId, &FlowNode> = g.nodes.iter().map(|n| (n.id, n)).collect();
    let mut used: BTreeSet<FlowNodeId> = BTreeSet::new();
    let mut next_id = g.max_id() + 1;
    let mut out = FlowGraph::default();
    let mut replicated = 0;

    for &root in roots {
        let mut stack: Vec<Frame> = vec![(root, None)];
        while let Some((orig, parent)) = stack.pop() {
            if out.nodes.len() >= max_nodes {
                return Err(TransformError::SizeLimit { limit: max_nodes });
            }
            let id = if used.insert(orig) {
                orig
            } else {
                replicated += 1;
                next_id += 1;
                next_id - 1
            };
            out.nodes.push(FlowNode { id, ..index[&orig].clone() });
            if let Some((p, label)) = parent {
                out.edges.push(FlowEdge { from: p, to: id, label });
            }
            for &ei in adj[&orig].iter().rev() {
                let e = &g.edges[ei];
                stack.push((e.to, Some((id, e.label.clone()))));
            }
        }
    }
    out.normalize();
    Ok(Replication { graph: out, nodes_replicated: replicated })
}

fn weak_components(g: &FlowGraph) -> Vec<BTreeSet<FlowNodeId>> {
    let mut parent: BTreeMap<FlowNodeId, FlowNodeId> = g.nodes.iter().map(|n| (n.id, n.id)).collect();
    fn find(parent: &mut BTreeMap<FlowNodeId, FlowNodeId>, x: FlowNodeId) -> FlowNodeId {
        let mut root = x;
        while parent[&root] != root {
            root = parent[&root];
        }
        let mut cur = x;
        while parent[&cur] != root {
            let next = parent[&cur];
            parent.insert(cur, root);
            cur = next;
        }
        root
    }
    for e in &g.edges {
        let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
        if a != b {
            parent.insert(a.max(b), a.min(b));
        }
    }
    let mut groups: BTreeMap<FlowNodeId, BTreeSet<FlowNodeId>> = BTreeMap::new();
    let ids: Vec<FlowNodeId> = parent.keys().copied().collect();
    for id in ids {
        let r = find(&mut parent, id);
        groups.entry(r).or_default().insert(id);
    }
    groups.into_values().collect()
}

fn clean_text(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Full normalization: label folding, loop cutting, replication and node
/// classification. The result always passes [`validate_cgt`].
pub fn to_cgt(
    g: &FlowGraph,
    meta: &TreeMeta,
    lex: &LabelLexicon,
    cfg: &TransformConfig,
) -> Result<(Cgt, TransformReport), TransformError> {
    g.check()?;
    if g.nodes.is_empty() {
        return Err(TransformError::EmptyGraph);
    }
    let mut report = TransformReport::default();

    let (mut graph, collapsed) = reconstruct_labels(g, lex);
    report.labels_collapsed = collapsed;

    let components = weak_components(&graph);
    if components.len() > 1 {
        // largest first; ties go to the component holding the smallest id
        let keep = components
            .iter()
            .max_by(|a, b| a.len().cmp(&b.len()).then(b.first().cmp(&a.first())))
            .expect("at least two components")
            .clone();
        report.diagnostics.push(Diagnostic::new(
            "to_cgt",
            "MULTIPLE_COMPONENTS",
            format!("graph has {} components; keeping the largest ({} nodes)", components.len(), keep.len()),
        ));
        graph.nodes.retain(|n| keep.contains(&n.id));
        graph.edges.retain(|e| keep.contains(&e.from));
    }

    let cut = eliminate_cycles(&graph);
    report.cycles_cut = cut.cycles_cut;
    report.diagnostics.extend(cut.diagnostics);
    let entry = cut.entry.expect("non-empty graph has an entry");

    let forest = unfold(&cut.graph, &[entry], cfg.max_nodes)?;
    report.nodes_replicated = forest.nodes_replicated;
    let dropped = cut.graph.nodes.iter().filter(|n| forest.graph.node(n.id).is_none()).count();
    if dropped > 0 {
        report.diagnostics.push(Diagnostic::new(
            "to_cgt",
            "UNREACHABLE_NODES",
            format!("{dropped} node(s) cannot be reached from entry node {entry} and were dropped"),
        ));
    }

    let tree = classify(&forest.graph, entry, meta, &mut report);
    let validation = validate_cgt(&tree);
    if !validation.ok {
        return Err(TransformError::InvalidOutput(validation.violations));
    }
    Ok((tree, report))
}

fn classify(forest: &FlowGraph, entry: FlowNodeId, meta: &TreeMeta, report: &mut TransformReport) -> Cgt {
    let adj = forest.adjacency();
    let index: HashMap<FlowNodeId, &FlowNode> = forest.nodes.iter().map(|n| (n.id, n)).collect();
    let mut nodes: Vec<CgtNode> = Vec::with_capacity(forest.nodes.len());
    let mut next: NodeId = 1;
    // (flow id, parent cgt id, label)
    let mut stack: Vec<(FlowNodeId, Option<(NodeId, String)>)> = vec![(entry, None)];
    let mut used_labels: HashMap<NodeId, BTreeSet<String>> = HashMap::new();
    while let Some((fid, parent)) = stack.pop() {
        let flow = index[&fid];
        let id = next;
        next += 1;
        let children = &adj[&fid];
        let kind = match (&parent, children.is_empty()) {
            (None, _) => NodeKind::Root,
            (Some(_), true) => NodeKind::Action,
            (Some(_), false) => NodeKind::Condition,
        };
        let mut text = clean_text(&flow.text);
        if text.is_empty() {
            text = "(no text)".into();
            report.diagnostics.push(Diagnostic::new("classify", "EMPTY_TEXT", format!("flow node {fid} has no text")));
        }
        let (parent_id, edge_label) = match parent {
            Some((p, l)) => (Some(p), Some(l)),
            None => (None, None),
        };
        nodes.push(CgtNode {
            id,
            kind,
            text,
            parent_id,
            edge_label,
            shape_class: (!flow.shape_class.is_arrow()).then_some(flow.shape_class),
            is_reference: flow.is_reference,
        });
        let labels = used_labels.entry(id).or_default();
        let mut assigned = Vec::with_capacity(children.len());
        for &ei in children {
            let e = &forest.edges[ei];
            let base = e.label.as_deref().map(clean_text).filter(|l| !l.is_empty());
            let base = base.unwrap_or_else(|| DEFAULT_EDGE_LABEL.to_string());
            let mut label = base.clone();
            let mut k = 2;
            while labels.contains(&label) {
                label = format!("{base} ({k})");
                k += 1;
            }
            if label != base {
                report.diagnostics.push(Diagnostic::new(
                    "classify",
                    "DUPLICATE_LABEL",
                    format!("label `{base}` repeated under flow node {fid}; renamed to `{label}`"),
                ));
            }
            labels.insert(label.clone());
            assigned.push((e.to, label));
        }
        for (to, label) in assigned.into_iter().rev() {
            stack.push((to, Some((id, label))));
        }
    }
    if nodes.len() == 1 {
        report.diagnostics.push(Diagnostic::new(
            "classify",
            "DEGENERATE_TREE",
            "tree has a root but no conditions or actions",
        ));
    }
    Cgt {
        id: meta.id.clone(),
        title: meta.title.clone(),
        kind: meta.kind,
        department: meta.department.clone(),
        source: meta.source.clone(),
        nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgt::{paths, ShapeClass};

    fn graph(nodes: &[(FlowNodeId, &str)], edges: &[(FlowNodeId, FlowNodeId, Option<&str>)]) -> FlowGraph {
        let mut g = FlowGraph {
            nodes: nodes.iter().map(|&(id, t)| FlowNode::new(id, t)).collect(),
            edges: edges.iter().map(|&(f, t, l)| FlowEdge { from: f, to: t, label: l.map(str::to_string) }).collect(),
        };
        g.normalize();
        g
    }

    fn meta() -> TreeMeta {
        TreeMeta {
            id: "dyspnea".into(),
            title: "Dyspnea".into(),
            kind: TreeKind::DifferentialDiagnosis,
            department: "Internal medicine".into(),
            source: serde_json::Value::Null,
        }
    }

    #[test]
    fn label_node_becomes_edge_label() {
        let g = graph(&[(1, "C"), (2, "Yes"), (3, "N")], &[(1, 2, None), (2, 3, None)]);
        let (out, n) = reconstruct_labels(&g, &LabelLexicon::default());
        assert_eq!(n, 1);
        assert_eq!(out.edges, vec![FlowEdge::labeled(1, 3, "Yes")]);
        assert_eq!(out.nodes.len(), 2);
    }

    #[test]
    fn label_node_with_two_successors_is_kept() {
        let g = graph(&[(1, "C"), (2, "yes"), (3, "N"), (4, "M")], &[(1, 2, None), (2, 3, None), (2, 4, None)]);
        let (out, n) = reconstruct_labels(&g, &LabelLexicon::default());
        assert_eq!(n, 0);
        assert_eq!(out, g);
    }

    #[test]
    fn chained_label_nodes_never_overwrite_labels() {
        let g = graph(&[(1, "C"), (2, "No"), (3, "yes"), (4, "N")], &[(1, 2, None), (2, 3, None), (3, 4, None)]);
        let (out, n) = reconstruct_labels(&g, &LabelLexicon::default());
        assert_eq!(n, 1);
        assert_eq!(out.edges, vec![FlowEdge::labeled(1, 3, "No"), FlowEdge::new(3, 4)]);
        assert!(out.node(3).is_some());
    }

    #[test]
    fn three_cycle_is_cut_with_reference() {
        let g = graph(&[(1, "A"), (2, "B"), (3, "C")], &[(1, 2, None), (2, 3, None), (3, 1, None)]);
        let cut = eliminate_cycles(&g);
        assert_eq!(cut.cycles_cut, 1);
        assert_eq!(cut.entry, Some(1));
        assert_eq!(cut.diagnostics[0].code, "NO_ENTRY");
        assert_eq!(cut.graph.edges, vec![FlowEdge::new(1, 2), FlowEdge::new(2, 3), FlowEdge::new(3, 4)]);
        let r = cut.graph.node(4).unwrap();
        assert!(r.is_reference);
        assert_eq!(r.text, "A");
        assert!(!cut.graph.has_cycle());
    }

    #[test]
    fn acyclic_input_is_untouched() {
        let g = graph(&[(1, "A"), (2, "B"), (3, "C")], &[(1, 2, None), (1, 3, None), (2, 3, None)]);
        let cut = eliminate_cycles(&g);
        assert_eq!(cut.graph, g);
        assert_eq!(cut.cycles_cut, 0);
    }

    #[test]
    fn self_loop_is_cut() {
        let g = graph(&[(1, "A")], &[(1, 1, Some("again"))]);
        let cut = eliminate_cycles(&g);
        assert_eq!(cut.graph.edges, vec![FlowEdge::labeled(1, 2, "again")]);
        assert!(cut.graph.node(2).unwrap().is_reference);
    }

    #[test]
    fn shared_child_is_replicated() {
        let g = graph(&[(1, "P1"), (2, "P2"), (3, "J")], &[(1, 3, None), (2, 3, None)]);
        let r = replicate_shared_children(&g, DEFAULT_MAX_NODES).unwrap();
        assert_eq!(r.nodes_replicated, 1);
        assert_eq!(r.graph.edges, vec![FlowEdge::new(1, 3), FlowEdge::new(2, 4)]);
        assert_eq!(r.graph.node(4).unwrap().text, "J");
    }

    #[test]
    fn diamond_is_unfolded_with_subtree() {
        let g = graph(
            &[(1, "A"), (2, "B"), (3, "C"), (4, "D"), (5, "E")],
            &[(1, 2, None), (1, 3, None), (2, 4, None), (3, 4, None), (4, 5, None)],
        );
        let r = replicate_shared_children(&g, DEFAULT_MAX_NODES).unwrap();
        assert_eq!(r.nodes_replicated, 2);
        assert_eq!(r.graph.nodes.len(), 7);
        assert!(r.graph.in_degrees().values().all(|&d| d <= 1));
    }

    #[test]
    fn tree_input_is_unchanged_and_limits_apply() {
        let g = graph(&[(1, "A"), (2, "B"), (3, "C")], &[(1, 2, None), (1, 3, None)]);
        assert_eq!(replicate_shared_children(&g, DEFAULT_MAX_NODES).unwrap().graph, g);
        assert_eq!(replicate_shared_children(&g, 2), Err(TransformError::SizeLimit { limit: 2 }));
        let cyclic = graph(&[(1, "A"), (2, "B")], &[(1, 2, None), (2, 1, None)]);
        assert_eq!(replicate_shared_children(&cyclic, 10), Err(TransformError::CyclicInput));
    }

    pub(crate) fn dyspnea_flow() -> FlowGraph {
        let mut g = graph(
            &[
                (1, "Dyspnea"),
                (2, "Have any fever symptom?"),
                (3, "Yes"),
                (4, "No"),
                (5, "Pneumonia workup: chest X-ray, CBC"),
                (6, "Cardiac workup: ECG, BNP"),
            ],
            &[(1, 2, None), (2, 3, None), (2, 4, None), (3, 5, None), (4, 6, None)],
        );
        g.nodes[0].shape_class = ShapeClass::StartEnd;
        g.nodes[1].shape_class = ShapeClass::Decision;
        g
    }

    #[test]
    fn dyspnea_flowchart_becomes_valid_tree() {
        let (tree, report) =
            to_cgt(&dyspnea_flow(), &meta(), &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        assert_eq!(report.labels_collapsed, 2);
        assert_eq!(report.cycles_cut, 0);
        assert!(validate_cgt(&tree).ok);
        let p = paths(&tree).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0][1].label.as_deref(), Some(DEFAULT_EDGE_LABEL));
        assert_eq!(p[0][2].label.as_deref(), Some("Yes"));
        assert_eq!(tree.nodes[0].shape_class, Some(ShapeClass::StartEnd));
        assert_eq!(tree.nodes[1].kind, NodeKind::Condition);
    }

    #[test]
    fn single_node_is_degenerate_root() {
        let g = graph(&[(9, "Headache")], &[]);
        let (tree, report) = to_cgt(&g, &meta(), &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.nodes[0].kind, NodeKind::Root);
        assert!(report.diagnostics.iter().any(|d| d.code == "DEGENERATE_TREE"));
    }

    #[test]
    fn cycle_and_shared_child_together() {
        // 1 -> 2 -> 3 -> 2 (loop), 1 -> 4 -> 3 (3 shared)
        let g = graph(
            &[(1, "start"), (2, "check"), (3, "act"), (4, "other")],
            &[(1, 2, None), (2, 3, None), (3, 2, None), (1, 4, None), (4, 3, None)],
        );
        let (tree, report) = to_cgt(&g, &meta(), &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        assert_eq!(report.cycles_cut, 1);
        assert!(report.nodes_replicated >= 1);
        assert!(validate_cgt(&tree).ok);
        assert!(tree.nodes.iter().any(|n| n.is_reference && n.text == "check"));
    }

    #[test]
    fn disconnected_graph_keeps_largest_component() {
        let g = graph(&[(1, "lonely"), (2, "a"), (3, "b")], &[(2, 3, None)]);
        let (tree, report) = to_cgt(&g, &meta(), &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        assert_eq!(tree.nodes.len(), 2);
        assert_eq!(tree.nodes[0].text, "a");
        assert!(report.diagnostics.iter().any(|d| d.code == "MULTIPLE_COMPONENTS"));
    }

    #[test]
    fn duplicate_and_missing_labels_are_made_distinct() {
        let g = graph(&[(1, "a"), (2, "b"), (3, "c"), (4, "d")], &[(1, 2, None), (1, 3, None), (1, 4, Some("next"))]);
        let (tree, _) = to_cgt(&g, &meta(), &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        let labels: Vec<_> = tree.children(1).iter().map(|n| n.edge_label.clone().unwrap()).collect();
        assert_eq!(labels, vec!["next", "next (2)", "next (3)"]);
    }

    #[test]
    fn empty_graph_is_rejected() {
        let err = to_cgt(&FlowGraph::default(), &meta(), &LabelLexicon::default(), &TransformConfig::default());
        assert_eq!(err.unwrap_err(), TransformError::EmptyGraph);
    }
}
