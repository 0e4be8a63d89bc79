//! Reference implementations and random instances for tests.
//!
//! Everything here is written the slow, obvious way and shares no code with
//! the algorithms under test beyond the plain data types.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use meddm_core::cgt::{Cgt, CgtNode, NodeId, NodeKind, TreeKind};
use meddm_core::flowgraph::{FlowEdge, FlowGraph, FlowNode, FlowNodeId, Point};
use rand::Rng;

/// Brute-force DBSCAN: O(n^2) neighbourhoods, clusters grown from cores in
/// index order, each border point given to its nearest core (ties by the
/// core's x, then y).
pub fn dbscan_reference(points: &[Point], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let close = |i: usize, j: usize| {
        let (dx, dy) = (points[i].x - points[j].x, points[i].y - points[j].y);
        dx * dx + dy * dy <= eps * eps
    };
    let is_core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| close(i, j)).count() >= min_pts).collect();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut clusters = 0;
    for seed in 0..n {
        if !is_core[seed] || label[seed].is_some() {
            continue;
        }
        let mut frontier = vec![seed];
        label[seed] = Some(clusters);
        while let Some(i) = frontier.pop() {
            for j in 0..n {
                if is_core[j] && label[j].is_none() && close(i, j) {
                    label[j] = Some(clusters);
                    frontier.push(j);
                }
            }
        }
        clusters += 1;
    }
    for i in 0..n {
        if is_core[i] {
            continue;
        }
        let mut best: Option<usize> = None;
        for (j, &core) in is_core.iter().enumerate() {
            if !core || !close(i, j) {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) => {
                    let d = |k: usize| {
                        let (dx, dy) = (points[i].x - points[k].x, points[i].y - points[k].y);
                        dx * dx + dy * dy
                    };
                    let key = |k: usize| (d(k), points[k].x, points[k].y);
                    if key(j).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Less) {
                        Some(j)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        label[i] = best.and_then(|b| label[b]);
    }
    label
}

/// The partition as a set of index sets, noise collected separately.
pub fn partition(labels: &[Option<usize>]) -> (BTreeSet<BTreeSet<usize>>, BTreeSet<usize>) {
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut noise = BTreeSet::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => {
                groups.entry(*c).or_default().insert(i);
            }
            None => {
                noise.insert(i);
            }
        }
    }
    (groups.into_values().collect(), noise)
}

/// Cycle check by testing, for every node, whether it can reach itself.
pub fn has_cycle_bruteforce(g: &FlowGraph) -> bool {
    g.nodes.iter().any(|start| {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<FlowNodeId> = g.edges.iter().filter(|e| e.from == start.id).map(|e| e.to).collect();
        while let Some(v) = stack.pop() {
            if v == start.id {
                return true;
            }
            if seen.insert(v) {
                stack.extend(g.edges.iter().filter(|e| e.from == v).map(|e| e.to));
            }
        }
        false
    })
}

/// One maximal path as (node text, label of the edge into the node).
pub type TextPath = Vec<(String, Option<String>)>;

/// Every path from a node without incoming edges to a node without outgoing
/// edges, sorted. `None` once more than `limit` paths exist.
pub fn source_sink_paths(g: &FlowGraph, limit: usize) -> Option<Vec<TextPath>> {
    let text: HashMap<FlowNodeId, &str> = g.nodes.iter().map(|n| (n.id, n.text.as_str())).collect();
    let sources: Vec<FlowNodeId> =
        g.nodes.iter().map(|n| n.id).filter(|id| !g.edges.iter().any(|e| e.to == *id)).collect();
    let mut out = Vec::new();
    fn go(
        g: &FlowGraph,
        text: &HashMap<FlowNodeId, &str>,
        at: FlowNodeId,
        cur: &mut TextPath,
        out: &mut Vec<TextPath>,
        limit: usize,
    ) -> bool {
        let outs: Vec<&FlowEdge> = g.edges.iter().filter(|e| e.from == at).collect();
        if outs.is_empty() {
            out.push(cur.clone());
            return out.len() <= limit;
        }
        for e in outs {
            cur.push((text[&e.to].to_string(), e.label.clone()));
            let ok = go(g, text, e.to, cur, out, limit);
            cur.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    for s in sources {
        let mut cur = vec![(text[&s].to_string(), None)];
        if !go(g, &text, s, &mut cur, &mut out, limit) {
            return None;
        }
    }
    out.sort();
    Some(out)
}

/// Texts of the leaves under `node` in depth-first order, children by
/// ascending id.
pub fn leaf_texts(tree: &Cgt, node: NodeId) -> Vec<String> {
    let kids: Vec<&CgtNode> = {
        let mut v: Vec<&CgtNode> = tree.nodes.iter().filter(|n| n.parent_id == Some(node)).collect();
        v.sort_by_key(|n| n.id);
        v
    };
    if kids.is_empty() {
        let n = tree.nodes.iter().find(|n| n.id == node).expect("node exists");
        return if n.parent_id.is_some() { vec![n.text.clone()] } else { Vec::new() };
    }
    kids.iter().flat_map(|k| leaf_texts(tree, k.id)).collect()
}

/// FNV-1a 64 with the multiplication carried out in u128.
pub fn fnv1a64_reference(s: &str) -> u64 {
    let mut h: u128 = 14695981039346656037;
    for b in s.bytes() {
        h ^= b as u128;
        h = (h * 1099511628211) % (1u128 << 64);
    }
    h as u64
}

pub fn embed_reference(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    let mut token = String::new();
    let lower = text.to_lowercase();
    for c in lower.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            token.push(c);
        } else if !token.is_empty() {
            v[(fnv1a64_reference(&token) % dim as u64) as usize] += 1.0;
            token.clear();
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

pub fn cosine_reference(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

const WORDS: &[&str] = &[
    "fever",
    "cough",
    "pain",
    "chest",
    "acute",
    "chronic",
    "rash",
    "nausea",
    "頭痛",
    "x == y",
    "a:b",
    "hb < 90",
    "dyspnea",
    "ECG",
    "CT",
    "(severe)",
    "≥ 3 days",
];

fn phrase(rng: &mut impl Rng) -> String {
    let k = rng.random_range(1..=3);
    (0..k).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn label(rng: &mut impl Rng, taken: &BTreeSet<String>) -> String {
    const LABELS: &[&str] = &["yes", "no", "mild", "severe", "otherwise", "next", ">= 2", "是", "a=b", "x:"];
    loop {
        let l = if rng.random_bool(0.7) {
            LABELS[rng.random_range(0..LABELS.len())].to_string()
        } else {
            format!("{} {}", LABELS[rng.random_range(0..LABELS.len())], rng.random_range(0..100))
        };
        if !taken.contains(&l) {
            return l;
        }
    }
}

/// A valid tree with depth at most `max_depth` (root at depth 0) and at most
/// `max_branch` children per node.
pub fn random_cgt(rng: &mut impl Rng, max_depth: usize, max_branch: usize) -> Cgt {
    let mut nodes = vec![CgtNode::root(1, phrase(rng))];
    let mut frontier = vec![(1 as NodeId, 0usize)];
    while let Some((id, depth)) = frontier.pop() {
        let k = if depth >= max_depth { 0 } else { rng.random_range(0..=max_branch) };
        let k = if depth == 0 && k == 0 && rng.random_bool(0.8) { 1 } else { k };
        let mut taken = BTreeSet::new();
        let mut kids = Vec::new();
        for _ in 0..k {
            let l = label(rng, &taken);
            taken.insert(l.clone());
            let cid = nodes.len() as NodeId + 1 + kids.len() as NodeId;
            kids.push((cid, l));
        }
        for (cid, l) in kids {
            nodes.push(CgtNode::child(cid, NodeKind::Action, phrase(rng), id, l));
            frontier.push((cid, depth + 1));
        }
    }
    let parents: BTreeSet<NodeId> = nodes.iter().filter_map(|n| n.parent_id).collect();
    for n in &mut nodes {
        if n.parent_id.is_some() && parents.contains(&n.id) {
            n.kind = NodeKind::Condition;
        }
    }
    Cgt {
        id: format!("t{}", rng.random_range(0..1_000_000)),
        title: nodes[0].text.clone(),
        kind: TreeKind::DifferentialDiagnosis,
        department: "test".into(),
        source: serde_json::Value::Null,
        nodes,
    }
}

/// A random flow graph on `1..=n`; self loops and back edges appear when
/// `cyclic` is set, otherwise edges only go from lower to higher id.
pub fn random_flowgraph(rng: &mut impl Rng, n: usize, edge_prob: f64, cyclic: bool) -> FlowGraph {
    const LEX: &[&str] = &["Yes", "No", "yes", " no "];
    let nodes = (1..=n as FlowNodeId)
        .map(|id| {
            let text = if rng.random_bool(0.15) {
                LEX[rng.random_range(0..LEX.len())].to_string()
            } else {
                format!("step {id}")
            };
            FlowNode::new(id, text)
        })
        .collect();
    let mut edges = BTreeSet::new();
    for a in 1..=n as FlowNodeId {
        for b in 1..=n as FlowNodeId {
            if (a < b || cyclic) && rng.random_bool(edge_prob) {
                let label = rng.random_bool(0.2).then(|| ["yes", "no", "maybe"][rng.random_range(0..3)].to_string());
                edges.insert(FlowEdge { from: a, to: b, label });
            }
        }
    }
    let mut g = FlowGraph { nodes, edges: edges.into_iter().collect() };
    g.normalize();
    g
}

pub fn random_points(rng: &mut impl Rng, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                // snap to a lattice so exact distance ties and duplicates occur
                Point::new(rng.random_range(0..10) as f64, rng.random_range(0..10) as f64)
            } else {
                Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent))
            }
        })
        .collect()
}

/// The shared fixture directory at the workspace root.
pub fn fixtures() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}
