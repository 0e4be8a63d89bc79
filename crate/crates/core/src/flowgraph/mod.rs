//! Flowchart graph reconstruction from detection primitives.
//!
//! Input is a [`DetectionFile`]: shape boxes from a detector, one contour
//! point set per connector line (shapes already masked out), and OCR text
//! boxes. [`reconstruct`] merges them into a directed [`FlowGraph`].

pub mod dbscan;
pub mod geometry;
mod reconstruct;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::cgt::ShapeClass;
pub use dbscan::{dbscan, ClusterLabel, DbscanError};
pub use geometry::{BBox, Point};
pub use reconstruct::{reconstruct, resolve_connectors, ConnectorLink, Resolution};

pub type FlowNodeId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDet {
    pub id: u32,
    pub class: ShapeClass,
    pub bbox: BBox,
    #[serde(default = "default_score")]
    pub score: f64,
}

fn default_score() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectorDet {
    pub id: u32,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextDet {
    pub id: u32,
    pub bbox: BBox,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFile {
    pub image: ImageInfo,
    #[serde(default)]
    pub shapes: Vec<ShapeDet>,
    #[serde(default)]
    pub connectors: Vec<ConnectorDet>,
    #[serde(default)]
    pub texts: Vec<TextDet>,
}

impl DetectionFile {
    /// Lists every violated input invariant.
    pub fn problems(&self) -> Vec<String> {
        let (w, h) = (self.image.width, self.image.height);
        let mut out = Vec::new();
        for s in &self.shapes {
            if !s.bbox.is_well_ordered() {
                out.push(format!("shape {}: bbox is not well ordered", s.id));
            } else if !s.bbox.within(w, h) {
                out.push(format!("shape {}: bbox outside the image", s.id));
            }
            if !(0.0..=1.0).contains(&s.score) {
                out.push(format!("shape {}: score {} outside [0, 1]", s.id, s.score));
            }
        }
        for c in &self.connectors {
            if c.points.is_empty() {
                out.push(format!("connector {}: no points", c.id));
            }
            for p in &c.points {
                if !p.is_finite() {
                    out.push(format!("connector {}: non-finite point", c.id));
                } else if p.x < 0.0 || p.y < 0.0 || p.x > w || p.y > h {
                    out.push(format!("connector {}: point outside the image", c.id));
                }
            }
        }
        for t in &self.texts {
            if !t.bbox.is_well_ordered() {
                out.push(format!("text {}: bbox is not well ordered", t.id));
            } else if !t.bbox.within(w, h) {
                out.push(format!("text {}: bbox outside the image", t.id));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowNode {
    pub id: FlowNodeId,
    pub shape_class: ShapeClass,
    pub text: String,
    pub bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_reference: bool,
}

impl FlowNode {
    pub fn new(id: FlowNodeId, text: impl Into<String>) -> Self {
        FlowNode { id, shape_class: ShapeClass::Process, text: text.into(), bbox: None, is_reference: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowEdge {
    pub from: FlowNodeId,
    pub to: FlowNodeId,
    pub label: Option<String>,
}

impl FlowEdge {
    pub fn new(from: FlowNodeId, to: FlowNodeId) -> Self {
        FlowEdge { from, to, label: None }
    }

    pub fn labeled(from: FlowNodeId, to: FlowNodeId, label: impl Into<String>) -> Self {
        FlowEdge { from, to, label: Some(label.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowGraph {
    pub nodes: Vec<FlowNode>,
    pub edges: Vec<FlowEdge>,
}

impl FlowGraph {
    pub fn node(&self, id: FlowNodeId) -> Option<&FlowNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn max_id(&self) -> FlowNodeId {
        self.nodes.iter().map(|n| n.id).max().unwrap_or(0)
    }

    pub fn in_degrees(&self) -> BTreeMap<FlowNodeId, usize> {
        let mut m: BTreeMap<FlowNodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        for e in &self.edges {
            *m.entry(e.to).or_default() += 1;
        }
        m
    }

    pub fn out_degrees(&self) -> BTreeMap<FlowNodeId, usize> {
        let mut m: BTreeMap<FlowNodeId, usize> = self.nodes.iter().map(|n| (n.id, 0)).collect();
        for e in &self.edges {
            *m.entry(e.from).or_default() += 1;
        }
        m
    }

    /// Out-edge indices per node, ordered by (target id, label).
    pub fn adjacency(&self) -> BTreeMap<FlowNodeId, Vec<usize>> {
        let mut m: BTreeMap<FlowNodeId, Vec<usize>> = self.nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for (i, e) in self.edges.iter().enumerate() {
            m.entry(e.from).or_default().push(i);
        }
        for v in m.values_mut() {
            v.sort_by(|&a, &b| (self.edges[a].to, &self.edges[a].label).cmp(&(self.edges[b].to, &self.edges[b].label)));
        }
        m
    }

    /// Sorts nodes by id and edges by (from, to, label), dropping duplicate edges.
    pub fn normalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort();
        self.edges.dedup();
    }

    pub fn check(&self) -> Result<(), FlowgraphError> {
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(FlowgraphError::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
        }
        let mut seen = BTreeSet::new();
        for e in &self.edges {
            if !ids.contains(&e.from) || !ids.contains(&e.to) {
                return Err(FlowgraphError::InvalidGraph(format!(
                    "edge {}->{} references a missing node",
                    e.from, e.to
                )));
            }
            if !seen.insert(e) {
                return Err(FlowgraphError::InvalidGraph(format!("duplicate edge {}->{}", e.from, e.to)));
            }
        }
        Ok(())
    }

    pub fn has_cycle(&self) -> bool {
        let adj = self.adjacency();
        let mut indeg = self.in_degrees();
        let mut ready: Vec<FlowNodeId> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut seen = 0;
        while let Some(id) = ready.pop() {
            seen += 1;
            for &ei in &adj[&id] {
                let d = indeg.get_mut(&self.edges[ei].to).expect("edge target exists");
                *d -= 1;
                if *d == 0 {
                    ready.push(self.edges[ei].to);
                }
            }
        }
        seen != self.nodes.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    pub eps: f64,
    pub min_pts: usize,
    pub attach_dist: f64,
    pub arrow_dist: f64,
    pub text_overlap: f64,
    pub label_dist: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            eps: 6.0,
            min_pts: 2,
            attach_dist: 15.0,
            arrow_dist: 12.0,
            text_overlap: 0.5,
            label_dist: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WarningCode {
    OrphanText,
    UnattachedConnector,
    DegenerateConnector,
    EmptyNodeText,
}

impl fmt::Display for WarningCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarningCode::OrphanText => "ORPHAN_TEXT",
            WarningCode::UnattachedConnector => "UNATTACHED_CONNECTOR",
            WarningCode::DegenerateConnector => "DEGENERATE_CONNECTOR",
            WarningCode::EmptyNodeText => "EMPTY_NODE_TEXT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub code: WarningCode,
    /// Id of the shape, connector or text the warning is about.
    pub subject: u32,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FlowgraphError {
    #[error("detection file contains no non-arrow shapes")]
    NoShapes,
    #[error("invalid detection input: {0}")]
    InvalidDetection(String),
    #[error("invalid flow graph: {0}")]
    InvalidGraph(String),
    #[error(transparent)]
    Dbscan(#[from] DbscanError),
}

/// Flowchart pre-filter: at least `min_shapes` non-arrow shapes.
pub fn is_flowchart_candidate(d: &DetectionFile, min_shapes: usize) -> bool {
    d.shapes.iter().filter(|s| !s.class.is_arrow()).count() >= min_shapes
}

pub const DEFAULT_MIN_SHAPES: usize = 8;

#[cfg(test)]
mod tests {
    use super::*;

    fn file(classes: &[ShapeClass]) -> DetectionFile {
        DetectionFile {
            image: ImageInfo { width: 1000.0, height: 1000.0, source: String::new() },
            shapes: classes
                .iter()
                .enumerate()
                .map(|(i, &class)| ShapeDet { id: i as u32 + 1, class, bbox: BBox::new(0., 0., 10., 10.), score: 0.9 })
                .collect(),
            connectors: vec![],
            texts: vec![],
        }
    }

    #[test]
    fn candidate_filter_counts_non_arrow_shapes() {
        assert!(is_flowchart_candidate(&file(&[ShapeClass::Process; 9]), DEFAULT_MIN_SHAPES));
        let mut mixed = vec![ShapeClass::Decision; 7];
        mixed.extend([ShapeClass::Arrow; 5]);
        assert!(!is_flowchart_candidate(&file(&mixed), DEFAULT_MIN_SHAPES));
        assert!(!is_flowchart_candidate(&file(&[]), DEFAULT_MIN_SHAPES));
        assert!(is_flowchart_candidate(&file(&[ShapeClass::Scan; 8]), DEFAULT_MIN_SHAPES));
    }

    #[test]
    fn detection_problems() {
        let mut d = file(&[ShapeClass::Process]);
        assert!(d.problems().is_empty());
        d.shapes[0].bbox = BBox::new(5., 0., 1., 10.);
        d.shapes[0].score = 1.5;
        assert_eq!(d.problems().len(), 2);
    }

    #[test]
    fn json_formats() {
        let text = r#"{"image":{"width":200,"height":100,"source":"p1.png"},
            "shapes":[{"id":1,"class":"start_end","bbox":[0,0,50,20],"score":0.99}],
            "connectors":[{"id":1,"points":[[1,2],[3,4]]}],
            "texts":[{"id":1,"bbox":[1,1,20,10],"text":"Dyspnea"}]}"#;
        let d: DetectionFile = serde_json::from_str(text).unwrap();
        assert_eq!(d.shapes[0].class, ShapeClass::StartEnd);
        assert_eq!(d.connectors[0].points[1], Point::new(3., 4.));

        let g = FlowGraph { nodes: vec![FlowNode::new(1, "a")], edges: vec![FlowEdge::labeled(1, 1, "yes")] };
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["edges"][0]["from"], 1);
        assert_eq!(v["nodes"][0]["shape_class"], "process");
        assert_eq!(v["nodes"][0]["bbox"], serde_json::Value::Null);
    }

    #[test]
    fn graph_checks() {
        let mut g =
            FlowGraph { nodes: vec![FlowNode::new(1, "a"), FlowNode::new(2, "b")], edges: vec![FlowEdge::new(1, 2)] };
        assert!(g.check().is_ok());
        assert!(!g.has_cycle());
        g.edges.push(FlowEdge::new(2, 1));
        assert!(g.has_cycle());
        g.edges.push(FlowEdge::new(2, 1));
        assert!(g.check().is_err());
        g.edges.push(FlowEdge::new(2, 9));
        assert!(g.check().is_err());
    }
}
