//! Flowchart reconstruction, clinical guidance trees and the consultation
//! engine that runs them.

pub mod cgt;
pub mod engine;
pub mod flowgraph;
pub mod ieet;
pub mod kb;
pub mod retrieval;
pub mod stats;
pub mod synthgen;
pub mod transform;

pub use cgt::{validate_cgt, Cgt, CgtError, CgtNode, NodeId, NodeKind, ShapeClass, TreeKind, ValidationReport};
pub use engine::{DialogueHistory, Event, Judge, Session, Status, Verdict};
pub use flowgraph::{reconstruct, DetectionFile, FlowEdge, FlowGraph, FlowNode, ReconstructConfig};
pub use ieet::{parse as parse_ieet, serialize as serialize_ieet, IeetDocument, IeetError};
pub use kb::Kb;
pub use retrieval::{Embedder, HashEmbedder, Index, Vector};
pub use transform::{to_cgt, LabelLexicon, TransformConfig, TransformReport, TreeMeta};
