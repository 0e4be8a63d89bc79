//! Vector index over guidance trees and cosine retrieval.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cgt::{Cgt, NodeKind};
use crate::engine::{DialogueHistory, Role};

pub const DEFAULT_DIM: usize = 256;
/// Embedded text is cut to this many characters.
pub const MAX_EMBED_CHARS: usize = 2048;
pub const HASH_EMBEDDER_ID: &str = "hash-fnv1a64";

#[derive(Debug, Error, PartialEq)]
pub enum RetrievalError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error("index is empty")]
    EmptyIndex,
    #[error("index was built with `{index}` but the query embedder is `{query}`")]
    EmbedderMismatch { index: String, query: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("duplicate tree id `{0}`")]
    DuplicateTree(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|v| v * c).collect())
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(x: &Vector, y: &Vector) -> Result<f64, RetrievalError> {
    if x.dim() != y.dim() {
        return Err(RetrievalError::DimMismatch(x.dim(), y.dim()));
    }
    let (nx, ny) = (x.norm(), y.norm());
    if nx == 0.0 || ny == 0.0 {
        return Ok(0.0);
    }
    let dot: f64 = x.0.iter().zip(&y.0).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase().split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_string).collect()
}

/// Feature-hashing bag of words, L2-normalized.
pub fn embed_hash(text: &str, dim: usize) -> Vector {
    assert!(dim >= 1, "embedding dimension must be positive");
    let mut v = Vector::zeros(dim);
    for tok in tokenize(text) {
        v.0[(fnv1a64(tok.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let n = v.norm();
    if n > 0.0 {
        v.0.iter_mut().for_each(|x| *x /= n);
    }
    v
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Vector;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder { dim: DEFAULT_DIM }
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> String {
        HASH_EMBEDDER_ID.to_string()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vector {
        embed_hash(text, self.dim)
    }
}

/// Title, root text and condition texts (ascending node id), space-joined
/// and cut to [`MAX_EMBED_CHARS`] characters.
pub fn embedded_text(tree: &Cgt) -> String {
    let mut nodes: Vec<_> = tree.nodes.iter().filter(|n| n.kind != NodeKind::Action).collect();
    nodes.sort_by_key(|n| n.id);
    let parts = std::iter::once(tree.title.as_str()).chain(nodes.iter().map(|n| n.text.as_str()));
    let joined = parts.collect::<Vec<_>>().join(" ");
    joined.chars().take(MAX_EMBED_CHARS).collect()
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub tree_id: String,
    pub vector: Vector,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub embedder: String,
    pub dim: usize,
    pub entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub tree_id: String,
    pub score: f64,
}

/// One entry per tree, sorted by tree id.
pub fn build_index(kb: &[Cgt], embedder: &dyn Embedder) -> Result<Index, RetrievalError> {
    if kb.is_empty() {
        return Err(RetrievalError::EmptyKb);
    }
    let mut entries: Vec<IndexEntry> = kb
        .iter()
        .map(|t| {
            let text = embedded_text(t);
            IndexEntry { tree_id: t.id.clone(), vector: embedder.embed(&text), digest: digest(&text) }
        })
        .collect();
    entries.sort_by(|a, b| a.tree_id.cmp(&b.tree_id));
    if let Some(w) = entries.windows(2).find(|w| w[0].tree_id == w[1].tree_id) {
        return Err(RetrievalError::DuplicateTree(w[0].tree_id.clone()));
    }
    Ok(Index { embedder: embedder.id(), dim: embedder.dim(), entries })
}

/// Top `k` trees by cosine similarity, ties broken by ascending tree id.
pub fn retrieve(index: &Index, embedder: &dyn Embedder, query: &str, k: usize) -> Result<Vec<Scored>, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if index.entries.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    if embedder.id() != index.embedder || embedder.dim() != index.dim {
        return Err(RetrievalError::EmbedderMismatch { index: index.embedder.clone(), query: embedder.id() });
    }
    let q = embedder.embed(query);
    let mut scored = index
        .entries
        .iter()
        .map(|e| Ok(Scored { tree_id: e.tree_id.clone(), score: cosine(&q, &e.vector)? }))
        .collect::<Result<Vec<_>, RetrievalError>>()?;
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.tree_id.cmp(&b.tree_id)));
    scored.truncate(k);
    Ok(scored)
}

/// Text-to-text dialogue rewriter, typically a remote model.
pub trait Rewriter: Send + Sync {
    fn rewrite(&self, dialogue: &str) -> Result<String, String>;
}

pub fn dialogue_text(history: &DialogueHistory) -> String {
    history
        .turns()
        .iter()
        .map(|t| match t.role {
            Role::Patient => format!("Patient: {}", t.text),
            Role::System => format!("System: {}", t.text),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// The retrieval query for a dialogue. A failing rewriter falls back to
/// the plain transcript and the failure is returned as a warning.
pub fn rewrite_dialogue(history: &DialogueHistory, rewriter: Option<&dyn Rewriter>) -> (String, Option<String>) {
    let plain = dialogue_text(history);
    match rewriter {
        None => (plain, None),
        Some(r) => match r.rewrite(&plain) {
            Ok(out) => (out, None),
            Err(e) => (plain, Some(format!("dialogue rewriter failed: {e}"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgt::{CgtNode, TreeKind};

    fn v(xs: &[f64]) -> Vector {
        Vector(xs.to_vec())
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&v(&[1., 0.]), &v(&[1., 0.])).unwrap(), 1.0);
        assert_eq!(cosine(&v(&[1., 0.]), &v(&[0., 1.])).unwrap(), 0.0);
        assert!((cosine(&v(&[1., 1.]), &v(&[2., 2.])).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&v(&[0., 0.]), &v(&[2., 2.])).unwrap(), 0.0);
        assert_eq!(cosine(&v(&[1.]), &v(&[1., 2.])), Err(RetrievalError::DimMismatch(1, 2)));
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hash_embedding() {
        assert_eq!(embed_hash("", 8), Vector::zeros(8));
        let e = embed_hash("fever fever", DEFAULT_DIM);
        let nz: Vec<_> = e.0.iter().enumerate().filter(|(_, &x)| x != 0.0).collect();
        assert_eq!(nz.len(), 1);
        assert_eq!(nz[0].0 as u64, fnv1a64(b"fever") % 256);
        assert_eq!(*nz[0].1, 1.0);
        assert_eq!(embed_hash("Fever, FEVER!", 16), embed_hash("fever fever", 16));
    }

    fn tree(id: &str, title: &str, cond: &str) -> Cgt {
        Cgt {
            id: id.into(),
            title: title.into(),
            kind: TreeKind::DifferentialDiagnosis,
            department: "x".into(),
            source: serde_json::Value::Null,
            nodes: vec![
                CgtNode::root(1, title),
                CgtNode::child(2, NodeKind::Condition, cond, 1, "next"),
                CgtNode::child(3, NodeKind::Action, "treat", 2, "yes"),
            ],
        }
    }

    #[test]
    fn embedded_text_skips_actions() {
        assert_eq!(embedded_text(&tree("a", "Dyspnea", "fever?")), "Dyspnea Dyspnea fever?");
        let long = tree("a", &"x".repeat(3000), "c");
        assert_eq!(embedded_text(&long).chars().count(), MAX_EMBED_CHARS);
    }

    #[test]
    fn ranking_and_ties() {
        let kb = vec![tree("b", "knee pain", "swelling?"), tree("a", "dyspnea fever", "cough?")];
        let e = HashEmbedder::default();
        let idx = build_index(&kb, &e).unwrap();
        assert_eq!(idx.entries[0].tree_id, "a");
        let r = retrieve(&idx, &e, "trouble breathing with fever", 1).unwrap();
        assert_eq!(r[0].tree_id, "a");
        let r = retrieve(&idx, &e, "zzz", 5).unwrap();
        assert_eq!(r.iter().map(|s| s.tree_id.as_str()).collect::<Vec<_>>(), ["a", "b"]);
        assert!(r.iter().all(|s| s.score == 0.0));
        assert_eq!(retrieve(&idx, &e, "q", 0), Err(RetrievalError::InvalidK));
        assert!(matches!(
            retrieve(&idx, &HashEmbedder { dim: 8 }, "q", 1),
            Err(RetrievalError::EmbedderMismatch { .. })
        ));
        assert_eq!(build_index(&[], &e), Err(RetrievalError::EmptyKb));
    }

    struct Echo;
    impl Rewriter for Echo {
        fn rewrite(&self, d: &str) -> Result<String, String> {
            Ok(d.to_string())
        }
    }
    struct Broken;
    impl Rewriter for Broken {
        fn rewrite(&self, _: &str) -> Result<String, String> {
            Err("timeout".into())
        }
    }

    #[test]
    fn dialogue_rewrite() {
        let mut h = DialogueHistory::default();
        assert_eq!(rewrite_dialogue(&h, None).0, "");
        h.push(Role::Patient, "cough");
        h.push(Role::System, "how long?");
        assert_eq!(rewrite_dialogue(&h, None).0, "Patient: cough\nSystem: how long?");
        assert_eq!(rewrite_dialogue(&h, Some(&Echo)), rewrite_dialogue(&h, None));
        let (text, warn) = rewrite_dialogue(&h, Some(&Broken));
        assert_eq!(text, "Patient: cough\nSystem: how long?");
        assert!(warn.unwrap().contains("timeout"));
    }
}
