//! A knowledge base: validated guidance trees plus their retrieval index.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::cgt::{validate_cgt, Cgt, Violation};
use crate::retrieval::{build_index, retrieve, Embedder, HashEmbedder, Index, RetrievalError, Scored};

pub const TREE_SUFFIX: &str = ".cgt.json";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: invalid tree: {violations:?}")]
    Invalid { path: PathBuf, violations: Vec<Violation> },
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Clone)]
pub struct Kb {
    trees: Vec<Cgt>,
    index: Index,
    embedder: Arc<dyn Embedder>,
}

impl fmt::Debug for Kb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kb").field("trees", &self.trees.len()).field("embedder", &self.index.embedder).finish()
    }
}

impl Kb {
    pub fn new(trees: Vec<Cgt>) -> Result<Self, KbError> {
        Self::with_embedder(trees, Arc::new(HashEmbedder::default()))
    }

    pub fn with_embedder(mut trees: Vec<Cgt>, embedder: Arc<dyn Embedder>) -> Result<Self, KbError> {
        trees.sort_by(|a, b| a.id.cmp(&b.id));
        let index = build_index(&trees, embedder.as_ref())?;
        Ok(Kb { trees, index, embedder })
    }

    /// Loads every `*.cgt.json` file in `dir`, in file name order.
    pub fn load_dir(dir: &Path) -> Result<Self, KbError> {
        Self::new(load_trees(dir)?)
    }

    pub fn trees(&self) -> &[Cgt] {
        &self.trees
    }

    pub fn get(&self, id: &str) -> Option<&Cgt> {
        self.trees.binary_search_by(|t| t.id.as_str().cmp(id)).ok().map(|i| &self.trees[i])
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    pub fn retrieve(&self, query: &str, k: usize) -> Result<Vec<Scored>, RetrievalError> {
        retrieve(&self.index, self.embedder.as_ref(), query, k)
    }
}

pub fn tree_files(dir: &Path) -> Result<Vec<PathBuf>, KbError> {
    let io = |source| KbError::Io { path: dir.to_path_buf(), source };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(TREE_SUFFIX)) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn read_tree(path: &Path) -> Result<Cgt, KbError> {
    let raw = std::fs::read_to_string(path).map_err(|source| KbError::Io { path: path.into(), source })?;
    let tree: Cgt = serde_json::from_str(&raw).map_err(|source| KbError::Json { path: path.into(), source })?;
    let report = validate_cgt(&tree);
    if !report.ok {
        return Err(KbError::Invalid { path: path.into(), violations: report.violations });
    }
    Ok(tree)
}

pub fn load_trees(dir: &Path) -> Result<Vec<Cgt>, KbError> {
    tree_files(dir)?.iter().map(|p| read_tree(p)).collect()
}
