//! Per-department counts of the two tree kinds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cgt::TreeKind;
use crate::kb::{load_trees, KbError};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error("{path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
}

/// What stats needs to know about one tree. Extra manifest fields are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeSummary {
    pub id: String,
    pub kind: TreeKind,
    pub department: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub trees: Vec<TreeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub department: String,
    pub differential: u64,
    pub differential_pct: f64,
    pub treatment: u64,
    pub treatment_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
    pub total_differential: u64,
    pub total_treatment: u64,
    pub total: u64,
}

/// `count / total` in percent, rounded half up to one decimal, in tenths.
pub fn pct_tenths(count: u64, total: u64) -> u64 {
    if total == 0 {
        return 0;
    }
    (count * 2000 + total) / (2 * total)
}

pub fn stats(trees: &[TreeSummary]) -> Result<StatsTable, StatsError> {
    if trees.is_empty() {
        return Err(StatsError::EmptyKb);
    }
    let mut by_dept: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for t in trees {
        let e = by_dept.entry(t.department.as_str()).or_default();
        match t.kind {
            TreeKind::DifferentialDiagnosis => e.0 += 1,
            TreeKind::TreatmentSuggestion => e.1 += 1,
        }
    }
    let total_differential: u64 = by_dept.values().map(|c| c.0).sum();
    let total_treatment: u64 = by_dept.values().map(|c| c.1).sum();
    let mut rows: Vec<StatsRow> = by_dept
        .into_iter()
        .map(|(d, (a, b))| StatsRow {
            department: d.to_string(),
            differential: a,
            differential_pct: pct_tenths(a, total_differential) as f64 / 10.0,
            treatment: b,
            treatment_pct: pct_tenths(b, total_treatment) as f64 / 10.0,
        })
        .collect();
    rows.sort_by(|a, b| b.differential.cmp(&a.differential).then_with(|| a.department.cmp(&b.department)));
    Ok(StatsTable { rows, total_differential, total_treatment, total: total_differential + total_treatment })
}

/// Reads `manifest.json` when present, otherwise every tree file.
pub fn load_summaries(dir: &Path) -> Result<Vec<TreeSummary>, StatsError> {
    let manifest = dir.join(MANIFEST);
    if manifest.is_file() {
        let raw =
            std::fs::read_to_string(&manifest).map_err(|source| KbError::Io { path: manifest.clone(), source })?;
        let m: Manifest =
            serde_json::from_str(&raw).map_err(|source| StatsError::Manifest { path: manifest.clone(), source })?;
        return Ok(m.trees);
    }
    Ok(load_trees(dir)?.into_iter().map(|t| TreeSummary { id: t.id, kind: t.kind, department: t.department }).collect())
}

impl StatsTable {
    pub fn render(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.department.chars().count()).max().unwrap_or(0).max("Department".len());
        let mut out =
            format!("{:<name_w$}  {:>12}  {:>5}  {:>9}  {:>5}\n", "Department", "Differential", "%", "Treatment", "%");
        for r in &self.rows {
            out += &format!(
                "{:<name_w$}  {:>12}  {:>5.1}  {:>9}  {:>5.1}\n",
                r.department, r.differential, r.differential_pct, r.treatment, r.treatment_pct
            );
        }
        out += &format!(
            "{:<name_w$}  {:>12}  {:>5}  {:>9}  {:>5}\n",
            "Total", self.total_differential, "", self.total_treatment, ""
        );
        out += &format!("{:<name_w$}  {:>12}\n", "Overall", self.total);
        out
    }
}
