use std::fs;

use meddm_core::kb::{load_trees, KbError};
use meddm_core::stats::{load_summaries, stats, StatsError};
use meddm_core::Kb;
use meddm_testkit::fixtures;

#[test]
fn table_one_totals() {
    let summaries = load_summaries(&fixtures().join("table1")).unwrap();
    let t = stats(&summaries).unwrap();
    assert_eq!((t.total_differential, t.total_treatment, t.total), (443, 759, 1202));
    assert_eq!(t.rows.len(), 12);
    assert_eq!(t.rows[0].department, "Department of Internal medicine");
    assert_eq!((t.rows[0].differential, t.rows[0].treatment), (167, 36));
    let text = t.render();
    let total = text.lines().find(|l| l.starts_with("Total")).unwrap();
    assert!(total.contains("443") && total.contains("759"));
    assert!(text.lines().last().unwrap().ends_with("1202"));
    // counts per row sum to the totals
    assert_eq!(t.rows.iter().map(|r| r.differential).sum::<u64>(), 443);
    assert_eq!(t.rows.iter().map(|r| r.treatment).sum::<u64>(), 759);
}

#[test]
fn stats_from_tree_files() {
    let t = stats(&load_summaries(&fixtures().join("kb")).unwrap()).unwrap();
    assert_eq!((t.total_differential, t.total_treatment, t.total), (2, 1, 3));
}

#[test]
fn empty_dir_is_empty_kb() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(stats(&load_summaries(dir.path()).unwrap()), Err(StatsError::EmptyKb)));
    assert!(Kb::load_dir(dir.path()).is_err());
}

#[test]
fn invalid_tree_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let good = fs::read_to_string(fixtures().join("kb/knee-pain.cgt.json")).unwrap();
    fs::write(dir.path().join("a.cgt.json"), good.replace("\"parent_id\": 2", "\"parent_id\": 9")).unwrap();
    assert!(matches!(load_trees(dir.path()), Err(KbError::Invalid { .. })));
    fs::write(dir.path().join("a.cgt.json"), "{").unwrap();
    assert!(matches!(load_trees(dir.path()), Err(KbError::Json { .. })));
    fs::write(dir.path().join("a.cgt.json"), &good).unwrap();
    fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(load_trees(dir.path()).unwrap().len(), 1);
}

#[test]
fn fixture_kb_loads_sorted() {
    let kb = Kb::load_dir(&fixtures().join("kb")).unwrap();
    let ids: Vec<_> = kb.trees().iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids, ["chest-pain", "dyspnea", "knee-pain"]);
    assert!(kb.get("dyspnea").is_some());
    assert!(kb.get("nope").is_none());
}
