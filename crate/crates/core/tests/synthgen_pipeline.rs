use meddm_core::flowgraph::{is_flowchart_candidate, DEFAULT_MIN_SHAPES};
use meddm_core::synthgen::{gen_case, score, GenParams};
use meddm_core::{
    reconstruct, to_cgt, validate_cgt, LabelLexicon, ReconstructConfig, TransformConfig, TreeKind, TreeMeta,
};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jitter_free_cases_recover_exactly(seed in any::<u64>()) {
        let (det, truth) = gen_case(&GenParams::with_seed(seed)).unwrap();
        prop_assert!(det.problems().is_empty());
        prop_assert!(is_flowchart_candidate(&det, DEFAULT_MIN_SHAPES));
        let (g, warnings) = reconstruct(&det, &ReconstructConfig::default()).unwrap();
        prop_assert!(warnings.is_empty(), "{:?}", warnings);
        prop_assert_eq!(g, truth.graph);
    }

    #[test]
    fn reconstructed_graphs_transform_to_valid_trees(seed in any::<u64>(), jitter in 0.0f64..=2.0) {
        let (det, _) = gen_case(&GenParams { jitter, ..GenParams::with_seed(seed) }).unwrap();
        prop_assert!(det.problems().is_empty());
        let (g, _) = reconstruct(&det, &ReconstructConfig::default()).unwrap();
        let meta = TreeMeta {
            id: format!("syn-{seed}"),
            title: "synthetic".into(),
            kind: TreeKind::TreatmentSuggestion,
            department: "test".into(),
            source: serde_json::Value::Null,
        };
        let (tree, _) = to_cgt(&g, &meta, &LabelLexicon::default(), &TransformConfig::default()).unwrap();
        prop_assert!(validate_cgt(&tree).ok);
    }
}

#[test]
fn small_jitter_keeps_f1_high() {
    let (mut node, mut edge) = (0.0, 0.0);
    let n = 100;
    for seed in 0..n {
        let (det, truth) = gen_case(&GenParams { jitter: 2.0, ..GenParams::with_seed(seed) }).unwrap();
        let (g, _) = reconstruct(&det, &ReconstructConfig::default()).unwrap();
        let s = score(&truth.graph, &g);
        node += s.node_f1;
        edge += s.edge_f1;
    }
    assert!(node / n as f64 >= 0.99, "node F1 {}", node / n as f64);
    assert!(edge / n as f64 >= 0.99, "edge F1 {}", edge / n as f64);
}
