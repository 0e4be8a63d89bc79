use meddm_core::retrieval::{
    build_index, cosine, digest, embed_hash, embedded_text, fnv1a64, retrieve, RetrievalError,
};
use meddm_core::{Cgt, CgtNode, HashEmbedder, Kb, NodeKind, TreeKind, Vector};
use meddm_testkit::{cosine_reference, embed_reference, fixtures, fnv1a64_reference};
use proptest::prelude::*;
use sha2::{Digest, Sha256};

const TOL: f64 = 1e-9;

fn vec_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..64).prop_flat_map(|d| (prop::collection::vec(-1e3f64..1e3, d), prop::collection::vec(-1e3f64..1e3, d)))
}

proptest! {
    #[test]
    fn cosine_properties((a, b) in vec_strategy(), c in 1e-3f64..1e3) {
        let (x, y) = (Vector(a.clone()), Vector(b.clone()));
        let s = cosine(&x, &y).unwrap();
        prop_assert!((-1.0 - TOL..=1.0 + TOL).contains(&s));
        prop_assert!((s - cosine(&y, &x).unwrap()).abs() <= TOL);
        prop_assert!((s - cosine(&x.scaled(c), &y).unwrap()).abs() <= TOL);
        prop_assert!((s - cosine_reference(&a, &b)).abs() <= TOL);
        if x.norm() > 0.0 {
            prop_assert!((cosine(&x, &x).unwrap() - 1.0).abs() <= TOL);
        }
    }

    #[test]
    fn hash_embedding_matches_reference(text in "\\PC{0,60}", dim in 1usize..300) {
        let got = embed_hash(&text, dim).0;
        let want = embed_reference(&text, dim);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= TOL);
        }
    }

    #[test]
    fn fnv_matches_reference(s in "\\PC{0,40}") {
        prop_assert_eq!(fnv1a64(s.as_bytes()), fnv1a64_reference(&s));
    }
}

#[test]
fn cosine_edge_cases() {
    assert_eq!(cosine(&Vector::zeros(3), &Vector(vec![1.0, 2.0, 3.0])).unwrap(), 0.0);
    assert!(matches!(cosine(&Vector(vec![1.0]), &Vector(vec![1.0, 0.0])), Err(RetrievalError::DimMismatch { .. })));
}

fn hand_text(id: &str) -> &'static str {
    match id {
        "chest-pain" => "Chest pain Chest pain Pain radiates to the left arm? Pain worse when breathing in?",
        "dyspnea" => "Dyspnea Dyspnea Have any fever symptom? Productive cough? Chest pain on exertion?",
        "knee-pain" => "Knee pain Knee pain Swelling after an injury?",
        other => panic!("unexpected tree {other}"),
    }
}

#[test]
fn fixture_ranking_matches_hand_computation() {
    let kb = Kb::load_dir(&fixtures().join("kb")).unwrap();
    for t in kb.trees() {
        assert_eq!(embedded_text(t), hand_text(&t.id));
    }
    for e in &kb.index().entries {
        assert_eq!(e.digest, hex::encode(Sha256::digest(hand_text(&e.tree_id).as_bytes())));
    }
    for query in ["chest pain when breathing in", "short of breath with fever", "knee swelling", "headache"] {
        let q = embed_reference(query, 256);
        let mut want: Vec<(String, f64)> = ["chest-pain", "dyspnea", "knee-pain"]
            .iter()
            .map(|id| (id.to_string(), cosine_reference(&q, &embed_reference(hand_text(id), 256))))
            .collect();
        want.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let got = kb.retrieve(query, 3).unwrap();
        assert_eq!(
            got.iter().map(|s| s.tree_id.clone()).collect::<Vec<_>>(),
            want.iter().map(|w| w.0.clone()).collect::<Vec<_>>(),
            "{query}"
        );
        for (g, w) in got.iter().zip(&want) {
            assert!((g.score - w.1).abs() <= TOL);
        }
    }
    assert_eq!(kb.retrieve("chest pain when breathing in", 1).unwrap()[0].tree_id, "chest-pain");
    assert_eq!(kb.retrieve("fever and cough", 1).unwrap()[0].tree_id, "dyspnea");
    assert_eq!(kb.retrieve("knee", 1).unwrap()[0].tree_id, "knee-pain");
}

fn twin(id: &str) -> Cgt {
    Cgt {
        id: id.into(),
        title: "Same".into(),
        kind: TreeKind::TreatmentSuggestion,
        department: "d".into(),
        source: serde_json::Value::Null,
        nodes: vec![CgtNode::root(1, "same text"), CgtNode::child(2, NodeKind::Action, "do it", 1, "next")],
    }
}

#[test]
fn ties_go_to_the_smaller_id() {
    let trees = vec![twin("zeta"), twin("alpha"), twin("mid")];
    let e = HashEmbedder::default();
    let index = build_index(&trees, &e).unwrap();
    let got = retrieve(&index, &e, "same", 3).unwrap();
    assert_eq!(got.iter().map(|s| s.tree_id.as_str()).collect::<Vec<_>>(), ["alpha", "mid", "zeta"]);
    assert!(got.windows(2).all(|w| w[0].score == w[1].score));
    assert_eq!(retrieve(&index, &e, "same", 1).unwrap()[0].tree_id, "alpha");
    // a query sharing nothing scores 0 everywhere and still orders by id
    let none = retrieve(&index, &e, "unrelated", 2).unwrap();
    assert_eq!(none.iter().map(|s| s.score).collect::<Vec<_>>(), [0.0, 0.0]);
    assert_eq!(none[0].tree_id, "alpha");
}

#[test]
fn index_errors() {
    let e = HashEmbedder::default();
    assert!(matches!(build_index(&[], &e), Err(RetrievalError::EmptyKb)));
    assert!(matches!(build_index(&[twin("a"), twin("a")], &e), Err(RetrievalError::DuplicateTree(_))));
    let index = build_index(&[twin("a")], &e).unwrap();
    assert!(matches!(retrieve(&index, &e, "q", 0), Err(RetrievalError::InvalidK)));
    assert!(matches!(retrieve(&index, &HashEmbedder { dim: 8 }, "q", 1), Err(RetrievalError::EmbedderMismatch { .. })));
    assert_eq!(digest(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

#[test]
fn index_is_reproducible() {
    let a = Kb::load_dir(&fixtures().join("kb")).unwrap();
    let b = Kb::load_dir(&fixtures().join("kb")).unwrap();
    assert_eq!(serde_json::to_string(a.index()).unwrap(), serde_json::to_string(b.index()).unwrap());
}
