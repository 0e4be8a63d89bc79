use meddm_core::engine::{answer, start, start_on, EngineConfig, EngineError, KeywordJudge, ScriptedJudge};
use meddm_core::{Cgt, Event, Kb, Status};
use meddm_testkit::{fixtures, leaf_texts};

fn kb() -> Kb {
    Kb::load_dir(&fixtures().join("kb")).unwrap()
}

fn judge(name: &str) -> ScriptedJudge {
    let raw = std::fs::read_to_string(fixtures().join("judges").join(name)).unwrap();
    ScriptedJudge::from_json(&raw).unwrap()
}

fn dyspnea(kb: &Kb) -> &Cgt {
    kb.get("dyspnea").unwrap()
}

const COMPLAINT: &str = "I get short of breath when walking";
const ASK: &str = r#"{"type":"ask","node_id":2,"question":"Regarding your condition: Have any fever symptom? — which applies: yes/no? If unsure, say 'I don't know'."}"#;
const CAP: &str = r#"{"type":"diagnosis","node_id":4,"text":"Community-acquired pneumonia: chest X-ray and blood count","path":[{"node_id":1,"label":null},{"node_id":2,"label":"next"},{"node_id":3,"label":"yes"},{"node_id":4,"label":"yes"}]}"#;

fn lines(xs: &[&str]) -> String {
    xs.iter().map(|l| format!("{l}\n")).collect()
}

#[test]
fn all_match_goes_straight_to_diagnosis() {
    let kb = kb();
    let (s, ev) = start_on(dyspnea(&kb), "s1", COMPLAINT, &judge("all_match.json"), &EngineConfig::default()).unwrap();
    assert!(matches!(ev, Event::Diagnosis { node_id: 4, .. }));
    assert_eq!(s.status, Status::Diagnosed);
    assert_eq!(
        s.transcript(),
        lines(&[
            r#"{"type":"moved","node_id":2}"#,
            r#"{"type":"moved","node_id":3}"#,
            r#"{"type":"moved","node_id":4}"#,
            CAP
        ])
    );
}

#[test]
fn unable_then_answer_then_diagnosis() {
    let kb = kb();
    let j = judge("ask_then_match.json");
    let (mut s, ev) = start_on(dyspnea(&kb), "s2", COMPLAINT, &j, &EngineConfig::default()).unwrap();
    assert!(matches!(ev, Event::Ask { node_id: 2, .. }));
    assert_eq!(s.status, Status::AwaitingAnswer);
    let ev = answer(&mut s, dyspnea(&kb), &j, "yes, a little").unwrap();
    assert!(matches!(ev, Event::Diagnosis { node_id: 4, .. }));
    assert_eq!(
        s.transcript(),
        lines(&[
            r#"{"type":"moved","node_id":2}"#,
            ASK,
            r#"{"type":"moved","node_id":3}"#,
            r#"{"type":"moved","node_id":4}"#,
            CAP
        ])
    );
    assert_eq!(s.history.len(), 3);
    assert_eq!(answer(&mut s, dyspnea(&kb), &j, "again"), Err(EngineError::WrongState(Status::Diagnosed)));
}

#[test]
fn dont_know_gives_subtree_hypotheses() {
    let kb = kb();
    let j = judge("unable.json");
    let tree = dyspnea(&kb);
    let (mut s, _) = start_on(tree, "s3", COMPLAINT, &j, &EngineConfig::default()).unwrap();
    let ev = answer(&mut s, tree, &j, "I don't know").unwrap();
    let Event::Hypotheses { node_id, ieet, candidates } = ev else { panic!("expected hypotheses") };
    assert_eq!(node_id, 2);
    assert_eq!(candidates, leaf_texts(tree, 2));
    assert_eq!(
        ieet,
        "TREE: Have any fever symptom?
    IF Have any fever symptom? == yes:
        IF Productive cough? == yes:
            ACTION: Community-acquired pneumonia: chest X-ray and blood count
        ELIF Productive cough? == no:
            ACTION: Viral respiratory infection: supportive care
    ELIF Have any fever symptom? == no:
        IF Chest pain on exertion? == yes:
            ACTION: Angina pectoris: ECG and troponin
        ELIF Chest pain on exertion? == no:
            ACTION: Asthma or COPD: spirometry
"
    );
    assert_eq!(s.status, Status::Hypothesized);
    let last = s.transcript().lines().last().unwrap().to_string();
    assert!(last.starts_with(r#"{"type":"hypotheses","node_id":2,"ieet":"TREE: Have any fever symptom?\n"#));
    assert!(last.ends_with(
        r#""candidates":["Community-acquired pneumonia: chest X-ray and blood count","Viral respiratory infection: supportive care","Angina pectoris: ECG and troponin","Asthma or COPD: spirometry"]}"#
    ));
}

#[test]
fn transcripts_are_deterministic() {
    let kb = kb();
    let run = || {
        let j = judge("ask_then_match.json");
        let (mut s, _) = start_on(dyspnea(&kb), "same", COMPLAINT, &j, &EngineConfig::default()).unwrap();
        answer(&mut s, dyspnea(&kb), &j, "yes").unwrap();
        s.transcript()
    };
    assert_eq!(run(), run());
}

#[test]
fn retrieval_picks_the_tree_when_none_is_given() {
    let kb = kb();
    let (s, ev) = start(&kb, "r", "dyspnea and fever", None, &KeywordJudge, &EngineConfig::default()).unwrap();
    assert_eq!(s.tree_id, "dyspnea");
    assert!(!matches!(ev, Event::Moved { .. }));
    assert_eq!(
        start(&kb, "r", "x", Some("nope"), &KeywordJudge, &EngineConfig::default()).unwrap_err(),
        EngineError::UnknownTree("nope".into())
    );
    assert_eq!(
        start(&kb, "r", "  ", None, &KeywordJudge, &EngineConfig::default()).unwrap_err(),
        EngineError::EmptyComplaint
    );
}

#[test]
fn keyword_judge_follows_answers() {
    let kb = kb();
    let tree = dyspnea(&kb);
    let (mut s, ev) = start_on(tree, "k", COMPLAINT, &KeywordJudge, &EngineConfig::default()).unwrap();
    assert!(matches!(ev, Event::Ask { node_id: 2, .. }));
    let ev = answer(&mut s, tree, &KeywordJudge, "no").unwrap();
    // the same reply also settles the next question
    assert!(matches!(ev, Event::Diagnosis { node_id: 8, .. }), "{ev:?}");
}

#[test]
fn second_unable_on_a_node_ends_in_hypotheses() {
    let kb = kb();
    let tree = dyspnea(&kb);
    let j = judge("unable.json");
    let (mut s, _) = start_on(tree, "u", COMPLAINT, &j, &EngineConfig::default()).unwrap();
    let ev = answer(&mut s, tree, &j, "it comes and goes").unwrap();
    assert!(matches!(ev, Event::Hypotheses { node_id: 2, .. }));
    assert_eq!(s.status, Status::Hypothesized);
}

#[test]
fn turn_limit_stops_the_dialogue() {
    let kb = kb();
    let tree = dyspnea(&kb);
    let j = judge("unable.json");
    let (mut s, ev) = start_on(tree, "t", COMPLAINT, &j, &EngineConfig { turn_limit: 2 }).unwrap();
    assert!(matches!(ev, Event::Ask { node_id: 2, .. }));
    let ev = answer(&mut s, tree, &j, "it comes and goes").unwrap();
    assert!(matches!(ev, Event::Hypotheses { node_id: 2, .. }));
    assert_eq!(s.status, Status::Exhausted);
}

#[test]
fn transcripts_match_trace_files() {
    let kb = kb();
    let tree = dyspnea(&kb);
    let expected = |name: &str| std::fs::read_to_string(fixtures().join("traces").join(name)).unwrap();

    let (s, _) = start_on(tree, "a", COMPLAINT, &judge("all_match.json"), &EngineConfig::default()).unwrap();
    assert_eq!(s.transcript(), expected("all_match.jsonl"));

    let j = judge("ask_then_match.json");
    let (mut s, _) = start_on(tree, "b", COMPLAINT, &j, &EngineConfig::default()).unwrap();
    answer(&mut s, tree, &j, "yes").unwrap();
    assert_eq!(s.transcript(), expected("ask_then_match.jsonl"));

    let j = judge("unable.json");
    let (mut s, _) = start_on(tree, "c", COMPLAINT, &j, &EngineConfig::default()).unwrap();
    answer(&mut s, tree, &j, "I don't know").unwrap();
    assert_eq!(s.transcript(), expected("unable.jsonl"));
}
