use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn dcnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcnet")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_ok_and_parse_error() {
    let out = dcnet(&["validate", s(&data("faces.kb"))]);
    assert_eq!(out.status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kb");
    fs::write(&bad, "concept a\nconcept b\nrelation r kind=HAS_COMPONENT a=a b=b pba=1.5\n").unwrap();
    let out = dcnet(&["validate", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn fit_reproduces_golden_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("out.trace");
    let out = dcnet(&["fit", "--kb", s(&data("faces.kb")), "--scenario", s(&data("faces.scenario")), "--trace", s(&trace)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&trace).unwrap(), fs::read(data("faces.trace")).unwrap());
}

#[test]
fn failed_expectation_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let sc = dir.path().join("wrong.scenario");
    let text = fs::read_to_string(data("faces.scenario")).unwrap() + "expect egg status=collapsed\n";
    fs::write(&sc, text).unwrap();
    let out = dcnet(&["fit", "--kb", s(&data("faces.kb")), "--scenario", s(&sc)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn interrupted_fit_resumes_to_same_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (kb, sc) = (data("faces.kb"), data("faces.scenario"));
    let session = dir.path().join("run.session");
    let (first, second) = (dir.path().join("a.trace"), dir.path().join("b.trace"));
    let args = |trace: &Path, extra: &[&str]| {
        let mut v = vec!["fit", "--kb", s(&kb), "--scenario", s(&sc), "--session", s(&session)];
        v.extend_from_slice(&["--trace"]);
        v.push(trace.to_str().unwrap());
        v.extend_from_slice(extra);
        v.into_iter().map(String::from).collect::<Vec<_>>()
    };
    let run = |a: Vec<String>| Command::new(env!("CARGO_BIN_EXE_dcnet")).args(a).output().unwrap();
    assert_eq!(run(args(&first, &["--steps", "2"])).status.code(), Some(0));
    assert_eq!(run(args(&second, &[])).status.code(), Some(0));
    let joined = fs::read_to_string(&first).unwrap() + &fs::read_to_string(&second).unwrap();
    assert_eq!(joined, fs::read_to_string(data("faces.trace")).unwrap());
}

#[test]
fn match_prints_membership() {
    let dir = tempfile::tempdir().unwrap();
    let frag = dir.path().join("frag.scenario");
    fs::write(&frag, "input eye p=1 as=e\ninput nose p=1 as=n\n").unwrap();
    let out = dcnet(&["match", "--kb", s(&data("faces.kb")), "--fragment", s(&frag), "--base", "face"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("membership="), "{text}");
    assert!(text.contains("eye <- e"));
}

#[test]
fn query_binds_variable() {
    let dir = tempfile::tempdir().unwrap();
    let kb = dir.path().join("people.kb");
    fs::write(&kb, "concept person\nconcept age\nconcept tom\nconcept n15 value=15\nbelong tom person\nbelong n15 age\nrelation tom-age kind=HAS_ATTRIBUTE a=tom b=n15\n").unwrap();
    let t = dir.path().join("q.scenario");
    fs::write(&t, "input tom p=1 as=t\ninput age var=true as=x\nrelation q kind=HAS_ATTRIBUTE a=t b=x\n").unwrap();
    let out = dcnet(&["query", "--kb", s(&kb), "--template", s(&t)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("answers=1"), "{text}");
    assert!(text.contains("x=n15"), "{text}");
}

#[test]
fn learn_writes_kb() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    fs::create_dir(&scenes).unwrap();
    for i in 0..3 {
        fs::write(
            scenes.join(format!("{i:02}.scenario")),
            "input p1 p=1 as=a\ninput p2 p=1 as=b\nrelation r kind=ADJOINING a=a b=b\n",
        )
        .unwrap();
    }
    let empty = dir.path().join("empty.kb");
    fs::write(&empty, "").unwrap();
    let out_kb = dir.path().join("learned.kb");
    let out = dcnet(&["learn", "--kb", s(&empty), "--scenes", s(&scenes), "--out", s(&out_kb)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("created=1"));
    let learned = fs::read_to_string(&out_kb).unwrap();
    assert!(learned.contains("tree learned#1"), "{learned}");
    assert_eq!(dcnet(&["validate", s(&out_kb)]).status.code(), Some(0));
}

#[test]
fn query_reasons_over_dialogue() {
    let (kb, store, q) = (data("dialogue.kb"), data("dialogue.store"), data("country.query"));
    let base = ["query", "--kb", s(&kb), "--store", s(&store)];
    let mut direct = base.to_vec();
    direct.extend(["--template", s(&q)]);
    let out = dcnet(&direct);
    assert!(String::from_utf8_lossy(&out.stdout).contains("answers=0"));
    let mut reasoned = direct.clone();
    reasoned.extend(["--max-steps", "2"]);
    let out = dcnet(&reasoned);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("answers=1"), "{text}");
    assert!(text.contains("via [") && !text.contains("via []"), "{text}");
}
