use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

fn dsltrans(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsltrans")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn ndjson(o: &Output) -> Vec<serde_json::Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn cutoff_json_is_stable() {
    let f = fixture("property_has_field.dslt");
    let o = dsltrans(&["cutoff", f.to_str().unwrap(), "--property", "PropertyHasField"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("cutoff_property_has_field.json"));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["bounds"]["k"], 102);
}

#[test]
fn check_json_is_stable() {
    let f = fixture("tiny/layers.dslt");
    let o = dsltrans(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("check_layers.json"));
}

#[test]
fn verify_streams_verdicts_then_summary() {
    let f = fixture("uml2java.dslt");
    let o = dsltrans(&["verify", f.to_str().unwrap(), "--timeout", "600", "--dependency-mode", "trace-attr"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let events = ndjson(&o);
    assert_eq!(events.len(), 5);
    let last = events.last().unwrap();
    assert_eq!(last["event"], "summary");
    assert_eq!(last["total"], 4);
    for e in &events[..4] {
        assert_eq!(e["event"], "verdict");
        for key in ["property", "status", "k", "perClassMax", "dominant", "fragment", "timeSec", "cegarRounds", "reason", "counterexample"] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
    }
    let status = |name: &str| events.iter().find(|e| e["property"] == name).unwrap()["status"].clone();
    assert_eq!(status("PackageHasPackageDeclaration"), "HOLDS");
    assert_eq!(status("ClassMappedToInterfaceDeclaration_ShouldFail"), "VIOLATED");
}

#[test]
fn unexpected_violation_exits_one() {
    let f = fixture("tiny/join.dslt");
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(f).unwrap().replace("AHasX_ShouldFail", "AHasX");
    let spec = dir.path().join("join.dslt");
    std::fs::write(&spec, text).unwrap();
    let o = dsltrans(&["verify", spec.to_str().unwrap(), "--property", "AHasX"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(ndjson(&o)[0]["status"], "VIOLATED");
}

#[test]
fn unknown_verdict_exits_two() {
    let f = fixture("stress.dslt");
    let o = dsltrans(&["verify", f.to_str().unwrap(), "--timeout", "0.01", "--no-per-class", "--fragment", "full"]);
    assert_eq!(o.status.code(), Some(2));
    let events = ndjson(&o);
    assert_eq!(events[0]["status"], "UNKNOWN");
    assert_eq!(events[0]["reason"], "timeout");
}

#[test]
fn text_format_and_parallel_workers() {
    let f = fixture("tiny/backward.dslt");
    let o = dsltrans(&["verify", f.to_str().unwrap(), "--format", "text", "--parallel", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("OwnedCHasCD"));
    assert!(out.lines().last().unwrap().starts_with("4 properties: 3 holds, 1 violated, 0 unknown"));
}

#[test]
fn option_flags_are_accepted() {
    let f = fixture("tiny/copy.dslt");
    let dump = tempfile::tempdir().unwrap();
    let o = dsltrans(&[
        "verify",
        f.to_str().unwrap(),
        "--fragment",
        "baseline",
        "--monolithic",
        "--incremental",
        "--eager-closure",
        "--symmetry-break",
        "--dependency-mode",
        "legacy",
        "--dump-smt",
        dump.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_dir(dump.path()).unwrap().count() >= 3);
}

#[test]
fn run_on_empty_model_gives_empty_target() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    let out = dir.path().join("out.json");
    std::fs::write(&input, "{}").unwrap();
    let f = fixture("uml2java.dslt");
    let o = dsltrans(&["run", f.to_str().unwrap(), "--model", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["elements"].as_array().unwrap().len(), 0);
    assert_eq!(v["links"].as_array().unwrap().len(), 0);
}

#[test]
fn run_executes_rules() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.json");
    std::fs::write(&input, r#"{"elements":[{"id":"p","type":"P"},{"id":"c","type":"C"}],"links":[{"assoc":"owns","src":"p","tgt":"c"}]}"#).unwrap();
    let f = fixture("tiny/backward.dslt");
    let o = dsltrans(&["run", f.to_str().unwrap(), "--model", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["elements"].as_array().unwrap().len(), 2);
    assert_eq!(v["links"][0]["assoc"], "pkg");
}

#[test]
fn malformed_inputs_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dslt");
    std::fs::write(&bad, "metamodel S { class A { x: Nope } ").unwrap();
    let o = dsltrans(&["verify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.dslt:1:"));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "[[[").unwrap();
    let f = fixture("tiny/copy.dslt");
    let o = dsltrans(&["run", f.to_str().unwrap(), "--model", garbage.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));

    assert_eq!(dsltrans(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(dsltrans(&["verify"]).status.code(), Some(3));
    assert_eq!(dsltrans(&["verify", f.to_str().unwrap(), "--fragment", "huge"]).status.code(), Some(3));
    assert_eq!(dsltrans(&["verify", f.to_str().unwrap(), "--property", "Missing"]).status.code(), Some(3));
    assert_eq!(dsltrans(&["verify", f.to_str().unwrap(), "--parallel", "0"]).status.code(), Some(3));
}

#[test]
fn sidecar_settings_apply_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("copy.dslt");
    std::fs::copy(fixture("tiny/copy.dslt"), &spec).unwrap();
    std::fs::write(dir.path().join("dsltrans.toml"), "format = \"text\"\ntimeout = 30\nper-class = false\n").unwrap();
    let o = dsltrans(&["verify", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("3 properties"));
    let o = dsltrans(&["verify", spec.to_str().unwrap(), "--format", "json"]);
    assert_eq!(ndjson(&o).len(), 4);

    std::fs::write(dir.path().join("dsltrans.toml"), "colour = \"blue\"\n").unwrap();
    let o = dsltrans(&["verify", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn abstract_writes_spec_and_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("proof.dslt");
    let f = fixture("uml2java.dslt");
    let o = dsltrans(&["abstract", f.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let proof = std::fs::read_to_string(&out).unwrap();
    assert!(proof.contains("String{\"\"}"));
    let map: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("proof.dslt.map.json")).unwrap()).unwrap();
    assert_eq!(map["report"]["valid"], true);
    let again = dsltrans(&["check", out.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
}

#[test]
fn kboundary_reports_each_phase() {
    let f = fixture("tight_bound.dslt");
    let o = dsltrans(&["kboundary", f.to_str().unwrap(), "--property", "SourceHasTwoTD_ShouldFail"]);
    assert_eq!(o.status.code(), Some(0));
    let r = &ndjson(&o)[0];
    assert_eq!(r["sweep"]["matched"], true);
    assert_eq!(r["perturbation"]["matched"], true);
    let o = dsltrans(&["kboundary", f.to_str().unwrap(), "--format", "text"]);
    assert!(stdout(&o).starts_with("# K-boundary validation"));
}
