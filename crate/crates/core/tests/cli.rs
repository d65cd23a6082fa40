use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ceremony(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ceremony"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn corpus_file(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("corpus")
        .join(rel)
        .display()
        .to_string()
}

#[test]
fn validate_accepts_corpus_file() {
    let out = ceremony(&["validate", &corpus_file("flight-boarding-i/ceremony.cer")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_reports_location_of_syntax_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.cer");
    fs::write(
        &path,
        "ceremony \"x\" {\n  role H human \"h\"\n  role S technical \"s\";\n}\n",
    )
    .unwrap();
    let out = ceremony(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("broken.cer:2:"), "{err}");
}

#[test]
fn validate_reports_semantic_findings() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cer");
    fs::write(
        &path,
        "ceremony \"x\" {\n  role H human \"h\";\n  channel n network between H Z;\n}\n",
    )
    .unwrap();
    assert_eq!(code(&ceremony(&["validate", path.to_str().unwrap()])), 3);
}

#[test]
fn honest_run_succeeds_and_reports_goals() {
    let out = ceremony(&["run", "flight-boarding-i"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("steps completed: 7"), "{text}");
    assert!(
        text.contains("goal boarding-authorization: satisfied"),
        "{text}"
    );
}

#[test]
fn violating_run_exits_one() {
    let out = ceremony(&[
        "run",
        "flight-boarding-i",
        "--scenario",
        "wrong-gate",
        "--mutation",
        "skip_check:A@5",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("VIOLATED"));
}

#[test]
fn ill_targeted_mutation_is_an_input_error() {
    let out = ceremony(&["run", "flight-boarding-i", "--mutation", "skip_check:A@0"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn unknown_entry_is_an_input_error() {
    let out = ceremony(&["run", "no-such-ceremony"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("flight-boarding-i"));
}

#[test]
fn run_json_is_parseable() {
    let out = ceremony(&["run", "whatsapp-web-current", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["events"].as_array().is_some_and(|e| !e.is_empty()));
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 3);
}

#[test]
fn msc_draws_one_arrow_per_step() {
    let out = ceremony(&["run", "flight-boarding-ii", "--format", "msc"]);
    assert_eq!(code(&out), 0);
    assert_eq!(ceremonies::dsl::arrow_count(&stdout(&out)), 7);
}

#[test]
fn explore_finds_wrong_flight_with_oracle_check() {
    let out = ceremony(&[
        "explore",
        "flight-boarding-i",
        "--scenario",
        "wrong-gate",
        "--kinds",
        "skip_check",
        "--no-capabilities",
        "--oracle-check",
    ]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.contains("1 minimal violation"), "{text}");
    assert!(text.contains("skip_check:A@5"), "{text}");
}

#[test]
fn explore_without_violations_exits_zero() {
    let out = ceremony(&["explore", "flight-boarding-iv", "--max-mutations", "2"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn explore_bound_is_enforced() {
    let out = ceremony(&["explore", "flight-boarding-i", "--max-mutations", "7"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&ceremony(&["frobnicate"])), 2);
    assert_eq!(code(&ceremony(&["run"])), 2);
}

#[test]
fn score_matches_table1() {
    let out = ceremony(&["score", "--corpus", "--golden", "table1"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn score_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let golden = fs::read_to_string(corpus_file("golden/table1.json")).unwrap();
    let path = dir.path().join("table.json");
    fs::write(&path, golden.replacen("\"✓?\"", "\"✓\"", 1)).unwrap();
    let out = ceremony(&["score", "--corpus", "--golden", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(
        stdout(&out).contains("expected ✓, got ✓?"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn corpus_list_json() {
    let out = ceremony(&["corpus", "list", "--format", "json"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let ids: Vec<&str> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["id"].as_str().unwrap())
        .collect();
    assert_eq!(ids.len(), 14);
    assert!(ids.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn goldens_are_fresh() {
    assert_eq!(code(&ceremony(&["export", "--check"])), 0);
}

#[test]
fn export_check_detects_stale_goldens() {
    let dir = tempfile::tempdir().unwrap();
    let entry = dir.path().join("flight-boarding-iv");
    fs::create_dir(&entry).unwrap();
    for f in ["ceremony.cer", "goals.json", "scenario-honest.json"] {
        fs::copy(
            corpus_file(&format!("flight-boarding-iv/{f}")),
            entry.join(f),
        )
        .unwrap();
    }
    let root = dir.path().to_str().unwrap();
    assert_eq!(
        code(&ceremony(&["--corpus-dir", root, "export", "--check"])),
        1
    );
    assert_eq!(code(&ceremony(&["--corpus-dir", root, "export"])), 0);
    assert!(entry.join("golden/trace-honest.json").is_file());
    assert_eq!(
        code(&ceremony(&["--corpus-dir", root, "export", "--check"])),
        0
    );
}
