mod common;

use std::path::Path;
use std::process::{Command, Output};

fn concept(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concept"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    std::fs::write(
        &path,
        format!(
            "[backend]\nmode = \"replay\"\ncache = {:?}\n\n[run]\nmode = \"refine\"\nk_samples = 3\nentities_per_parameter = 2\nstatements_per_entity = 1\nsimilar_target = 4\nsimilar_minimum = 4\n",
            common::fixture_path().display().to_string()
        ),
    )
    .unwrap();
    path.display().to_string()
}

#[test]
fn refine_run_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let dataset = dir.path().join("coasts.jsonl");
    std::fs::write(&dataset, "{\"id\": \"miami-gold\", \"question\": \"Is Miami on the Gold Coast?\", \"answer\": \"no\"}\n").unwrap();
    let out = dir.path().join("out");
    let table = ok(&concept(&[
        "refine",
        "--config",
        &config,
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    assert!(table.starts_with("| System | coasts | All | All (pooled) | Exe.% |"), "{table}");
    assert!(table.contains("| refine | 100.0 | 100.0 | 100.0 | 100.0 |"), "{table}");
    assert!(out.join("traces/miami-gold.json").exists());

    let report = out.join("report.json");
    let csv = ok(&concept(&["report", report.to_str().unwrap(), "--format", "csv"]));
    assert!(csv.lines().nth(1).unwrap().starts_with("refine,coasts,1,0,1,3,3,"), "{csv}");
    let delta = ok(&concept(&[
        "report",
        report.to_str().unwrap(),
        "--baseline",
        report.to_str().unwrap(),
    ]));
    assert!(delta.contains("+0.0"), "{delta}");
}

#[test]
fn conceptualize_from_cache() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = ok(&concept(&["conceptualize", "--config", &config, "--question", "Is Miami on the Gold Coast?"]));
    let aq: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(aq["template_text"], "Is City X on Coast Y?");

    let aq_path = dir.path().join("aq.json");
    std::fs::write(&aq_path, out).unwrap();
    let set = ok(&concept(&["gen-similar", "--config", &config, "--abstract", aq_path.to_str().unwrap()]));
    let set: serde_json::Value = serde_json::from_str(&set).unwrap();
    assert_eq!(set["questions"].as_array().unwrap().len(), 4);
    assert_eq!(set["validated"], 5);
}

#[test]
fn unknown_question_is_a_replay_miss() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = concept(&["conceptualize", "--config", &config, "--question", "Is Paris in France?"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no cached response"));
}

#[test]
fn cache_inspect_counts_templates() {
    let fixture = common::fixture_path();
    let out = ok(&concept(&["cache-inspect", "--cache", fixture.to_str().unwrap()]));
    assert!(out.contains("records in"), "{out}");
    for t in ["conceptualize", "program", "cot", "ask_typed", "refine"] {
        assert!(out.lines().any(|l| l.trim_start().starts_with(t)), "{t} missing from {out}");
    }
    let dump = ok(&concept(&["cache-inspect", "--cache", fixture.to_str().unwrap(), "--template", "refine", "--dump"]));
    assert_eq!(dump.lines().count(), 1);
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[run]\nagreement_threshold = \"12/10\"\n").unwrap();
    let out = concept(&["conceptualize", "--config", path.to_str().unwrap(), "--question", "x?"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("agreement_threshold"));
}
