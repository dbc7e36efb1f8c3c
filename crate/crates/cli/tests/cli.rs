use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use limitlens_cli::sha256_file;

fn limitlens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limitlens"))
        .current_dir(dir)
        .env_remove("LIMITLENS_CONFIG")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let name = e.unwrap().file_name().into_string().unwrap();
            let d = sha256_file(&dir.join(&name)).unwrap();
            (name, d)
        })
        .collect();
    v.sort();
    v
}

#[test]
fn synth_is_deterministic_and_guards_output() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    ok(&limitlens(t, &["synth", "--seed", "42", "--stocks", "5", "--days", "20", "-o", "a"]));
    ok(&limitlens(t, &["synth", "--seed", "42", "--stocks", "5", "--days", "20", "-o", "b"]));
    assert_eq!(digests(&t.join("a")), digests(&t.join("b")));

    let refused = limitlens(t, &["synth", "--seed", "1", "-o", "a"]);
    assert_eq!(refused.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));

    ok(&limitlens(t, &["synth", "--seed", "1", "--stocks", "5", "--days", "20", "-o", "a", "--force"]));
    assert_ne!(digests(&t.join("a")), digests(&t.join("b")));
}

#[test]
fn detect_counts_and_calendar_override() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    ok(&limitlens(
        t,
        &["synth", "--stocks", "1", "--days", "10", "--up-hit-prob", "1", "--down-hit-prob", "0", "--opening-hit-prob", "0", "-o", "data"],
    ));
    let stdout = ok(&limitlens(t, &["detect", "--data", "data", "-o", "out"]));
    assert!(stdout.contains("10 events"), "{stdout}");
    let events = fs::read_to_string(t.join("out/events.csv")).unwrap();
    assert_eq!(events.lines().count(), 11);
    assert!(events.lines().skip(1).all(|l| l.contains(",bullish,")));

    fs::write(t.join("cal.csv"), "start,end,state\n2006-01-01,2008-12-31,bearish\n").unwrap();
    ok(&limitlens(t, &["detect", "--data", "data", "-o", "out2", "--calendar", "cal.csv"]));
    let events = fs::read_to_string(t.join("out2/events.csv")).unwrap();
    assert!(events.lines().skip(1).all(|l| l.contains(",bearish,")));
}

#[test]
fn missing_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = limitlens(tmp.path(), &["detect", "--data", "nothing"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sessions found"));
}

fn fit_keys(path: &Path) -> Vec<(String, Option<String>, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (
                v["variant"].as_str().unwrap().to_string(),
                v["m"].as_str().map(String::from),
                v["link"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

#[test]
fn run_filters_and_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    ok(&limitlens(t, &["synth", "--stocks", "4", "--days", "10", "-o", "data"]));

    ok(&limitlens(t, &["run", "--data", "data", "-o", "full"]));
    for f in [
        "events.csv",
        "fits.jsonl",
        "aggregate_base.csv",
        "aggregate_suboptimal.csv",
        "aggregate_conditional.csv",
        "prehit_summary.csv",
        "suboptimal.csv",
        "delta_accuracy_hist.csv",
        "run_manifest.json",
    ] {
        assert!(t.join("full").join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.join("full/run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["study"]["alpha"], 0.05);
    assert!(manifest["inputs"]["ticks"].as_str().unwrap().len() == 64);

    ok(&limitlens(t, &["run", "--data", "data", "-o", "m7", "--variant", "conditional", "--m", "7"]));
    let keys = fit_keys(&t.join("m7/fits.jsonl"));
    assert!(!keys.is_empty());
    assert!(keys.iter().all(|k| *k == ("conditional".into(), Some("7".into()), "logit".into())));

    ok(&limitlens(t, &["run", "--data", "data", "-o", "probit", "--link", "probit"]));
    let keys = fit_keys(&t.join("probit/fits.jsonl"));
    assert!(keys.iter().all(|k| k.2 == "probit"));
    // seven probit fits per event against the default eight
    assert_eq!(keys.len() * 8, fit_keys(&t.join("full/fits.jsonl")).len() * 7);

    let report = ok(&limitlens(t, &["report", "full"]));
    assert!(report.contains("yield1"));
}

#[test]
fn config_file_env_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let dumped = ok(&limitlens(t, &["config"]));
    fs::write(t.join("study.toml"), dumped.replace("alpha = 0.05", "alpha = 0.1")).unwrap();

    let via_flag = ok(&limitlens(t, &["--config", "study.toml", "config", "--min-rows", "12"]));
    assert!(via_flag.contains("alpha = 0.1"));
    assert!(via_flag.contains("min_rows = 12"));

    let via_env = Command::new(env!("CARGO_BIN_EXE_limitlens"))
        .current_dir(t)
        .env("LIMITLENS_CONFIG", "study.toml")
        .args(["config", "--set", "study.features.min_rows=7"])
        .output()
        .unwrap();
    let text = ok(&via_env);
    assert!(text.contains("alpha = 0.1") && text.contains("min_rows = 7"));
    assert_eq!(ok(&limitlens(t, &["--config", "study.toml", "config"])), dumped.replace("alpha = 0.05", "alpha = 0.1"));

    let bad = limitlens(t, &["config", "--no-such-key", "3"]);
    assert!(!bad.status.success());
}
