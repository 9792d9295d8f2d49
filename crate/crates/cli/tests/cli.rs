use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(cache: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apdperm"))
        .args(args)
        .env("APDPERM_CACHE_DIR", cache)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().expect("a report line");
    serde_json::from_str(line).expect("json report")
}

#[test]
fn gen_embeds_a_verified_permutation() {
    let cache = tempfile::tempdir().unwrap();
    let out = run(cache.path(), &["gen", "22"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["command"].as_str().unwrap().starts_with("gen"));
    assert_eq!(r["n"], 22);
    assert_eq!(r["verified"], true);
    assert_eq!(r["preserved_count"], 0);
    assert_eq!(r["permutation"]["image"].as_array().unwrap().len(), 22);
}

#[test]
fn gen_rejects_small_primes() {
    let cache = tempfile::tempdir().unwrap();
    for n in ["2", "3", "5", "7", "0"] {
        let out = run(cache.path(), &["gen", n]);
        assert_eq!(out.status.code(), Some(2), "n = {n}");
        assert!(report(&out)["error"].is_string());
    }
}

#[test]
fn gen_then_verify_round_trip() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in ["json", "plain"] {
        let file = dir.path().join(format!("p.{format}"));
        let f = file.to_str().unwrap();
        let out = run(cache.path(), &["gen", "93", "--format", format, "--out", f]);
        assert_eq!(out.status.code(), Some(0));
        assert!(report(&out)["permutation"].is_null());
        let out = run(cache.path(), &["verify", f]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(report(&out)["preserved_count"], 0);
    }
}

#[test]
fn verify_reports_preserved_progressions() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("id.json");
    std::fs::write(&file, r#"{"n":6,"image":[0,1,2,3,4,5]}"#).unwrap();
    let out = run(cache.path(), &["verify", file.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(report(&out)["preserved_count"], 18);

    std::fs::write(&file, r#"{"n":3,"image":[0,1,1]}"#).unwrap();
    let out = run(cache.path(), &["verify", file.to_str().unwrap()]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn params_and_thresholds() {
    let cache = tempfile::tempdir().unwrap();
    let out = run(cache.path(), &["params", "7p", "67"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("\"t\":5"), "{text}");
    assert_eq!(run(cache.path(), &["params", "3p", "29"]).status.code(), Some(2));
    assert_eq!(run(cache.path(), &["params", "3p", "33"]).status.code(), Some(2));
}

#[test]
fn charsum_prints_csv() {
    let cache = tempfile::tempdir().unwrap();
    let out = run(cache.path(), &["charsum", "3p", "31", "60"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,id,sum,bound,pass"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.starts_with(char::is_numeric) && r.ends_with("true")));
    assert_eq!(run(cache.path(), &["charsum", "9p", "31", "60"]).status.code(), Some(2));
}

#[test]
fn descent_reports_failure_for_seven() {
    let cache = tempfile::tempdir().unwrap();
    let out = run(cache.path(), &["descent", "7", "--restarts", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(cache.path(), &["descent", "30", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["seed"], 4);
}

#[test]
fn abelian_gen_verify_and_refute() {
    let cache = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("g.json");
    let f = file.to_str().unwrap();
    let out = run(cache.path(), &["abelian", "3 x 3 x 5", "gen", "--out", f]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(cache.path(), &["abelian", "3 x 3 x 5", "verify", f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["preserved_count"], 0);

    let out = run(cache.path(), &["abelian", "2 x 2 x 3", "refute"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(run(cache.path(), &["abelian", "2 x 3", "gen"]).status.code(), Some(2));
}
