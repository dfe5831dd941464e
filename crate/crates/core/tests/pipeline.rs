//! End-to-end runs through the library and the binary.

mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use turnpilot::experiment::{RunDir, STAGE_FILES};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_turnpilot"));
    for (k, _) in std::env::vars() {
        if k.starts_with("TURNPILOT_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn cli_run(dir: &Path) -> String {
    let run = dir.join("run");
    let r = run.to_str().unwrap().to_string();
    ok(bin()
        .args(["ingest", "--run", &r, "--input"])
        .arg(common::fixture("nq_fixture.jsonl"))
        .output()
        .unwrap());
    ok(bin().args(["truncate", "--run", &r]).output().unwrap());
    ok(bin()
        .args(["generate", "--run", &r, "--recorded"])
        .arg(common::fixture("recorded_responses.jsonl"))
        .output()
        .unwrap());
    ok(bin()
        .args(["score", "--run", &r, "--embedder", "deterministic"])
        .output()
        .unwrap());
    ok(bin().args(["analyze", "--run", &r]).output().unwrap());
    r
}

#[test]
fn cli_and_library_runs_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let r = cli_run(a.path());
    let lib = common::fixture_pipeline(b.path());
    let cli = RunDir::new(&r);
    // corpus.jsonl differs only if the source path differs, which it does
    // not; every stage file must match byte for byte.
    for name in STAGE_FILES {
        assert_eq!(
            std::fs::read(cli.path(name)).unwrap(),
            std::fs::read(lib.path(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(cli.digest().unwrap(), lib.digest().unwrap());
}

#[test]
fn rerunning_generate_reuses_everything() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli_run(dir.path());
    let out = ok(bin()
        .args(["generate", "--run", &r, "--recorded"])
        .arg(common::fixture("recorded_responses.jsonl"))
        .output()
        .unwrap());
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(summary["requested"], 0);
    assert_eq!(summary["reused"], summary["total"]);
}

#[test]
fn flag_beats_env_beats_file_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let r = run.to_str().unwrap();
    ok(bin()
        .args(["ingest", "--run", r, "--input"])
        .arg(common::fixture("nq_fixture.jsonl"))
        .output()
        .unwrap());
    let config = dir.path().join("turnpilot.toml");
    std::fs::write(&config, "[corpus]\nlevels = \"0,1\"\n").unwrap();
    let levels = || RunDir::new(&run).manifest().unwrap().levels;

    ok(bin().args(["truncate", "--run", r]).output().unwrap());
    assert_eq!(levels(), vec![0, 1, 2, 3]);
    ok(bin()
        .args(["truncate", "--run", r])
        .env("TURNPILOT_CONFIG", &config)
        .output()
        .unwrap());
    assert_eq!(levels(), vec![0, 1]);
    ok(bin()
        .args(["truncate", "--run", r])
        .env("TURNPILOT_CONFIG", &config)
        .env("TURNPILOT_LEVELS", "0,2")
        .output()
        .unwrap());
    assert_eq!(levels(), vec![0, 2]);
    ok(bin()
        .args(["truncate", "--run", r, "--levels", "0,3"])
        .env("TURNPILOT_CONFIG", &config)
        .env("TURNPILOT_LEVELS", "0,2")
        .output()
        .unwrap());
    assert_eq!(levels(), vec![0, 3]);
}

#[test]
fn unknown_config_key_is_a_usage_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[corpus]\nlevels = \"0,1\"\nlevles = \"0\"\n").unwrap();
    let out = bin()
        .args(["truncate", "--run", "x", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("levles") && err.contains("line 3"), "{err}");
}

#[test]
fn missing_stage_outputs_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["report", "--run"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for f in ["scores.jsonl", "labels.jsonl", "stats.json"] {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn every_report_format_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli_run(dir.path());
    for (format, first) in [("csv", "bin_lo"), ("json", "{"), ("svg", "<svg")] {
        let out = ok(bin()
            .args(["report", "--run", &r, "--format", format])
            .output()
            .unwrap());
        assert_eq!(out.lines().count(), 3);
        for path in out.lines() {
            let text = std::fs::read_to_string(path).unwrap();
            assert!(path.ends_with(format));
            if path.contains("histogram") {
                assert!(
                    text.starts_with(first),
                    "{path}: {}",
                    &text[..40.min(text.len())]
                );
            }
        }
    }
    let retained = std::fs::read_to_string(Path::new(&r).join("figures/retained.csv")).unwrap();
    assert_eq!(
        retained.lines().next(),
        Some("level,late_uninformative,late_informative,total,fraction")
    );
    assert_eq!(retained.lines().count(), 4);
}

#[test]
fn train_then_simulate_with_filler_policy() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli_run(dir.path());
    let out = ok(bin().args(["train", "--run", &r]).output().unwrap());
    let summary: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(summary["train_instances"].as_u64().unwrap() > 0);
    let model = Path::new(&r).join("model.json");
    assert!(model.is_file());
    let out = ok(bin()
        .args(["simulate", "--run", &r, "--policy", "filler", "--model"])
        .arg(&model)
        .output()
        .unwrap());
    let s: serde_json::Value = serde_json::from_str(&out).unwrap();
    let fill = s["filler_rate"].as_f64().unwrap();
    let prefix = s["prefix_answer_rate"].as_f64().unwrap();
    assert!((fill + prefix - 1.0).abs() < 1e-12, "{s}");
    let csv = std::fs::read_to_string(Path::new(&r).join("simulation/filler-0.8-paper-groq.csv"))
        .unwrap();
    assert_eq!(csv.lines().count(), 51);

    let out = bin()
        .args(["simulate", "--run", &r, "--policy", "filler"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn classify_streams_one_record_per_word() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("m.json");
    ok(bin()
        .args(["train", "--synthetic", "400", "--out"])
        .arg(&model)
        .output()
        .unwrap());
    let mut child = bin()
        .args(["classify", "--stream", "--model"])
        .arg(&model)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"who\nwrote\nthe\nsong\n")
        .unwrap();
    let out = ok(child.wait_with_output().unwrap());
    let records: Vec<serde_json::Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 4);
    assert_eq!(records[3]["word"], "song");
    assert!(records.iter().filter(|r| r["fired"] == true).count() <= 1);
    let single = ok(bin()
        .args(["classify", "--model"])
        .arg(&model)
        .args(["who", "wrote", "the", "song"])
        .output()
        .unwrap());
    let single: serde_json::Value = serde_json::from_str(&single).unwrap();
    assert_eq!(single["score"], records[3]["score"]);
}

#[test]
fn profiles_load_from_toml_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = cli_run(dir.path());
    let profile = dir.path().join("slowasr.toml");
    std::fs::write(&profile, "name = \"slowasr\"\nasr_commit = \"slow_final\"\nllm_per_token_ms = 4.0\nllm_worst_case_ms = 250.0\n")
        .unwrap();
    let out = ok(bin()
        .args(["simulate", "--run", &r, "--policy", "serial", "--profile"])
        .arg(&profile)
        .output()
        .unwrap());
    let s: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(s["mean_gap_ms"], 2000.0 + 240.0 + 100.0);
    let out = bin()
        .args([
            "simulate",
            "--run",
            &r,
            "--policy",
            "serial",
            "--profile",
            "nope",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
