// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::Path;
use std::process::Command;

use rudder::cli::{self, RunConfig, PRESETS};
use rudder::steer::SteerMode;

fn small_generate() -> RunConfig {
    let mut cfg = cli::preset("toy-biased").unwrap();
    cfg.task.n_scenes = 12;
    cfg
}

fn body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn zero_strength_generations_match_off() {
    let dir = tempfile::tempdir().unwrap();
    let off = small_generate();
    let mut zero = off.clone();
    zero.steer.gate.alpha_max = 0.0;
    let off = RunConfig {
        steer: off.steer.with_mode(SteerMode::Off),
        ..off
    };
    cli::cmd_generate(&off, &dir.path().join("off")).unwrap();
    cli::cmd_generate(&zero, &dir.path().join("zero")).unwrap();
    let a = body(&dir.path().join("off/generations.jsonl"));
    let b = body(&dir.path().join("zero/generations.jsonl"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn eval_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_generate();
    let outcome = cli::cmd_eval(&cfg, dir.path()).unwrap();
    assert!(outcome.passed.is_some());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("eval.json")).unwrap()).unwrap();
    for key in [
        "config_hash",
        "seed",
        "engine_version",
        "steer_mode",
        "strategy",
        "n_scenes",
        "vanilla",
        "steered",
        "chair_s_relative_reduction",
        "recall_floor",
        "recall_gate_passed",
    ] {
        assert!(v.get(key).is_some(), "eval.json lacks {key}");
    }
    for side in ["vanilla", "steered"] {
        for key in ["chair_s", "chair_i", "recall"] {
            assert!(v[side][key].is_number(), "{side}.{key}");
        }
    }
    assert_eq!(v["config_hash"], cfg.config_hash());
}

#[test]
fn presets_parse_validate_and_roundtrip() {
    for name in PRESETS {
        let p = cli::preset(name).unwrap();
        p.validate().unwrap();
        let back = RunConfig::from_json_str(&p.to_json_pretty()).unwrap();
        assert_eq!(back, p, "{name}");
        assert_eq!(back.config_hash(), p.config_hash());
    }
    assert!(cli::preset("nope").is_err());
}

#[test]
fn output_dir_does_not_change_the_hash() {
    let a = cli::preset("bench").unwrap();
    let mut b = a.clone();
    b.output.dir = "elsewhere".into();
    assert_eq!(a.config_hash(), b.config_hash());
    b.seed = 1;
    assert_ne!(a.config_hash(), b.config_hash());
}

fn rudder() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rudder"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"preset":"toy-biased","steer":{"gate":{"kk":1}}}"#).unwrap();
    let out = rudder().args(["eval", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kk"));

    let good = dir.path().join("good.json");
    std::fs::write(&good, r#"{"preset":"toy-biased","task":{"n_scenes":10}}"#).unwrap();
    let out = rudder()
        .args(["eval", "--assert", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/eval.json").exists());
    assert!(dir.path().join("run/run.log").exists());

    let out = rudder().args(["preset", "llava-like"]).output().unwrap();
    assert!(out.status.success());
    RunConfig::from_json_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
}
