// SPDX-License-Identifier: Apache-2.0
use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_agetrojan"))
}

fn write_config(dir: &Path, n_random: usize) -> std::path::PathBuf {
    let cfg = serde_json::json!({
        "name": "cli",
        "bench": {"kind": "MULT_SHIFT_ADD", "width": 8},
        "trojans": [{"archetype": "TRIG_LEAK", "trigger_const": "4'hb", "key_bits": "2'h2"}],
        "duties": [0, 100],
        "clock_fractions": [0.4, 0.7],
        "patterns": {"n_random": n_random},
        "k": 1, "B": 1, "seed": 3,
        "detector": {"h1": 8, "h2": 4, "train": {"epochs": 10}}
    });
    let p = dir.join("cfg.json");
    fs::write(&p, cfg.to_string()).unwrap();
    p
}

fn code(c: &mut Command) -> i32 {
    c.output().unwrap().status.code().unwrap()
}

#[test]
fn run_succeeds_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 500);
    let out = dir.path().join("out");
    let o = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("trojan0: accuracy"));
    for f in ["report.json", "scores.csv", "roc.csv", "heatmap.csv", "model.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn single_stages_chain_through_the_artifact_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 500);
    let out = dir.path().join("out");
    assert_eq!(code(bin().arg("gen-bench").arg("--config").arg(&cfg).arg("--out").arg(&out)), 0);
    // Later stages find the resolved config in the artifact directory.
    for stage in ["insert-trojan", "annotate", "sweep", "features", "train", "test", "report"] {
        assert_eq!(code(bin().arg(stage).arg("--out").arg(&out)), 0, "{stage}");
    }
    assert!(out.join("report.json").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 500);
    let out = dir.path().join("out");
    assert_eq!(code(bin().args(["gen-bench", "--seed", "99", "--config"]).arg(&cfg).arg("--out").arg(&out)), 0);
    let written: serde_json::Value = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(written["seed"], 99);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().arg("frobnicate")), 1);
    assert_eq!(code(bin().arg("run")), 1);
    let cfg = write_config(dir.path(), 500);
    assert_eq!(code(bin().args(["run", "--workers", "0", "--config"]).arg(&cfg)), 1);

    assert_eq!(code(bin().args(["run", "--config", "/nonexistent/cfg.json"])), 2);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"name": "x", "k": 0}"#).unwrap();
    assert_eq!(code(bin().args(["run", "--config"]).arg(&bad)), 2);
    // No upstream artifacts yet.
    assert_eq!(code(bin().arg("train").arg("--config").arg(&cfg).arg("--out").arg(&out)), 2);

    // Too few training bins fails inside the train stage.
    let tiny = write_config(dir.path(), 100);
    assert_eq!(code(bin().arg("run").arg("--config").arg(&tiny).arg("--out").arg(&out)), 3);
}
