use std::path::PathBuf;
use std::process::Command;

use rfcw::interface::RunConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rfcw"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("rfcw-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn write_config(dir: &PathBuf, body: &str) -> PathBuf {
    let p = dir.join("run.conf");
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn predict_and_exact_write_records() {
    let dir = scratch("ok");
    let cfg = write_config(&dir, "[model]\nN = 40\nbeta = 1.5\n[partition]\nblocks = 2\n");
    for cmd in ["landscape", "predict", "exact", "bounds"] {
        let out = bin().args(["--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", "3", cmd]).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join(format!("{cmd}.json"))).unwrap()).unwrap();
        assert_eq!(rec["command"], cmd);
        assert_eq!(rec["config"]["seed"], 3);
    }
    assert!(dir.join("landscape.csv").exists());
    assert!(dir.join("lumped_edges.csv").exists());
    assert!(dir.join("timing.json").exists());
}

#[test]
fn domain_error_exits_with_two() {
    let dir = scratch("domain");
    let cfg = write_config(&dir, "[model]\nN = 40\nbeta = 0.5\n");
    let out = bin().args(["--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "predict"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_input_exits_with_one() {
    let dir = scratch("bad");
    let out = bin().args(["--config", dir.join("missing.conf").to_str().unwrap(), "predict"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let cfg = write_config(&dir, "[model]\nunknown = 1\n");
    let out = bin().args(["--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "predict"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn shipped_config_round_trips() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/example.conf");
    let cfg = RunConfig::load(&path).unwrap();
    let again = RunConfig::parse(&cfg.to_text()).unwrap();
    assert_eq!(cfg.to_text(), again.to_text());
    assert_eq!(cfg.blocks, 2);
    assert_eq!(cfg.sizes, vec![100, 200, 400, 800]);
}
