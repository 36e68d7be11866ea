use std::fs;
use std::process::Command;

fn kadsim() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_kadsim"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn lists_and_prints_scenarios() {
    let out = kadsim().arg("scenarios").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 13 && text.contains("real-adversary-concentrated"));

    let out = kadsim().args(["scenarios", "square-dht"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("app = \"dht\""));

    let out = kadsim().args(["scenarios", "nowhere"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn simulate_writes_outputs_from_a_printed_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let printed = kadsim()
        .args(["scenarios", "square-uniform"])
        .output()
        .unwrap()
        .stdout;
    let toml = String::from_utf8(printed)
        .unwrap()
        .replacen("rounds = 20000000", "rounds = 500", 1)
        .replacen("nodes = 512", "nodes = 48", 1)
        .replacen("known_peers = 256", "known_peers = 30", 1);
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, toml).unwrap();
    let out_dir = dir.path().join("out");
    let out = kadsim()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "4"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in [
        "per_query.csv",
        "summary.json",
        "paths.json",
        "kadabra/per_epoch.csv",
    ] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 4"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\nbogus = 1\n").unwrap();
    let out = kadsim()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            kadsim::harness::ScenarioConfig::load(&path).unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
