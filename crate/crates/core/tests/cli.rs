use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavefront"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], scenario: &Path, out: &Path) -> Output {
    bin().args(args).arg("--scenario").arg(scenario).arg("--out").arg(out).output().unwrap()
}

#[test]
fn validate_builtin_models() {
    let out = bin().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["decoupled", "aw-rascle", "ld-ld"] {
        assert!(text.contains(name), "{name} missing from:\n{text}");
    }
    assert!(!text.contains("FAILED"));
}

#[test]
fn run_writes_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let s = scenario("aw_rascle_random.toml");
    for k in ["a", "b"] {
        let out = run(&["run"], &s, &dir.path().join(k));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["events.csv", "trajectories.csv", "metrics.json", "scenario.toml"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert!(!a.is_empty(), "{f}");
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("a/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["violations"], 0);
    assert_eq!(metrics["model"], "aw-rascle");
}

#[test]
fn overrides_apply_and_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--seed", "11", "--nu", "4", "--horizon", "0.5", "--scenario"])
        .arg(scenario("aw_rascle_random.toml"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let written = fs::read_to_string(dir.path().join("scenario.toml")).unwrap();
    assert!(written.contains("seed = 11"), "{written}");
    assert!(written.contains("nu = 4"), "{written}");
    assert!(written.contains("horizon = 0.5"), "{written}");
}

#[test]
fn every_example_scenario_runs_its_experiment() {
    let cases = [
        ("converge", "decoupled_riemann.toml", "converge.csv"),
        ("stability", "aw_rascle_random.toml", "metrics.json"),
        ("decay", "aw_rascle_decay.toml", "metrics.json"),
        ("sensitivity", "ld_ld_sensitivity.toml", "integral_shift_0.csv"),
        ("epsilon-shock", "aw_rascle_epsilon_shock.toml", "metrics.json"),
        ("characteristics", "aw_rascle_random.toml", "characteristics.csv"),
    ];
    for (cmd, file, artifact) in cases {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&[cmd], &scenario(file), dir.path());
        assert!(out.status.code() == Some(0) || out.status.code() == Some(1), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(dir.path().join(artifact).exists(), "{cmd}: {artifact} missing");
    }
}

#[test]
fn bad_scenario_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "model = \"decoupled\"\nhorizon = 1.0\ntypo = 3\n[grid]\nnu = 2\n[data]\nkind = \"random\"\njumps = 3\nx_min = 0.0\nx_max = 1.0\n").unwrap();
    let out = run(&["run"], &path, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: scenario"), "{err}");
    assert!(err.contains("typo"), "{err}");
}

#[test]
fn unknown_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.toml");
    fs::write(&path, "model = \"euler\"\nhorizon = 1.0\n[grid]\nnu = 2\n[data]\nkind = \"breakpoints\"\nxs = []\nstates = [[0.5, 0.5]]\n").unwrap();
    let out = run(&["run"], &path, &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}
