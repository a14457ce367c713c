use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn efql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_efql"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("cfg.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SHORT_CHAIN: &str = r#"{"env": "chain", "episodes": 5, "max_steps": 30}"#;

#[test]
fn help_at_every_level() {
    for args in [&["--help"][..], &["train", "--help"], &["compare", "--help"], &["verify", "--help"]] {
        let out = efql(args);
        assert!(out.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn unknown_agent_exits_one_with_valid_list() {
    let out = efql(&["train", "--agent", "nope"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["enhanced-fql", "nstep-fql", "fuzzy-sarsa"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn bad_flag_and_bad_config_exit_one() {
    assert_eq!(efql(&["train", "--bogus"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"lambda": 1.5}"#);
    let out = efql(&["train", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda"));
    let missing = dir.path().join("missing.json");
    assert_eq!(efql(&["train", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"env": "chain", "episodes": 3, "max_steps": 50, "alpha": 1e308, "gamma": 1.0}"#,
    );
    let out_dir = dir.path().join("out");
    let out = efql(&["train", "--config", &cfg, "--seed", "0", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn train_writes_artifacts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_CHAIN);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = efql(&[
            "train", "--agent", "fuzzy-sarsa", "--config", &cfg, "--seed", "4,9", "--out",
            out_dir.to_str().unwrap(), "--svg",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for seed in [4, 9] {
        let name = format!("returns_fuzzy-sarsa_{seed}.csv");
        let csv = fs::read(a.join(&name)).unwrap();
        assert_eq!(csv, fs::read(b.join(&name)).unwrap());
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().next(), Some("episode,return,mean_abs_td,update_ms"));
    }
    assert!(a.join("learning_curve.svg").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert_eq!(summary["agents"][0]["agent"], "fuzzy-sarsa");
}

#[test]
fn episodes_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_CHAIN);
    let out_dir = dir.path().join("o");
    let out = efql(&["train", "--config", &cfg, "--episodes", "2", "--seed", "1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(out_dir.join("returns_enhanced-fql_1.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(!out_dir.join("learning_curve.svg").exists());
}

#[test]
fn compare_covers_exactly_three_agents() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SHORT_CHAIN);
    let out_dir = dir.path().join("cmp");
    let out = efql(&["compare", "--config", &cfg, "--seed", "0,1", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    let mut agents: Vec<String> = summary["agents"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["agent"].as_str().unwrap().to_string())
        .collect();
    agents.sort();
    assert_eq!(agents, ["enhanced-fql", "fuzzy-sarsa", "nstep-fql"]);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 6);
    assert!(out_dir.join("learning_curve.svg").exists());
}

#[test]
fn verify_passes() {
    let out = efql(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 8);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert_eq!(efql(&["verify", "--tol", "-1"]).status.code(), Some(1));
}
