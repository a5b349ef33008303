use std::path::Path;
use std::process::{Command, Output};

use mvalloc::config::RunConfig;
use mvalloc::env::Mode;

fn mvalloc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvalloc"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_policy_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvalloc(dir.path(), &["eval", "--policy", "greedy"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("unknown policy `greedy`"));
}

#[test]
fn learned_eval_needs_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvalloc(dir.path(), &["eval", "--policy", "drl"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint"));
    let missing = dir.path().join("nope.ckpt");
    let o = mvalloc(dir.path(), &["eval", "--policy", "drl", "--checkpoint", missing.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn bad_config_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[env]\nhorizon = \"long\"\n").unwrap();
    let o = mvalloc(dir.path(), &["eval", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("invalid configuration"));
    let o = mvalloc(dir.path(), &["eval", "--set", "env.reward.threshold=1.5"]);
    assert!(!o.status.success());
}

#[test]
fn capsweep_rejects_noncoop() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvalloc(dir.path(), &["capsweep", "--set", "env.mode=noncoop"]);
    assert!(!o.status.success());
}

/// The configuration embedded in a report resolves back to itself.
#[test]
fn report_embeds_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    std::fs::write(&cfg_path, "seed = 11\n[env]\nmode = \"coop\"\nmsps = 4\n").unwrap();
    let out = dir.path().join("out");
    let o = mvalloc(
        &out,
        &["eval", "--config", cfg_path.to_str().unwrap(), "--policy", "myopic-gcp", "--threshold", "0.67", "--episodes", "1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.starts_with("mvalloc eval\nseed: 11\n"));
    let body = report
        .split("# resolved configuration\n\n")
        .nth(1)
        .and_then(|r| r.split("\n# results").next())
        .unwrap();
    let cfg = RunConfig::resolve(Some(body), &[], Mode::Noncoop).unwrap();
    assert_eq!(cfg.seed, 11);
    assert_eq!(cfg.env.mode, Mode::Coop);
    assert_eq!(cfg.env.msps, 4);
    assert_eq!(cfg.env.reward.threshold, 0.67);
    assert_eq!(cfg.policy, "myopic-gcp");
    assert_eq!(cfg.to_toml().unwrap(), body);

    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let header = metrics.lines().next().unwrap();
    assert!(header.starts_with("label,policy,msps,horizon,seed,episode,"));
    assert_eq!(metrics.lines().count(), 2);
    let trace = std::fs::read_to_string(out.join("trace.ndjson")).unwrap();
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["t"], 0);
    assert_eq!(first["msps"].as_array().unwrap().len(), 4);
}

#[test]
fn trained_checkpoint_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("agent.ckpt");
    let small = ["--set", "train_episodes=4", "--set", "agent.rollout_length=50", "--set", "agent.hidden=[8,8]", "--horizon", "25", "--episodes", "1"];
    let mut args = vec!["train", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend_from_slice(&small);
    let o = mvalloc(&dir.path().join("train"), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = std::fs::read_to_string(dir.path().join("train/curve.csv")).unwrap();
    assert!(curve.starts_with("episode,reward,completion,fulfillment,cost\n"));
    assert_eq!(curve.lines().count(), 5);
    assert!(&std::fs::read(&ckpt).unwrap()[..8] == b"MVAPPO\0\0");

    let mut args = vec!["eval", "--policy", "drl", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend_from_slice(&small);
    let o = mvalloc(&dir.path().join("eval"), &args);
    assert!(o.status.success(), "{}", stderr(&o));

    // a checkpoint for one MSP does not fit three
    let mut args = vec!["eval", "--policy", "drl", "--msps", "1", "--checkpoint", ckpt.to_str().unwrap()];
    args.extend_from_slice(&small);
    let o = mvalloc(&dir.path().join("eval1"), &args);
    assert!(!o.status.success());
}

#[test]
fn sweep_covers_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = mvalloc(
        dir.path(),
        &["sweep", "--episodes", "1", "--set", "sweep.policies=[\"saving\",\"max\"]"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut keys: Vec<(String, String, String)> = metrics
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].to_string(), f[3].to_string())
        })
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 2 * 3 * 3);
}
