use std::path::Path;
use std::process::{Command, Output};

fn chandis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chandis")).args(args).env("CHANDIS_THREADS", "1").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn dir_arg(d: &Path) -> String {
    d.to_str().unwrap().to_string()
}

#[test]
fn diamond_eb_single_use() {
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&["diamond", "--channel-a", "eb-A", "--channel-b", "eb-B", "--p", "1", "--output-dir", &dir_arg(d.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o).lines().find(|l| l.starts_with("p_diamond")).unwrap().to_string();
    let value: f64 = line.split_whitespace().last().unwrap().parse().unwrap();
    assert!((value - 0.9268).abs() < 1e-3, "{line}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 2);
    assert_eq!(manifest["config"]["subcommand"], "diamond");
}

#[test]
fn seed_gives_identical_csvs() {
    let run = |d: &Path| {
        let o = chandis(&[
            "discriminate", "--strategy", "sequential", "--p", "2", "--l", "1", "--restarts", "3",
            "--channel-a", "eb-a", "--channel-b", "eb-b", "--seed", "7", "--no-timing", "--output-dir", &dir_arg(d),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(d.join("discriminate.csv")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (x, y) = (run(a.path()), run(b.path()));
    assert_eq!(x, y);
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("strategy,p,r,l,alpha0,alpha1,restart,best_value,iters,seconds\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn kernel_outputs_are_deterministic() {
    let run = |d: &Path| {
        let o = chandis(&[
            "classify-kernel", "--intervals", "i2", "--n-train", "40", "--n-test", "50", "--seed", "7",
            "--output-dir", &dir_arg(d),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(d.join("classify_kernel.csv")).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(run(a.path()), run(b.path()));
}

#[test]
fn missing_required_value_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&["diamond", "--channel-a", "eb-a", "--output-dir", &dir_arg(d.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("channel-b"));
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let o = chandis(&["diamond", "--frobnicate", "3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_config_key_is_named() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "channel-a = \"eb-a\"\nchannel-b = \"eb-b\"\nwarp-factor = 9\n").unwrap();
    let o = chandis(&["diamond", "--config", cfg.to_str().unwrap(), "--output-dir", &dir_arg(d.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("warp-factor"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.toml");
    std::fs::write(&cfg, "subcommand = \"diamond\"\nchannel-a = \"eb-a\"\nchannel-b = \"eb-b\"\np = 1\nrestarts = 3\n").unwrap();
    let out = d.path().join("o");
    let o = chandis(&["diamond", "--config", cfg.to_str().unwrap(), "--restarts", "2", "--output-dir", &dir_arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let saved = std::fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(saved.contains("restarts = 2"), "{saved}");
    let rows = std::fs::read_to_string(out.join("diamond_restarts.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);

    // The saved resolved config reproduces the run.
    let again = d.path().join("again");
    let o = chandis(&["diamond", "--config", out.join("config.toml").to_str().unwrap(), "--output-dir", &dir_arg(&again)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(out.join("diamond.csv")).unwrap(), std::fs::read(again.join("diamond.csv")).unwrap());
}

#[test]
fn runtime_contract_error_exits_1() {
    // Dimension mismatch between the two channels surfaces from the library.
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&["diamond", "--channel-a", "identity:2", "--channel-b", "identity:4", "--output-dir", &dir_arg(d.path())]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn bad_channel_is_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&["diamond", "--channel-a", "dep:1.5", "--channel-b", "eb-b", "--output-dir", &dir_arg(d.path())]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn analyze_writes_alpha_headers() {
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&["analyze", "--alphas", "0,0.5,1", "--p", "1", "--diamond-restarts", "2", "--output-dir", &dir_arg(d.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(d.path().join("trace_map.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "alpha0\\alpha1,0,0.5,1");
    assert_eq!(lines.count(), 3);
    let dmap = std::fs::read_to_string(d.path().join("diamond_map.csv")).unwrap();
    let diag: Vec<f64> = dmap
        .lines()
        .skip(1)
        .enumerate()
        .map(|(i, l)| l.split(',').nth(i + 1).unwrap().parse().unwrap())
        .collect();
    assert!(diag.iter().all(|v| (v - 0.5).abs() < 1e-9), "{diag:?}");
}

#[test]
fn classify_var_single_cell() {
    let d = tempfile::tempdir().unwrap();
    let o = chandis(&[
        "classify-var", "--ansatz", "u2", "--alpha0", "0.1", "--alpha1", "0.9", "--n-train", "200", "--n-test", "200",
        "--restarts", "2", "--output-dir", &dir_arg(d.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.path().join("classify_var.csv")).unwrap();
    assert!(csv.starts_with("ansatz,alpha0,alpha1,train_acc,test_acc,b,seconds\n"));
    let test_acc: f64 = csv.lines().nth(1).unwrap().split(',').nth(4).unwrap().parse().unwrap();
    assert!(test_acc > 0.9, "{csv}");
}
