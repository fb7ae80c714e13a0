use std::path::Path;
use std::process::{Command, Output};

const DETECT: &str = r#"
task = "detection"
output = "out.csv"

[network]
layer_sizes = [6, 4, 3, 2]
fanout = 1
capacity_range = [1, 5]

[detection]
settings = [1, 2]
"#;

const ESTIMATE: &str = r#"
task = "estimation"
runs = 50

[network]
layer_sizes = [6, 8, 5, 3]
fanout = 2
capacity_range = [1, 6]

[estimation]
dim = 2
weak_count = 2
alphas = [1.0, 0.3]
noise_half_width = 0.1
range = { lo = -5.0, hi = 5.0 }
"#;

const SOLVE: &str = r#"
network = "net.json"

[[utilities]]
kind = "exponential_decay"
weight = 4.0

[[utilities]]
kind = "exponential_decay"
weight = 1.0

[[utilities]]
kind = "linear"
slope = 0.01
"#;

fn infoflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_infoflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn infoflow")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = infoflow(
        d,
        &["generate", "--layers", "3,3,2,2", "--fanout", "2", "--capacity-range", "1,4", "--seed", "5", "--output", "net.json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(d.join("net.json").exists());

    std::fs::write(d.join("solve.toml"), SOLVE).unwrap();
    let out = infoflow(d, &["solve", "--config", "solve.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("sensor,real_rate,integral_rate"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn generate_prints_json_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = infoflow(dir.path(), &["generate", "--layers", "2,2,2,2", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.is_object());
}

#[test]
fn detect_writes_configured_output() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("d.toml"), DETECT).unwrap();
    let out = infoflow(dir.path(), &["detect", "--config", "d.toml"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert!(csv.starts_with("method,setting,"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn estimate_is_deterministic_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("e.toml"), ESTIMATE).unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["estimate", "--config", "e.toml"];
        args.extend_from_slice(extra);
        let out = infoflow(d, &args);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out.stdout
    };
    let a = run(&[]);
    assert_eq!(a, run(&[]));
    assert_ne!(a, run(&["--seed", "9"]));
    assert_ne!(a, run(&["--runs", "7"]));
    assert_eq!(run(&["--seed", "9"]), run(&["--seed", "9"]));
}

#[test]
fn curves_writes_one_file_per_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        r#"
task = "curves"
[curves]
max_rate = 3
[[curves.pairs]]
name = "g"
h0 = { family = "gaussian", mean = 0.0, variance = 1.0 }
h1 = { family = "gaussian", mean = 2.0, variance = 1.0 }
"#,
    )
    .unwrap();
    let out = infoflow(d, &["curves", "--config", "c.toml", "--output", "cv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(d.join("cv/g.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn exit_codes_separate_usage_config_and_io() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&infoflow(d, &["solve"])), 2);
    assert_eq!(code(&infoflow(d, &["generate", "--layers", "3,3,2"])), 3);

    std::fs::write(d.join("d.toml"), DETECT).unwrap();
    let wrong_verb = infoflow(d, &["estimate", "--config", "d.toml"]);
    assert_eq!(code(&wrong_verb), 3);

    std::fs::write(d.join("bad.toml"), DETECT.replace("fanout", "fan_out")).unwrap();
    assert_eq!(code(&infoflow(d, &["detect", "--config", "bad.toml"])), 3);

    let missing = infoflow(d, &["detect", "--config", "nope.toml"]);
    assert_eq!(code(&missing), 5);
    let msg = stderr(&missing);
    assert_eq!(msg.matches("No such file").count(), 1, "{msg}");

    let unwritable = infoflow(d, &["detect", "--config", "d.toml", "--output", "no/such/dir/x.csv"]);
    assert_eq!(code(&unwritable), 5);
}
