use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scorecusum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scorecusum"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = scorecusum(&["simulate", "--seed", "7", "--out", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ta = std::fs::read(a.join("trajectory.csv")).unwrap();
    let tb = std::fs::read(b.join("trajectory.csv")).unwrap();
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("x0,") && header.ends_with(",regime"), "{header}");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 500);
    // States 0..119 come from the pre-change kernel.
    assert_eq!(rows.iter().filter(|r| r.ends_with(",pre")).count(), 120);

    let manifest = std::fs::read_to_string(a.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 7"), "{manifest}");
    assert!(a.join("resolved_config.json").exists());
}

#[test]
fn simulate_zero_length_writes_header_only() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"trajectory": {"length": 0}}"#);
    let out = tmp.path().join("out");
    let o = scorecusum(&["simulate", "--config", &cfg, "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), r#"{"detector": {"threshhold": 5}}"#);
    let o = scorecusum(&["simulate", "--config", &cfg, "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("threshhold"), "{}", stderr(&o));
}

#[test]
fn bounds_prints_known_values() {
    let o = scorecusum(&["bounds", "--delta", "1", "--mu", "2", "--b", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("false_alarm_lower_bound = "))
        .expect("bound line")
        .parse()
        .unwrap();
    assert!((value - 6.96649).abs() < 1e-4, "{text}");

    let o = scorecusum(&["bounds", "--delta", "1", "--mu", "10", "--b", "100", "--post-drift", "5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("n0 = 22"), "{}", stdout(&o));
}

#[test]
fn bounds_rejects_threshold_below_mu() {
    let o = scorecusum(&["bounds", "--delta", "1", "--mu", "5", "--b", "4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("b > μ"), "{}", stderr(&o));
}

#[test]
fn bounds_writes_json_only_with_out() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("b");
    let o = scorecusum(&["bounds", "--delta", "1", "--mu", "2", "--b", "4", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("bounds.json").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn mocap_builds_a_spliced_scenario() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    let o = scorecusum(&[
        "mocap",
        "--pre",
        &fixture("walk.amc"),
        "--post",
        &fixture("jump.amc"),
        "--splice",
        "10",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scenario: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(scenario["dim"], 9);
    assert_eq!(scenario["states"], 10 + 16);
    assert_eq!(scenario["change_point"], 10);
}

#[test]
fn mocap_stride_halves_frames() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    let o = scorecusum(&["mocap", "--pre", &fixture("walk.amc"), "--stride", "2", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let scenario: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(scenario["states"], 12);
}

#[test]
fn mocap_rejects_mismatched_clips() {
    let tmp = TempDir::new().unwrap();
    let o = scorecusum(&[
        "mocap",
        "--pre",
        &fixture("walk.amc"),
        "--post",
        &fixture("upper_body.amc"),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn mocap_reports_parse_errors_with_path() {
    let tmp = TempDir::new().unwrap();
    let o = scorecusum(&["mocap", "--pre", &fixture("frame_gap.amc"), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("frame_gap.amc"), "{}", stderr(&o));
}

#[test]
fn missing_dataset_names_the_path() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nowhere.csv");
    let o = scorecusum(&["train", "--data", s(&missing), "--out", s(tmp.path())]);
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
}

#[test]
fn detect_with_identical_kernels_never_alarms() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"kernels": {"post": {"dim": 10, "alpha": 0.3, "sigma": 0.3, "shift": 0.2}}, "detector": {"threshold": 1}}"#,
    );
    let out = tmp.path().join("d");
    let o = scorecusum(&["detect", "--config", &cfg, "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let alarms: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("alarms.json")).unwrap()).unwrap();
    assert_eq!(alarms["alarms"].as_array().unwrap().len(), 0);
    assert!(alarms["first_alarm"].is_null());
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("n,score_diff,cusum_stat"));
    assert_eq!(trace.lines().count(), 1 + 499);
}

#[test]
fn detect_with_closed_form_scores_finds_the_change() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("d");
    let o = scorecusum(&["detect", "--seed", "3", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let alarms: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("alarms.json")).unwrap()).unwrap();
    assert_eq!(alarms["false_alarms_before_change"], 0);
    assert!(alarms["delay"].as_u64().unwrap() < 200);
}

#[test]
fn small_training_run_is_deterministic_and_loadable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{"architecture": {"hidden_widths": [8]},
            "training": {"pairs": 256, "eval_pairs": 64, "epochs": 2, "batch_size": 32}}"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = scorecusum(&["train", "--config", &cfg, "--regime", "post", "--seed", "5", "--out", s(dir)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let ma = std::fs::read(a.join("model_post.scn")).unwrap();
    assert_eq!(ma, std::fs::read(b.join("model_post.scn")).unwrap());
    assert_eq!(
        std::fs::read(a.join("loss_post.csv")).unwrap(),
        std::fs::read(b.join("loss_post.csv")).unwrap()
    );
    assert!(a.join("accuracy_post.json").exists());

    let model = scorecusum::scorenet::load_model(&a.join("model_post.scn")).unwrap();
    assert_eq!(scorecusum::score::ScoreField::dim(&model), 10);

    // The saved model drives detect.
    let path = a.join("model_post.scn");
    let out = tmp.path().join("d");
    let o = scorecusum(&[
        "detect",
        "--pre-model",
        s(&path),
        "--post-model",
        s(&path),
        "--truncation",
        "none",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("no alarm"), "{}", stdout(&o));
}

#[test]
fn corrupt_model_is_a_parse_error() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.scn");
    std::fs::write(&bad, b"not a model").unwrap();
    let o = scorecusum(&["detect", "--pre-model", s(&bad), "--post-model", s(&bad), "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let o = scorecusum(&["detect", "--truncation", "lots"]);
    assert_eq!(o.status.code(), Some(2));
    let o = scorecusum(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}
