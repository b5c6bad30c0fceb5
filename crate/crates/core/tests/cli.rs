use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cogperc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cogperc"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) {
    let out = cogperc(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL: &[&str] = &[
    "--preset",
    "fig5b",
    "--scale",
    "0.1",
    "--set",
    "sources=2",
    "--set",
    "horizon=60",
];

#[test]
fn flood_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    let run = |dir: &Path, workers: &str| {
        let mut args = vec![
            "flood",
            "--seed",
            "7",
            "--workers",
            workers,
            "--out",
            dir.to_str().unwrap(),
        ];
        args.extend_from_slice(SMALL);
        ok(&args);
    };
    run(&a, "1");
    run(&b, "4");
    for f in [
        "flood.csv",
        "ratio_curve.csv",
        "bands.csv",
        "runs.csv",
        "summary.json",
    ] {
        assert_eq!(read(&a, f), read(&b, f), "{f}");
    }
    let summary = a.join("summary.json");
    ok(&[
        "flood",
        "--config",
        summary.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(read(&a, "flood.csv"), read(&c, "flood.csv"));
    assert_eq!(read(&a, "summary.json"), read(&c, "summary.json"));
    assert!(read(&a, "flood.csv").starts_with("node_id,x_km,y_km,distance_km,arrival_s,status\n"));
}

#[test]
fn summary_keys_sorted_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["flood", "--out", tmp.path().to_str().unwrap()];
    args.extend_from_slice(SMALL);
    ok(&args);
    let v: serde_json::Value = serde_json::from_str(&read(tmp.path(), "summary.json")).unwrap();
    let cfg = v["config"].as_object().unwrap();
    let keys: Vec<&String> = cfg.keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(!cfg.contains_key("workers") && !cfg.contains_key("out"));
    assert_eq!(v["seed"], cfg["seed"]);
    assert_eq!(cfg["primary_density"], 50.0);
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("never");
    let out = cogperc(&[
        "flood",
        "--set",
        "secondary_density=0",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("secondary_density"));
    assert!(!out_dir.exists());

    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "secondary_density = 700\nwarp_factor = 9\n").unwrap();
    let out = cogperc(&[
        "phase",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warp_factor"));
    assert!(!out_dir.exists());

    let out = cogperc(&[
        "tail",
        "--preset",
        "fig9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());
}

#[test]
fn config_file_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small grid\nphase_secondary = 700\nphase_primary = 10\nphase_trials = 2\nwindow_half = 0.5\nseed = 3\n").unwrap();
    let out = tmp.path().join("o");
    ok(&[
        "phase",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    let v: serde_json::Value = serde_json::from_str(&read(&out, "summary.json")).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["result"]["cells"].as_array().unwrap().len(), 1);
    assert_eq!(read(&out, "phase.csv").lines().count(), 2);
}

#[test]
fn other_commands_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |n: &str| tmp.path().join(n).to_str().unwrap().to_string();
    ok(&[
        "tail",
        "--preset",
        "fig5b",
        "--set",
        "tail_trials=60",
        "--out",
        &d("t"),
    ]);
    assert!(read(&tmp.path().join("t"), "tail.csv").starts_with("h_km,hits,trials,survival\n"));
    ok(&[
        "hopdelay",
        "--preset",
        "fig5a",
        "--set",
        "hop_trials=300",
        "--out",
        &d("h"),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("h"), "summary.json")).unwrap();
    assert!(v["result"]["p_value"].is_number());
    ok(&[
        "critical",
        "--preset",
        "critical",
        "--set",
        "critical_trials=20",
        "--set",
        "critical_windows=1,2",
        "--out",
        &d("c"),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&read(&tmp.path().join("c"), "summary.json")).unwrap();
    assert!(v["result"]["lambda_c_hat"].is_number());
}
