//! Exit codes, config errors and report edge cases, exercised through the
//! built binary.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gplab")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gplab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn config_errors_exit_2() {
    let dir = tmp_dir("cfg");
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{ "n_schedule": [] }"#).unwrap();
    let out = Command::new(bin())
        .args(["kl-rate", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("n_schedule must be nonempty"), "{msg}");

    let out = Command::new(bin())
        .args(["posterior", "--preset", "no-such-preset"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_truth_exits_2_and_lists_names() {
    let dir = tmp_dir("truth");
    let bad = dir.join("cfg.json");
    std::fs::write(&bad, r#"{ "truth": "wiggle" }"#).unwrap();
    let out = Command::new(bin())
        .args(["kl-rate", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("smooth-sin"), "{msg}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn report_without_manifest_exits_3() {
    let dir = tmp_dir("nomanifest");
    let out = Command::new(bin())
        .args(["report", "--out", dir.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn report_marks_missing_sections_and_flags_corrupt_csv() {
    let dir = tmp_dir("report");
    // run only the kl-rate study
    let status = Command::new(bin())
        .args([
            "kl-rate",
            "--preset",
            "smoke",
            "--out",
            dir.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let status = Command::new(bin())
        .args(["report", "--out", dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(dir.join("report.md")).unwrap();
    assert!(report.contains("| anchor-constant |"));
    assert!(report.contains("_not run_"), "missing sections must be marked");

    // corrupt the artifact and re-render: the section must carry a diagnostic
    std::fs::write(dir.join("kl_rate.csv"), "model,theta_id\nbinary\n").unwrap();
    let status = Command::new(bin())
        .args(["report", "--out", dir.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(dir.join("report.md")).unwrap();
    assert!(
        report.contains("artifact problem"),
        "corrupt CSV must be flagged: {report}"
    );
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn flag_overrides_take_precedence() {
    let dir = tmp_dir("override");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{ "master_seed": 1, "kl_random_thetas": 2, "quadrature_nodes": 16, "grid_nodes": 33 }"#)
        .unwrap();
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    for (out, seed) in [(&out_a, "5"), (&out_b, "5")] {
        let status = Command::new(bin())
            .args([
                "kl-rate",
                "--config",
                cfg.to_str().unwrap(),
                "--seed",
                seed,
                "--out",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(out_a.join("kl_rate.csv")).unwrap();
    let b = std::fs::read(out_b.join("kl_rate.csv")).unwrap();
    assert_eq!(a, b);

    // a different seed changes the prior draws
    let out_c = dir.join("c");
    let status = Command::new(bin())
        .args([
            "kl-rate",
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "6",
            "--out",
            out_c.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let c = std::fs::read(out_c.join("kl_rate.csv")).unwrap();
    assert_ne!(a, c);
    std::fs::remove_dir_all(&dir).ok();
}
