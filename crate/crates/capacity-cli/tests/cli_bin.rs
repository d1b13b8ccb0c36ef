//! End-to-end checks of the installed binary: exit codes and output format.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capacity"))
}

fn write_config(name: &str, body: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("capacity-cli-tests");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn sweep_emits_closed_form_csv() {
    let cfg = write_config(
        "newton-singleton.json",
        r#"{
            "kind": "newton", "dimension": 3,
            "set_a": {"shape": "ball", "radius": 0.0},
            "set_b": {"shape": "ball", "radius": 0.0},
            "direction": [1, 0, 0], "radii": [4, 8],
            "tol": 1e-9, "seed": 1
        }"#,
    );
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("# config:"));
    let records = capacity_cli::csv::parse_csv(&text).unwrap();
    assert_eq!(records.len(), 2);
    const G3_0: f64 = 1.516386059151978018;
    for rec in &records {
        let closed = 2.0 / (G3_0 * (G3_0 + rec.kernel_at_z));
        assert!((rec.ratio - closed).abs() < 1e-10);
    }
}

#[test]
fn cap_subcommand_prints_riesz_bracket() {
    let cfg = write_config(
        "riesz-pair.json",
        r#"{
            "kind": "riesz", "dimension": 5, "alpha": 2.0,
            "set_a": {"shape": "segment", "n": 1},
            "set_b": {"shape": "segment", "n": 1},
            "direction": [1, 0, 0, 0, 0], "radii": [4],
            "tol": 1e-9, "seed": 1
        }"#,
    );
    let out = bin().args(["cap", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // two neighboring points: capacity 2 / (1 + 2^-2) = 1.6
    let last = text.lines().last().unwrap();
    let v: f64 = last.split(',').next().unwrap().parse().unwrap();
    assert!((v - 1.6).abs() < 1e-9, "capacity {v}");
}

#[test]
fn malformed_config_exits_one_with_field_name() {
    let cfg = write_config(
        "missing-alpha.json",
        r#"{
            "kind": "riesz", "dimension": 5,
            "set_a": {"shape": "segment", "n": 1},
            "set_b": {"shape": "segment", "n": 1},
            "direction": [1, 0, 0, 0, 0], "radii": [4],
            "seed": 1
        }"#,
    );
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("alpha"), "stderr: {err}");

    let garbage = write_config("garbage.json", "{not json");
    let out = bin().args(["sweep", "--config"]).arg(&garbage).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn branch_dimension_guard_exits_one() {
    let cfg = write_config(
        "branch-d3.json",
        r#"{
            "kind": "branch", "dimension": 3, "offspring": "binary",
            "set_a": {"shape": "ball", "radius": 0.0},
            "set_b": {"shape": "ball", "radius": 0.0},
            "direction": [1, 0, 0], "radii": [4],
            "n_samples": 100, "seed": 1
        }"#,
    );
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("dimension"), "stderr: {err}");
}

#[test]
fn selftest_quick_passes() {
    let out = bin().args(["selftest", "--quick"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn sweep_out_flag_writes_file() {
    let cfg = write_config(
        "newton-out.json",
        r#"{
            "kind": "newton", "dimension": 3,
            "set_a": {"shape": "ball", "radius": 0.0},
            "set_b": {"shape": "ball", "radius": 0.0},
            "direction": [1, 0, 0], "radii": [4],
            "tol": 1e-9, "seed": 1
        }"#,
    );
    let out_path = std::env::temp_dir().join("capacity-cli-tests/out.csv");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(capacity_cli::csv::parse_csv(&text).unwrap().len() == 1);
}
