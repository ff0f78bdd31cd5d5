//! Black-box tests of the command-line interface: exit codes, determinism
//! and output layout.

use std::path::Path;
use std::process::{Command, Output};

use weakcorr::state::{self, StateSpec};
use weakcorr::{build_state, make_grid, GridSpec, PhysicsParams};

fn weakcorr_cmd(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_weakcorr"));
    cmd.args(args);
    cmd
}

fn run(args: &[&str]) -> Output {
    weakcorr_cmd(args).output().expect("spawn weakcorr")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL_GAUSSIAN: &str = r#"{
    "grid": {"n1": 96, "n2": 96, "x1_min": -8.0, "x1_max": 8.0, "x2_min": -8.0, "x2_max": 8.0},
    "state": {"kind": "correlated_gaussian", "a": 0.5, "b": 0.2}
}"#;

#[test]
fn analyze_succeeds_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GAUSSIAN);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let first = run(&["analyze", "--config", &cfg, "--out", out_a.to_str().unwrap()]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let second = run(&["analyze", "--config", &cfg, "--out", out_b.to_str().unwrap()]);
    assert!(second.status.success());
    let a = std::fs::read(out_a.join("report.json")).unwrap();
    let b = std::fs::read(out_b.join("report.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "repeated runs must produce byte-identical reports");
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.contains("\"class\": \"A_ONLY\""), "{text}");
}

#[test]
fn analyze_with_momentum_representation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": {"n1": 128, "n2": 128, "x1_min": -8.0, "x1_max": 8.0, "x2_min": -8.0, "x2_max": 8.0},
            "state": {"kind": "phase_gaussian", "sigma": 1.0, "lambda": 0.3},
            "analysis": {"representation": "both"}
        }"#,
    );
    let out = run(&["analyze", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"conjugate\""), "{text}");
    assert!(text.contains("\"parseval_error\""), "{text}");
}

#[test]
fn missing_config_exits_1() {
    let out = run(&["analyze", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"state": {"kind": "no_such_state"}}"#);
    let out = run(&["analyze", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed config"));
}

#[test]
fn unknown_subcommand_exits_2_from_clap() {
    // clap's own usage error; distinct from our numerics exit code by stream
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn corrupted_state_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let grid = make_grid(GridSpec::square(96, -8.0, 8.0)).unwrap();
    let wf = build_state(
        &StateSpec::ProductGaussian {
            sigma1: 1.0,
            sigma2: 1.0,
        },
        &grid,
        PhysicsParams::default(),
    )
    .unwrap();
    // inject deterministic grid-scale noise so the two derivative routes of
    // the weak correlation stop agreeing
    let mut psi = wf.psi.clone();
    for ((i, j), z) in psi.values.indexed_iter_mut() {
        let wiggle = 1.0 + 1e-3 * (((i * 7919 + j * 104_729) % 17) as f64 / 17.0);
        *z *= wiggle;
    }
    let (bad, _) = state::from_samples(psi, PhysicsParams::default(), None).unwrap();
    let path = dir.path().join("bad.csv");
    state::save_wavefunction(&bad, &path).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{
                "grid": {{"n1": 96, "n2": 96, "x1_min": -8.0, "x1_max": 8.0, "x2_min": -8.0, "x2_max": 8.0}},
                "state": {{"kind": "file", "path": {:?}}}
            }}"#,
            path.to_str().unwrap()
        ),
    );
    let out_dir = dir.path().join("out");
    let out = run(&["analyze", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    // the report is still written before the failure is signalled
    assert!(out_dir.join("report.json").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("identity suite failed"));
}

#[test]
fn fields_writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GAUSSIAN);
    let out_dir = dir.path().join("fields");
    let out = run(&["fields", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "u1.csv", "u2.csv", "v1.csv", "v2.csv", "vq.csv", "re_cw.csv", "im_cw.csv",
        "fields.json",
    ] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    let u1 = std::fs::read_to_string(out_dir.join("u1.csv")).unwrap();
    assert!(u1.starts_with("i,j,x1,x2,value\n"));
    assert_eq!(u1.lines().count(), 96 * 96 + 1);
}

#[test]
fn verify_battery_passes_on_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": {"n1": 128, "n2": 128, "x1_min": -8.0, "x1_max": 8.0, "x2_min": -8.0, "x2_max": 8.0},
            "state": {"kind": "product_gaussian", "sigma1": 1.0, "sigma2": 1.0}
        }"#,
    );
    let out = run(&["verify", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{text}");
    assert!(text.contains("cat"));
}

#[test]
fn sweep_writes_csv_and_rejects_empty_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
            "grid": {"n1": 96, "n2": 96, "x1_min": -8.0, "x1_max": 8.0, "x2_min": -8.0, "x2_max": 8.0},
            "state": {"kind": "correlated_gaussian", "a": 0.5, "b": 0.0},
            "sweep": {"parameter": "b", "values": [0.0, 0.1, 0.2]}
        }"#,
    );
    let out_dir = dir.path().join("sweep");
    let out = run(&["sweep", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("parameter,value,i_a_mean,i_a_sup,i_p_mean,i_p_sup,class\n"));
    assert_eq!(csv, String::from_utf8(out.stdout).unwrap());

    let empty = write_config(
        dir.path(),
        r#"{
            "state": {"kind": "correlated_gaussian", "a": 0.5, "b": 0.0},
            "sweep": {"parameter": "b", "values": []}
        }"#,
    );
    let out = run(&["sweep", "--config", &empty]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no values"));
}

#[test]
fn thread_env_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GAUSSIAN);
    let out = weakcorr_cmd(&["analyze", "--config", &cfg])
        .env("WEAKCORR_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WEAKCORR_THREADS"));

    let out = weakcorr_cmd(&["analyze", "--config", &cfg])
        .env("WEAKCORR_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
