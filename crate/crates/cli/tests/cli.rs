use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn kinesnap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinesnap"))
        .args(args)
        .output()
        .unwrap()
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("kinesnap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn solve_exit_codes() {
    let ok = kinesnap(&["solve", "--target", "1,1,0"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).starts_with("status converged\n"));

    let far = kinesnap(&["solve", "--target", "5,0,0"]);
    assert_eq!(far.status.code(), Some(2));

    let bad = kinesnap(&["solve", "--target", "1,x,0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("not a number"));

    let bad_start = kinesnap(&["solve", "--target", "1,1,0", "--start", "10"]);
    assert_eq!(bad_start.status.code(), Some(1));
}

#[test]
fn solve_with_chain_file_and_transpose() {
    let chain = data("arm5.json");
    let out = kinesnap(&[
        "solve",
        "--chain",
        chain.to_str().unwrap(),
        "--target",
        "1.5,0.5,0.2",
        "--method",
        "transpose",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3 + 5);
}

#[test]
fn run_writes_csv_and_reports_assertions() {
    let script = data("switching.pose");
    let out_path = std::env::temp_dir().join(format!("kinesnap-run-{}.csv", std::process::id()));
    let out = kinesnap(&[
        "run",
        "--script",
        script.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("step,event,mode,tip_x,tip_y,tip_z,status,residual,j1_deg,j2_deg\n"));

    let failing = scratch("fail.pose", "assert_tip 0 0 0 0.5\n");
    let out = kinesnap(&["run", "--script", failing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step 1 (line 1)"));
}

#[test]
fn run_input_errors_exit_1() {
    let bad_syntax = scratch("syntax.pose", "reset\nrot j1\n");
    let out = kinesnap(&["run", "--script", bad_syntax.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let wrong_mode = scratch("mode.pose", "mode ik\nrot j1 10\n");
    let out = kinesnap(&["run", "--script", wrong_mode.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = kinesnap(&["run", "--script", "/nonexistent/script.pose"]);
    assert_eq!(out.status.code(), Some(1));

    let bad_chain = scratch(
        "chain.json",
        r#"{"name": "x", "joints": [], "tip_offset": [1, 0, 0]}"#,
    );
    let out = kinesnap(&[
        "run",
        "--chain",
        bad_chain.to_str().unwrap(),
        "--script",
        data("switching.pose").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn external_policy_script() {
    let script = data("recovery.pose");
    let out = kinesnap(&[
        "run",
        "--script",
        script.to_str().unwrap(),
        "--policy",
        "external-sim",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn bench_is_deterministic() {
    let a = kinesnap(&["bench", "--trials", "20", "--seed", "3"]);
    let b = kinesnap(&["bench", "--trials", "20", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8_lossy(&a.stdout).lines().count(), 3);
}
