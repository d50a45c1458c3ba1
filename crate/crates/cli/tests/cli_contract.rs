//! Exit-code and determinism contract of the `qev` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qev"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn catalog_lists_every_kind() {
    let out = qev(&["catalog"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for kind in [
        "single-warp",
        "product-sin",
        "product-cosh",
        "product-exp",
        "product-sinh",
        "power-law",
        "exp-pair",
        "complete-exp",
        "complete-sinh",
    ] {
        assert!(text.contains(kind), "missing {kind}");
    }
}

#[test]
fn catalog_json_and_empty_filter() {
    let out = qev(&["catalog", "--json"]);
    assert_eq!(code(&out), 0);
    let parsed: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("valid JSON listing");
    assert!(parsed.as_array().unwrap().len() >= 9);

    // unknown filter: empty listing, still exit 0
    let out = qev(&["catalog", "--kind", "nonexistent-kind"]);
    assert_eq!(code(&out), 0);
    let parsed = String::from_utf8(out.stdout).unwrap();
    assert!(parsed.trim().is_empty());
}

#[test]
fn verify_exact_family_passes() {
    let out = qev(&[
        "verify",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("verify: PASS"));
}

#[test]
fn verify_broken_fiber_fails_with_block_column() {
    let out = qev(&[
        "verify",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2;perturb_k2=0.1",
    ]);
    assert_eq!(code(&out), 1);
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("res_blocks"), "{text}");
    assert!(text.contains("FAIL"));
}

#[test]
fn verify_usage_errors_exit_two() {
    // malformed config
    let out = qev(&["verify", "--inline", "kind=banana"]);
    assert_eq!(code(&out), 2);
    // missing arguments entirely (clap usage error)
    let out = qev(&["verify"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_reports_are_deterministic(){
    let dir = std::env::temp_dir().join("qev-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let run = |path: &Path| {
        let out = qev(&[
            "verify",
            "--inline",
            "kind=power-law;m=2;n=5;r1=1",
            "--samples",
            "40",
            "--format",
            "json",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        std::fs::read(path).unwrap()
    };
    let a = run(&dir.join("a.json"));
    let b = run(&dir.join("b.json"));
    assert_eq!(a, b, "reports must be byte-identical");
    // the report embeds the resolved derived constants
    let text = String::from_utf8(a).unwrap();
    for key in ["\"b1\"", "\"b2\"", "\"b3\"", "\"t\"", "\"lambda\""] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn verify_csv_has_spec_columns() {
    let dir = std::env::temp_dir().join("qev-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.csv");
    let out = qev(&[
        "verify",
        "--inline",
        "kind=product-sinh;m=2;r=2;Lambda=-1;r2=2",
        "--samples",
        "10",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with(
        "s,res_radial,res_block_1,res_block_2,trace,gradR,mu,cotton,d_norm,weyl_norm"
    ));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn ode_pass_fail_and_blowup_contract() {
    let out = qev(&[
        "ode",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2",
        "--s0",
        "0.3",
        "--s-end",
        "1.2",
        "--step",
        "1e-3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));

    // too-large step trips the drift gate
    let out = qev(&[
        "ode",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2",
        "--s0",
        "0.3",
        "--s-end",
        "1.4",
        "--step",
        "0.5",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("step too large"));
}

#[test]
fn ode_writes_trajectory_csv() {
    let dir = std::env::temp_dir().join("qev-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("traj.csv");
    let out = qev(&[
        "ode",
        "--inline",
        "kind=product-exp;m=2;r=2;Lambda=-1;r2=2",
        "--s0",
        "0.0",
        "--s-end",
        "0.5",
        "--step",
        "1e-2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("s,fp,X,Y,h1,h2,primary_integral"));
}

#[test]
fn oracle_cross_check_passes_on_family() {
    let out = qev(&[
        "oracle",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2",
        "--points",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn verify_with_oracle_cross_check() {
    let out = qev(&[
        "verify",
        "--inline",
        "kind=product-sin;m=2;r=2;Lambda=1;r2=2",
        "--samples",
        "20",
        "--oracle",
        "--oracle-points",
        "2",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("oracle"));
}

#[test]
fn obstruction_contract() {
    let out = qev(&["obstruction", "--m", "2", "--count", "500", "--seed", "11"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    // identical invocations agree byte for byte
    let again = qev(&["obstruction", "--m", "2", "--count", "500", "--seed", "11"]);
    assert_eq!(out.stdout, again.stdout);

    // hypothesis violation is a usage error
    let out = qev(&["obstruction", "--m", "0.5"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn exp_pair_config_reports_the_contradiction() {
    let out = qev(&["verify", "--inline", "kind=exp-pair;m=2;n=6;r1=2"]);
    assert_eq!(code(&out), 2);
    let text = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(text.contains("inconsistent"), "{text}");
}

#[test]
fn parallel_jobs_give_identical_reports() {
    let dir = std::env::temp_dir().join("qev-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let run = |jobs: &str, name: &str| {
        let path = dir.join(name);
        let out = qev(&[
            "verify",
            "--inline",
            "kind=product-cosh;m=2;r=2;Lambda=-1;r2=2",
            "--samples",
            "64",
            "--jobs",
            jobs,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0);
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("1", "seq.json"), run("4", "par.json"));
}
