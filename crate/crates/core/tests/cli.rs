//! End-to-end behavior of the command-line front end.

mod common;

use common::{fixture, mutate, run, run_fixture, verify_code, FIXTURES};
use serde_json::{json, Value};

#[test]
fn fixture_exit_codes_and_round_trip() {
    for &(name, command, expected) in FIXTURES {
        // The full synthesis run is exercised by the acceptance suite.
        if name == "synth_truncated.prob" {
            continue;
        }
        let r = run_fixture(name, command);
        assert_eq!(r.code, expected, "{name}: {}", r.stderr);
        if expected == 2 {
            assert!(r.stdout.is_empty(), "{name} wrote a certificate");
            assert!(r.stderr.starts_with("error:"), "{name}: {}", r.stderr);
        } else {
            assert_eq!(verify_code(&r.stdout), 0, "{name} does not verify");
        }
    }
}

#[test]
fn error_messages_locate_the_problem() {
    let r = run_fixture("analyze_bad_rational.prob", "analyze");
    assert!(r.stderr.contains("4:10"), "{}", r.stderr);
    let r = run_fixture("tree_bad_table.prob", "tree");
    assert!(
        r.stderr.contains("not associative at (a, a, b)"),
        "{}",
        r.stderr
    );
    let r = run_fixture("pingpong_mixed.prob", "pingpong");
    assert!(r.stderr.contains("backend mismatch"), "{}", r.stderr);
    // An op from another command is a validation error.
    assert_eq!(run_fixture("tree_classify.prob", "analyze").code, 2);
    assert_eq!(run(&["analyze", "/nonexistent.prob"]).code, 2);
}

#[test]
fn verdict_details() {
    let r = run_fixture("tree_classify.prob", "tree");
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(
        v["evidence"]["classify"]["class"]["Hyperbolic"]["translation_length"],
        json!(2)
    );
    let r = run_fixture("tree_kernel_a3.prob", "tree");
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(
        v["evidence"]["kernel"]["kernel"],
        json!(["1", "(123)", "(132)"])
    );
    let r = run_fixture("tree_kernel_trivial.prob", "tree");
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["evidence"]["kernel"]["kernel"], json!(["1"]));
    let r = run_fixture("pingpong_duplicate.prob", "pingpong");
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert!(v["evidence"]["ping_pong"]["tuple"]["verdict"]["Refuted"].is_object());
}

#[test]
fn overrides_apply_and_are_echoed() {
    let path = fixture("synth_normal.prob");
    let p = path.to_str().unwrap();
    let r = run(&["synthesize", p, "--budget", "factors=0"]);
    assert_eq!(r.code, 4);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["problem"]["task"]["params"]["budget.factors"], json!("0"));
    assert_eq!(verify_code(&r.stdout), 0);
    assert_eq!(run(&["synthesize", p, "--budget", "bogus=1"]).code, 2);
    assert_eq!(run(&["synthesize", p, "--place", "p:4"]).code, 2);

    let path = fixture("tree_classify.prob");
    let r = run(&["tree", path.to_str().unwrap(), "--radius", "0"]);
    assert_eq!(r.code, 4, "{}", r.stderr);
    assert_eq!(verify_code(&r.stdout), 0);

    let path = fixture("analyze_diag.prob");
    let r = run(&["analyze", path.to_str().unwrap(), "--place", "p:2"]);
    let v: Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["problem"]["place"], json!("p:2"));
}

#[test]
fn verify_rejects_tampering() {
    let cert = run_fixture("pingpong_pair.prob", "pingpong").stdout;
    let radius = "/evidence/ping_pong/tuple/players/0/sets/a_plus/0/ball/radius_sq";
    let bad = mutate(&cert, radius, |v| *v = json!("1/2"));
    assert_eq!(verify_code(&bad), 3);
    assert_eq!(verify_code(&cert[..cert.len() / 2]), 2);
    assert_eq!(verify_code("{}"), 2);
    let flipped = mutate(&cert, "/verdict", |v| *v = json!("refuted"));
    assert_eq!(verify_code(&flipped), 3);
}

#[test]
fn certificates_go_to_stdout_or_out_file() {
    let bin = env!("CARGO_BIN_EXE_prodense");
    let out = std::process::Command::new(bin)
        .args(["analyze", fixture("analyze_diag.prob").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with('{'));
    assert_eq!(String::from_utf8(out.stderr).unwrap(), "verdict: yes\n");

    let dir = std::env::temp_dir().join(format!("prodense-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let target = dir.join("cert.json");
    let out = std::process::Command::new(bin)
        .args([
            "analyze",
            fixture("analyze_identity.prob").to_str().unwrap(),
            "--out",
        ])
        .arg(&target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    let out = std::process::Command::new(bin)
        .arg("verify")
        .arg(&target)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stderr).unwrap(), "verified: no\n");
    std::fs::remove_dir_all(&dir).unwrap();
}
