//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use prodense::cli::{main_with, verify_text};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Every fixture with the command that runs it and the expected exit code.
pub const FIXTURES: &[(&str, &str, i32)] = &[
    ("analyze_diag.prob", "analyze", 0),
    ("analyze_identity.prob", "analyze", 3),
    ("analyze_bad_rational.prob", "analyze", 2),
    ("analyze_padic.prob", "analyze", 0),
    ("analyze_profile.prob", "analyze", 0),
    ("analyze_power.prob", "analyze", 0),
    ("pingpong_sanov_oracle.prob", "pingpong", 0),
    ("pingpong_pair.prob", "pingpong", 0),
    ("pingpong_duplicate.prob", "pingpong", 3),
    ("pingpong_mixed.prob", "pingpong", 2),
    ("synth_truncated.prob", "synthesize", 0),
    ("synth_truncated_empty.prob", "synthesize", 2),
    ("synth_truncated_zero.prob", "synthesize", 4),
    ("synth_conjugate.prob", "synthesize", 0),
    ("synth_b1b2b3.prob", "synthesize", 0),
    ("synth_very_proximal.prob", "synthesize", 0),
    ("synth_normal.prob", "synthesize", 0),
    ("synth_double_coset.prob", "synthesize", 0),
    ("tree_classify.prob", "tree", 0),
    ("tree_classify_elliptic.prob", "tree", 0),
    ("tree_normal_form.prob", "tree", 0),
    ("tree_expand.prob", "tree", 0),
    ("tree_pingpong.prob", "tree", 0),
    ("tree_kernel_a3.prob", "tree", 0),
    ("tree_kernel_trivial.prob", "tree", 0),
    ("tree_bad_table.prob", "tree", 2),
];

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the CLI in-process.
pub fn run(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["prodense"];
    argv.extend_from_slice(args);
    let code = main_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).expect("utf-8"),
        stderr: String::from_utf8(err).expect("utf-8"),
    }
}

pub fn run_fixture(name: &str, command: &str) -> Run {
    let path = fixture(name);
    run(&[command, path.to_str().expect("utf-8 path")])
}

pub fn verify_code(text: &str) -> i32 {
    verify_text(text).0
}

/// Replaces the value at a JSON pointer and re-serializes.
pub fn mutate(cert: &str, pointer: &str, f: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(cert).expect("certificate json");
    f(v.pointer_mut(pointer)
        .unwrap_or_else(|| panic!("no field {pointer}")));
    serde_json::to_string_pretty(&v).expect("json")
}
