use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use prodense_ffi::*;

const DIAG: &str = "format 1\nplace arch\n[group]\na = [[100, 0], [0, 1]]\n[task]\nop = proximal\n";

fn owned(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { prodense_string_free(s) };
    out
}

fn last_error() -> String {
    let p = prodense_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn run(command: &str, text: &str) -> *mut ProdenseCertificate {
    let text = CString::new(text).unwrap();
    let command = CString::new(command).unwrap();
    let mut problem = ptr::null_mut();
    let mut cert = ptr::null_mut();
    unsafe {
        assert_eq!(
            prodense_problem_parse(text.as_ptr(), &mut problem),
            ProdenseStatus::Ok
        );
        assert_eq!(
            prodense_run(command.as_ptr(), problem, &mut cert),
            ProdenseStatus::Ok
        );
        prodense_problem_free(problem);
    }
    cert
}

#[test]
fn run_serialize_reload_verify() {
    let cert = run("analyze", DIAG);
    unsafe {
        let mut code = -1;
        assert_eq!(
            prodense_certificate_exit_code(cert, &mut code),
            ProdenseStatus::Ok
        );
        assert_eq!(code, 0);
        let mut json = ptr::null_mut();
        assert_eq!(
            prodense_certificate_to_json(cert, &mut json),
            ProdenseStatus::Ok
        );
        let json = owned(json);
        assert!(json.contains("\"verdict\": \"yes\""));
        prodense_certificate_free(cert);

        let tampered =
            CString::new(json.replace("\"verdict\": \"yes\"", "\"verdict\": \"no\"")).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(
            prodense_certificate_from_json(tampered.as_ptr(), &mut back),
            ProdenseStatus::Ok
        );
        assert_eq!(prodense_certificate_verify(back), ProdenseStatus::Rejected);
        assert!(last_error().contains("verdict"), "{}", last_error());
        prodense_certificate_free(back);

        let original = CString::new(json).unwrap();
        let mut back = ptr::null_mut();
        assert_eq!(
            prodense_certificate_from_json(original.as_ptr(), &mut back),
            ProdenseStatus::Ok
        );
        assert_eq!(prodense_certificate_verify(back), ProdenseStatus::Ok);
        prodense_certificate_free(back);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut problem = ptr::null_mut();
        let bad = CString::new("format 1\nplace arch\n[group]\na = [[1/0, 0], [0, 1]]\n").unwrap();
        assert_eq!(
            prodense_problem_parse(bad.as_ptr(), &mut problem),
            ProdenseStatus::Parse
        );
        assert!(
            last_error().starts_with("parse error at 4:"),
            "{}",
            last_error()
        );
        assert!(problem.is_null());

        assert_eq!(
            prodense_problem_parse(ptr::null(), &mut problem),
            ProdenseStatus::NullArgument
        );
        let invalid = [0xffu8, 0];
        assert_eq!(
            prodense_problem_parse(invalid.as_ptr().cast(), &mut problem),
            ProdenseStatus::InvalidUtf8
        );

        let text = CString::new(DIAG).unwrap();
        assert_eq!(
            prodense_problem_parse(text.as_ptr(), &mut problem),
            ProdenseStatus::Ok
        );
        let mut cert = ptr::null_mut();
        let unknown = CString::new("frobnicate").unwrap();
        assert_eq!(
            prodense_run(unknown.as_ptr(), problem, &mut cert),
            ProdenseStatus::Invalid
        );
        assert!(last_error().contains("frobnicate"));
        prodense_problem_free(problem);

        let mut m = ptr::null_mut();
        assert_eq!(
            prodense_matrix_from_i64(2, [1i64, 0, 0, 1].as_ptr(), 4, &mut m),
            ProdenseStatus::Invalid
        );
        assert_eq!(last_error(), "4 is not a prime");
        assert_eq!(
            prodense_matrix_from_i64(2, [1i64, 2, 2, 4].as_ptr(), 0, &mut m),
            ProdenseStatus::Invalid
        );

        // Success clears the previous message.
        assert_eq!(
            prodense_matrix_from_i64(2, [4i64, 0, 0, 1].as_ptr(), 0, &mut m),
            ProdenseStatus::Ok
        );
        assert!(prodense_last_error().is_null());
        let (r, e) = (CString::new("1/4").unwrap(), CString::new("1/4").unwrap());
        let mut v = ProdenseVerdict::Unknown;
        assert_eq!(
            prodense_matrix_certify_proximal(m, r.as_ptr(), e.as_ptr(), &mut v, ptr::null_mut()),
            ProdenseStatus::Precondition
        );
        prodense_matrix_free(m);
        prodense_problem_free(ptr::null_mut());
        prodense_certificate_free(ptr::null_mut());
        prodense_string_free(ptr::null_mut());
    }
}

#[test]
fn matrix_functions() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(
            prodense_matrix_from_i64(2, [1i64, 0, 0, 25].as_ptr(), 5, &mut g),
            ProdenseStatus::Ok
        );
        let (mut lo, mut hi) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(
            prodense_matrix_contraction_gap_sq(g, &mut lo, &mut hi),
            ProdenseStatus::Ok
        );
        assert_eq!(owned(lo), "1/625");
        assert_eq!(owned(hi), "1/625");

        let (r, e) = (CString::new("1/4").unwrap(), CString::new("1/25").unwrap());
        let mut v = ProdenseVerdict::Unknown;
        let mut json = ptr::null_mut();
        assert_eq!(
            prodense_matrix_certify_proximal(g, r.as_ptr(), e.as_ptr(), &mut v, &mut json),
            ProdenseStatus::Ok
        );
        assert_eq!(v, ProdenseVerdict::Yes);
        assert!(owned(json).contains("fixed_point"));

        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        assert_eq!(
            prodense_matrix_from_i64(2, [1i64, 2, 0, 1].as_ptr(), 0, &mut a),
            ProdenseStatus::Ok
        );
        assert_eq!(
            prodense_matrix_from_i64(2, [1i64, 0, 2, 1].as_ptr(), 0, &mut b),
            ProdenseStatus::Ok
        );
        let mut free = -1;
        let pair = [a as *const ProdenseMatrix, b];
        assert_eq!(
            prodense_matrix_oracle(pair.as_ptr(), 2, 5, &mut free),
            ProdenseStatus::Ok
        );
        assert_eq!(free, 1);
        let rot = {
            let mut r = ptr::null_mut();
            assert_eq!(
                prodense_matrix_from_i64(2, [0i64, -1, 1, 0].as_ptr(), 0, &mut r),
                ProdenseStatus::Ok
            );
            r
        };
        assert_eq!(
            prodense_matrix_oracle([rot as *const _].as_ptr(), 1, 4, &mut free),
            ProdenseStatus::Ok
        );
        assert_eq!(free, 0);
        let mixed = [a as *const ProdenseMatrix, g];
        assert_eq!(
            prodense_matrix_oracle(mixed.as_ptr(), 2, 4, &mut free),
            ProdenseStatus::Invalid
        );
        for m in [g, a, b, rot] {
            prodense_matrix_free(m);
        }
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/prodense.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for name in [
        "prodense_problem_parse",
        "prodense_run",
        "prodense_certificate_verify",
        "prodense_matrix_oracle",
        "PRODENSE_STATUS_REJECTED = 6",
        "typedef struct ProdenseProblem ProdenseProblem;",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "prodense.h"

int main(void) {
    const char *text =
        "format 1\nplace p:5\n[group]\na = [[1, 0], [0, 125]]\n[task]\nop = contracting\nepsilon_sq = 1/25\n";
    ProdenseProblem *p = NULL;
    ProdenseCertificate *c = NULL;
    if (prodense_problem_parse(text, &p) != PRODENSE_STATUS_OK) return 10;
    if (prodense_run("analyze", p, &c) != PRODENSE_STATUS_OK) return 11;
    int32_t code = -1;
    prodense_certificate_exit_code(c, &code);
    if (code != 0) return 12;
    if (prodense_certificate_verify(c) != PRODENSE_STATUS_OK) return 13;
    char *json = NULL;
    prodense_certificate_to_json(c, &json);
    if (strstr(json, "\"contracting\"") == NULL) return 14;
    prodense_string_free(json);
    prodense_certificate_free(c);
    prodense_problem_free(p);
    if (prodense_problem_parse("format 2\n", &p) != PRODENSE_STATUS_PARSE) return 15;
    printf("%s\n", prodense_last_error());
    return 0;
}
"#;

/// Compiles a C client against the generated header and the static library.
#[test]
fn c_client_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler; skipping");
        return;
    };
    // Integration tests live in target/<profile>/deps; the static library
    // sits one level up.
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap();
    let lib = lib_dir.join("libprodense_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let tmp = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let src = tmp.join("client.c");
    let bin = tmp.join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to build");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "client exit {:?}", out.status);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("parse error at 1:"));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
