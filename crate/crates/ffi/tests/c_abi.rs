use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use qdpack_ffi::*;

fn c(re: f64, im: f64) -> QdComplex {
    QdComplex { re, im }
}

fn two_disks(a: f64) -> *mut QdDomain {
    let triples = [-a, 0.0, 1.0, a, 0.0, 1.0];
    let mut dom = ptr::null_mut();
    let st = unsafe { qd_domain_from_disks(triples.as_ptr(), 2, &mut dom) };
    assert_eq!(st, QdStatus::Ok);
    dom
}

fn last_error() -> String {
    let p = qd_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn unit_disk_kernel_values() {
    let tri = [0.0, 0.0, 1.0];
    let mut dom = ptr::null_mut();
    unsafe {
        assert_eq!(qd_domain_from_disks(tri.as_ptr(), 1, &mut dom), QdStatus::Ok);
        assert_eq!(qd_domain_degree(dom), 1);
        let mut e = c(0.0, 0.0);
        assert_eq!(qd_exp_transform(dom, c(2.0, 0.0), c(2.0, 0.0), &mut e), QdStatus::Ok);
        // 1 - 1/(w conj z)
        assert!((e.re - 0.75).abs() < 1e-14 && e.im.abs() < 1e-14);
        let mut l = c(0.0, 0.0);
        let two = c(2.0, 0.0);
        assert_eq!(qd_kernel_l(dom, two, two, two, two, &mut l), QdStatus::Ok);
        assert!((l.re - 1.0 / 12.0).abs() < 1e-13);
        qd_domain_free(dom);
    }
}

#[test]
fn guard_violation_is_reported() {
    let dom = two_disks(1.5);
    unsafe {
        let mut e = c(0.0, 0.0);
        let st = qd_exp_transform(dom, c(0.1, 0.0), c(3.0, 0.0), &mut e);
        assert_eq!(st, QdStatus::GuardViolation);
        assert!(last_error().contains("guard"));
        qd_domain_free(dom);
    }
}

#[test]
fn null_and_bad_input() {
    unsafe {
        let mut dom = ptr::null_mut();
        assert_eq!(qd_domain_from_disks(ptr::null(), 1, &mut dom), QdStatus::NullPointer);
        let tri = [0.0, 0.0, -1.0];
        assert_eq!(qd_domain_from_disks(tri.as_ptr(), 1, &mut dom), QdStatus::InvalidInput);
        let bad = CString::new("{not json").unwrap();
        assert_eq!(qd_domain_from_json(bad.as_ptr(), &mut dom), QdStatus::InvalidInput);
        assert!(!last_error().is_empty());
        assert_eq!(qd_kernel_l(ptr::null(), c(2.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), ptr::null_mut()),
            QdStatus::NullPointer);
        assert_eq!(qd_domain_degree(ptr::null()), 0);
        qd_domain_free(ptr::null_mut());
        qd_chain_free(ptr::null_mut());
        qd_string_free(ptr::null_mut());
    }
}

#[test]
fn json_domain_round_trip() {
    let js = CString::new(r#"{"disks":[{"cx":-1.0,"cy":0.0,"r":1.0},{"cx":1.0,"cy":0.0,"r":1.0}]}"#).unwrap();
    unsafe {
        let mut dom = ptr::null_mut();
        assert_eq!(qd_domain_from_json(js.as_ptr(), &mut dom), QdStatus::Ok);
        assert_eq!(qd_domain_degree(dom), 2);
        qd_domain_free(dom);
    }
}

#[test]
fn overlap_verdicts_and_report() {
    unsafe {
        let dom = two_disks(1.0);
        let mut verdict = -1;
        let mut json = ptr::null_mut();
        assert_eq!(qd_decide_overlap(dom, 32, 1, 0.0, 20, &mut verdict, &mut json), QdStatus::Ok);
        assert_eq!(verdict, QD_DISJOINT_CERTIFIED);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        qd_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("verdict").is_some());
        qd_domain_free(dom);

        let dom = two_disks(0.9);
        assert_eq!(qd_decide_overlap(dom, 32, 1, 0.0, 20, &mut verdict, ptr::null_mut()), QdStatus::Ok);
        assert_eq!(verdict, QD_OVERLAP_DETECTED);
        assert_eq!(qd_decide_overlap(dom, 3, 1, 0.0, 20, &mut verdict, ptr::null_mut()), QdStatus::InvalidInput);
        qd_domain_free(dom);
    }
}

#[test]
fn chain_handle() {
    unsafe {
        let dom = two_disks(0.9);
        let mut ch = ptr::null_mut();
        assert_eq!(qd_chain_run(dom, 10, 0.0, &mut ch), QdStatus::Ok);
        let (mut kind, mut step) = (-1, 0usize);
        assert_eq!(qd_chain_verdict(ch, &mut kind, &mut step), QdStatus::Ok);
        assert_eq!((kind, step), (QD_CHAIN_A_SQUARED_NOT_PSD, 2));
        let n = qd_chain_trace_len(ch);
        assert!(n >= 2);
        let (mut m, mut t, mut d) = (0.0, 0.0, 0.0);
        assert_eq!(qd_chain_trace(ch, 0, &mut m, &mut t, &mut d), QdStatus::Ok);
        assert!((m - 0.5).abs() < 1e-10 || m < 0.5);
        assert_eq!(qd_chain_trace(ch, n, &mut m, &mut t, &mut d), QdStatus::OutOfRange);
        qd_chain_free(ch);
        qd_domain_free(dom);

        let dom = two_disks(1.0);
        assert_eq!(qd_chain_run(dom, 8, 0.0, &mut ch), QdStatus::Ok);
        assert_eq!(qd_chain_verdict(ch, &mut kind, &mut step), QdStatus::Ok);
        assert_eq!((kind, step), (QD_CHAIN_CERTIFIED, 8));
        assert_eq!(qd_chain_trace(ch, 0, &mut m, &mut t, &mut d), QdStatus::Ok);
        assert!((m - 0.5).abs() < 1e-10 && (t - 2.0).abs() < 1e-10);
        qd_chain_free(ch);
        qd_domain_free(dom);
    }
}

#[test]
fn degenerate_seed_status() {
    unsafe {
        let dom = two_disks(std::f64::consts::FRAC_1_SQRT_2);
        let mut ch = ptr::null_mut();
        assert_eq!(qd_chain_run(dom, 4, 0.0, &mut ch), QdStatus::DegenerateSeed);
        assert!(ch.is_null());
        qd_domain_free(dom);
    }
}

#[test]
fn threshold_entries() {
    let mut t = 0.0;
    unsafe {
        assert_eq!(qd_two_disk_threshold(1, &mut t), QdStatus::Ok);
    }
    assert!((t - 3f64.sqrt() / 2.0).abs() < 1e-9, "{t}");
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(qd_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point() {
    let header = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/qdpack.h");
    let text = std::fs::read_to_string(header).unwrap();
    for name in [
        "qd_domain_from_disks",
        "qd_domain_from_json",
        "qd_domain_free",
        "qd_exp_transform",
        "qd_kernel_l",
        "qd_decide_overlap",
        "qd_chain_run",
        "qd_chain_verdict",
        "qd_chain_trace",
        "qd_two_disk_threshold",
        "qd_string_free",
        "qd_last_error_message",
        "typedef struct QdDomain QdDomain",
        "QD_STATUS_OK = 0",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "qdpack.h"

int main(void) {
    double tri[3] = {0.0, 0.0, 1.0};
    QdDomain *dom = NULL;
    if (qd_domain_from_disks(tri, 1, &dom) != QD_STATUS_OK) return 10;
    QdComplex two = {2.0, 0.0}, out = {0.0, 0.0};
    if (qd_kernel_l(dom, two, two, two, two, &out) != QD_STATUS_OK) return 11;
    if (fabs(out.re - 1.0 / 12.0) > 1e-13) return 12;
    QdComplex inside = {0.1, 0.0};
    if (qd_exp_transform(dom, inside, two, &out) != QD_STATUS_GUARD_VIOLATION) return 13;
    if (qd_last_error_message() == NULL) return 14;
    qd_domain_free(dom);
    printf("ok\n");
    return 0;
}
"#;

/// Compiles and runs a C client against the static library and generated header.
#[test]
fn c_client_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found, skipping");
        return;
    };
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("libqdpack_ffi.a");
    if !lib.exists() {
        eprintln!("static library not found at {}, skipping", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    let bin = dir.path().join("client");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exited with {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    for cand in ["cc", "gcc", "clang"] {
        if Command::new(cand).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cand.to_string());
        }
    }
    Err(())
}
