use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use pfcoding_ffi::*;

const FIG1: &str = r#"{
  "cells": [{"id": "ap", "period": 1.0}],
  "flows": [
    {"id": "f1", "route": [{"cell": "ap", "alpha": 0.01, "w": 10}], "deadline": 1},
    {"id": "f2", "route": [{"cell": "ap", "alpha": 0.01, "w": 10}], "deadline": "inf"},
    {"id": "f3", "route": [{"cell": "ap", "alpha": 0.01, "w": 10}], "deadline": "inf"}
  ]
}"#;

fn last_error() -> String {
    let p = pfc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn network(json: &str) -> Result<*mut PfcNetwork, PfcStatus> {
    let text = CString::new(json).unwrap();
    let mut net = ptr::null_mut();
    match unsafe { pfc_network_from_json(text.as_ptr(), &mut net) } {
        PfcStatus::Ok => Ok(net),
        s => Err(s),
    }
}

#[test]
fn solves_through_handles() {
    let net = network(FIG1).unwrap();
    let mut sol = ptr::null_mut();
    let cfg = pfc_config_default();
    unsafe {
        assert_eq!(pfc_network_flow_count(net), 3);
        assert_eq!(pfc_solve(net, &cfg, &mut sol), PfcStatus::Ok);
        assert_eq!(pfc_solution_flow_count(sol), 3);
        let mut f = PfcFlowResult::default();
        assert_eq!(pfc_solution_flow(net, sol, 0, &mut f), PfcStatus::Ok);
        assert!((f.airtime_fraction - 0.41).abs() < 0.02);
        assert!((f.rate - 0.62).abs() < 0.02);
        assert!((f.error_bound - 0.20).abs() < 0.03);
        assert_eq!(
            pfc_solution_flow(net, sol, 3, &mut f),
            PfcStatus::OutOfRange
        );
        assert!(pfc_solution_utility(sol).is_finite());
        assert!(pfc_solution_duality_gap(sol).abs() < 1e-6);
        assert!(pfc_solution_iterations(sol) > 0);
        pfc_solution_free(sol);
        pfc_network_free(net);
    }
}

#[test]
fn null_config_means_defaults() {
    let net = network(FIG1).unwrap();
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(pfc_solve(net, ptr::null(), &mut sol), PfcStatus::Ok);
        pfc_solution_free(sol);
        pfc_network_free(net);
    }
}

#[test]
fn error_codes_and_messages() {
    assert_eq!(network("{ nope").unwrap_err(), PfcStatus::Parse);
    assert!(last_error().contains("line"));
    let bad = FIG1.replacen("0.01", "0.7", 1);
    assert_eq!(network(&bad).unwrap_err(), PfcStatus::InvalidNetwork);
    assert!(last_error().contains("f1"));

    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { pfc_network_from_json(ptr::null(), &mut out) },
        PfcStatus::NullPointer
    );
    let invalid = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { pfc_network_from_json(invalid.as_ptr().cast(), &mut out) },
        PfcStatus::InvalidUtf8
    );

    let net = network(FIG1).unwrap();
    let mut cfg = pfc_config_default();
    cfg.max_iterations = 2;
    let mut sol = ptr::null_mut();
    unsafe {
        assert_eq!(pfc_solve(net, &cfg, &mut sol), PfcStatus::NonConvergence);
        assert!(sol.is_null());
        cfg.tol_price = -1.0;
        assert_eq!(pfc_solve(net, &cfg, &mut sol), PfcStatus::Domain);
        pfc_network_free(net);
        pfc_network_free(ptr::null_mut());
        pfc_solution_free(ptr::null_mut());
    }
}

#[test]
fn bound_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(pfc_rate_function(0.25, 0.01, &mut v), PfcStatus::Ok);
        assert!((v - 0.596_495_153_768_340_6).abs() < 1e-14);
        assert_eq!(pfc_exact_error(1, 4, 2, 0.5, &mut v), PfcStatus::Ok);
        assert!((v - 11.0 / 16.0).abs() < 1e-15);
        let mut lo = 0.0;
        let mut hi = 0.0;
        assert_eq!(pfc_lower_bound(1, 20.0, 0.3, 0.25, &mut lo), PfcStatus::Ok);
        assert_eq!(
            pfc_chernoff_upper(1, 20.0, 0.3, 0.25, &mut hi),
            PfcStatus::Ok
        );
        assert!(lo < hi);
        assert_eq!(pfc_rate_function(0.005, 0.01, &mut v), PfcStatus::Domain);
        assert_eq!(
            pfc_rate_function(0.25, 0.01, ptr::null_mut()),
            PfcStatus::NullPointer
        );
    }
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pfcoding.h");
    assert!(header.exists());
    let src = std::env::temp_dir().join(format!("pfcoding_header_{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ PfcConfig c = pfc_config_default(); return (int)c.max_iterations == 0; }}\n",
            header.display()
        ),
    )
    .unwrap();
    match Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"])
        .arg(&src)
        .status()
    {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler; header syntax check skipped"),
    }
    let _ = std::fs::remove_file(src);
}
