use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use lrp_ffi::*;

fn last_error() -> String {
    let p = lrp_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn model_lifecycle_and_edge_probability() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(lrp_model_new(1, 0.5, LrpNorm::ScaledSup, 0.3, 1, &mut m), LrpStatus::Ok);
        let (x, y) = ([0i64], [3i64]);
        let mut p = 0.0;
        assert_eq!(lrp_edge_probability(m, x.as_ptr(), y.as_ptr(), 100.0, &mut p), LrpStatus::Ok);
        // J(x) = ‖x‖^{-d-α} with ‖3‖ = 6, no cut-off effect at r = 100.
        let j = 6f64.powf(-1.5);
        assert!(p > 0.0 && p <= 1.0 - (-0.3 * j).exp() + 1e-12, "{p}");
        assert_eq!(lrp_edge_probability(m, ptr::null(), y.as_ptr(), 100.0, &mut p), LrpStatus::NullPointer);
        lrp_model_free(m);
        lrp_model_free(ptr::null_mut());
    }
}

#[test]
fn invalid_model_reports_a_message() {
    unsafe {
        let mut m = ptr::null_mut();
        let s = lrp_model_new(9, 0.5, LrpNorm::ScaledSup, 0.3, 1, &mut m);
        assert_eq!(s, LrpStatus::Numeric);
        assert!(m.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(lrp_model_new(1, 0.5, LrpNorm::ScaledSup, 0.3, 1, ptr::null_mut()), LrpStatus::NullPointer);
    }
}

#[test]
fn sampling_is_deterministic_and_matches_zero_beta() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(lrp_model_new(1, 0.3, LrpNorm::ScaledSup, 0.4, 1, &mut m), LrpStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(lrp_sampler_new(m, 100.0, 1_000_000, &mut s), LrpStatus::Ok);
        let (mut a, mut b) = (vec![0u64; 500], vec![0u64; 500]);
        let mut t = vec![9u8; 500];
        assert_eq!(lrp_sample_sizes(s, 7, 0, 500, 1, a.as_mut_ptr(), t.as_mut_ptr()), LrpStatus::Ok);
        assert_eq!(lrp_sample_sizes(s, 7, 0, 500, 3, b.as_mut_ptr(), ptr::null_mut()), LrpStatus::Ok);
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v >= 1) && t.iter().all(|&v| v == 0));
        let (mut mean, mut se) = (0.0, 0.0);
        assert_eq!(lrp_mean_size(s, 7, 0, 500, 0, &mut mean, &mut se), LrpStatus::Ok);
        let direct = a.iter().sum::<u64>() as f64 / 500.0;
        assert!((mean - direct).abs() < 1e-9 * direct, "{mean} vs {direct}");
        assert!(se > 0.0);
        lrp_sampler_free(s);
        lrp_model_free(m);

        let mut z = ptr::null_mut();
        assert_eq!(lrp_model_new(2, 1.0, LrpNorm::ScaledEuclidean, 0.0, 1, &mut z), LrpStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(lrp_sampler_new(z, 10.0, 100, &mut s), LrpStatus::Ok);
        let mut v = vec![0u64; 50];
        assert_eq!(lrp_sample_sizes(s, 1, 0, 50, 0, v.as_mut_ptr(), ptr::null_mut()), LrpStatus::Ok);
        assert!(v.iter().all(|&x| x == 1));
        assert_eq!(lrp_sampler_new(z, 0.5, 100, &mut s), LrpStatus::InvalidArgument);
        lrp_sampler_free(s);
        lrp_model_free(z);
    }
}

#[test]
fn closed_forms() {
    unsafe {
        let mut n = 0;
        assert_eq!(lrp_tree_count(4, &mut n), LrpStatus::Ok);
        assert_eq!(n, 15);
        assert_eq!(lrp_tree_count(100, &mut n), LrpStatus::Numeric);
        let mut f = 0.0;
        assert_eq!(lrp_riccati_exact(1.0, 0.5, 0.0, -1.0, 4.0, 1e9, &mut f), LrpStatus::Ok);
        assert!((f - 0.5 * 2.0).abs() < 1e-12, "{f}");
    }
    let m3 = lrp_moment_family(0.5, 0.25, 2.0, 3, 4.0);
    assert!((m3 - 3.0 * 4.0 * 2.0 * 4f64.powf(2.5)).abs() < 1e-9 * m3);
    let v = unsafe { CStr::from_ptr(lrp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_abi_and_compiles() {
    let h = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lrp.h");
    let text = std::fs::read_to_string(&h).unwrap();
    for name in [
        "typedef struct LrpModel LrpModel",
        "typedef struct LrpSampler LrpSampler",
        "LRP_STATUS_DEPENDENCY = 3",
        "lrp_model_new",
        "lrp_sample_sizes",
        "lrp_last_error_message",
    ] {
        assert!(text.contains(name), "{name} missing from lrp.h");
    }
    // Syntax check with the system C compiler when there is one.
    if let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&h).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
