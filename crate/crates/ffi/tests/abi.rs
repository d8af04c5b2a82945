//! Exercises the C ABI from Rust and syntax-checks the generated header
//! with a C compiler when one is available.

use std::ptr;
use vlfmac_ffi::*;

const LN_2: f64 = std::f64::consts::LN_2;

#[test]
fn scalar_functions_and_domains() {
    unsafe {
        let mut v = 0.0f64;
        assert_eq!(vlf_capacity(1.0, &mut v), VlfStatus::Ok);
        assert!((v - 0.5 * LN_2).abs() < 1e-15);
        assert_eq!(vlf_capacity(3.0, &mut v), VlfStatus::Ok);
        assert!((v - LN_2).abs() < 1e-15);
        assert_eq!(vlf_capacity(-1.0, &mut v), VlfStatus::InvalidArgument);
        assert_eq!(vlf_capacity(1.0, ptr::null_mut()), VlfStatus::NullPointer);

        assert_eq!(vlf_binary_entropy(0.5, &mut v), VlfStatus::Ok);
        assert!((v - LN_2).abs() < 1e-15);
        assert_eq!(vlf_binary_entropy(1.5, &mut v), VlfStatus::InvalidArgument);
    }
}

#[test]
fn stats_lifecycle_constants_and_bounds() {
    unsafe {
        let mut stats: *mut VlfStats = ptr::null_mut();
        assert_eq!(vlf_stats_new(0.0, 1.0, &mut stats), VlfStatus::InvalidArgument);
        assert_eq!(vlf_stats_new(1.0, 1.0, ptr::null_mut()), VlfStatus::NullPointer);
        assert_eq!(vlf_stats_new(1.0, 1.0, &mut stats), VlfStatus::Ok);
        assert!(!stats.is_null());

        let (mut mu, mut s2, mut l) = (0.0, 0.0, 0.0);
        assert_eq!(vlf_stats_get(stats, 1, &mut mu, &mut s2, &mut l), VlfStatus::Ok);
        assert!((mu - 0.5 * LN_2).abs() < 1e-12);
        assert!((s2 - 0.5).abs() < 1e-12);
        assert_eq!(vlf_stats_get(stats, 3, &mut mu, ptr::null_mut(), ptr::null_mut()), VlfStatus::Ok);
        assert!((mu - 0.5 * 3.0f64.ln()).abs() < 1e-12);
        assert_eq!(vlf_stats_get(stats, 0, &mut mu, &mut s2, &mut l), VlfStatus::InvalidArgument);
        assert_eq!(
            vlf_stats_get(ptr::null(), 1, &mut mu, &mut s2, &mut l),
            VlfStatus::NullPointer
        );

        let mut a = 0.0;
        assert_eq!(vlf_a_constant(stats, &mut a), VlfStatus::Ok);
        assert!((a - 5.311653525463325).abs() < 1e-12);

        let mut t = VlfRateTriple { r1: 0.0, r2: 0.0, rsum: 0.0 };
        assert_eq!(vlf_sf_converse(stats, 100.0, 0.5, &mut t), VlfStatus::Ok);
        assert!((t.r1 - 102.0 * LN_2).abs() < 1e-12);
        assert_eq!(vlf_sf_achievable(stats, 1e4, 0.0, 0.0, &mut t), VlfStatus::Ok);
        assert!((t.r1 - 3456.525562427997).abs() < 1e-9);
        assert_eq!(vlf_sf_achievable(stats, 1e4, 1.0, 0.0, &mut t), VlfStatus::InvalidArgument);
        assert_eq!(vlf_vlft_achievable(stats, 100.0, 0.0, 0.5, &mut t), VlfStatus::Ok);
        assert!(t.r1 > 0.0);
        assert_eq!(vlf_vlft_achievable(stats, 2.0, 0.0, 0.5, &mut t), VlfStatus::InvalidArgument);
        assert_eq!(vlf_vlft_converse(stats, 100.0, 0.0, 0.0, &mut t), VlfStatus::Ok);

        let mut gamma = [0.0f64; 3];
        assert_eq!(
            vlf_thresholds_from_target(stats, 100.0, 0.0, 0.0, gamma.as_mut_ptr()),
            VlfStatus::Ok
        );
        assert!((gamma[0] - 34.65735902799726).abs() < 1e-9);
        assert!((gamma[2] - 54.93061443340549).abs() < 1e-9);
        assert_eq!(
            vlf_thresholds_from_target(stats, 16.0, 4.0, 0.0, gamma.as_mut_ptr()),
            VlfStatus::Infeasible
        );

        let (mut m1, mut m2, mut clamped) = (0u64, 0u64, -1i32);
        assert_eq!(
            vlf_message_sizes(10.0, 10.0, 12.0, 10.0, &mut m1, &mut m2, &mut clamped),
            VlfStatus::Ok
        );
        assert_eq!((m1, m2, clamped), (217, 25, 0));

        vlf_stats_free(stats);
        vlf_stats_free(ptr::null_mut());
    }
}

#[test]
fn region_roundtrip() {
    unsafe {
        let mut stats: *mut VlfStats = ptr::null_mut();
        assert_eq!(vlf_stats_new(1.0, 1.0, &mut stats), VlfStatus::Ok);

        let mut region: *mut VlfRegion = ptr::null_mut();
        assert_eq!(vlf_region_new(stats, 0.0, 2, 10, &mut region), VlfStatus::InvalidArgument);
        assert_eq!(vlf_region_new(stats, 0.0, 0, 10, &mut region), VlfStatus::Ok);

        let mut n = 0usize;
        assert_eq!(vlf_region_num_points(region, &mut n), VlfStatus::Ok);
        assert_eq!(n, 4);

        let (mut x, mut y) = (0.0, 0.0);
        assert_eq!(vlf_region_point(region, 0, &mut x, &mut y), VlfStatus::Ok);
        assert_eq!(x, 0.0);
        assert!((y - 0.5 * LN_2).abs() < 1e-12);
        assert_eq!(vlf_region_point(region, 99, &mut x, &mut y), VlfStatus::InvalidArgument);

        let mut inside = -1i32;
        assert_eq!(vlf_region_contains(region, 0.1, 0.1, 1e-9, &mut inside), VlfStatus::Ok);
        assert_eq!(inside, 1);
        assert_eq!(vlf_region_contains(region, 0.4, 0.4, 1e-9, &mut inside), VlfStatus::Ok);
        assert_eq!(inside, 0);

        vlf_region_free(region);

        // The swept region at the same budget contains the pentagon corner.
        let mut swept: *mut VlfRegion = ptr::null_mut();
        assert_eq!(vlf_region_new(stats, 0.0, 1, 50, &mut swept), VlfStatus::Ok);
        let corner = (0.5 * 1.5f64.ln(), 0.5 * LN_2);
        assert_eq!(
            vlf_region_contains(swept, corner.0, corner.1, 1e-9, &mut inside),
            VlfStatus::Ok
        );
        assert_eq!(inside, 1);
        vlf_region_free(swept);
        vlf_region_free(ptr::null_mut());
        vlf_stats_free(stats);
    }
}

#[test]
fn estimated_constants_are_sane() {
    unsafe {
        let mut stats: *mut VlfStats = ptr::null_mut();
        assert_eq!(vlf_stats_new(1.0, 1.0, &mut stats), VlfStatus::Ok);
        let (mut a, mut g) = (0.0, 0.0);
        assert_eq!(vlf_estimate_constants(stats, 0, 1, &mut a, &mut g), VlfStatus::InvalidArgument);
        assert_eq!(vlf_estimate_constants(stats, 20_000, 1, &mut a, &mut g), VlfStatus::Ok);
        assert!((a - 5.311653525463325).abs() < 1e-12);
        assert!((g - 4.56).abs() < 1.0, "g = {g}");
        // Determinism across calls.
        let (mut a2, mut g2) = (0.0, 0.0);
        assert_eq!(vlf_estimate_constants(stats, 20_000, 1, &mut a2, &mut g2), VlfStatus::Ok);
        assert_eq!(g, g2);
        vlf_stats_free(stats);
    }
}

#[test]
fn header_exists_and_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/vlfmac.h");
    assert!(std::path::Path::new(header).exists(), "generated header missing");
    let text = std::fs::read_to_string(header).unwrap();
    for symbol in ["vlf_stats_new", "vlf_region_contains", "VlfStatus_Infeasible", "VlfRateTriple"] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }

    let compiler = ["cc", "gcc", "clang"].into_iter().find(|c| {
        std::process::Command::new(c)
            .arg("--version")
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    });
    let Some(cc) = compiler else {
        eprintln!("no C compiler found; skipping header syntax check");
        return;
    };
    let dir = std::env::temp_dir();
    let src = dir.join("vlfmac_header_check.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ return 0; }}\n"))
        .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror"])
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "header failed C compilation:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
