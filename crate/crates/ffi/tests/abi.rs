//! Exercises the C ABI from Rust and from a C translation unit built against
//! the generated header.

use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use degenlab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(dl_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn profile_operator_and_heat_round_trip() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(dl_profile_power_1d(0.25, [0.0].as_ptr(), 1, -2.0, 2.0, &mut p), DlStatus::Ok);

        let mut json = ptr::null_mut();
        assert_eq!(dl_profile_to_json(p, &mut json), DlStatus::Ok);
        let mut q = ptr::null_mut();
        assert_eq!(dl_profile_from_json(json, ptr::null(), &mut q), DlStatus::Ok);
        dl_string_free(json);

        let (mut d1, mut d2) = (0.0, 0.0);
        assert_eq!(dl_distance_1d(p, -1.0, 1.0, 0.0, &mut d1), DlStatus::Ok);
        assert_eq!(dl_distance_1d(q, -1.0, 1.0, 0.0, &mut d2), DlStatus::Ok);
        assert_eq!(d1, d2);
        assert!(d1 > 2.0);

        let mut verdict = DlVerdict::Inconclusive;
        assert_eq!(dl_profile_classify(q, &mut verdict), DlStatus::Ok);
        assert_eq!(verdict, DlVerdict::ClosableDegenerate);

        let mut a = ptr::null_mut();
        assert_eq!(dl_operator_assemble(p, 40, 0.0, &mut a), DlStatus::Ok);
        let mut n = 0;
        assert_eq!(dl_operator_size(a, &mut n), DlStatus::Ok);
        assert_eq!(n, 41);
        let mut x = [0.0];
        assert_eq!(dl_operator_point(a, 40, x.as_mut_ptr(), 1), DlStatus::Ok);
        assert_eq!(x[0], 2.0);

        let mut sums = vec![1.0; n];
        assert_eq!(dl_operator_row_sums(a, sums.as_mut_ptr(), n), DlStatus::Ok);
        assert!(sums.iter().all(|s| s.abs() < 1e-10));

        // In-place evolution of a constant leaves it fixed.
        let mut field = vec![2.5; n];
        assert_eq!(dl_heat_evolve(a, field.as_ptr(), 0.7, field.as_mut_ptr(), n), DlStatus::Ok);
        assert!(field.iter().all(|v| (v - 2.5).abs() < 1e-10));

        dl_operator_free(a);
        dl_profile_free(p);
        dl_profile_free(q);
    }
}

#[test]
fn failures_map_to_status_codes_with_messages() {
    unsafe {
        let mut p = ptr::null_mut();
        assert_eq!(dl_profile_power_1d(0.5, ptr::null(), 1, -1.0, 1.0, &mut p), DlStatus::NullPointer);
        assert!(last_error().contains("centers"));

        let bad = CString::new("{ not json").unwrap();
        assert_eq!(dl_profile_from_json(bad.as_ptr(), ptr::null(), &mut p), DlStatus::Schema);
        assert!(p.is_null());

        assert_eq!(dl_profile_power_1d(0.5, [0.0].as_ptr(), 1, -1.0, 1.0, &mut p), DlStatus::Ok);
        let mut d = 0.0;
        assert_eq!(dl_distance_1d(p, 0.0, 5.0, 0.0, &mut d), DlStatus::Domain);
        assert!(last_error().contains("outside"));

        let mut a = ptr::null_mut();
        assert_eq!(dl_operator_assemble(p, 16, 0.0, &mut a), DlStatus::Ok);
        let mut out = vec![0.0; 3];
        assert_eq!(dl_heat_evolve(a, out.as_ptr(), 1.0, out.as_mut_ptr(), 3), DlStatus::Argument);
        assert!(last_error().contains("length 3"));
        assert_eq!(dl_operator_size(ptr::null(), &mut 0), DlStatus::NullPointer);

        dl_operator_free(a);
        dl_profile_free(p);
        dl_profile_free(ptr::null_mut());
    }
}

#[test]
fn scenario_runs_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let name = CString::new("elliptic-2d").unwrap();
    let mut code = -1;
    unsafe {
        assert_eq!(dl_run_scenario(name.as_ptr(), out.as_ptr(), 2, &mut code), DlStatus::Ok);
    }
    assert_eq!(code, 0);
    assert!(dir.path().join("report.json").is_file());

    let missing = CString::new("no-such-scenario").unwrap();
    unsafe {
        assert_eq!(dl_run_scenario(missing.as_ptr(), out.as_ptr(), 1, &mut code), DlStatus::Io);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libdegenlab_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.is_file() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
