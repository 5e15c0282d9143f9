use std::ffi::{CStr, CString};
use std::ptr;

use scorecusum_ffi::*;

fn last_error() -> String {
    let p = sc_last_error_message();
    assert!(!p.is_null());
    let msg = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string();
    unsafe { sc_string_free(p) };
    msg
}

fn spec(dim: usize, alpha: f64, sigma: f64, shift: f64) -> ScKernelSpec {
    ScKernelSpec { dim, alpha, sigma, shift }
}

#[test]
fn gaussian_field_matches_closed_form() {
    let mut field = ptr::null_mut();
    assert_eq!(unsafe { sc_field_gaussian(spec(2, 1.0, 0.5, 0.0), &mut field) }, ScStatus::Ok);
    assert_eq!(unsafe { sc_field_dim(field) }, 2);
    // α = 1, shift = 0: mean is 0, score is −y/σ², divergence −d/σ².
    let (prev, next) = ([0.3, -0.2], [0.5, 1.0]);
    let mut out = 0.0;
    let st = unsafe { sc_hyvarinen_score(field, prev.as_ptr(), next.as_ptr(), 2, &mut out) };
    assert_eq!(st, ScStatus::Ok);
    let expected = 0.5 * (0.5f64.powi(2) + 1.0) / 0.5f64.powi(4) - 2.0 / 0.25;
    assert!((out - expected).abs() < 1e-12);

    let st = unsafe { sc_hyvarinen_score(field, prev.as_ptr(), next.as_ptr(), 3, &mut out) };
    assert_eq!(st, ScStatus::Usage);
    assert!(last_error().contains("dimension"));
    unsafe { sc_field_free(field) };
}

#[test]
fn simulate_and_score_a_path() {
    let pre = spec(3, 0.3, 0.3, 0.2);
    let post = spec(3, 0.6, 0.5, 0.9);
    let mut buf = vec![0.0; 40 * 3];
    let st = unsafe { sc_simulate_path(&pre, &post, 20, 40, 100, 7, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, ScStatus::Ok);
    let mut again = vec![0.0; 40 * 3];
    unsafe { sc_simulate_path(&pre, &post, 20, 40, 100, 7, again.as_mut_ptr(), again.len()) };
    assert_eq!(buf, again);

    let (mut p, mut q) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(sc_field_gaussian(pre, &mut p), ScStatus::Ok);
        assert_eq!(sc_field_gaussian(post, &mut q), ScStatus::Ok);
    }
    let mut diffs = vec![0.0; 39];
    let st = unsafe { sc_score_differences(p, q, buf.as_ptr(), 40, 3, diffs.as_mut_ptr()) };
    assert_eq!(st, ScStatus::Ok);
    assert!(diffs.iter().all(|d| d.is_finite()));

    let mut det = ptr::null_mut();
    assert_eq!(unsafe { sc_detector_new(1e9, true, 600.0, &mut det) }, ScStatus::Ok);
    for &d in &diffs {
        let mut alarmed = true;
        assert_eq!(unsafe { sc_detector_update(det, d, &mut alarmed) }, ScStatus::Ok);
        assert!(!alarmed);
    }
    assert_eq!(unsafe { sc_detector_time(det) }, 39);
    unsafe {
        sc_detector_free(det);
        sc_field_free(p);
        sc_field_free(q);
    }

    let st = unsafe { sc_simulate_path(&pre, ptr::null(), 0, 10, 0, 1, buf.as_mut_ptr(), 5) };
    assert_eq!(st, ScStatus::Usage);
}

#[test]
fn detector_handle_follows_the_recursion() {
    let mut det = ptr::null_mut();
    assert_eq!(unsafe { sc_detector_new(3.0, false, 0.0, &mut det) }, ScStatus::Ok);
    let mut alarmed = false;
    let mut seen = Vec::new();
    for s in [1.0, -2.0, 3.0] {
        unsafe { sc_detector_update(det, s, &mut alarmed) };
        seen.push(unsafe { sc_detector_statistic(det) });
    }
    assert_eq!(seen, vec![1.0, -1.0, 3.0]);
    assert!(alarmed);
    unsafe { sc_detector_reset(det) };
    assert_eq!(unsafe { sc_detector_statistic(det) }, 0.0);
    assert_eq!(unsafe { sc_detector_update(det, f64::NAN, ptr::null_mut()) }, ScStatus::Numeric);
    unsafe { sc_detector_free(det) };

    assert_eq!(unsafe { sc_detector_new(-1.0, false, 0.0, &mut det) }, ScStatus::Usage);
    assert_eq!(unsafe { sc_detector_new(1.0, true, 0.0, &mut det) }, ScStatus::Usage);
}

#[test]
fn bound_functions() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(sc_false_alarm_lower_bound(1.0, 2.0, 4.0, &mut v), ScStatus::Ok);
        assert!((v - 6.96649).abs() < 1e-4);
        assert_eq!(sc_false_alarm_lower_bound(1.0, 2.0, 2.0, &mut v), ScStatus::Usage);
        assert!(last_error().contains("b > μ"));
        let (mut n0, mut bound) = (0u64, 0.0);
        assert_eq!(sc_delay_upper_bound(100.0, 10.0, 5.0, &mut n0, &mut bound), ScStatus::Ok);
        assert_eq!((n0, bound), (22, 23.0));
        assert_eq!(sc_heuristic_mu(600.0, 2.05, &mut v), ScStatus::Ok);
        assert_eq!(v, 1230.0);
        assert_eq!(sc_concentration_mu(600.0, 1, 1.0, &mut v), ScStatus::Ok);
        assert_eq!(v, 2400.0);
        assert_eq!(sc_hoeffding_tail(10, 0.6, 3.0, &mut v), ScStatus::Ok);
        assert!((v - 2.0 * (-0.2f64).exp()).abs() < 1e-12);
        assert_eq!(sc_heuristic_mu(600.0, 2.05, ptr::null_mut()), ScStatus::NullPointer);
    }
}

#[test]
fn model_loading_errors_are_classified() {
    let dir = std::env::temp_dir().join(format!("scorecusum-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let mut field = ptr::null_mut();

    let missing = CString::new(dir.join("absent.scn").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sc_field_load_model(missing.as_ptr(), &mut field) }, ScStatus::Io);

    let junk_path = dir.join("junk.scn");
    std::fs::write(&junk_path, b"not a model").unwrap();
    let junk = CString::new(junk_path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sc_field_load_model(junk.as_ptr(), &mut field) }, ScStatus::Parse);
    assert!(last_error().contains("magic"));

    use scorecusum::scorenet::{as_score_field, init_params, save_model, MlpArchitecture};
    let good_path = dir.join("good.scn");
    let arch = MlpArchitecture::new(2, vec![4]).unwrap();
    save_model(&good_path, &as_score_field(init_params(&arch, 1).unwrap())).unwrap();
    let good = CString::new(good_path.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { sc_field_load_model(good.as_ptr(), &mut field) }, ScStatus::Ok);
    assert_eq!(unsafe { sc_field_dim(field) }, 2);
    unsafe { sc_field_free(field) };
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/scorecusum.h")).unwrap();
    for name in [
        "sc_field_gaussian",
        "sc_field_load_model",
        "sc_hyvarinen_score",
        "sc_score_differences",
        "sc_detector_new",
        "sc_detector_update",
        "sc_false_alarm_lower_bound",
        "sc_simulate_path",
        "sc_last_error_message",
        "typedef struct ScField ScField",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
