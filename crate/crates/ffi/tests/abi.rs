use std::ffi::{CStr, CString};
use std::ptr;

use hybrid_iss_ffi::*;

fn example_json() -> CString {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data/two_clock_network.json");
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_round_trip() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(hsg_spec_from_json(example_json().as_ptr(), &mut spec), HsgStatus::Ok);
        let mut cert = ptr::null_mut();
        assert_eq!(hsg_certify(spec, HsgMode::Adt, &mut cert), HsgStatus::Ok);
        let mut verdict = HsgVerdict::Refuted;
        assert_eq!(hsg_certificate_verdict(cert, &mut verdict), HsgStatus::Ok);
        assert_eq!(verdict, HsgVerdict::CertifiedForSolutionClass);
        let (mut c, mut d) = (0.0, 0.0);
        assert_eq!(hsg_certificate_rates(cert, &mut c, &mut d), HsgStatus::Ok);
        assert!((c + 2.0).abs() < 1e-12 && (d - 1.0).abs() < 1e-12);
        let mut json = ptr::null_mut();
        assert_eq!(hsg_certificate_to_json(cert, &mut json), HsgStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["verdict"], "certified-for-solution-class");
        hsg_string_free(json);
        hsg_certificate_free(cert);
        hsg_spec_free(spec);
    }
}

#[test]
fn bad_spec_sets_message() {
    unsafe {
        let mut spec = ptr::null_mut();
        let text = CString::new("{\"subsystems\": 3}").unwrap();
        assert_eq!(hsg_spec_from_json(text.as_ptr(), &mut spec), HsgStatus::InvalidSpec);
        assert!(spec.is_null());
        assert!(!CStr::from_ptr(hsg_last_error_message()).to_bytes().is_empty());
    }
}

#[test]
fn spectral_radius_rejects_negative_entries() {
    let m = [0.0, 2.0, 0.5, 0.0];
    let mut rho = 0.0;
    assert_eq!(unsafe { hsg_spectral_radius(m.as_ptr(), 2, &mut rho) }, HsgStatus::Ok);
    assert!((rho - 1.0).abs() < 1e-12);
    let bad = [0.0, -1.0, 0.0, 0.0];
    assert_eq!(unsafe { hsg_spectral_radius(bad.as_ptr(), 2, &mut rho) }, HsgStatus::InvalidArgument);
}

// The generated header must compile as plain C.
#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/hybrid_iss.h");
    let src = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("use_header.c");
    std::fs::write(&src, format!("#include \"{header}\"\nint main(void) {{ HsgSpec *s = 0; hsg_spec_free(s); return HSG_STATUS_OK; }}\n")).unwrap();
    let Ok(status) = std::process::Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(status.success());
}
