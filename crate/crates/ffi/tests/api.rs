use std::ffi::{c_char, CStr, CString};
use std::ptr;

use uihpq_ffi::*;

fn last_error() -> String {
    let mut need = 0;
    unsafe {
        assert_eq!(uihpq_last_error(ptr::null_mut(), 0, &mut need), UIHPQ_OK);
        let mut buf = vec![0u8; need];
        assert_eq!(uihpq_last_error(buf.as_mut_ptr().cast(), need, &mut need), UIHPQ_OK);
        CStr::from_bytes_with_nul(&buf).unwrap().to_str().unwrap().to_owned()
    }
}

fn report_json(r: *const UihpqReport) -> String {
    let mut need = 0;
    unsafe {
        assert_eq!(uihpq_report_json(r, ptr::null_mut(), 0, &mut need), UIHPQ_OK);
        let mut buf = vec![0u8; need];
        assert_eq!(uihpq_report_json(r, buf.as_mut_ptr().cast(), need, &mut need), UIHPQ_OK);
        CStr::from_bytes_with_nul(&buf).unwrap().to_str().unwrap().to_owned()
    }
}

#[test]
fn sample_serialize_parse() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(uihpq_sample_boltzmann(3, 0.25, 11, &mut m), UIHPQ_OK);
        let (mut he, mut v, mut f, mut per) = (0, 0, 0, 0);
        assert_eq!(uihpq_map_counts(m, &mut he, &mut v, &mut f), UIHPQ_OK);
        assert_eq!(uihpq_map_perimeter(m, &mut per), UIHPQ_OK);
        assert_eq!(per, 6);
        assert_eq!(v + f, he / 2 + 2, "Euler");
        let mut need = 0;
        assert_eq!(uihpq_map_to_pmap(m, ptr::null_mut(), 0, &mut need), UIHPQ_OK);
        let mut small = vec![0 as c_char; need - 1];
        assert_eq!(uihpq_map_to_pmap(m, small.as_mut_ptr(), small.len(), &mut need), UIHPQ_ERR_BUFFER_TOO_SMALL);
        let mut buf = vec![0 as c_char; need];
        assert_eq!(uihpq_map_to_pmap(m, buf.as_mut_ptr(), need, &mut need), UIHPQ_OK);
        let mut back = ptr::null_mut();
        assert_eq!(uihpq_map_from_pmap(buf.as_ptr(), &mut back), UIHPQ_OK);
        let enc = |h| {
            let mut n = 0;
            uihpq_map_canonical_encoding(h, ptr::null_mut(), 0, &mut n);
            let mut b = vec![0u8; n];
            assert_eq!(uihpq_map_canonical_encoding(h, b.as_mut_ptr(), n, &mut n), UIHPQ_OK);
            b
        };
        assert_eq!(enc(m), enc(back));
        uihpq_map_free(back);
        uihpq_map_free(m);
    }
}

#[test]
fn balls_are_reproducible() {
    unsafe {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(uihpq_sample_ball(0.3, 2, 5, &mut a), UIHPQ_OK);
        assert_eq!(uihpq_sample_ball(0.3, 2, 5, &mut b), UIHPQ_OK);
        let (mut na, mut nb) = (0, 0);
        let (mut x, mut y) = (0, 0);
        uihpq_map_counts(a, &mut na, &mut x, &mut y);
        uihpq_map_counts(b, &mut nb, &mut x, &mut y);
        assert_eq!(na, nb);
        uihpq_map_free(a);
        uihpq_map_free(b);
    }
}

#[test]
fn run_reports_and_configs() {
    let cmd = CString::new("prefix-law").unwrap();
    let cfg = CString::new(r#"{"seed": 4, "n": [4, 8]}"#).unwrap();
    unsafe {
        let mut r = ptr::null_mut();
        assert_eq!(uihpq_run(cmd.as_ptr(), cfg.as_ptr(), &mut r), UIHPQ_OK);
        let mut pass = -1;
        assert_eq!(uihpq_report_pass(r, &mut pass), UIHPQ_OK);
        assert_eq!(pass, 1);
        let v: serde_json::Value = serde_json::from_str(&report_json(r)).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["results"]["grid"].as_array().unwrap().len(), 2);
        uihpq_report_free(r);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(uihpq_sample_boltzmann(0, 0.3, 1, &mut m), UIHPQ_ERR_INVALID_ARGUMENT);
        assert!(!last_error().is_empty());
        assert_eq!(uihpq_sample_boltzmann(2, 0.3, 1, ptr::null_mut()), UIHPQ_ERR_NULL);
        assert_eq!(uihpq_map_from_pmap(ptr::null(), &mut m), UIHPQ_ERR_NULL);
        let bad = CString::new("garbage").unwrap();
        assert_eq!(uihpq_map_from_pmap(bad.as_ptr(), &mut m), UIHPQ_ERR_PARSE);
        let mut r = ptr::null_mut();
        let cmd = CString::new("nope").unwrap();
        assert_eq!(uihpq_run(cmd.as_ptr(), ptr::null(), &mut r), UIHPQ_ERR_PARSE);
        let cmd = CString::new("prefix-law").unwrap();
        let cfg = CString::new(r#"{"unknown": 1}"#).unwrap();
        assert_eq!(uihpq_run(cmd.as_ptr(), cfg.as_ptr(), &mut r), UIHPQ_ERR_PARSE);
        let cfg = CString::new(r#"{"p": "0.9"}"#).unwrap();
        assert_eq!(uihpq_run(cmd.as_ptr(), cfg.as_ptr(), &mut r), UIHPQ_ERR_INVALID_ARGUMENT);
        let mut x = 0;
        assert_eq!(uihpq_map_is_simple_boundary(ptr::null(), &mut x), UIHPQ_ERR_NULL);
        uihpq_map_free(ptr::null_mut());
        uihpq_report_free(ptr::null_mut());
        assert_eq!(CStr::from_ptr(uihpq_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
