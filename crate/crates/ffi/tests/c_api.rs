use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use lexstrata_ffi::*;

fn fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn load() -> *mut LxCorpus {
    let forms = fixture("forms.csv");
    let loans = fixture("loans.csv");
    let rescues = fixture("rescues.csv");
    let mut out = ptr::null_mut();
    let st = unsafe {
        lx_corpus_load(forms.as_ptr(), loans.as_ptr(), rescues.as_ptr(), ptr::null(), ptr::null(), &mut out)
    };
    assert_eq!(st, LxStatus::Ok, "{:?}", unsafe { CStr::from_ptr(lx_last_error()) });
    assert!(!out.is_null());
    out
}

#[test]
fn corpus_round_trip() {
    let c = load();
    let mut n = 0usize;
    let mut res = 0usize;
    let mut rate = 0.0;
    let tolaki = CString::new("tolaki").unwrap();
    unsafe {
        assert_eq!(lx_corpus_len(c, &mut n), LxStatus::Ok);
        assert_eq!(lx_corpus_residual_count(c, &mut res), LxStatus::Ok);
        assert_eq!(lx_corpus_residual_rate(c, tolaki.as_ptr(), &mut rate), LxStatus::Ok);
        lx_corpus_free(c);
    }
    assert_eq!(n, 1357);
    assert_eq!(res, 356);
    assert!((rate - 100.0 * 114.0 / 206.0).abs() < 1e-9);
}

#[test]
fn train_and_predict() {
    let c = load();
    let mut m = ptr::null_mut();
    unsafe {
        assert_eq!(lx_model_train(c, LxVariant::ModelB, 3, &mut m), LxStatus::Ok);
        let mut n = 0usize;
        lx_corpus_len(c, &mut n);
        let mut small = vec![0.0; n - 1];
        assert_eq!(lx_model_predict(m, c, small.as_mut_ptr(), small.len()), LxStatus::BufferTooSmall);
        let mut probs = vec![-1.0; n];
        assert_eq!(lx_model_predict(m, c, probs.as_mut_ptr(), n), LxStatus::Ok);
        assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
        lx_model_free(m);
        lx_corpus_free(c);
    }
}

#[test]
fn errors_are_reported() {
    let mut out = ptr::null_mut();
    let missing = CString::new("/nonexistent/forms.csv").unwrap();
    unsafe {
        assert_eq!(
            lx_corpus_load(ptr::null(), ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut out),
            LxStatus::NullArgument
        );
        assert_eq!(
            lx_corpus_load(missing.as_ptr(), ptr::null(), ptr::null(), ptr::null(), ptr::null(), &mut out),
            LxStatus::Io
        );
        assert!(out.is_null());
        let msg = CStr::from_ptr(lx_last_error()).to_str().unwrap();
        assert!(msg.contains("nonexistent"), "{msg}");
        let mut k = 0.0;
        assert_eq!(lx_cohen_kappa(0, 0, 0, 0, &mut k), LxStatus::Undefined);
        assert_eq!(lx_cohen_kappa(1, 1, 1, 1, ptr::null_mut()), LxStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(lx_norm_levenshtein(bad.as_ptr().cast(), bad.as_ptr().cast(), &mut k), LxStatus::InvalidUtf8);
        lx_corpus_free(ptr::null_mut());
        lx_model_free(ptr::null_mut());
    }
}

#[test]
fn scalar_helpers() {
    let mut k = 0.0;
    let a = CString::new("kitten").unwrap();
    let b = CString::new("sitting").unwrap();
    unsafe {
        assert_eq!(lx_cohen_kappa(266, 878, 172, 41, &mut k), LxStatus::Ok);
        assert!((k - 0.611).abs() < 1e-3);
        assert_eq!(lx_norm_levenshtein(a.as_ptr(), b.as_ptr(), &mut k), LxStatus::Ok);
        assert!((k - 3.0 / 7.0).abs() < 1e-12);
        let v = CStr::from_ptr(lx_version()).to_str().unwrap();
        assert_eq!(v, env!("CARGO_PKG_VERSION"));
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/lexstrata.h")
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(header()).expect("header generated by build script");
    for sym in [
        "lx_last_error",
        "lx_version",
        "lx_corpus_load",
        "lx_corpus_free",
        "lx_corpus_len",
        "lx_corpus_residual_count",
        "lx_corpus_residual_rate",
        "lx_cv_auc",
        "lx_model_train",
        "lx_model_free",
        "lx_model_predict",
        "lx_cohen_kappa",
        "lx_norm_levenshtein",
        "typedef struct LxCorpus LxCorpus",
        "typedef struct LxModel LxModel",
        "LX_STATUS_OK = 0",
    ] {
        assert!(h.contains(sym), "missing {sym}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(header()).status() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(status.success());
}
