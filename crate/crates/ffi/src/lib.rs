// SPDX-License-Identifier: Apache-2.0

//! C ABI over the lexstrata library.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns an
//! [`LxStatus`]; on failure, [`lx_last_error`] gives a message for the
//! calling thread. Panics are caught and reported as `LX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use lexstrata::consensus::{cohen_kappa, QuadrantCounts};
use lexstrata::corpus::{load_corpus, IngestConfig};
use lexstrata::evaluate::{fit_full, run_cv, EvalConfig};
use lexstrata::labeler::{read_loans, read_rescues, subtract, LabeledCorpus, RescueMatch, Stage};
use lexstrata::learners::{LearnerConfig, Model, ModelKind};
use lexstrata::phonoclust::norm_levenshtein;
use lexstrata::phonofeatures::{build_rows, CorpusContext, FeatureSpec, UnseenLanguages, Variant};
use lexstrata::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LxStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidInput = 5,
    SingleClass = 6,
    Config = 7,
    Undefined = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Feature-set selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LxVariant {
    ModelA = 0,
    ModelB = 1,
    Ablated = 2,
    Pure = 3,
}

impl From<LxVariant> for Variant {
    fn from(v: LxVariant) -> Self {
        match v {
            LxVariant::ModelA => Variant::ModelA,
            LxVariant::ModelB => Variant::ModelB,
            LxVariant::Ablated => Variant::Ablated,
            LxVariant::Pure => Variant::Pure,
        }
    }
}

/// A wordlist after cognate subtraction.
pub struct LxCorpus {
    inner: LabeledCorpus,
}

/// A classifier trained on a corpus, with the statistics it was trained on.
pub struct LxModel {
    model: Model,
    context: CorpusContext,
    spec: FeatureSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> LxStatus {
    match e {
        Error::Io { .. } => LxStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::MissingColumn { .. } | Error::EmptyForm(_) => LxStatus::Parse,
        Error::SingleClass(_) => LxStatus::SingleClass,
        Error::Config(_) | Error::MissingArtifact { .. } => LxStatus::Config,
        Error::Undefined(_) => LxStatus::Undefined,
        _ => LxStatus::InvalidInput,
    }
}

struct Fail(LxStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LxStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LxStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(LxStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LxStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_path(p: *const c_char, name: &str) -> Result<Option<PathBuf>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(|s| Some(PathBuf::from(s)))
    }
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(LxStatus::NullArgument, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(LxStatus::NullArgument, format!("{name} is null")))
}

fn open(p: &PathBuf) -> Result<std::fs::File, Fail> {
    std::fs::File::open(p).map_err(|e| Fail(LxStatus::Io, format!("{}: {e}", p.display())))
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a form table and applies cognate subtraction. Every path except
/// `forms_path` may be null. The handle must be released with
/// [`lx_corpus_free`].
///
/// # Safety
/// Non-null string arguments must be valid NUL-terminated strings and `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lx_corpus_load(
    forms_path: *const c_char,
    loans_path: *const c_char,
    rescues_path: *const c_char,
    swadesh_path: *const c_char,
    domains_path: *const c_char,
    out: *mut *mut LxCorpus,
) -> LxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let forms = PathBuf::from(str_arg(forms_path, "forms_path")?);
        let swadesh = opt_path(swadesh_path, "swadesh_path")?;
        let domains = opt_path(domains_path, "domains_path")?;
        let parsed = load_corpus(&forms, &IngestConfig::default(), swadesh.as_deref(), domains.as_deref())?;
        let loans = match opt_path(loans_path, "loans_path")? {
            Some(p) => read_loans(open(&p)?)?,
            None => Vec::new(),
        };
        let rescues = match opt_path(rescues_path, "rescues_path")? {
            Some(p) => read_rescues(open(&p)?)?,
            None => Vec::new(),
        };
        let inner = subtract(&parsed.corpus, &loans, &rescues, RescueMatch::Exact);
        *out = Box::into_raw(Box::new(LxCorpus { inner }));
        Ok(())
    })
}

/// Releases a corpus handle. Null is ignored.
///
/// # Safety
/// `corpus` must come from [`lx_corpus_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lx_corpus_free(corpus: *mut LxCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of forms.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_corpus_len(corpus: *const LxCorpus, out: *mut usize) -> LxStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(corpus, "corpus")?.inner.len();
        Ok(())
    })
}

/// Number of forms left unexplained after subtraction.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_corpus_residual_count(corpus: *const LxCorpus, out: *mut usize) -> LxStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(corpus, "corpus")?.inner.count(Stage::Residual);
        Ok(())
    })
}

/// Residual percentage for one language (loans excluded from the
/// denominator).
///
/// # Safety
/// Pointers must be valid; `language` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lx_corpus_residual_rate(
    corpus: *const LxCorpus,
    language: *const c_char,
    out: *mut f64,
) -> LxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let lang = str_arg(language, "language")?;
        let table = lexstrata::labeler::residual_table(&handle(corpus, "corpus")?.inner);
        let row = table
            .rows
            .iter()
            .find(|r| r.language_id == lang)
            .ok_or_else(|| Fail(LxStatus::InvalidInput, format!("unknown language {lang:?}")))?;
        *out = row.residual_pct;
        Ok(())
    })
}

/// Repeated stratified k-fold CV of the gradient-boosted classifier.
/// Seeds are `seed, seed + 1, ..., seed + n_seeds - 1`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_cv_auc(
    corpus: *const LxCorpus,
    variant: LxVariant,
    k: u32,
    n_seeds: u32,
    seed: u64,
    mean_out: *mut f64,
    sd_out: *mut f64,
) -> LxStatus {
    guard(|| {
        let mean_out = out_arg(mean_out, "mean_out")?;
        let sd_out = out_arg(sd_out, "sd_out")?;
        if n_seeds == 0 {
            return Err(Fail(LxStatus::InvalidInput, "n_seeds must be positive".into()));
        }
        let cfg = EvalConfig {
            k: k as usize,
            seeds: (0..u64::from(n_seeds)).map(|i| seed.wrapping_add(i)).collect(),
            ..EvalConfig::default()
        };
        let summary = run_cv(&handle(corpus, "corpus")?.inner, &FeatureSpec::new(variant.into()), &cfg)?;
        let auc = summary
            .auc
            .ok_or_else(|| Fail(LxStatus::Undefined, "no split had both classes".into()))?;
        *mean_out = auc.mean;
        *sd_out = auc.sd;
        Ok(())
    })
}

/// Trains the gradient-boosted classifier on the whole corpus. Release with
/// [`lx_model_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_model_train(
    corpus: *const LxCorpus,
    variant: LxVariant,
    seed: u64,
    out: *mut *mut LxModel,
) -> LxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = std::ptr::null_mut();
        let spec = FeatureSpec::new(variant.into());
        let trained = fit_full(&handle(corpus, "corpus")?.inner, &spec, &LearnerConfig::new(ModelKind::Gbt), seed)?;
        *out = Box::into_raw(Box::new(LxModel { model: trained.model, context: trained.context, spec }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`lx_model_train`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn lx_model_free(model: *mut LxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes one probability per corpus form, in corpus order, into `out`
/// (capacity `len`). Languages unseen in training get the reserved code.
///
/// # Safety
/// Pointers must be valid and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn lx_model_predict(
    model: *const LxModel,
    corpus: *const LxCorpus,
    out: *mut f64,
    len: usize,
) -> LxStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let corpus = &handle(corpus, "corpus")?.inner;
        if out.is_null() {
            return Err(Fail(LxStatus::NullArgument, "out is null".into()));
        }
        if len < corpus.len() {
            return Err(Fail(
                LxStatus::BufferTooSmall,
                format!("need {} slots, got {len}", corpus.len()),
            ));
        }
        let rows: Vec<usize> = (0..corpus.len()).collect();
        let m = build_rows(corpus, &rows, &model.context, &model.spec, UnseenLanguages::Unknown)?;
        let probs = model.model.predict_proba(&m)?;
        std::slice::from_raw_parts_mut(out, probs.len()).copy_from_slice(&probs);
        Ok(())
    })
}

/// Cohen's kappa from the four quadrant counts.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_cohen_kappa(cs: u64, ca: u64, ro: u64, mo: u64, out: *mut f64) -> LxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = QuadrantCounts { cs: cs as usize, ca: ca as usize, ro: ro as usize, mo: mo as usize };
        *out = cohen_kappa(&c)?;
        Ok(())
    })
}

/// Unit-cost edit distance divided by the longer length.
///
/// # Safety
/// Strings must be valid and NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lx_norm_levenshtein(a: *const c_char, b: *const c_char, out: *mut f64) -> LxStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = norm_levenshtein(str_arg(a, "a")?, str_arg(b, "b")?);
        Ok(())
    })
}
