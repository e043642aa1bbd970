//! C interface to `qdpack`.
//!
//! Every entry point returns a [`QdStatus`]. Results are written through out
//! pointers; objects are handed out as opaque handles and released with the
//! matching `_free` function. The message for the most recent failure on the
//! calling thread is available from [`qd_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use qdpack::chain::{self, ChainFailure, ChainHistory, ChainReport, ChainVerdict};
use qdpack::domains::{make_archipelago, DomainInput};
use qdpack::kernels::{KernelEvaluator, PointQuad};
use qdpack::positivity::{decide_overlap_input, OverlapVerdict, SamplePlan, DEFAULT_TOL};
use qdpack::Error;

/// Status codes. Zero means success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    GuardViolation = 3,
    NotPsd = 4,
    DegenerateSeed = 5,
    OutOfRange = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QdComplex {
    pub re: f64,
    pub im: f64,
}

impl From<QdComplex> for Complex64 {
    fn from(z: QdComplex) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl From<Complex64> for QdComplex {
    fn from(z: Complex64) -> Self {
        QdComplex { re: z.re, im: z.im }
    }
}

/// `qd_decide_overlap` verdicts.
pub const QD_DISJOINT_CERTIFIED: i32 = 0;
pub const QD_OVERLAP_DETECTED: i32 = 1;
pub const QD_INCONCLUSIVE: i32 = 2;

/// `qd_chain_verdict` kinds.
pub const QD_CHAIN_CERTIFIED: i32 = 0;
pub const QD_CHAIN_A_SQUARED_NOT_PSD: i32 = 1;
pub const QD_CHAIN_A_SINGULAR: i32 = 2;
pub const QD_CHAIN_NORM_BLOWUP: i32 = 3;

/// Opaque domain handle.
pub struct QdDomain {
    input: DomainInput,
    eval: KernelEvaluator,
}

/// Opaque handle to a finished chain run.
pub struct QdChain {
    report: ChainReport,
    #[allow(dead_code)]
    history: ChainHistory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QdStatus {
    match err {
        Error::GuardViolation { .. } | Error::SeriesRadius { .. } => QdStatus::GuardViolation,
        Error::NotPsd { .. } => QdStatus::NotPsd,
        Error::DegenerateSeed { .. } => QdStatus::DegenerateSeed,
        Error::InsufficientHistory { .. } => QdStatus::OutOfRange,
        Error::ZeroDenominator(_) | Error::Pole(_) | Error::BranchCut(_) => QdStatus::Numerical,
        _ => QdStatus::InvalidInput,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guarded<F>(f: F) -> QdStatus
where
    F: FnOnce() -> Result<(), (QdStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QdStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QdStatus::Panic
        }
    }
}

fn lift(err: Error) -> (QdStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (QdStatus, String) {
    (QdStatus::NullPointer, format!("null pointer: {what}"))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Builds a disk union from `n` packed `(cx, cy, r)` triples.
///
/// # Safety
/// `triples` must point to `3 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_domain_from_disks(
    triples: *const f64,
    n: usize,
    out: *mut *mut QdDomain,
) -> QdStatus {
    guarded(|| {
        if triples.is_null() {
            return Err(null("triples"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = std::slice::from_raw_parts(triples, 3 * n);
        let disks: Vec<(Complex64, f64)> = raw
            .chunks_exact(3)
            .map(|t| (Complex64::new(t[0], t[1]), t[2]))
            .collect();
        let arch = make_archipelago(&disks).map_err(lift)?;
        let dom = QdDomain {
            eval: KernelEvaluator::new(&arch),
            input: DomainInput::Disks(arch),
        };
        *out = Box::into_raw(Box::new(dom));
        Ok(())
    })
}

/// Builds a domain from a JSON document, either `{"disks":[...]}` or `{"P":...,"Q":...}`.
///
/// # Safety
/// `json` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_domain_from_json(json: *const c_char, out: *mut *mut QdDomain) -> QdStatus {
    guarded(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (QdStatus::InvalidInput, format!("json is not UTF-8: {e}")))?;
        let input = DomainInput::from_json(text).map_err(lift)?;
        let dom = QdDomain {
            eval: KernelEvaluator::from_input(&input),
            input,
        };
        *out = Box::into_raw(Box::new(dom));
        Ok(())
    })
}

/// # Safety
/// `dom` must come from a `qd_domain_from_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_domain_free(dom: *mut QdDomain) {
    if !dom.is_null() {
        drop(Box::from_raw(dom));
    }
}

/// Number of disks, or the quadrature degree for raw input.
///
/// # Safety
/// `dom` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_domain_degree(dom: *const QdDomain) -> usize {
    match dom.as_ref() {
        Some(d) => match &d.input {
            DomainInput::Disks(a) => a.degree(),
            DomainInput::Raw(q) => q.degree(),
        },
        None => 0,
    }
}

/// Exponential transform `E(w, z)`.
///
/// # Safety
/// `dom` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_exp_transform(
    dom: *const QdDomain,
    w: QdComplex,
    z: QdComplex,
    out: *mut QdComplex,
) -> QdStatus {
    guarded(|| {
        let d = dom.as_ref().ok_or_else(|| null("dom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let e = d.eval.exp_transform(w.into(), z.into()).map_err(lift)?;
        *out = e.into();
        Ok(())
    })
}

/// Four-point kernel `L(w, z, u, v)`.
///
/// # Safety
/// `dom` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_kernel_l(
    dom: *const QdDomain,
    w: QdComplex,
    z: QdComplex,
    u: QdComplex,
    v: QdComplex,
    out: *mut QdComplex,
) -> QdStatus {
    guarded(|| {
        let d = dom.as_ref().ok_or_else(|| null("dom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let q = PointQuad::new(w.into(), z.into(), u.into(), v.into());
        *out = d.eval.kernel_l(&q).map_err(lift)?.into();
        Ok(())
    })
}

/// Runs the overlap decision procedure.
///
/// `samples` points are drawn in the default band with the given seed and
/// `tol <= 0` selects the default tolerance. On success `verdict` receives one
/// of the `QD_DISJOINT_CERTIFIED`, `QD_OVERLAP_DETECTED`, `QD_INCONCLUSIVE`
/// constants. If `report_json` is non-null it receives a JSON report to be
/// released with [`qd_string_free`].
///
/// # Safety
/// `dom` must be a live handle; `verdict` must be writable; `report_json` may be null.
#[no_mangle]
pub unsafe extern "C" fn qd_decide_overlap(
    dom: *const QdDomain,
    samples: usize,
    seed: u64,
    tol: f64,
    max_iter: usize,
    verdict: *mut i32,
    report_json: *mut *mut c_char,
) -> QdStatus {
    guarded(|| {
        let d = dom.as_ref().ok_or_else(|| null("dom"))?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let tol = if tol > 0.0 { tol } else { DEFAULT_TOL };
        let plan = SamplePlan::default_band(samples, d.input.bounding_radius(), seed)
            .map_err(lift)?
            .with_tol(tol);
        let rep = decide_overlap_input(&d.input, &plan, max_iter);
        *verdict = match rep.verdict {
            OverlapVerdict::DisjointCertified => QD_DISJOINT_CERTIFIED,
            OverlapVerdict::OverlapDetected => QD_OVERLAP_DETECTED,
            OverlapVerdict::Inconclusive { .. } => QD_INCONCLUSIVE,
        };
        if !report_json.is_null() {
            let text = serde_json::to_string(&rep)
                .map_err(|e| (QdStatus::Numerical, format!("report serialization: {e}")))?;
            *report_json = into_c_string(text);
        }
        Ok(())
    })
}

/// Runs `k` steps of the subnormal chain. `tol <= 0` selects the default.
///
/// A failing chain still yields a handle; inspect it with [`qd_chain_verdict`].
///
/// # Safety
/// `dom` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_chain_run(
    dom: *const QdDomain,
    k: usize,
    tol: f64,
    out: *mut *mut QdChain,
) -> QdStatus {
    guarded(|| {
        let d = dom.as_ref().ok_or_else(|| null("dom"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let tol = if tol > 0.0 { tol } else { DEFAULT_TOL };
        let bits = chain::precision_for_steps(k);
        let seed = match &d.input {
            DomainInput::Disks(a) => chain::sos_seed_disks(a, bits),
            DomainInput::Raw(q) => chain::sos_seed(q, bits),
        }
        .map_err(lift)?;
        let cap = chain::default_norm_cap(d.input.bounding_radius());
        let (report, history) = chain::chain_run(&seed, k, tol, cap);
        *out = Box::into_raw(Box::new(QdChain { report, history }));
        Ok(())
    })
}

/// # Safety
/// `ch` must come from [`qd_chain_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_chain_free(ch: *mut QdChain) {
    if !ch.is_null() {
        drop(Box::from_raw(ch));
    }
}

/// Writes the verdict kind (`QD_CHAIN_*`) and the step count: the certified
/// depth on success, the failing step otherwise.
///
/// # Safety
/// `ch` must be a live handle; `kind` and `step` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_chain_verdict(ch: *const QdChain, kind: *mut i32, step: *mut usize) -> QdStatus {
    guarded(|| {
        let c = ch.as_ref().ok_or_else(|| null("chain"))?;
        if kind.is_null() || step.is_null() {
            return Err(null("kind/step"));
        }
        let (k, s) = match c.report.verdict {
            ChainVerdict::CertifiedUpToK { k } => (QD_CHAIN_CERTIFIED, k),
            ChainVerdict::FailedAt { step, mode } => (
                match mode {
                    ChainFailure::ASquaredNotPsd => QD_CHAIN_A_SQUARED_NOT_PSD,
                    ChainFailure::ASingular => QD_CHAIN_A_SINGULAR,
                    ChainFailure::NormBlowup => QD_CHAIN_NORM_BLOWUP,
                },
                step,
            ),
        };
        *kind = k;
        *step = s;
        Ok(())
    })
}

/// Number of recorded trace rows.
///
/// # Safety
/// `ch` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn qd_chain_trace_len(ch: *const QdChain) -> usize {
    ch.as_ref().map_or(0, |c| c.report.trace.len())
}

/// Reads trace row `index`: smallest eigenvalue and trace of `A_k²`, and `‖D_k‖`.
///
/// # Safety
/// `ch` must be a live handle; the three out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_chain_trace(
    ch: *const QdChain,
    index: usize,
    min_eig: *mut f64,
    trace: *mut f64,
    norm_d: *mut f64,
) -> QdStatus {
    guarded(|| {
        let c = ch.as_ref().ok_or_else(|| null("chain"))?;
        if min_eig.is_null() || trace.is_null() || norm_d.is_null() {
            return Err(null("trace outputs"));
        }
        let row = c.report.trace.get(index).ok_or_else(|| {
            (
                QdStatus::OutOfRange,
                format!("trace index {index} out of range ({} rows)", c.report.trace.len()),
            )
        })?;
        *min_eig = row.min_eig_a2;
        *trace = row.trace_a2;
        *norm_d = row.norm_d;
        Ok(())
    })
}

/// Smallest half-separation `a` for which two unit disks at `±a` survive `k` steps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qd_two_disk_threshold(k: usize, out: *mut f64) -> QdStatus {
    guarded(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let table = chain::two_disk_threshold_table(k);
        *out = table[k];
        Ok(())
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn qd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failing call on this thread, or null.
///
/// The pointer stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
