//! C ABI for `qnl-chain`.
//!
//! Objects are opaque heap handles created by `qnl_*_new`-style functions and
//! released by the matching `qnl_*_free`. Every fallible call returns a
//! [`QnlStatus`]; on failure a message is available from
//! [`qnl_last_error_message`] on the same thread until the next failing call.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qnl_chain::calculus::{NormIndex, PeriodicField};
use qnl_chain::certify::{apost_certificate, apriori_certificate, Certificate, CertifyOptions};
use qnl_chain::chain::{ChainConfig, Deformation, Potential};
use qnl_chain::estimate::consistency_report;
use qnl_chain::qc::RegionPartition;
use qnl_chain::solve::{newton_solve, stability_constant, Model, SolveOptions};
use qnl_chain::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Inadmissible = 3,
    SolverFailed = 4,
    NotEquilibrium = 5,
    BufferTooSmall = 6,
    Internal = 7,
    Panic = 8,
}

/// Which energy to evaluate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnlModel {
    Atomistic = 0,
    /// Quasinonlocal coupling; needs a partition.
    Qnl = 1,
    /// Local continuum limit (empty atomistic region).
    CauchyBorn = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnlCertificateKind {
    /// Built at an atomistic equilibrium; bounds the coupled solution.
    APriori = 0,
    /// Built at a coupled equilibrium; bounds the atomistic solution.
    APosteriori = 1,
}

/// Scalar summary of a certificate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QnlCertificateSummary {
    pub certified: bool,
    pub eta: f64,
    pub sigma: f64,
    pub lipschitz: f64,
    pub contraction: f64,
    pub radius: f64,
    pub error_bound: f64,
}

pub struct QnlPotential(Potential);
pub struct QnlPartition(RegionPartition);
pub struct QnlDeformation(Deformation);
pub struct QnlCertificate(Certificate);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QnlStatus {
    match e {
        Error::Inadmissible { .. } | Error::BallInadmissible { .. } => QnlStatus::Inadmissible,
        Error::MaxIterations { .. }
        | Error::SingularHessian { .. }
        | Error::StrainFloor { .. }
        | Error::NotPositiveDefinite => QnlStatus::SolverFailed,
        Error::NotEquilibrium { .. } => QnlStatus::NotEquilibrium,
        Error::Io(_) => QnlStatus::Internal,
        _ => QnlStatus::InvalidArgument,
    }
}

struct Fail(QnlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(QnlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QnlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QnlStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            QnlStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

unsafe fn model<'a>(kind: QnlModel, part: *const QnlPartition) -> Result<Model<'a>, Fail> {
    Ok(match kind {
        QnlModel::Atomistic => Model::Atomistic,
        QnlModel::CauchyBorn => Model::CauchyBorn,
        QnlModel::Qnl => Model::Qnl(&deref(part, "partition")?.0),
    })
}

/// Message of the last failing call on this thread, or null. Valid until the
/// next failing call on this thread.
#[no_mangle]
pub extern "C" fn qnl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qnl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Lennard-Jones `r^-12 - 2 r^-6`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_potential_lennard_jones(out: *mut *mut QnlPotential) -> QnlStatus {
    guard(|| write_out(out, boxed(QnlPotential(Potential::lennard_jones())), "out"))
}

/// Morse potential with stiffness `alpha`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_potential_morse(alpha: f64, out: *mut *mut QnlPotential) -> QnlStatus {
    guard(|| write_out(out, boxed(QnlPotential(Potential::morse(alpha)?)), "out"))
}

/// Lennard-Jones truncated smoothly at `r_cut`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_potential_lennard_jones_cutoff(
    r_cut: f64,
    out: *mut *mut QnlPotential,
) -> QnlStatus {
    guard(|| {
        write_out(
            out,
            boxed(QnlPotential(Potential::lennard_jones_cutoff(r_cut)?)),
            "out",
        )
    })
}

/// # Safety
/// `pot` must come from a `qnl_potential_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn qnl_potential_free(pot: *mut QnlPotential) {
    if !pot.is_null() {
        drop(Box::from_raw(pot));
    }
}

/// Partition whose atomistic region is the 1-based atoms `atoms[0..len]`.
///
/// # Safety
/// `atoms` must point to `len` values (may be null when `len == 0`); `out`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_partition_new(
    n: usize,
    atoms: *const usize,
    len: usize,
    out: *mut *mut QnlPartition,
) -> QnlStatus {
    guard(|| {
        let idx: &[usize] = if len == 0 {
            &[]
        } else if atoms.is_null() {
            return Err(null("atoms"));
        } else {
            std::slice::from_raw_parts(atoms, len)
        };
        let part = RegionPartition::from_indices(n, idx.iter().copied())?;
        write_out(out, boxed(QnlPartition(part)), "out")
    })
}

/// Partition with atomistic atoms `start..=end` (1-based, wrapping).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_partition_interval(
    n: usize,
    start: usize,
    end: usize,
    out: *mut *mut QnlPartition,
) -> QnlStatus {
    guard(|| {
        write_out(
            out,
            boxed(QnlPartition(RegionPartition::interval(n, start, end)?)),
            "out",
        )
    })
}

/// # Safety
/// `part` must come from a `qnl_partition_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn qnl_partition_free(part: *mut QnlPartition) {
    if !part.is_null() {
        drop(Box::from_raw(part));
    }
}

/// Uniform deformation `y = F x` with `n` atoms per period.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_deformation_uniform(
    n: usize,
    f: f64,
    out: *mut *mut QnlDeformation,
) -> QnlStatus {
    guard(|| {
        write_out(
            out,
            boxed(QnlDeformation(Deformation::uniform(ChainConfig::new(
                n, f,
            )?))),
            "out",
        )
    })
}

/// Deformation with bond strains `strains[0..n]`; `F` is their mean.
///
/// # Safety
/// `strains` must point to `n` values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_deformation_from_strains(
    strains: *const f64,
    n: usize,
    out: *mut *mut QnlDeformation,
) -> QnlStatus {
    guard(|| {
        let s = slice(strains, n, "strains")?;
        write_out(
            out,
            boxed(QnlDeformation(Deformation::from_strains(s.to_vec())?)),
            "out",
        )
    })
}

/// Number of atoms per period, or 0 for a null handle.
///
/// # Safety
/// `y` must be a live deformation handle or null.
#[no_mangle]
pub unsafe extern "C" fn qnl_deformation_len(y: *const QnlDeformation) -> usize {
    y.as_ref().map_or(0, |y| y.0.n())
}

/// Copies the `n` bond strains into `buf` (`buf_len >= n`).
///
/// # Safety
/// `y` must be a live handle and `buf` valid for `buf_len` writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_deformation_strains(
    y: *const QnlDeformation,
    buf: *mut f64,
    buf_len: usize,
) -> QnlStatus {
    guard(|| {
        let s = deref(y, "deformation")?.0.strains();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if buf_len < s.len() {
            return Err(Fail(
                QnlStatus::BufferTooSmall,
                format!("need {} values, got {buf_len}", s.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.as_ptr(), buf, s.len());
        Ok(())
    })
}

/// # Safety
/// `y` must come from a `qnl_deformation_*` constructor or solver, or be null.
#[no_mangle]
pub unsafe extern "C" fn qnl_deformation_free(y: *mut QnlDeformation) {
    if !y.is_null() {
        drop(Box::from_raw(y));
    }
}

/// Stored energy of `y` for the chosen model. `part` is required only for
/// `QnlModel::Qnl`.
///
/// # Safety
/// Handles must be live (or null where optional); `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_energy(
    kind: QnlModel,
    pot: *const QnlPotential,
    part: *const QnlPartition,
    y: *const QnlDeformation,
    out: *mut f64,
) -> QnlStatus {
    guard(|| {
        let e =
            model(kind, part)?.energy(&deref(y, "deformation")?.0, &deref(pot, "potential")?.0)?;
        write_out(out, e, "out")
    })
}

/// Stability constant: the smallest eigenvalue of the Hessian on mean-zero
/// displacements, measured against the discrete H^1 seminorm.
///
/// # Safety
/// Handles must be live (or null where optional); `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_stability_constant(
    kind: QnlModel,
    pot: *const QnlPotential,
    part: *const QnlPartition,
    y: *const QnlDeformation,
    out: *mut f64,
) -> QnlStatus {
    guard(|| {
        let st = stability_constant(
            model(kind, part)?,
            &deref(pot, "potential")?.0,
            &deref(y, "deformation")?.0,
        )?;
        write_out(out, st.constant, "out")
    })
}

/// Newton solve for the equilibrium under the mean-zero atom load
/// `load[0..n]`, starting from `y0`. Pass `tol <= 0` or `max_iter == 0` for
/// the defaults. On success `*out` receives a new deformation handle.
///
/// # Safety
/// Handles must be live (or null where optional); `load` must point to `n`
/// values where `n` is the chain length; output pointers valid for writes
/// (`iterations` may be null).
#[no_mangle]
pub unsafe extern "C" fn qnl_newton_solve(
    kind: QnlModel,
    pot: *const QnlPotential,
    part: *const QnlPartition,
    y0: *const QnlDeformation,
    load: *const f64,
    tol: f64,
    max_iter: usize,
    out: *mut *mut QnlDeformation,
    iterations: *mut usize,
) -> QnlStatus {
    guard(|| {
        let y0 = &deref(y0, "y0")?.0;
        let f = PeriodicField::atoms(slice(load, y0.n(), "load")?.to_vec());
        let mut opts = SolveOptions::default();
        if tol > 0.0 {
            opts.tol_residual = tol;
        }
        if max_iter > 0 {
            opts.max_iter = max_iter;
        }
        let sol = newton_solve(
            model(kind, part)?,
            &deref(pot, "potential")?.0,
            y0,
            &f,
            &opts,
        )?;
        if !iterations.is_null() {
            iterations.write(sol.iterations);
        }
        write_out(out, boxed(QnlDeformation(sol.y)), "out")
    })
}

/// Consistency error `||DPhi(y) - DPhi_qc(y)||` in the dual `p`-norm and its
/// computable upper bound. `p` may be `INFINITY`.
///
/// # Safety
/// Handles must be live; output pointers valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_consistency(
    pot: *const QnlPotential,
    part: *const QnlPartition,
    y: *const QnlDeformation,
    p: f64,
    measured: *mut f64,
    bound: *mut f64,
) -> QnlStatus {
    guard(|| {
        let r = consistency_report(
            &deref(y, "deformation")?.0,
            &deref(pot, "potential")?.0,
            &deref(part, "partition")?.0,
            NormIndex::new(p)?,
        )?;
        write_out(measured, r.measured, "measured")?;
        write_out(bound, r.bound, "bound")
    })
}

/// Builds an existence and error certificate at the equilibrium `y` under the
/// load `load[0..n]`. A refused certificate is a successful call; inspect it
/// with [`qnl_certificate_summary`]. `delta` in (0, 1); pass 0 for the default.
///
/// # Safety
/// Handles must be live; `load` must point to `n` values; `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_certify(
    kind: QnlCertificateKind,
    pot: *const QnlPotential,
    part: *const QnlPartition,
    y: *const QnlDeformation,
    load: *const f64,
    delta: f64,
    out: *mut *mut QnlCertificate,
) -> QnlStatus {
    guard(|| {
        let y = &deref(y, "deformation")?.0;
        let pot = &deref(pot, "potential")?.0;
        let part = &deref(part, "partition")?.0;
        let f = PeriodicField::atoms(slice(load, y.n(), "load")?.to_vec());
        let mut opts = CertifyOptions::default();
        if delta != 0.0 {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Fail(
                    QnlStatus::InvalidArgument,
                    format!("delta = {delta} must lie in (0, 1)"),
                ));
            }
            opts.delta = delta;
        }
        let cert = match kind {
            QnlCertificateKind::APriori => apriori_certificate(y, pot, part, &f, &opts)?,
            QnlCertificateKind::APosteriori => apost_certificate(y, pot, part, &f, &opts)?,
        };
        write_out(out, boxed(QnlCertificate(cert)), "out")
    })
}

/// # Safety
/// `cert` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_certificate_summary(
    cert: *const QnlCertificate,
    out: *mut QnlCertificateSummary,
) -> QnlStatus {
    guard(|| {
        let c = &deref(cert, "certificate")?.0;
        let s = QnlCertificateSummary {
            certified: c.verdict.is_certified(),
            eta: c.eta,
            sigma: c.sigma,
            lipschitz: c.l,
            contraction: c.contraction,
            radius: c.radius,
            error_bound: c.error_bound,
        };
        write_out(out, s, "out")
    })
}

/// Full certificate as a JSON string; release with [`qnl_string_free`].
///
/// # Safety
/// `cert` must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qnl_certificate_json(
    cert: *const QnlCertificate,
    out: *mut *mut c_char,
) -> QnlStatus {
    guard(|| {
        let text = serde_json::to_string(&deref(cert, "certificate")?.0)
            .map_err(|e| Fail(QnlStatus::Internal, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Fail(QnlStatus::Internal, e.to_string()))?;
        write_out(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `cert` must come from [`qnl_certify`] or be null.
#[no_mangle]
pub unsafe extern "C" fn qnl_certificate_free(cert: *mut QnlCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn qnl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Copies the last error message; convenience for bindings that cannot hold
/// borrowed pointers. Returns the message length, writing at most
/// `buf_len - 1` bytes plus a NUL.
///
/// # Safety
/// `buf` must be valid for `buf_len` writes or null.
#[no_mangle]
pub unsafe extern "C" fn qnl_last_error_copy(buf: *mut c_char, buf_len: usize) -> usize {
    let msg = qnl_last_error_message();
    if msg.is_null() {
        return 0;
    }
    let bytes = CStr::from_ptr(msg).to_bytes();
    if !buf.is_null() && buf_len > 0 {
        let n = bytes.len().min(buf_len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
        buf.add(n).write(0);
    }
    bytes.len()
}
