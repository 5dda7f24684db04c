//! C ABI for the `adasub` library.
//!
//! Instances are opaque handles created by the `adasub_*_new` builders and
//! released with [`adasub_instance_free`]. Every fallible call returns an
//! [`AdasubStatus`]; on failure a human-readable message is available from
//! [`adasub_last_error_message`] until the next call on the same thread.
//! Results are written through out-pointers, with `+inf` standing in for
//! unbounded ratios.

use std::cell::RefCell;
use std::ffi::CString;
use std::panic::{catch_unwind, AssertUnwindSafe};

use libc::c_char;

use adasub::brute::{
    adaptivity_gap_exact, beta_nonadaptive, gamma_adaptive, zeta_star, RatioQuery,
};
use adasub::cases::{
    build_chain, build_diagnosis, build_kusner, build_tight_gap, ChainParams, KusnerParams,
    TightGapParams,
};
use adasub::core::{avg_value, ElementSet, Objective, PartialRealization, TabularPrior};
use adasub::infmax::gen_star;
use adasub::policies::{adaptive_greedy_policy, optimal_policy_exhaustive};
use adasub::{Error, Result};

/// Outcome of an FFI call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdasubStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters outside the supported domain.
    InvalidArgument = 2,
    /// Observation or policy inconsistent with the instance.
    Inconsistent = 3,
    /// The enumeration cap fired before the value was computed.
    BudgetExceeded = 4,
    /// A numeric routine failed to converge.
    Numeric = 5,
    /// Internal panic caught at the boundary.
    Panic = 6,
}

/// Tabular instance: a prior over realizations plus its objective.
pub struct AdasubInstance {
    prior: TabularPrior,
    objective: Box<dyn Objective>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty string has no NUL"));
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes stripped");
    });
}

fn status_of(err: &Error) -> AdasubStatus {
    match err {
        Error::InvalidParams(_)
        | Error::InvalidInput(_)
        | Error::UnknownCase(_)
        | Error::DuplicateEdge { .. }
        | Error::ParseError { .. }
        | Error::Io(_) => AdasubStatus::InvalidArgument,
        Error::InconsistentObservation(_)
        | Error::ElementReuse(_)
        | Error::MissingBranch { .. } => AdasubStatus::Inconsistent,
        Error::BudgetExceeded { .. } => AdasubStatus::BudgetExceeded,
        Error::DimensionMismatch(_) | Error::NotSymmetric(_) | Error::NoConvergence(_) => {
            AdasubStatus::Numeric
        }
    }
}

/// Runs `body`, mapping errors and panics onto a status code.
fn guarded<F: FnOnce() -> Result<AdasubStatus>>(body: F) -> AdasubStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_error("internal panic");
            AdasubStatus::Panic
        }
    }
}

fn build_instance(
    out: *mut *mut AdasubInstance,
    build: impl FnOnce() -> Result<(TabularPrior, Box<dyn Objective>)>,
) -> AdasubStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return AdasubStatus::NullPointer;
    }
    guarded(|| {
        let (prior, objective) = build()?;
        let handle = Box::new(AdasubInstance { prior, objective });
        unsafe { *out = Box::into_raw(handle) };
        Ok(AdasubStatus::Ok)
    })
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next `adasub_*` call on the same thread.
#[no_mangle]
pub extern "C" fn adasub_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn adasub_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Linear-threshold star: `k` sources, one unit sink, one live edge.
#[no_mangle]
pub extern "C" fn adasub_star_new(k: usize, out: *mut *mut AdasubInstance) -> AdasubStatus {
    build_instance(out, || {
        let (prior, objective) = gen_star(k)?.to_tabular(u64::MAX)?;
        Ok((prior, Box::new(objective) as Box<dyn Objective>))
    })
}

/// Tight adaptivity-gap construction; requires `p = 1/m` and `1 <= a <= m`.
#[no_mangle]
pub extern "C" fn adasub_tight_gap_new(
    k: usize,
    a: f64,
    m: usize,
    p: f64,
    out: *mut *mut AdasubInstance,
) -> AdasubStatus {
    build_instance(out, || {
        let case = build_tight_gap(&TightGapParams { k, a, m, p })?;
        Ok((case.prior, Box::new(case.objective) as Box<dyn Objective>))
    })
}

/// Chain of `ell` path vertices with side edges alive w.p. `epsilon`.
#[no_mangle]
pub extern "C" fn adasub_chain_new(
    ell: usize,
    epsilon: f64,
    out: *mut *mut AdasubInstance,
) -> AdasubStatus {
    build_instance(out, || {
        let case = build_chain(&ChainParams { ell, epsilon })?;
        Ok((case.prior, Box::new(case.objective) as Box<dyn Objective>))
    })
}

/// Counterexample where greedy earns `k(1+epsilon)` against `1+(k-1)m`.
#[no_mangle]
pub extern "C" fn adasub_kusner_new(
    k: usize,
    m: usize,
    epsilon: f64,
    out: *mut *mut AdasubInstance,
) -> AdasubStatus {
    build_instance(out, || {
        let (prior, objective) = build_kusner(&KusnerParams { k, m, epsilon })?;
        Ok((prior, Box::new(objective) as Box<dyn Objective>))
    })
}

/// Two-test diagnosis instance with no finite smoothness constant.
#[no_mangle]
pub extern "C" fn adasub_diagnosis_new(out: *mut *mut AdasubInstance) -> AdasubStatus {
    build_instance(out, || {
        let (prior, objective) = build_diagnosis();
        Ok((prior, Box::new(objective) as Box<dyn Objective>))
    })
}

/// Releases an instance. Null is ignored.
#[no_mangle]
pub extern "C" fn adasub_instance_free(instance: *mut AdasubInstance) {
    if !instance.is_null() {
        drop(unsafe { Box::from_raw(instance) });
    }
}

/// Ground set size of an instance; 0 when the handle is null.
#[no_mangle]
pub extern "C" fn adasub_n_elements(instance: *const AdasubInstance) -> usize {
    if instance.is_null() {
        return 0;
    }
    unsafe { &*instance }.prior.n_elements()
}

fn with_instance(
    instance: *const AdasubInstance,
    out: *mut f64,
    body: impl FnOnce(&AdasubInstance) -> Result<f64>,
) -> AdasubStatus {
    if instance.is_null() || out.is_null() {
        set_error("instance or out pointer is null");
        return AdasubStatus::NullPointer;
    }
    guarded(|| {
        let value = body(unsafe { &*instance })?;
        unsafe { *out = value };
        Ok(AdasubStatus::Ok)
    })
}

/// Adaptive submodularity ratio at the empty history for height-`k` trees.
#[no_mangle]
pub extern "C" fn adasub_gamma(
    instance: *const AdasubInstance,
    k: usize,
    cap: u64,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        let query = RatioQuery {
            psi: PartialRealization::empty(),
            k,
        };
        Ok(gamma_adaptive(&*inst.objective, &inst.prior, &query, cap)?.value)
    })
}

/// Supermodularity ratio of the expected set function at size `k`.
#[no_mangle]
pub extern "C" fn adasub_beta(
    instance: *const AdasubInstance,
    k: usize,
    cap: u64,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        let f = &*inst.objective;
        let prior = &inst.prior;
        let expected = |set: ElementSet| -> f64 {
            prior
                .support()
                .iter()
                .map(|(phi, p)| p * f.value(set, phi))
                .sum()
        };
        Ok(beta_nonadaptive(expected, prior.n_elements(), ElementSet::EMPTY, k, cap)?.value)
    })
}

/// Weak adaptive submodularity constant; `+inf` when unbounded.
#[no_mangle]
pub extern "C" fn adasub_zeta_star(
    instance: *const AdasubInstance,
    cap: u64,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        Ok(zeta_star(&*inst.objective, &inst.prior, cap)?.value)
    })
}

/// Exact adaptivity gap at size `k`.
#[no_mangle]
pub extern "C" fn adasub_adaptivity_gap(
    instance: *const AdasubInstance,
    k: usize,
    cap: u64,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        Ok(adaptivity_gap_exact(&*inst.objective, &inst.prior, k, cap)?.value)
    })
}

/// Expected value of the height-`ell` adaptive greedy policy.
#[no_mangle]
pub extern "C" fn adasub_greedy_value(
    instance: *const AdasubInstance,
    ell: usize,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        let tree = adaptive_greedy_policy(&*inst.objective, &inst.prior, ell)?;
        Ok(avg_value(&*inst.objective, &inst.prior, &tree)?.value)
    })
}

/// Expected value of the exhaustively optimal height-`k` policy.
#[no_mangle]
pub extern "C" fn adasub_optimal_value(
    instance: *const AdasubInstance,
    k: usize,
    cap: u64,
    out: *mut f64,
) -> AdasubStatus {
    with_instance(instance, out, |inst| {
        Ok(optimal_policy_exhaustive(&*inst.objective, &inst.prior, k, cap)?.1)
    })
}
