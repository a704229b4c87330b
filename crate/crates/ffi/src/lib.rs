//! C interface to the `pfcoding` solver.
//!
//! Networks and solutions are opaque handles created and destroyed through
//! this API. Every fallible call returns a [`PfcStatus`]; on failure
//! [`pfc_last_error_message`] describes the most recent error on the calling
//! thread. Panics are caught at the boundary and reported as
//! [`PfcStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pfcoding::bounds;
use pfcoding::scenario::parse_scenario;
use pfcoding::{Error, Network, Solution, SolverConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidNetwork = 4,
    Domain = 5,
    NonConvergence = 6,
    OutOfRange = 7,
    Internal = 8,
}

/// Opaque validated network.
pub struct PfcNetwork(Network);

/// Opaque converged solution.
pub struct PfcSolution(Solution);

/// Solver settings. Obtain defaults from [`pfc_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PfcConfig {
    /// Subgradient step; `<= 0` selects the automatic step.
    pub step_size: f64,
    pub diminishing: bool,
    pub max_iterations: u64,
    pub tol_price: f64,
    pub tol_slack: f64,
    pub tol_kkt: f64,
    pub epsilon_di: f64,
    pub x_margin: f64,
}

/// Per-flow result.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PfcFlowResult {
    pub n: f64,
    pub x: f64,
    pub rate: f64,
    pub error_bound: f64,
    pub throughput: f64,
    pub airtime_fraction: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(s).expect("nul removed")));
}

fn status_of(e: &Error) -> PfcStatus {
    match e {
        Error::Scenario(_) | Error::Io(_) => PfcStatus::Parse,
        Error::InvalidNetwork(_) => PfcStatus::InvalidNetwork,
        Error::NonConvergence { .. } => PfcStatus::NonConvergence,
        _ => PfcStatus::Domain,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PfcStatus>) -> PfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PfcStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            PfcStatus::Internal
        }
    }
}

fn fail(e: Error) -> PfcStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> PfcStatus {
    set_error(format!("{what} is null"));
    PfcStatus::NullPointer
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pfc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses and validates a JSON scenario.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pfc_network_from_json(
    json: *const c_char,
    out: *mut *mut PfcNetwork,
) -> PfcStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            set_error(e.to_string());
            PfcStatus::InvalidUtf8
        })?;
        let net = parse_scenario(text).map_err(fail)?;
        *out = Box::into_raw(Box::new(PfcNetwork(net)));
        Ok(())
    })
}

/// # Safety
/// `net` must come from [`pfc_network_from_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pfc_network_free(net: *mut PfcNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live network handle.
#[no_mangle]
pub unsafe extern "C" fn pfc_network_flow_count(net: *const PfcNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.flows.len())
}

#[no_mangle]
pub extern "C" fn pfc_config_default() -> PfcConfig {
    let d = SolverConfig::default();
    PfcConfig {
        step_size: 0.0,
        diminishing: d.diminishing,
        max_iterations: d.max_iterations as u64,
        tol_price: d.tol_price,
        tol_slack: d.tol_slack,
        tol_kkt: d.tol_kkt,
        epsilon_di: d.epsilon_di,
        x_margin: d.x_margin,
    }
}

impl From<&PfcConfig> for SolverConfig {
    fn from(c: &PfcConfig) -> Self {
        SolverConfig {
            step_size: (c.step_size > 0.0).then_some(c.step_size),
            diminishing: c.diminishing,
            max_iterations: usize::try_from(c.max_iterations).unwrap_or(usize::MAX),
            tol_price: c.tol_price,
            tol_slack: c.tol_slack,
            tol_kkt: c.tol_kkt,
            epsilon_di: c.epsilon_di,
            x_margin: c.x_margin,
        }
    }
}

/// Solves `net`. A null `cfg` uses the defaults.
///
/// # Safety
/// `net` must be a live handle, `cfg` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pfc_solve(
    net: *const PfcNetwork,
    cfg: *const PfcConfig,
    out: *mut *mut PfcSolution,
) -> PfcStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = cfg
            .as_ref()
            .map_or_else(SolverConfig::default, SolverConfig::from);
        let sol = pfcoding::solve(&net.0, &cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(PfcSolution(sol)));
        Ok(())
    })
}

/// # Safety
/// `sol` must be a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_flow_count(sol: *const PfcSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.0.allocation.flows.len())
}

/// Copies flow `index` of a solution into `out`. Airtime is summed over the
/// route as a fraction of each cell's period.
///
/// # Safety
/// `net` and `sol` must be live handles from the same solve; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_flow(
    net: *const PfcNetwork,
    sol: *const PfcSolution,
    index: usize,
    out: *mut PfcFlowResult,
) -> PfcStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let sol = sol.as_ref().ok_or_else(|| null("sol"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let f = sol.0.allocation.flows.get(index).ok_or_else(|| {
            set_error(format!("flow index {index} out of range"));
            PfcStatus::OutOfRange
        })?;
        *out = PfcFlowResult {
            n: f.n,
            x: f.coding.x,
            rate: f.coding.r,
            error_bound: f.error_bound,
            throughput: f.throughput,
            airtime_fraction: f.airtime_fraction(&net.0),
        };
        Ok(())
    })
}

/// Network utility, NaN for a null handle.
///
/// # Safety
/// `sol` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_utility(sol: *const PfcSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.allocation.utility)
}

/// # Safety
/// `sol` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_iterations(sol: *const PfcSolution) -> u64 {
    sol.as_ref().map_or(0, |s| s.0.iterations as u64)
}

/// # Safety
/// `sol` must be null or a live solution handle.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_duality_gap(sol: *const PfcSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.0.duality_gap)
}

/// # Safety
/// `sol` must come from [`pfc_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pfc_solution_free(sol: *mut PfcSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

fn scalar(out: *mut f64, f: impl FnOnce() -> pfcoding::Result<f64>) -> PfcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = f().map_err(fail)?;
        // SAFETY: checked non-null; caller guarantees validity
        unsafe { *out = v };
        Ok(())
    })
}

/// Binary KL divergence `I(x || beta)` in nats.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pfc_rate_function(x: f64, beta: f64, out: *mut f64) -> PfcStatus {
    scalar(out, || bounds::rate_function(x, beta))
}

/// Chernoff upper bound `exp(-D n I(x || beta))`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pfc_chernoff_upper(
    deadline: u32,
    n: f64,
    x: f64,
    beta: f64,
    out: *mut f64,
) -> PfcStatus {
    scalar(out, || bounds::chernoff_upper(deadline, n, x, beta))
}

/// Lower bound on the decoding failure probability.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pfc_lower_bound(
    deadline: u32,
    n: f64,
    x: f64,
    beta: f64,
    out: *mut f64,
) -> PfcStatus {
    scalar(out, || bounds::lower_bound(deadline, n, x, beta))
}

/// Exact MDS decoding failure probability for integer block parameters.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pfc_exact_error(
    deadline: u64,
    n: u64,
    k: u64,
    beta: f64,
    out: *mut f64,
) -> PfcStatus {
    scalar(out, || bounds::exact_error(deadline, n, k, beta))
}
