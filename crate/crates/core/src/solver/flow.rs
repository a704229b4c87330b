//! Per-flow primal problem for given route price `q = sum_c p_c / w_{f,c}`.
//!
//! In log coordinates `n~ = ln n`, `I~ = ln I(x)` the flow's utility
//! `n~ + ln(1 - 2x(I~)) + ln(1 - exp(-D e^{n~ + I~}))` is jointly concave, and
//! its stationarity conditions against the price term `q e^{n~}` are
//!
//! ```text
//! R1 = 1 + phi(D n I(x)) - q n                     = 0
//! R2 = phi(D n I(x)) - 2 I(x) / ((1 - 2x) theta*(x)) = 0
//! ```
//!
//! Subtracting gives `n = (1 + RHS(x)) / q` with `RHS(x) = 2I/((1-2x)theta*)`,
//! leaving a scalar root problem in `x`.

use crate::bounds::{phi_unchecked, rate_function_unchecked, theta_star_unchecked};
use crate::error::{Error, Result};
use crate::model::Deadline;

use super::SolverConfig;

/// How a flow's optimum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Finite deadline on a lossy channel: coupled root of the KKT system.
    Coupled,
    /// Infinite deadline: `x = beta + eps`, `n = 1/q`.
    DelayInsensitive,
    /// Loss-free channel: `x = 0`, `n = 1/q`.
    LossFree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptimum {
    pub n: f64,
    pub x: f64,
    pub regime: Regime,
    /// The redundant `n <= n_cap` box bound was active.
    pub capped: bool,
    /// `x` landed within the domain margin of `beta` or `0.5`.
    pub at_margin: bool,
}

/// `2 I(x) / ((1 - 2x) theta*(x))`.
pub(crate) fn coupling_rhs(x: f64, beta: f64) -> f64 {
    let i = rate_function_unchecked(x, beta);
    let t = theta_star_unchecked(x, beta);
    if t <= 0.0 {
        // x at beta: I/theta* -> (x - beta)/2 -> 0
        return 0.0;
    }
    2.0 * i / ((1.0 - 2.0 * x) * t)
}

/// KKT residuals `(R1, R2)` at `(n, x)` for route price `q`.
pub fn kkt_residuals(n: f64, x: f64, q: f64, beta: f64, deadline: f64) -> Result<(f64, f64)> {
    if !(q > 0.0) {
        return Err(Error::domain(format!("route price q={q} must be > 0")));
    }
    if !(n > 0.0) {
        return Err(Error::domain(format!("n={n} must be > 0")));
    }
    if !(beta > 0.0 && x > beta && x < 0.5) {
        return Err(Error::domain(format!(
            "need 0 < beta < x < 0.5, got beta={beta}, x={x}"
        )));
    }
    if !(deadline >= 1.0) {
        return Err(Error::domain(format!("deadline {deadline} must be >= 1")));
    }
    let i = rate_function_unchecked(x, beta);
    let p = if deadline.is_infinite() {
        0.0
    } else {
        phi_unchecked(deadline * n * i)
    };
    let rhs = coupling_rhs(x, beta);
    Ok((1.0 + p - q * n, p - rhs))
}

/// Bisection on a residual that is positive at `lo` and negative at `hi`.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo > 0.0 && f_hi < 0.0) {
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_hi == 0.0 {
            return Ok(hi);
        }
        return Err(Error::NoRoot { lo, hi, f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v > 0.0 {
            lo = mid;
        } else if v < 0.0 {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    Ok(0.5 * (lo + hi))
}

const X_TOL: f64 = 1e-14;

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..0.5).contains(&beta) {
        Ok(())
    } else {
        Err(Error::domain(format!("beta={beta} outside [0, 0.5)")))
    }
}

fn x_bracket(beta: f64, cfg: &SolverConfig) -> Result<(f64, f64)> {
    let lo = beta + cfg.x_margin;
    let hi = 0.5 - cfg.x_margin;
    if lo >= hi {
        return Err(Error::domain(format!(
            "beta={beta} leaves no room for x inside the margin {}",
            cfg.x_margin
        )));
    }
    Ok((lo, hi))
}

/// Optimal packet size and coding parameter for route price `q > 0`.
pub fn per_flow_solve(
    q: f64,
    beta: f64,
    deadline: Deadline,
    cfg: &SolverConfig,
) -> Result<FlowOptimum> {
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::domain(format!("route price q={q} must be > 0")));
    }
    per_flow_solve_capped(q, beta, deadline, f64::INFINITY, cfg)
}

/// [`per_flow_solve`] with the redundant box `n <= n_cap`; accepts `q = 0`
/// when `n_cap` is finite.
pub fn per_flow_solve_capped(
    q: f64,
    beta: f64,
    deadline: Deadline,
    n_cap: f64,
    cfg: &SolverConfig,
) -> Result<FlowOptimum> {
    check_beta(beta)?;
    if !(q >= 0.0) || (q == 0.0 && !n_cap.is_finite()) {
        return Err(Error::domain(format!("route price q={q} must be > 0")));
    }
    let free_n = |x_rhs: f64| {
        if q > 0.0 {
            (1.0 + x_rhs) / q
        } else {
            f64::INFINITY
        }
    };

    if beta == 0.0 {
        let n = free_n(0.0);
        return Ok(FlowOptimum {
            n: n.min(n_cap),
            x: 0.0,
            regime: Regime::LossFree,
            capped: n > n_cap,
            at_margin: false,
        });
    }
    let d = match deadline {
        Deadline::Infinite => {
            let n = free_n(0.0);
            return Ok(FlowOptimum {
                n: n.min(n_cap),
                x: beta + cfg.epsilon_for(beta),
                regime: Regime::DelayInsensitive,
                capped: n > n_cap,
                at_margin: false,
            });
        }
        Deadline::Finite(d) => f64::from(d),
    };

    let (lo, hi) = x_bracket(beta, cfg)?;
    let free = if q > 0.0 {
        let x = bisect(lo, hi, X_TOL, |x: f64| {
            let rhs = coupling_rhs(x, beta);
            phi_unchecked(d * free_n(rhs) * rate_function_unchecked(x, beta)) - rhs
        })?;
        Some((x, free_n(coupling_rhs(x, beta))))
    } else {
        None
    };
    let (x, n, capped) = match free {
        Some((x, n)) if n <= n_cap => (x, n, false),
        // concave objective, so the box optimum sits on n = n_cap
        _ => (coding_for_fixed_n(n_cap, beta, deadline, cfg)?, n_cap, true),
    };
    Ok(FlowOptimum {
        n,
        x,
        regime: Regime::Coupled,
        capped,
        at_margin: x - lo < 1e-12 || hi - x < 1e-12,
    })
}

/// Best `x` for a fixed packet size: the root of `R2` in `x`.
pub fn coding_for_fixed_n(
    n: f64,
    beta: f64,
    deadline: Deadline,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    let d = match deadline {
        Deadline::Infinite => return Ok(beta + cfg.epsilon_for(beta)),
        Deadline::Finite(d) => f64::from(d),
    };
    if !(n > 0.0) {
        return Err(Error::domain(format!("n={n} must be > 0")));
    }
    let (lo, hi) = x_bracket(beta, cfg)?;
    bisect(lo, hi, X_TOL, |x| {
        phi_unchecked(d * n * rate_function_unchecked(x, beta)) - coupling_rhs(x, beta)
    })
}

/// Inverse of `x -> ln I(x || beta)` on `(beta, 0.5 - margin]`.
pub fn inverse_rate(i_tilde: f64, beta: f64, margin: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::domain(format!("beta={beta} outside (0, 0.5)")));
    }
    let hi = 0.5 - margin;
    let top = rate_function_unchecked(hi, beta).ln();
    if i_tilde == f64::NEG_INFINITY {
        return Ok(beta);
    }
    if !(i_tilde < top) || i_tilde.is_nan() {
        return Err(Error::domain(format!(
            "ln I = {i_tilde} outside (-inf, {top}) for beta={beta}"
        )));
    }
    let target = i_tilde.exp();
    // I is increasing in x on (beta, 0.5); residual target - I(x) goes + -> -
    bisect(beta, hi, X_TOL, |x| {
        target - rate_function_unchecked(x, beta)
    })
    .map(|x| if x <= beta { beta } else { x })
}
