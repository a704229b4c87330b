//! Decoding-error probability for MDS block codes over an end-to-end BSC.
//!
//! A block of `D n` coded symbols carrying `D k` information symbols fails
//! when more than `(D n - D k) / 2` symbols arrive corrupted. With
//! `x = (1 - r) / 2` and symbol error probability `beta`, the failure
//! probability is sandwiched between
//!
//! ```text
//! beta/(1-beta) * exp(-D n H(x)) * exp(-D n I(x||beta))  <=  e  <=  exp(-D n I(x||beta))
//! ```
//!
//! where `I` is the Bernoulli KL divergence (the optimized Chernoff exponent)
//! and `H` the binary entropy, both in nats.

use crate::error::{Error, Result};

/// Arguments closer than this to a domain edge are clamped.
pub const CLAMP: f64 = 1e-12;
/// Arguments outside the domain by more than this are rejected.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// A flow's coding-rate state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingPoint {
    /// `(1 - r) / 2`, half the redundancy fraction.
    pub x: f64,
    /// Coding rate `k / n = 1 - 2x`.
    pub r: f64,
    /// Chernoff-optimal parameter, nats. Infinite on a loss-free channel.
    pub theta_star: f64,
    /// `I(B(x) || B(beta))`, nats per symbol. Infinite on a loss-free channel.
    pub rate_fn: f64,
}

impl CodingPoint {
    pub fn new(x: f64, beta: f64) -> Result<Self> {
        Ok(CodingPoint {
            x,
            r: 1.0 - 2.0 * x,
            theta_star: theta_star(x, beta)?,
            rate_fn: rate_function(x, beta)?,
        })
    }

    /// Uncoded transmission over a loss-free channel (`x = 0`, `r = 1`).
    pub fn loss_free() -> Self {
        CodingPoint {
            x: 0.0,
            r: 1.0,
            theta_star: f64::INFINITY,
            rate_fn: f64::INFINITY,
        }
    }
}

/// A coded block spanning `deadline` schedule periods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub deadline: u32,
    pub packet_symbols: f64,
    pub info_symbols: f64,
}

impl BlockSpec {
    pub fn new(deadline: u32, packet_symbols: f64, info_symbols: f64) -> Result<Self> {
        if deadline == 0 {
            return Err(Error::domain("block deadline must be >= 1"));
        }
        if !(info_symbols > 0.0 && info_symbols <= packet_symbols) {
            return Err(Error::domain(format!(
                "need 0 < k <= n, got k={info_symbols}, n={packet_symbols}"
            )));
        }
        Ok(BlockSpec {
            deadline,
            packet_symbols,
            info_symbols,
        })
    }

    pub fn block_length(&self) -> f64 {
        f64::from(self.deadline) * self.packet_symbols
    }

    pub fn x(&self) -> f64 {
        0.5 * (1.0 - self.info_symbols / self.packet_symbols)
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("beta={beta} outside (0, 1)")))
    }
}

/// Clamps `x` into `[lo + CLAMP, hi - CLAMP]`, rejecting points that sit
/// outside `(lo, hi)` by more than `CLAMP_TOLERANCE`.
fn clamp_into(x: f64, lo: f64, hi: f64, what: &str) -> Result<f64> {
    if !x.is_finite() || x < lo - CLAMP_TOLERANCE || x > hi + CLAMP_TOLERANCE {
        return Err(Error::domain(format!("{what}: x={x} outside ({lo}, {hi})")));
    }
    let lower = lo + CLAMP;
    let upper = (hi - CLAMP).max(lower);
    Ok(x.clamp(lower, upper))
}

/// `ln(x / beta)` and `ln((1 - x) / (1 - beta))`, accurate for `x` near `beta`.
fn log_ratios(x: f64, beta: f64) -> (f64, f64) {
    let d = x - beta;
    ((d / beta).ln_1p(), (-d / (1.0 - beta)).ln_1p())
}

/// Bernoulli KL divergence `I(B(x) || B(beta))` in nats.
pub fn rate_function(x: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let x = clamp_into(x, beta, 1.0, "rate_function")?;
    Ok(rate_function_unchecked(x, beta))
}

pub(crate) fn rate_function_unchecked(x: f64, beta: f64) -> f64 {
    let (a, b) = log_ratios(x, beta);
    (x * a + (1.0 - x) * b).max(0.0)
}

/// Maximizer of the Chernoff exponent over `theta > 0`:
/// `ln(x / beta) - ln((1 - x) / (1 - beta))`.
pub fn theta_star(x: f64, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let x = clamp_into(x, beta, 1.0, "theta_star")?;
    Ok(theta_star_unchecked(x, beta))
}

pub(crate) fn theta_star_unchecked(x: f64, beta: f64) -> f64 {
    let (a, b) = log_ratios(x, beta);
    a - b
}

/// Chernoff exponent for a free parameter: `theta x - ln(1 - beta + beta e^theta)`.
pub fn chernoff_exponent(x: f64, beta: f64, theta: f64) -> f64 {
    // ln(1 + beta (e^theta - 1)), stable for small theta
    theta * x - (beta * theta.exp_m1()).ln_1p()
}

/// Binary entropy in nats.
pub fn binary_entropy(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    term(x) + term(1.0 - x)
}

fn check_block(deadline: u32, n: f64) -> Result<f64> {
    if deadline == 0 {
        return Err(Error::domain("deadline must be >= 1"));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("packet size n={n} must be > 0")));
    }
    Ok(f64::from(deadline) * n)
}

/// Optimized Chernoff upper bound `exp(-D n I(x||beta))`.
pub fn chernoff_upper(deadline: u32, n: f64, x: f64, beta: f64) -> Result<f64> {
    let block = check_block(deadline, n)?;
    check_beta(beta)?;
    let x = clamp_into(x, beta, 0.5, "chernoff_upper")?;
    Ok((-block * rate_function_unchecked(x, beta)).exp())
}

/// Chernoff bound at an arbitrary `theta > 0`; never below [`chernoff_upper`].
pub fn chernoff_upper_raw(deadline: u32, n: f64, x: f64, beta: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::domain(format!("theta={theta} must be > 0")));
    }
    let block = check_block(deadline, n)?;
    check_beta(beta)?;
    let x = clamp_into(x, beta, 0.5, "chernoff_upper_raw")?;
    Ok((-block * chernoff_exponent(x, beta, theta)).exp())
}

/// Lower bound `beta/(1-beta) * exp(-D n H(x)) * exp(-D n I(x||beta))`.
pub fn lower_bound(deadline: u32, n: f64, x: f64, beta: f64) -> Result<f64> {
    let block = check_block(deadline, n)?;
    check_beta(beta)?;
    let x = clamp_into(x, beta, 0.5, "lower_bound")?;
    let exponent = binary_entropy(x) + rate_function_unchecked(x, beta);
    Ok(beta / (1.0 - beta) * (-block * exponent).exp())
}

/// Exact decoding-failure probability `P{X > (Dn - Dk)/2}`, `X ~ Bin(Dn, beta)`.
pub fn exact_error(deadline: u64, n: u64, k: u64, beta: f64) -> Result<f64> {
    if deadline == 0 || n == 0 || k == 0 {
        return Err(Error::domain(format!(
            "need D, n, k >= 1, got D={deadline}, n={n}, k={k}"
        )));
    }
    if k > n {
        return Err(Error::domain(format!("k={k} exceeds n={n}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::domain(format!("beta={beta} outside [0, 1)")));
    }
    let total = deadline
        .checked_mul(n)
        .ok_or_else(|| Error::domain("block length overflows"))?;
    let info = deadline * k;
    // X > (N - K)/2  <=>  X >= floor((N - K)/2) + 1
    let first_failure = (total - info) / 2 + 1;
    Ok(binomial_upper_tail(total, first_failure, beta))
}

/// `P{X >= first}` for `X ~ Bin(total, p)`, summed in log space.
pub(crate) fn binomial_upper_tail(total: u64, first: u64, p: f64) -> f64 {
    if first > total || p == 0.0 {
        return 0.0;
    }
    if first == 0 {
        return 1.0;
    }
    let log_odds = p.ln() - (-p).ln_1p();
    let mut log_pmf = total as f64 * (-p).ln_1p();
    let mut terms = Vec::with_capacity((total - first + 1) as usize);
    for i in 0..total {
        if i >= first {
            terms.push(log_pmf);
        }
        log_pmf += ((total - i) as f64 / (i + 1) as f64).ln() + log_odds;
    }
    terms.push(log_pmf);
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + sum.ln()).exp().min(1.0)
}

/// `phi(y) = y e^{-y} / (1 - e^{-y}) = y / (e^y - 1)`.
pub fn phi(y: f64) -> Result<f64> {
    if y > 0.0 {
        Ok(phi_unchecked(y))
    } else {
        Err(Error::domain(format!("phi requires y > 0, got {y}")))
    }
}

pub(crate) fn phi_unchecked(y: f64) -> f64 {
    if y < 1e-6 {
        1.0 - y / 2.0 + y * y / 12.0
    } else {
        y / y.exp_m1()
    }
}

/// `ln(1 - e^{-a})` for `a > 0`.
pub(crate) fn ln_one_minus_exp_neg(a: f64) -> f64 {
    if a < std::f64::consts::LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

/// `x(1 - x) theta*(x)^2 - I(x)`. Positive on `(beta, 0.5)` exactly when
/// the log-space utility is strictly concave in the coding coordinate.
pub fn curvature_margin(x: f64, beta: f64) -> Result<f64> {
    let i = rate_function(x, beta)?;
    let t = theta_star(x, beta)?;
    Ok(x * (1.0 - x) * t * t - i)
}

/// `D y - (1 - e^{-Dy}) e^{-Dy}`, positive for every `y > 0`.
pub fn deadline_margin(y: f64, deadline: u32) -> Result<f64> {
    if !(y > 0.0) || deadline == 0 {
        return Err(Error::domain(format!(
            "need y > 0 and D >= 1, got y={y} D={deadline}"
        )));
    }
    let dy = f64::from(deadline) * y;
    Ok(dy + (-dy).exp_m1() * (-dy).exp())
}
