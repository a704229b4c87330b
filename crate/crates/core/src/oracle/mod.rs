//! Independent checks for the solver and the bounds: brute-force search,
//! Monte Carlo decoding, finite differences and literal parity sums.

mod grid;
mod montecarlo;

pub use grid::{grid_search, GridObjective, GridResult, GridSpec};
pub use montecarlo::{monte_carlo_error, McReport, MIN_TRIALS};

use crate::error::{Error, Result};
use crate::model::Network;
use crate::solver::flow_log_gradient;

/// Probability of an odd number of flips, summed over all `2^L` flip
/// patterns. Exponential; limited to 20 hops.
pub fn parity_enumeration_crossover(hop_alphas: &[f64]) -> Result<f64> {
    if hop_alphas.len() > 20 {
        return Err(Error::Precondition(format!(
            "{} hops; enumeration is limited to 20",
            hop_alphas.len()
        )));
    }
    if hop_alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::domain("hop crossover outside [0, 1]"));
    }
    let mut total = 0.0;
    for mask in 0u32..(1u32 << hop_alphas.len()) {
        if mask.count_ones() % 2 == 0 {
            continue;
        }
        total += hop_alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| if mask >> i & 1 == 1 { a } else { 1.0 - a })
            .product::<f64>();
    }
    Ok(total)
}

/// Worst deviation between the analytic log-space partials and central
/// differences with the given step, relative to `max(|analytic|, 1)`.
pub fn fd_gradient_check(
    n_tilde: &[f64],
    i_tilde: &[f64],
    net: &Network,
    step: f64,
) -> Result<f64> {
    if !(1e-8..=1e-4).contains(&step) {
        return Err(Error::domain(format!("step={step} outside [1e-8, 1e-4]")));
    }
    if n_tilde.len() != net.flows.len() || i_tilde.len() != net.flows.len() {
        return Err(Error::domain("one (n~, I~) pair per flow required"));
    }
    const MARGIN: f64 = 1e-9;
    let mut worst: f64 = 0.0;
    for ((f, &nt), &it) in net.flows.iter().zip(n_tilde).zip(i_tilde) {
        let beta = f.symbol_error();
        let u =
            |a: f64, b: f64| flow_log_gradient(a, b, beta, f.deadline, MARGIN).map(|g| g.utility);
        let g = flow_log_gradient(nt, it, beta, f.deadline, MARGIN)?;
        let dn = (u(nt + step, it)? - u(nt - step, it)?) / (2.0 * step);
        let di = (u(nt, it + step)? - u(nt, it - step)?) / (2.0 * step);
        for (fd, an) in [(dn, g.d_n_tilde), (di, g.d_i_tilde)] {
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
    }
    Ok(worst)
}
