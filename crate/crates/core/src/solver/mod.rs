//! Proportional-fair joint allocation of packet sizes (airtime) and coding
//! rates.
//!
//! The network problem maximizes `sum_f ln(n_f (1 - 2x_f)(1 - e_f))` subject
//! to per-cell schedulability `sum_{f in F_c} n_f / w_{f,c} <= T_c`. It is
//! solved by dual decomposition: for fixed cell prices every flow solves its
//! own concave problem ([`flow`]), and the prices follow a projected
//! subgradient iteration on the slacks ([`dual`]).

mod dual;
mod flow;
mod special;

pub use dual::{default_step, dual_value, initial_prices, solve, subgradient_step, Solution};
pub use flow::{
    coding_for_fixed_n, inverse_rate, kkt_residuals, per_flow_solve, per_flow_solve_capped,
    FlowOptimum, Regime,
};
pub use special::{classical_baseline, solve_delay_insensitive, solve_loss_free};

use crate::bounds::{
    ln_one_minus_exp_neg, phi_unchecked, rate_function_unchecked, theta_star_unchecked, CodingPoint,
};
use crate::error::{Error, Result};
use crate::model::{Deadline, Network, Topology};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Subgradient step `gamma` in 1/s^2. `None` picks `1 / (T_max^2 * L_max)`
    /// with `L_max` the longest route.
    pub step_size: Option<f64>,
    /// Use `gamma / sqrt(i + 1)` at iteration `i`.
    pub diminishing: bool,
    pub max_iterations: usize,
    /// Convergence threshold on the sup-norm price change, 1/s.
    pub tol_price: f64,
    /// Allowed schedulability violation at convergence, seconds.
    pub tol_slack: f64,
    /// Per-flow KKT residual above which a diagnostic is reported.
    pub tol_kkt: f64,
    /// Delay-insensitive offset, relative: `x* = beta + epsilon_di * (0.5 - beta)`.
    pub epsilon_di: f64,
    /// `x` is confined to `[beta + x_margin, 0.5 - x_margin]`.
    pub x_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            step_size: None,
            diminishing: false,
            max_iterations: 200_000,
            tol_price: 1e-12,
            tol_slack: 1e-10,
            tol_kkt: 1e-8,
            epsilon_di: 1e-6,
            x_margin: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn epsilon_for(&self, beta: f64) -> f64 {
        self.epsilon_di * (0.5 - beta)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_price", self.tol_price),
            ("tol_slack", self.tol_slack),
            ("tol_kkt", self.tol_kkt),
            ("epsilon_di", self.epsilon_di),
            ("x_margin", self.x_margin),
            ("step_size", self.step_size.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name}={v} must be > 0")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::domain("max_iterations must be > 0"));
        }
        Ok(())
    }
}

/// Per-cell dual prices, 1/s, in network cell order.
#[derive(Debug, Clone, PartialEq)]
pub struct Prices(pub Vec<f64>);

impl Prices {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowAllocation {
    pub flow_id: String,
    /// Coded symbols per schedule period.
    pub n: f64,
    pub n_tilde: f64,
    pub coding: CodingPoint,
    /// Information symbols per schedule period, `n r`.
    pub info_symbols: f64,
    /// Chernoff bound on block decoding failure; 0 in the loss-free and
    /// infinite-deadline limits.
    pub error_bound: f64,
    /// Goodput `k (1 - e) / T_dest` in symbols/s.
    pub throughput: f64,
    /// `(cell index, seconds)` per hop.
    pub airtime: Vec<(usize, f64)>,
    /// `ln(n (1 - 2x)(1 - e))`.
    pub utility: f64,
    pub regime: Regime,
}

impl FlowAllocation {
    /// Airtime as a fraction of each cell's period, summed over the route.
    pub fn airtime_fraction(&self, net: &Network) -> f64 {
        self.airtime
            .iter()
            .map(|&(c, t)| t / net.cells[c].period)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub flows: Vec<FlowAllocation>,
    /// Seconds of airtime used per cell.
    pub cell_load: Vec<f64>,
    pub utility: f64,
}

impl Allocation {
    /// Evaluates per-flow `(n, x)` pairs with the Chernoff error bound.
    pub fn evaluate(net: &Network, points: &[(f64, f64)]) -> Result<Self> {
        let topo = Topology::new(net)?;
        Self::evaluate_with(net, &topo, points, None)
    }

    pub(crate) fn evaluate_with(
        net: &Network,
        topo: &Topology,
        points: &[(f64, f64)],
        regimes: Option<&[Regime]>,
    ) -> Result<Self> {
        assert_eq!(points.len(), topo.flows.len());
        let mut cell_load = vec![0.0; topo.periods.len()];
        let mut flows = Vec::with_capacity(points.len());
        for (fi, (links, &(n, x))) in topo.flows.iter().zip(points).enumerate() {
            let term = flow_term(n, x, links.beta, links.deadline)?;
            let regime = regimes.map(|r| r[fi]).unwrap_or(if links.beta == 0.0 {
                Regime::LossFree
            } else if links.deadline.is_infinite() {
                Regime::DelayInsensitive
            } else {
                Regime::Coupled
            });
            let airtime: Vec<(usize, f64)> = links.hops.iter().map(|&(c, w)| (c, n / w)).collect();
            for &(c, t) in &airtime {
                cell_load[c] += t;
            }
            let dest = links.hops.last().expect("nonempty route").0;
            let info = n * term.coding.r;
            flows.push(FlowAllocation {
                flow_id: net.flows[fi].id.clone(),
                n,
                n_tilde: n.ln(),
                coding: term.coding,
                info_symbols: info,
                error_bound: term.error,
                throughput: info * (1.0 - term.error) / topo.periods[dest],
                airtime,
                utility: term.utility,
                regime,
            });
        }
        let utility = flows.iter().map(|f| f.utility).sum();
        Ok(Allocation {
            flows,
            cell_load,
            utility,
        })
    }

    pub fn packet_sizes(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.n).collect()
    }
}

pub(crate) struct FlowTerm {
    pub coding: CodingPoint,
    pub error: f64,
    pub utility: f64,
}

/// Utility term and error bound of one flow at `(n, x)`.
pub(crate) fn flow_term(n: f64, x: f64, beta: f64, deadline: Deadline) -> Result<FlowTerm> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::domain(format!("packet size n={n} must be > 0")));
    }
    if !(x < 0.5) {
        return Err(Error::domain(format!("x={x} must be < 0.5")));
    }
    if beta == 0.0 {
        if x != 0.0 {
            // redundancy on a loss-free channel is pure waste, still valid
            let coding = CodingPoint {
                x,
                r: 1.0 - 2.0 * x,
                theta_star: f64::INFINITY,
                rate_fn: f64::INFINITY,
            };
            return Ok(FlowTerm {
                coding,
                error: 0.0,
                utility: n.ln() + (-2.0 * x).ln_1p(),
            });
        }
        return Ok(FlowTerm {
            coding: CodingPoint::loss_free(),
            error: 0.0,
            utility: n.ln(),
        });
    }
    if !(x > beta) {
        return Err(Error::domain(format!(
            "x={x} must exceed beta={beta}; the decoding error bound is 1"
        )));
    }
    let coding = CodingPoint {
        x,
        r: 1.0 - 2.0 * x,
        theta_star: theta_star_unchecked(x, beta),
        rate_fn: rate_function_unchecked(x, beta),
    };
    let base = n.ln() + (-2.0 * x).ln_1p();
    match deadline {
        Deadline::Infinite => Ok(FlowTerm {
            coding,
            error: 0.0,
            utility: base,
        }),
        Deadline::Finite(d) => {
            let exponent = f64::from(d) * n * coding.rate_fn;
            if !(exponent > 0.0) {
                return Err(Error::domain("error bound equals 1"));
            }
            Ok(FlowTerm {
                coding,
                error: (-exponent).exp(),
                utility: base + ln_one_minus_exp_neg(exponent),
            })
        }
    }
}

/// Network utility `sum_f ln(n_f (1 - 2x_f)(1 - e_f))`, recomputed from each
/// flow's `(n, x)`.
pub fn utility(net: &Network, allocation: &Allocation) -> Result<f64> {
    if allocation.flows.len() != net.flows.len() {
        return Err(Error::domain("allocation does not match network"));
    }
    let mut total = 0.0;
    for (flow, a) in net.flows.iter().zip(&allocation.flows) {
        if a.error_bound >= 1.0 {
            return Err(Error::domain(format!("{}: error bound >= 1", flow.id)));
        }
        total += flow_term(a.n, a.coding.x, flow.symbol_error(), flow.deadline)?.utility;
    }
    Ok(total)
}

/// Per-flow log-space utility and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowGradient {
    pub utility: f64,
    pub d_n_tilde: f64,
    pub d_i_tilde: f64,
    pub x: f64,
}

/// `U_f(n~, I~) = n~ + ln(1 - 2x(I~)) + ln(1 - exp(-D e^{n~ + I~}))` and its
/// analytic partials.
pub fn flow_log_gradient(
    n_tilde: f64,
    i_tilde: f64,
    beta: f64,
    deadline: Deadline,
    margin: f64,
) -> Result<FlowGradient> {
    let x = inverse_rate(i_tilde, beta, margin)?;
    if !(x > beta) {
        return Err(Error::domain("I~ maps onto x = beta"));
    }
    let i = i_tilde.exp();
    let theta = theta_star_unchecked(x, beta);
    let (p, tail) = match deadline {
        Deadline::Infinite => (0.0, 0.0),
        Deadline::Finite(d) => {
            let y = f64::from(d) * (n_tilde + i_tilde).exp();
            (phi_unchecked(y), ln_one_minus_exp_neg(y))
        }
    };
    Ok(FlowGradient {
        utility: n_tilde + (-2.0 * x).ln_1p() + tail,
        d_n_tilde: 1.0 + p,
        d_i_tilde: p - 2.0 * i / ((1.0 - 2.0 * x) * theta),
        x,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogGradient {
    pub utility: f64,
    pub d_n_tilde: Vec<f64>,
    pub d_i_tilde: Vec<f64>,
}

/// Network utility in `(n~, I~)` coordinates with analytic partials.
/// Every flow must have a lossy channel.
pub fn utility_logspace_gradient(
    n_tilde: &[f64],
    i_tilde: &[f64],
    net: &Network,
    margin: f64,
) -> Result<LogGradient> {
    if n_tilde.len() != net.flows.len() || i_tilde.len() != net.flows.len() {
        return Err(Error::domain("one (n~, I~) pair per flow required"));
    }
    let mut out = LogGradient {
        utility: 0.0,
        d_n_tilde: Vec::with_capacity(n_tilde.len()),
        d_i_tilde: Vec::with_capacity(n_tilde.len()),
    };
    for ((f, &nt), &it) in net.flows.iter().zip(n_tilde).zip(i_tilde) {
        let g = flow_log_gradient(nt, it, f.symbol_error(), f.deadline, margin)?;
        out.utility += g.utility;
        out.d_n_tilde.push(g.d_n_tilde);
        out.d_i_tilde.push(g.d_i_tilde);
    }
    Ok(out)
}

/// One record of the dual iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub prices: Vec<f64>,
    pub slack: Vec<f64>,
    pub utility: f64,
    pub dual_value: f64,
    pub duality_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, Flow, Hop};

    fn net(betas: &[(f64, Deadline)]) -> Network {
        Network {
            cells: vec![Cell {
                id: "c".into(),
                period: 1.0,
            }],
            flows: betas
                .iter()
                .enumerate()
                .map(|(i, &(a, d))| Flow {
                    id: format!("f{i}"),
                    route: vec![Hop {
                        cell: "c".into(),
                        crossover: a,
                        phy_rate: 10.0,
                    }],
                    deadline: d,
                    alphabet_bits: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn loss_free_utility_is_ln_n() {
        let n = net(&[(0.0, Deadline::Finite(1))]);
        let a = Allocation::evaluate(&n, &[(10.0, 0.0)]).unwrap();
        assert!((a.utility - 10f64.ln()).abs() < 1e-15);
        assert_eq!(utility(&n, &a).unwrap(), a.utility);
    }

    #[test]
    fn separable_and_matches_k_times_success() {
        let one = net(&[(0.05, Deadline::Finite(2))]);
        let two = net(&[(0.05, Deadline::Finite(2)), (0.05, Deadline::Finite(2))]);
        let a1 = Allocation::evaluate(&one, &[(4.0, 0.2)]).unwrap();
        let a2 = Allocation::evaluate(&two, &[(4.0, 0.2), (4.0, 0.2)]).unwrap();
        assert!((a2.utility - 2.0 * a1.utility).abs() < 1e-14);
        let f = &a1.flows[0];
        let direct = (f.info_symbols * (1.0 - f.error_bound)).ln();
        assert!((a1.utility - direct).abs() < 1e-10);
        assert!((f.throughput - f.info_symbols * (1.0 - f.error_bound)).abs() < 1e-14);
    }

    #[test]
    fn utility_domain_errors() {
        let n = net(&[(0.05, Deadline::Finite(1))]);
        assert!(Allocation::evaluate(&n, &[(4.0, 0.5)]).is_err());
        assert!(Allocation::evaluate(&n, &[(4.0, 0.04)]).is_err());
        let mut a = Allocation::evaluate(&n, &[(4.0, 0.2)]).unwrap();
        a.flows[0].error_bound = 1.0;
        assert!(utility(&n, &a).is_err());
    }

    #[test]
    fn stationarity_of_i_partial() {
        let cfg = SolverConfig::default();
        let beta = 0.02;
        let n = 6.0;
        let x = coding_for_fixed_n(n, beta, Deadline::Finite(1), &cfg).unwrap();
        let it = rate_function_unchecked(x, beta).ln();
        let g = flow_log_gradient(n.ln(), it, beta, Deadline::Finite(1), 1e-9).unwrap();
        assert!(g.d_i_tilde.abs() < 1e-9, "{}", g.d_i_tilde);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            step_size: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
