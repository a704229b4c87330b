//! Projected subgradient iteration on the cell prices.

use crate::error::{Error, Result};
use crate::model::{Network, Topology};

use super::{
    flow_term, kkt_residuals, per_flow_solve_capped, Allocation, FlowOptimum, Prices, Regime,
    SolverConfig, SolverTrace, TraceRecord,
};

/// Result of a converged dual iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    pub prices: Prices,
    pub iterations: usize,
    pub trace: SolverTrace,
    /// `T_c - load_c` per cell at the returned allocation.
    pub slack: Vec<f64>,
    /// `p_c * slack_c` per cell.
    pub complementary_slackness: Vec<f64>,
    pub dual_value: f64,
    /// Dual value minus primal utility of the returned allocation.
    pub duality_gap: f64,
    /// `(R1, R2)` per coupled flow against the final route prices.
    pub kkt: Vec<Option<(f64, f64)>>,
    pub warnings: Vec<String>,
}

/// Starting prices `p_c = |F_c| / T_c`, at which loss-free flows would
/// split every cell's airtime equally.
pub fn initial_prices(net: &Network) -> Result<Prices> {
    let topo = Topology::new(net)?;
    Ok(Prices(initial(&topo)))
}

fn initial(topo: &Topology) -> Vec<f64> {
    topo.periods
        .iter()
        .zip(&topo.members)
        .map(|(&t, m)| m.len() as f64 / t)
        .collect()
}

/// Default constant step `1 / (T_max^2 L_max)`.
pub fn default_step(net: &Network) -> Result<f64> {
    Ok(step_for(&Topology::new(net)?))
}

fn step_for(topo: &Topology) -> f64 {
    let t_max = topo.periods.iter().copied().fold(0.0, f64::max);
    1.0 / (t_max * t_max * topo.max_route_len() as f64)
}

/// One projected subgradient update `p_c <- max(0, p_c - step * slack_c)`.
pub fn subgradient_step(
    prices: &Prices,
    net: &Network,
    step: f64,
    packet_sizes: &[f64],
) -> Result<Prices> {
    if prices.0.len() != net.cells.len() || packet_sizes.len() != net.flows.len() {
        return Err(Error::domain(
            "price or packet-size vector has wrong length",
        ));
    }
    if !(step > 0.0) {
        return Err(Error::domain(format!("step={step} must be > 0")));
    }
    let slack = net.cell_load(packet_sizes).slack;
    Ok(Prices(project(&prices.0, step, &slack)))
}

fn project(prices: &[f64], step: f64, slack: &[f64]) -> Vec<f64> {
    prices
        .iter()
        .zip(slack)
        .map(|(&p, &s)| (p - step * s).max(0.0))
        .collect()
}

fn best_response(topo: &Topology, prices: &[f64], cfg: &SolverConfig) -> Result<Vec<FlowOptimum>> {
    (0..topo.flows.len())
        .map(|f| {
            let l = &topo.flows[f];
            let q = topo.route_price(f, prices);
            // The box n <= n_cap only matters while every price on the route
            // is zero. Applying it at q > 0 would let it absorb the cell
            // constraint and stall the price below its multiplier.
            let cap = if q > 0.0 { f64::INFINITY } else { l.n_cap };
            per_flow_solve_capped(q, l.beta, l.deadline, cap, cfg)
        })
        .collect()
}

fn primal_utility(topo: &Topology, opt: &[FlowOptimum]) -> Result<f64> {
    topo.flows
        .iter()
        .zip(opt)
        .map(|(l, o)| flow_term(o.n, o.x, l.beta, l.deadline).map(|t| t.utility))
        .sum()
}

/// Lagrangian dual `D(p) = max_{n,x} sum_f U_f - sum_c p_c (load_c - T_c)`.
pub fn dual_value(prices: &Prices, net: &Network, cfg: &SolverConfig) -> Result<f64> {
    let topo = Topology::new(net)?;
    if prices.0.len() != topo.periods.len() || prices.0.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::domain("one non-negative price per cell required"));
    }
    let opt = best_response(&topo, &prices.0, cfg)?;
    let ns: Vec<f64> = opt.iter().map(|o| o.n).collect();
    let slack = topo.slacks(&ns);
    Ok(primal_utility(&topo, &opt)? + dot(&prices.0, &slack))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the joint allocation problem by dual decomposition.
///
/// On convergence a last scaling pass pulls the packet sizes of flows
/// through any cell still overloaded by rounding back onto the constraint,
/// so the returned allocation is exactly schedulable.
pub fn solve(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    let topo = Topology::new(net)?;
    let gamma = cfg.step_size.unwrap_or_else(|| step_for(&topo));
    let mut prices = initial(&topo);
    let mut trace = SolverTrace::default();
    let mut best: Option<(f64, Vec<FlowOptimum>)> = None;

    for it in 0..cfg.max_iterations {
        let opt = best_response(&topo, &prices, cfg)?;
        let ns: Vec<f64> = opt.iter().map(|o| o.n).collect();
        let slack = topo.slacks(&ns);
        let u = primal_utility(&topo, &opt)?;
        let gap = dot(&prices, &slack);
        let feasible = slack.iter().all(|&s| s >= -cfg.tol_slack);
        if feasible && best.as_ref().map_or(true, |(bu, _)| u > *bu) {
            best = Some((u, opt.clone()));
        }

        let step = if cfg.diminishing {
            gamma / ((it + 1) as f64).sqrt()
        } else {
            gamma
        };
        let next = project(&prices, step, &slack);
        let change = next
            .iter()
            .zip(&prices)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        trace.records.push(TraceRecord {
            prices: prices.clone(),
            slack: slack.clone(),
            utility: u,
            dual_value: u + gap,
            duality_gap: gap,
        });

        if feasible && change < cfg.tol_price {
            return finish(net, &topo, prices, opt, trace, it + 1, cfg);
        }
        prices = next;
    }

    let best_feasible = match best {
        Some((_, opt)) => {
            let points: Vec<(f64, f64)> = opt.iter().map(|o| (o.n, o.x)).collect();
            let regimes: Vec<Regime> = opt.iter().map(|o| o.regime).collect();
            Some(Box::new(Allocation::evaluate_with(
                net,
                &topo,
                &points,
                Some(&regimes),
            )?))
        }
        None => None,
    };
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        trace: Box::new(trace),
        best_feasible,
    })
}

fn finish(
    net: &Network,
    topo: &Topology,
    prices: Vec<f64>,
    mut opt: Vec<FlowOptimum>,
    trace: SolverTrace,
    iterations: usize,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let mut warnings = Vec::new();
    let ns: Vec<f64> = opt.iter().map(|o| o.n).collect();
    let slack = topo.slacks(&ns);
    let scale: Vec<f64> = slack
        .iter()
        .zip(&topo.periods)
        // a few ulps of headroom so the rescaled load cannot round above T
        .map(|(&s, &t)| {
            if s < 0.0 {
                t / (t - s) * (1.0 - 4.0 * f64::EPSILON)
            } else {
                1.0
            }
        })
        .collect();
    for (o, l) in opt.iter_mut().zip(&topo.flows) {
        let k = l.hops.iter().map(|&(c, _)| scale[c]).fold(1.0, f64::min);
        if k < 1.0 {
            o.n *= k;
            if o.regime == Regime::Coupled {
                o.x = super::coding_for_fixed_n(o.n, l.beta, l.deadline, cfg)?;
            }
        }
    }

    let points: Vec<(f64, f64)> = opt.iter().map(|o| (o.n, o.x)).collect();
    let regimes: Vec<Regime> = opt.iter().map(|o| o.regime).collect();
    let allocation = Allocation::evaluate_with(net, topo, &points, Some(&regimes))?;
    let slack = topo.slacks(&allocation.packet_sizes());
    let complementary_slackness: Vec<f64> = prices.iter().zip(&slack).map(|(p, s)| p * s).collect();

    let dual = dual_value(&Prices(prices.clone()), net, cfg)?;
    let duality_gap = dual - allocation.utility;

    let mut kkt = Vec::with_capacity(opt.len());
    for (fi, (o, l)) in opt.iter().zip(&topo.flows).enumerate() {
        let id = &net.flows[fi].id;
        if o.at_margin {
            warnings.push(format!("{id}: coding parameter at the domain margin"));
        }
        let q = topo.route_price(fi, &prices);
        let r = match (o.regime, l.deadline.finite()) {
            (Regime::Coupled, Some(d)) if q > 0.0 && !o.capped => {
                let r = kkt_residuals(o.n, o.x, q, l.beta, f64::from(d))?;
                if r.0.abs().max(r.1.abs()) > cfg.tol_kkt {
                    warnings.push(format!(
                        "{id}: KKT residuals ({:.3e}, {:.3e}) above tolerance",
                        r.0, r.1
                    ));
                }
                Some(r)
            }
            _ => None,
        };
        kkt.push(r);
    }

    Ok(Solution {
        allocation,
        prices: Prices(prices),
        iterations,
        trace,
        slack,
        complementary_slackness,
        dual_value: dual,
        duality_gap,
        kkt,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, Deadline, Flow, Hop};

    fn single_cell(deadlines: &[Deadline], beta: f64) -> Network {
        Network {
            cells: vec![Cell {
                id: "ap".into(),
                period: 1.0,
            }],
            flows: deadlines
                .iter()
                .enumerate()
                .map(|(i, &d)| Flow {
                    id: format!("f{}", i + 1),
                    route: vec![Hop {
                        cell: "ap".into(),
                        crossover: beta,
                        phy_rate: 10.0,
                    }],
                    deadline: d,
                    alphabet_bits: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn mixed_deadline_cell() {
        let inf = Deadline::Infinite;
        let net = single_cell(&[Deadline::Finite(1), inf, inf], 0.01);
        let sol = solve(&net, &SolverConfig::default()).unwrap();
        let air: Vec<f64> = sol.allocation.flows.iter().map(|f| f.n / 10.0).collect();
        assert!((air[0] - 0.412).abs() < 5e-3, "{air:?}");
        assert!((air[1] - air[2]).abs() < 1e-12);
        let r1 = sol.allocation.flows[0].coding.r;
        assert!((r1 - 0.623).abs() < 5e-3, "{r1}");
        assert!(sol.slack.iter().all(|&s| s >= 0.0));
        assert!(sol.duality_gap.abs() < 1e-6, "{}", sol.duality_gap);
        assert!(sol.warnings.is_empty(), "{:?}", sol.warnings);
    }

    #[test]
    fn loss_free_splits_evenly() {
        let net = single_cell(&[Deadline::Finite(1); 4], 0.0);
        let sol = solve(&net, &SolverConfig::default()).unwrap();
        for f in &sol.allocation.flows {
            assert!((f.n - 2.5).abs() < 1e-9, "{}", f.n);
        }
        // airtime 1/p per flow fills the period at p = 4
        assert!((sol.prices.0[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn step_and_dual_value() {
        let net = single_cell(&[Deadline::Finite(1)], 0.0);
        let p = Prices(vec![0.1]);
        let next = subgradient_step(&p, &net, 0.5, &[5.0]).unwrap();
        // slack 0.5, so 0.1 - 0.25 projects to 0
        assert_eq!(next.0[0], 0.0);
        let up = subgradient_step(&p, &net, 0.5, &[15.0]).unwrap();
        assert!((up.0[0] - 0.35).abs() < 1e-15);
        // n = w/p = 100, utility ln 100, slack 1 - 10
        let d = dual_value(&p, &net, &SolverConfig::default()).unwrap();
        assert!((d - (100f64.ln() - 0.9)).abs() < 1e-12, "{d}");
        assert!(subgradient_step(&p, &net, -1.0, &[5.0]).is_err());
    }

    #[test]
    fn non_convergence_reports_best_feasible() {
        let net = single_cell(&[Deadline::Finite(1), Deadline::Finite(2)], 0.02);
        let cfg = SolverConfig {
            max_iterations: 5,
            ..Default::default()
        };
        match solve(&net, &cfg) {
            Err(Error::NonConvergence {
                iterations, trace, ..
            }) => {
                assert_eq!(iterations, 5);
                assert_eq!(trace.len(), 5);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
