//! Delay-insensitive and loss-free limits, and the equal-airtime baseline.

use crate::error::{Error, Result};
use crate::model::{Network, Topology};

use super::{solve, Allocation, Regime, Solution, SolverConfig};

/// Solves a network whose flows all have infinite deadlines. Coding rates
/// then sit at `beta + eps` independent of topology and packet sizes become
/// independent of the error rates.
pub fn solve_delay_insensitive(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    if let Some(f) = net.flows.iter().find(|f| !f.deadline.is_infinite()) {
        return Err(Error::Precondition(format!(
            "{}: deadline {} is finite",
            f.id, f.deadline
        )));
    }
    solve(net, cfg)
}

/// Solves a network whose flows all see loss-free channels: the classical
/// proportional-fair rate allocation with `r = 1`.
pub fn solve_loss_free(net: &Network, cfg: &SolverConfig) -> Result<Solution> {
    if let Some(f) = net.flows.iter().find(|f| f.symbol_error() != 0.0) {
        return Err(Error::Precondition(format!(
            "{}: symbol error {} is not zero",
            f.id,
            f.symbol_error()
        )));
    }
    solve(net, cfg)
}

/// Equal airtime per flow in every cell, with each flow coded for its
/// channel alone (`x = beta + eps`) and scored against its true deadline.
/// A multi-hop flow gets the smallest of its per-cell shares.
pub fn classical_baseline(net: &Network, cfg: &SolverConfig) -> Result<Allocation> {
    let topo = Topology::new(net)?;
    let mut points = Vec::with_capacity(topo.flows.len());
    let mut regimes = Vec::with_capacity(topo.flows.len());
    for l in &topo.flows {
        let n = l
            .hops
            .iter()
            .map(|&(c, w)| w * topo.periods[c] / topo.members[c].len() as f64)
            .fold(f64::INFINITY, f64::min);
        let (x, regime) = if l.beta == 0.0 {
            (0.0, Regime::LossFree)
        } else {
            (l.beta + cfg.epsilon_for(l.beta), Regime::DelayInsensitive)
        };
        points.push((n, x));
        regimes.push(regime);
    }
    Allocation::evaluate_with(net, &topo, &points, Some(&regimes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Cell, Deadline, Flow, Hop};

    fn cell(flows: &[(f64, Deadline)]) -> Network {
        Network {
            cells: vec![Cell {
                id: "ap".into(),
                period: 1.0,
            }],
            flows: flows
                .iter()
                .enumerate()
                .map(|(i, &(a, d))| Flow {
                    id: format!("f{i}"),
                    route: vec![Hop {
                        cell: "ap".into(),
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
    fn preconditions() {
        let cfg = SolverConfig::default();
        let net = cell(&[(0.01, Deadline::Finite(1))]);
        assert!(matches!(
            solve_delay_insensitive(&net, &cfg),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            solve_loss_free(&net, &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn delay_insensitive_ignores_beta() {
        let cfg = SolverConfig::default();
        let a = solve_delay_insensitive(&cell(&[(0.01, Deadline::Infinite); 3]), &cfg).unwrap();
        let b = solve_delay_insensitive(&cell(&[(0.1, Deadline::Infinite); 3]), &cfg).unwrap();
        for (fa, fb) in a.allocation.flows.iter().zip(&b.allocation.flows) {
            assert!((fa.n - 10.0 / 3.0).abs() < 1e-9);
            assert!((fa.n - fb.n).abs() < 1e-9);
        }
    }

    #[test]
    fn baseline_splits_airtime_and_collapses_when_symmetric() {
        let cfg = SolverConfig::default();
        let inf = Deadline::Infinite;
        let fig1 = cell(&[(0.01, Deadline::Finite(1)), (0.01, inf), (0.01, inf)]);
        let base = classical_baseline(&fig1, &cfg).unwrap();
        for f in &base.flows {
            assert!((f.n / 10.0 - 1.0 / 3.0).abs() < 1e-15);
        }
        let opt = solve(&fig1, &cfg).unwrap();
        assert!(opt.allocation.utility > base.utility);

        let sym = cell(&[(0.01, inf); 3]);
        let base = classical_baseline(&sym, &cfg).unwrap();
        let opt = solve_delay_insensitive(&sym, &cfg).unwrap();
        assert!((opt.allocation.utility - base.utility).abs() < 1e-8);
    }
}
