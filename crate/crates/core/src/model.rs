//! Problem instances: cells with TDMA schedule periods, flows routed over
//! lossy binary-symmetric hops, and the end-to-end channel statistics and
//! schedulability quantities derived from them.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};

/// An interference domain whose members share one TDMA schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: String,
    /// Schedule period in seconds.
    pub period: f64,
}

/// One hop of a flow's route.
#[derive(Debug, Clone, PartialEq)]
pub struct Hop {
    pub cell: String,
    /// Per-bit crossover probability of this hop's BSC, in `[0, 0.5)`.
    pub crossover: f64,
    /// Transmission rate in symbols per second.
    pub phy_rate: f64,
}

/// Decoding delay deadline, counted in schedule periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deadline {
    Finite(u32),
    Infinite,
}

impl Deadline {
    pub fn is_infinite(self) -> bool {
        matches!(self, Deadline::Infinite)
    }

    pub fn finite(self) -> Option<u32> {
        match self {
            Deadline::Finite(d) => Some(d),
            Deadline::Infinite => None,
        }
    }
}

impl fmt::Display for Deadline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deadline::Finite(d) => write!(f, "{d}"),
            Deadline::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Flow {
    pub id: String,
    /// Ordered hops; the first cell holds the source, the last the destination.
    pub route: Vec<Hop>,
    pub deadline: Deadline,
    /// Bits per channel symbol (`m`); each symbol uses the BSC `m` times.
    pub alphabet_bits: u32,
}

impl Flow {
    pub fn end_to_end_crossover(&self) -> f64 {
        end_to_end_crossover(self.route.iter().map(|h| h.crossover))
    }

    pub fn symbol_error(&self) -> f64 {
        symbol_error(self.end_to_end_crossover(), self.alphabet_bits)
    }

    pub fn channel(&self) -> ChannelSummary {
        let alpha = self.end_to_end_crossover();
        ChannelSummary {
            end_to_end_crossover: alpha,
            symbol_error: symbol_error(alpha, self.alphabet_bits),
        }
    }

    /// Destination cell id (last hop).
    pub fn destination(&self) -> Option<&str> {
        self.route.last().map(|h| h.cell.as_str())
    }

    pub fn source(&self) -> Option<&str> {
        self.route.first().map(|h| h.cell.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSummary {
    pub end_to_end_crossover: f64,
    pub symbol_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub cells: Vec<Cell>,
    pub flows: Vec<Flow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NoFlows,
    DuplicateCellId,
    DuplicateFlowId,
    NonPositivePeriod,
    EmptyRoute,
    RouteNotLoopFree,
    UnknownCell(String),
    CrossoverOutOfRange,
    NonPositivePhyRate,
    ZeroDeadline,
    ZeroAlphabetBits,
}

/// One invariant violation, tagged with the offending cell or flow id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match &self.kind {
            ViolationKind::NoFlows => "network has no flows".to_string(),
            ViolationKind::DuplicateCellId => "duplicate cell id".to_string(),
            ViolationKind::DuplicateFlowId => "duplicate flow id".to_string(),
            ViolationKind::NonPositivePeriod => "schedule period must be > 0".to_string(),
            ViolationKind::EmptyRoute => "route is empty".to_string(),
            ViolationKind::RouteNotLoopFree => "route not loop-free".to_string(),
            ViolationKind::UnknownCell(c) => format!("route references unknown cell '{c}'"),
            ViolationKind::CrossoverOutOfRange => "crossover out of [0,0.5)".to_string(),
            ViolationKind::NonPositivePhyRate => "phy rate must be > 0".to_string(),
            ViolationKind::ZeroDeadline => "finite deadline must be >= 1".to_string(),
            ViolationKind::ZeroAlphabetBits => "alphabet bits m must be >= 1".to_string(),
        };
        write!(f, "{}: {}", self.subject, what)
    }
}

impl Network {
    /// Every invariant violation in the instance; empty when valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |subject: &str, kind| {
            out.push(Violation {
                subject: subject.to_string(),
                kind,
            })
        };

        if self.flows.is_empty() {
            push("network", ViolationKind::NoFlows);
        }
        let mut cell_ids = HashSet::new();
        for c in &self.cells {
            if !cell_ids.insert(c.id.as_str()) {
                push(&c.id, ViolationKind::DuplicateCellId);
            }
            if !(c.period > 0.0 && c.period.is_finite()) {
                push(&c.id, ViolationKind::NonPositivePeriod);
            }
        }
        let mut flow_ids = HashSet::new();
        for f in &self.flows {
            if !flow_ids.insert(f.id.as_str()) {
                push(&f.id, ViolationKind::DuplicateFlowId);
            }
            if f.route.is_empty() {
                push(&f.id, ViolationKind::EmptyRoute);
            }
            let mut seen = HashSet::new();
            let mut looped = false;
            for h in &f.route {
                if !seen.insert(h.cell.as_str()) {
                    looped = true;
                }
                if !cell_ids.contains(h.cell.as_str()) {
                    push(&f.id, ViolationKind::UnknownCell(h.cell.clone()));
                }
                if !(0.0..0.5).contains(&h.crossover) {
                    push(&f.id, ViolationKind::CrossoverOutOfRange);
                }
                if !(h.phy_rate > 0.0 && h.phy_rate.is_finite()) {
                    push(&f.id, ViolationKind::NonPositivePhyRate);
                }
            }
            if looped {
                push(&f.id, ViolationKind::RouteNotLoopFree);
            }
            if f.deadline == Deadline::Finite(0) {
                push(&f.id, ViolationKind::ZeroDeadline);
            }
            if f.alphabet_bits == 0 {
                push(&f.id, ViolationKind::ZeroAlphabetBits);
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(v))
        }
    }

    pub fn cell_index(&self, id: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.id == id)
    }

    /// Indices of the flows routed through `cell` (the set F_c).
    pub fn flows_through(&self, cell: &str) -> Vec<usize> {
        self.flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.route.iter().any(|h| h.cell == cell))
            .map(|(i, _)| i)
            .collect()
    }

    /// Per-cell load and slack for the given per-flow packet sizes.
    ///
    /// Hops referring to unknown cells are ignored; call on validated networks.
    pub fn cell_load(&self, packet_sizes: &[f64]) -> CellLoad {
        assert_eq!(
            packet_sizes.len(),
            self.flows.len(),
            "one packet size per flow"
        );
        let index: HashMap<&str, usize> = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.as_str(), i))
            .collect();
        let mut load = vec![0.0; self.cells.len()];
        for (f, &n) in self.flows.iter().zip(packet_sizes) {
            for h in &f.route {
                if let Some(&c) = index.get(h.cell.as_str()) {
                    load[c] += n / h.phy_rate;
                }
            }
        }
        let slack = self
            .cells
            .iter()
            .zip(&load)
            .map(|(c, l)| c.period - l)
            .collect();
        CellLoad { load, slack }
    }
}

/// Airtime demand per cell in seconds, and the unused remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct CellLoad {
    pub load: Vec<f64>,
    pub slack: Vec<f64>,
}

impl CellLoad {
    pub fn feasible(&self) -> bool {
        self.slack.iter().all(|&s| s >= 0.0)
    }

    pub fn feasible_within(&self, tol: f64) -> bool {
        self.slack.iter().all(|&s| s >= -tol)
    }
}

/// Probability that an odd number of hops flip a bit:
/// `(1 - prod(1 - 2 a_i)) / 2`.
pub fn end_to_end_crossover(hop_crossovers: impl IntoIterator<Item = f64>) -> f64 {
    // log form keeps the small-crossover digits
    let ln_prod: f64 = hop_crossovers.into_iter().map(|a| (-2.0 * a).ln_1p()).sum();
    -0.5 * ln_prod.exp_m1()
}

/// Probability that an `m`-bit symbol arrives corrupted: `1 - (1 - alpha)^m`.
pub fn symbol_error(alpha: f64, m: u32) -> f64 {
    if m == 1 {
        return alpha;
    }
    // -expm1(m ln(1-alpha)) keeps precision for tiny alpha.
    -(f64::from(m) * (-alpha).ln_1p()).exp_m1()
}

/// Index-based view of a validated network used by the solver hot loop.
#[derive(Debug, Clone)]
pub(crate) struct Topology {
    pub periods: Vec<f64>,
    pub flows: Vec<FlowLinks>,
    /// Flow indices per cell.
    pub members: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowLinks {
    /// `(cell index, phy rate)` per hop, in route order.
    pub hops: Vec<(usize, f64)>,
    pub beta: f64,
    pub deadline: Deadline,
    /// Largest packet size any single cell on the route could carry alone.
    pub n_cap: f64,
}

impl Topology {
    pub fn new(net: &Network) -> Result<Self> {
        net.ensure_valid()?;
        let periods: Vec<f64> = net.cells.iter().map(|c| c.period).collect();
        let mut members = vec![Vec::new(); periods.len()];
        let flows = net
            .flows
            .iter()
            .enumerate()
            .map(|(fi, f)| {
                let hops: Vec<(usize, f64)> = f
                    .route
                    .iter()
                    .map(|h| {
                        let c = net.cell_index(&h.cell).expect("validated");
                        members[c].push(fi);
                        (c, h.phy_rate)
                    })
                    .collect();
                let n_cap = hops
                    .iter()
                    .map(|&(c, w)| w * periods[c])
                    .fold(f64::INFINITY, f64::min);
                FlowLinks {
                    hops,
                    beta: f.symbol_error(),
                    deadline: f.deadline,
                    n_cap,
                }
            })
            .collect();
        Ok(Topology {
            periods,
            flows,
            members,
        })
    }

    /// Aggregate route price `q_f = sum p_c / w_{f,c}`.
    pub fn route_price(&self, flow: usize, prices: &[f64]) -> f64 {
        self.flows[flow]
            .hops
            .iter()
            .map(|&(c, w)| prices[c] / w)
            .sum()
    }

    pub fn slacks(&self, packet_sizes: &[f64]) -> Vec<f64> {
        let mut slack = self.periods.clone();
        for (f, &n) in self.flows.iter().zip(packet_sizes) {
            for &(c, w) in &f.hops {
                slack[c] -= n / w;
            }
        }
        slack
    }

    pub fn max_route_len(&self) -> usize {
        self.flows.iter().map(|f| f.hops.len()).max().unwrap_or(1)
    }
}
