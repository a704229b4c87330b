use rayon::prelude::*;

use crate::bounds::{exact_error, CLAMP};
use crate::error::{Error, Result};
use crate::model::{Deadline, Network, Topology};
use crate::solver::{flow_term, Allocation, SolverConfig};

/// Refuse grids needing more utility evaluations than this.
pub const MAX_EVALUATIONS: u64 = 100_000_000;

/// Relative slack on the schedulability test, a few ulps of accumulated sums.
const LOAD_ROUNDING: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridObjective {
    /// Chernoff upper bound, as optimized by the solver.
    Chernoff,
    /// Exact MDS decoding error on integer `(n, k)`; finite deadlines only.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Packet sizes `n_cap * i / n_points`, `i = 1..=n_points`.
    pub n_points: usize,
    /// Interior coding points `beta + (0.5 - beta) j / (x_points + 1)`.
    /// Flows with a closed-form `x` (infinite deadline or loss-free channel)
    /// use that single value instead.
    pub x_points: usize,
    pub objective: GridObjective,
    pub config: SolverConfig,
}

impl GridSpec {
    pub fn new(n_points: usize, x_points: usize) -> Self {
        GridSpec {
            n_points,
            x_points,
            objective: GridObjective::Chernoff,
            config: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub allocation: Allocation,
    /// Objective value at the best grid point.
    pub utility: f64,
    /// Grid index `(i, j)` per flow.
    pub index: Vec<(usize, usize)>,
    /// Packet-size grid increment per flow.
    pub n_step: Vec<f64>,
    /// Coding grid increment per flow; 0 for closed-form flows.
    pub x_step: Vec<f64>,
    pub evaluations: u64,
}

struct FlowGrid {
    ns: Vec<f64>,
    /// Best `(value, x index, x)` per packet size; `None` if no grid `x`
    /// gives a finite utility.
    best: Vec<Option<(f64, usize, f64)>>,
    x_step: f64,
}

/// Brute-force maximizer of the network utility over a per-flow grid with
/// schedulability enforced exactly. Limited to 3 flows and 2 cells.
pub fn grid_search(net: &Network, grid: &GridSpec) -> Result<GridResult> {
    let topo = Topology::new(net)?;
    if topo.flows.len() > 3 || topo.periods.len() > 2 {
        return Err(Error::Precondition(
            "grid search is limited to 3 flows and 2 cells".into(),
        ));
    }
    if grid.n_points == 0 || grid.x_points == 0 {
        return Err(Error::domain("grid needs at least one point per dimension"));
    }
    let per_flow = (grid.n_points as u64).saturating_mul(grid.x_points as u64);
    let tuples = (grid.n_points as u64).saturating_pow(topo.flows.len() as u32);
    let evaluations = per_flow
        .saturating_mul(topo.flows.len() as u64)
        .saturating_add(tuples);
    if evaluations > MAX_EVALUATIONS {
        return Err(Error::Precondition(format!(
            "grid needs {evaluations} evaluations; limit is {MAX_EVALUATIONS}"
        )));
    }

    let grids = topo
        .flows
        .iter()
        .map(|l| flow_grid(l.n_cap, l.beta, l.deadline, grid))
        .collect::<Result<Vec<_>>>()?;

    // flows are separable once n is fixed, so only n-tuples are enumerated
    let first = &grids[0];
    let best = (0..first.ns.len())
        .into_par_iter()
        .filter_map(|i| {
            let mut load = vec![0.0; topo.periods.len()];
            let mut idx = vec![0usize; grids.len()];
            idx[0] = i;
            let v = first.best[i]?.0;
            if !add_load(&topo, 0, first.ns[i], &mut load) {
                return None;
            }
            enumerate(&topo, &grids, 1, &mut load, &mut idx, v)
        })
        .reduce_with(better);

    let (utility, is) = best.ok_or_else(|| Error::Precondition("no feasible grid point".into()))?;
    let mut points = Vec::with_capacity(is.len());
    let mut index = Vec::with_capacity(is.len());
    for (g, &i) in grids.iter().zip(&is) {
        let (_, j, x) = g.best[i].expect("enumerated points are finite");
        points.push((g.ns[i], x));
        index.push((i, j));
    }
    Ok(GridResult {
        allocation: Allocation::evaluate(net, &points)?,
        utility,
        index,
        n_step: grids.iter().map(|g| g.ns[0]).collect(),
        x_step: grids.iter().map(|g| g.x_step).collect(),
        evaluations,
    })
}

fn flow_grid(n_cap: f64, beta: f64, deadline: Deadline, grid: &GridSpec) -> Result<FlowGrid> {
    let exact = grid.objective == GridObjective::Exact;
    let d = match (deadline, exact) {
        (Deadline::Finite(d), _) => d,
        (Deadline::Infinite, true) => {
            return Err(Error::Precondition(
                "exact objective needs finite deadlines".into(),
            ))
        }
        (Deadline::Infinite, false) => 0,
    };
    let mut ns: Vec<f64> = (1..=grid.n_points)
        .map(|i| n_cap * i as f64 / grid.n_points as f64)
        .collect();
    if exact {
        ns = ns.iter().map(|n| n.floor()).filter(|&n| n >= 1.0).collect();
        ns.dedup();
        if ns.is_empty() {
            return Err(Error::Precondition("no integer packet size fits".into()));
        }
    }
    let closed = beta == 0.0 || deadline.is_infinite();
    let (xs, x_step): (Vec<f64>, f64) = if closed && !exact {
        let x = if beta == 0.0 {
            0.0
        } else {
            beta + grid.config.epsilon_for(beta)
        };
        (vec![x], 0.0)
    } else {
        let h = (0.5 - beta) / (grid.x_points + 1) as f64;
        (
            (1..=grid.x_points).map(|j| beta + h * j as f64).collect(),
            h,
        )
    };

    let best = ns
        .iter()
        .map(|&n| {
            let mut top: Option<(f64, usize, f64)> = None;
            for (j, &x) in xs.iter().enumerate() {
                let v = if exact {
                    exact_value(d, n, x, beta)
                } else {
                    flow_term(n, x, beta, deadline).map(|t| t.utility).ok()
                };
                if let Some(v) = v.filter(|v| v.is_finite()) {
                    if top.map_or(true, |(b, _, _)| v > b) {
                        top = Some((v, j, x));
                    }
                }
            }
            top
        })
        .collect();
    Ok(FlowGrid { ns, best, x_step })
}

/// `ln(k (1 - P_fail))` with `k = round(n (1 - 2x))`.
fn exact_value(d: u32, n: f64, x: f64, beta: f64) -> Option<f64> {
    let k = (n * (1.0 - 2.0 * x)).round();
    if k < 1.0 {
        return None;
    }
    let fail = exact_error(u64::from(d), n as u64, k as u64, beta.max(CLAMP)).ok()?;
    Some(k.ln() + (-fail).ln_1p())
}

fn add_load(topo: &Topology, flow: usize, n: f64, load: &mut [f64]) -> bool {
    for &(c, w) in &topo.flows[flow].hops {
        load[c] += n / w;
    }
    topo.flows[flow]
        .hops
        .iter()
        // boundary points such as 0.41 + 0.295 + 0.295 must not fail on rounding
        .all(|&(c, _)| load[c] <= topo.periods[c] * (1.0 + LOAD_ROUNDING))
}

fn remove_load(topo: &Topology, flow: usize, n: f64, load: &mut [f64]) {
    for &(c, w) in &topo.flows[flow].hops {
        load[c] -= n / w;
    }
}

fn enumerate(
    topo: &Topology,
    grids: &[FlowGrid],
    flow: usize,
    load: &mut Vec<f64>,
    idx: &mut Vec<usize>,
    acc: f64,
) -> Option<(f64, Vec<usize>)> {
    if flow == grids.len() {
        return Some((acc, idx.clone()));
    }
    let g = &grids[flow];
    let mut best = None;
    for i in 0..g.ns.len() {
        let fits = add_load(topo, flow, g.ns[i], load);
        if fits {
            if let Some((v, _, _)) = g.best[i] {
                idx[flow] = i;
                if let Some(cand) = enumerate(topo, grids, flow + 1, load, idx, acc + v) {
                    best = Some(match best {
                        Some(b) => better(b, cand),
                        None => cand,
                    });
                }
            }
        }
        remove_load(topo, flow, g.ns[i], load);
        // load grows with n, so every larger packet size fails as well
        if !fits {
            break;
        }
    }
    best
}

/// Higher value wins; ties go to the lexicographically smaller index so the
/// parallel reduction is order independent.
fn better(a: (f64, Vec<usize>), b: (f64, Vec<usize>)) -> (f64, Vec<usize>) {
    if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
        b
    } else {
        a
    }
}
