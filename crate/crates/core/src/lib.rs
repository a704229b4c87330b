//! Proportional-fair joint allocation of airtime and coding rates for
//! deadline-constrained flows over lossy multi-hop wireless networks.
//!
//! Flows cross a sequence of cells, each running a periodic schedule. A flow
//! sends `n` coded symbols per period and must decode its block within `D`
//! periods, so it trades airtime against redundancy `x = (1 - r)/2`. The
//! [`solver`] picks `(n, x)` for every flow to maximize
//! `sum_f ln(k_f (1 - e_f))` subject to per-cell schedulability.

// NaN must fail range checks, which `!(x > 0.0)` expresses directly
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod generators;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{Cell, Deadline, Flow, Hop, Network};
pub use solver::{solve, Allocation, Solution, SolverConfig};
