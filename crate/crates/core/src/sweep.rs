//! Parameter sweeps and their CSV rendering.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::model::Network;
use crate::solver::{solve, Allocation, SolverConfig};

/// Where sweep instances come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Network(Network),
    Generated {
        generator: Generator,
        params: Vec<(String, String)>,
    },
}

impl Source {
    pub fn base(&self) -> Result<Network> {
        match self {
            Source::Network(n) => Ok(n.clone()),
            Source::Generated { generator, params } => generator.build(params),
        }
    }

    /// Instance with `param` set to `value`. Generated sources take a
    /// generator key; file sources take a path such as
    /// `flows.f1.deadline`, `flows.f1.m`, `flows.f1.route.0.alpha`,
    /// `flows.f1.route.*.w` or `cells.c1.period`.
    pub fn instance(&self, param: &str, value: &str) -> Result<Network> {
        let net = match self {
            Source::Generated { generator, params } => {
                let mut p = params.clone();
                p.push((param.to_string(), value.to_string()));
                generator.build(&p)?
            }
            Source::Network(n) => {
                let mut n = n.clone();
                set_path(&mut n, param, value)?;
                n
            }
        };
        net.ensure_valid()?;
        Ok(net)
    }
}

fn bad_path(path: &str) -> Error {
    Error::Scenario(format!("parameter path '{path}' does not resolve"))
}

fn num<T: std::str::FromStr>(path: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Scenario(format!("bad value '{v}' for '{path}'")))
}

/// Sets a dotted parameter path on a network.
pub fn set_path(net: &mut Network, path: &str, value: &str) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    match parts.as_slice() {
        ["cells", id, "period"] => {
            let c = net
                .cells
                .iter_mut()
                .find(|c| c.id == *id)
                .ok_or_else(|| bad_path(path))?;
            c.period = num(path, value)?;
        }
        ["flows", id, rest @ ..] => {
            let f = net
                .flows
                .iter_mut()
                .find(|f| f.id == *id)
                .ok_or_else(|| bad_path(path))?;
            match rest {
                ["deadline"] => f.deadline = value.parse()?,
                ["m"] => f.alphabet_bits = num(path, value)?,
                ["route", hop, field @ ("alpha" | "w")] => {
                    let v: f64 = num(path, value)?;
                    let hops: Vec<usize> = if *hop == "*" {
                        (0..f.route.len()).collect()
                    } else {
                        let i: usize = num(path, hop)?;
                        if i >= f.route.len() {
                            return Err(bad_path(path));
                        }
                        vec![i]
                    };
                    for i in hops {
                        if *field == "alpha" {
                            f.route[i].crossover = v;
                        } else {
                            f.route[i].phy_rate = v;
                        }
                    }
                }
                _ => return Err(bad_path(path)),
            }
        }
        _ => return Err(bad_path(path)),
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<String>,
}

impl SweepSpec {
    pub fn new(param: impl Into<String>, values: Vec<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Scenario("sweep needs at least one value".into()));
        }
        Ok(SweepSpec {
            param: param.into(),
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub network: Network,
    pub converged: bool,
    /// Converged allocation, or the best feasible iterate otherwise.
    pub allocation: Option<Allocation>,
}

impl SweepRow {
    pub fn flow(&self, id: &str) -> Option<&crate::solver::FlowAllocation> {
        self.allocation
            .as_ref()?
            .flows
            .iter()
            .find(|f| f.flow_id == id)
    }
}

/// Solves every sweep point, in parallel, returning rows in value order.
/// Invalid instances fail the whole sweep; non-converged points are kept
/// and flagged.
pub fn run_sweep(source: &Source, spec: &SweepSpec, cfg: &SolverConfig) -> Result<Vec<SweepRow>> {
    let nets = spec
        .values
        .iter()
        .map(|v| source.instance(&spec.param, v))
        .collect::<Result<Vec<_>>>()?;
    nets.into_par_iter()
        .zip(spec.values.par_iter())
        .map(|(network, value)| {
            let (converged, allocation) = match solve(&network, cfg) {
                Ok(s) => (true, Some(s.allocation)),
                Err(Error::NonConvergence { best_feasible, .. }) => {
                    (false, best_feasible.map(|b| *b))
                }
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                value: value.clone(),
                network,
                converged,
                allocation,
            })
        })
        .collect()
}

/// CSV with columns `value, converged, utility` then
/// `<flow>.airtime, <flow>.r, <flow>.n, <flow>.e` for every flow id seen in
/// any row, in first-seen order. Missing entries are empty.
pub fn write_csv<W: Write>(out: W, param: &str, rows: &[SweepRow]) -> Result<()> {
    let mut ids: Vec<&str> = Vec::new();
    for r in rows {
        for f in &r.network.flows {
            if !ids.contains(&f.id.as_str()) {
                ids.push(&f.id);
            }
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![param.to_string(), "converged".into(), "utility".into()];
    for id in &ids {
        for col in ["airtime", "r", "n", "e"] {
            header.push(format!("{id}.{col}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.value.clone(), r.converged.to_string()];
        rec.push(
            r.allocation
                .as_ref()
                .map_or(String::new(), |a| a.utility.to_string()),
        );
        for id in &ids {
            match r.flow(id) {
                Some(f) => {
                    rec.push(f.airtime_fraction(&r.network).to_string());
                    rec.push(f.coding.r.to_string());
                    rec.push(f.n.to_string());
                    rec.push(f.error_bound.to_string());
                }
                None => rec.extend(std::iter::repeat(String::new()).take(4)),
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Scenario(format!("csv: {other:?}")),
    }
}
