//! Built-in scenario families.
//!
//! Both generators take string `key=value` overrides so the CLI and sweeps
//! can address them uniformly.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Cell, Deadline, Flow, Hop, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    SingleCell,
    ParkingLot,
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single-cell" => Ok(Generator::SingleCell),
            "parking-lot" => Ok(Generator::ParkingLot),
            _ => Err(Error::Scenario(format!(
                "unknown generator '{s}' (expected single-cell or parking-lot)"
            ))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::SingleCell => "single-cell",
            Generator::ParkingLot => "parking-lot",
        })
    }
}

impl Generator {
    /// Builds the default instance with `params` applied in order.
    pub fn build(self, params: &[(String, String)]) -> Result<Network> {
        match self {
            Generator::SingleCell => {
                let mut g = SingleCell::default();
                for (k, v) in params {
                    g.set(k, v)?;
                }
                Ok(g.build())
            }
            Generator::ParkingLot => {
                let mut g = ParkingLot::default();
                for (k, v) in params {
                    g.set(k, v)?;
                }
                g.build()
            }
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Scenario(format!("bad value '{v}' for '{key}'")))
}

/// One cell carrying `n` delay-insensitive flows `i1..iN` and, unless
/// `deadline` is `None`, a delay-sensitive flow `s` listed first.
///
/// Keys: `n`, `d` (integer, `inf` or `none`), `beta`, `w`, `period`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleCell {
    pub n: usize,
    pub deadline: Option<Deadline>,
    pub beta: f64,
    pub w: f64,
    pub period: f64,
}

impl Default for SingleCell {
    fn default() -> Self {
        SingleCell {
            n: 2,
            deadline: Some(Deadline::Finite(1)),
            beta: 1e-2,
            w: 10.0,
            period: 1.0,
        }
    }
}

impl SingleCell {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "n" => self.n = parse(key, v)?,
            "d" | "deadline" => {
                self.deadline = if v.trim() == "none" {
                    None
                } else {
                    Some(v.parse()?)
                }
            }
            "beta" => self.beta = parse(key, v)?,
            "w" => self.w = parse(key, v)?,
            "period" | "t" => self.period = parse(key, v)?,
            _ => {
                return Err(Error::Scenario(format!(
                    "single-cell has no parameter '{key}' (n, d, beta, w, period)"
                )))
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Network {
        let hop = || Hop {
            cell: "ap".into(),
            crossover: self.beta,
            phy_rate: self.w,
        };
        let mut flows = Vec::with_capacity(self.n + 1);
        if let Some(d) = self.deadline {
            flows.push(Flow {
                id: "s".into(),
                route: vec![hop()],
                deadline: d,
                alphabet_bits: 1,
            });
        }
        for i in 1..=self.n {
            flows.push(Flow {
                id: format!("i{i}"),
                route: vec![hop()],
                deadline: Deadline::Infinite,
                alphabet_bits: 1,
            });
        }
        Network {
            cells: vec![Cell {
                id: "ap".into(),
                period: self.period,
            }],
            flows,
        }
    }
}

/// Chain of cells `c1..cN` with one `N`-hop flow `f1` and single-hop flows
/// `f2..f{N+1}`, flow `f{i+1}` living in cell `ci`.
///
/// Keys: `cells`, `alpha` (every hop), `w` (every hop), `period`, `d1`
/// (multi-hop deadline), `d2` (single-hop deadlines), and per-flow
/// overrides `alpha.fK`, `w.fK`, `d.fK`. For `f1`, `alpha.f1` is the
/// end-to-end crossover, split evenly across hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ParkingLot {
    pub cells: usize,
    pub alpha: f64,
    pub w: f64,
    pub period: f64,
    pub d_multi: Deadline,
    pub d_single: Deadline,
    pub overrides: Vec<(usize, Override)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Override {
    Alpha(f64),
    W(f64),
    Deadline(Deadline),
}

impl Default for ParkingLot {
    fn default() -> Self {
        ParkingLot {
            cells: 3,
            alpha: 1e-2,
            w: 10.0,
            period: 1.0,
            d_multi: Deadline::Finite(1),
            d_single: Deadline::Finite(1),
            overrides: Vec::new(),
        }
    }
}

/// Per-hop crossover giving end-to-end crossover `total` over `hops` hops.
pub fn per_hop_crossover(total: f64, hops: usize) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * total).powf(1.0 / hops as f64))
}

impl ParkingLot {
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        if let Some((what, flow)) = key.split_once(".f") {
            let idx: usize = parse(key, flow)?;
            let o = match what {
                "alpha" => Override::Alpha(parse(key, v)?),
                "w" => Override::W(parse(key, v)?),
                "d" => Override::Deadline(v.parse()?),
                _ => {
                    return Err(Error::Scenario(format!(
                        "parking-lot has no parameter '{key}'"
                    )))
                }
            };
            self.overrides.push((idx, o));
            return Ok(());
        }
        match key {
            "cells" | "n" => self.cells = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "w" => self.w = parse(key, v)?,
            "period" | "t" => self.period = parse(key, v)?,
            "d1" => self.d_multi = v.parse()?,
            "d2" => self.d_single = v.parse()?,
            "d" => {
                self.d_multi = v.parse()?;
                self.d_single = self.d_multi;
            }
            _ => {
                return Err(Error::Scenario(format!(
                    "parking-lot has no parameter '{key}' (cells, alpha, w, period, d, d1, d2, alpha.fK, w.fK, d.fK)"
                )))
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Network> {
        if self.cells == 0 {
            return Err(Error::Scenario(
                "parking-lot needs at least one cell".into(),
            ));
        }
        let n = self.cells;
        let cells: Vec<Cell> = (1..=n)
            .map(|c| Cell {
                id: format!("c{c}"),
                period: self.period,
            })
            .collect();
        let mut flows = Vec::with_capacity(n + 1);
        flows.push(Flow {
            id: "f1".into(),
            route: cells
                .iter()
                .map(|c| Hop {
                    cell: c.id.clone(),
                    crossover: self.alpha,
                    phy_rate: self.w,
                })
                .collect(),
            deadline: self.d_multi,
            alphabet_bits: 1,
        });
        for (i, c) in cells.iter().enumerate() {
            flows.push(Flow {
                id: format!("f{}", i + 2),
                route: vec![Hop {
                    cell: c.id.clone(),
                    crossover: self.alpha,
                    phy_rate: self.w,
                }],
                deadline: self.d_single,
                alphabet_bits: 1,
            });
        }
        for &(idx, o) in &self.overrides {
            let flow = flows
                .get_mut(idx.wrapping_sub(1))
                .ok_or_else(|| Error::Scenario(format!("parking-lot has no flow f{idx}")))?;
            let hops = flow.route.len();
            match o {
                Override::Alpha(a) => {
                    let per_hop = per_hop_crossover(a, hops);
                    flow.route.iter_mut().for_each(|h| h.crossover = per_hop);
                }
                Override::W(w) => flow.route.iter_mut().for_each(|h| h.phy_rate = w),
                Override::Deadline(d) => flow.deadline = d,
            }
        }
        Ok(Network { cells, flows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn single_cell_shape() {
        let net = Generator::SingleCell
            .build(&kv(&[("n", "4"), ("d", "3")]))
            .unwrap();
        assert_eq!(net.flows.len(), 5);
        assert_eq!(net.flows[0].deadline, Deadline::Finite(3));
        assert!(net.flows[1..].iter().all(|f| f.deadline.is_infinite()));
        let none = Generator::SingleCell.build(&kv(&[("d", "none")])).unwrap();
        assert_eq!(none.flows.len(), 2);
        assert!(none.validate().is_empty());
    }

    #[test]
    fn parking_lot_shape() {
        let net = Generator::ParkingLot.build(&kv(&[("cells", "4")])).unwrap();
        assert!(net.validate().is_empty());
        assert_eq!(net.flows.len(), 5);
        assert_eq!(net.flows[0].route.len(), 4);
        assert_eq!(net.flows[3].route[0].cell, "c3");
    }

    #[test]
    fn parking_lot_overrides() {
        let net = Generator::ParkingLot
            .build(&kv(&[
                ("alpha.f1", "0.25"),
                ("w.f3", "15"),
                ("d.f2", "inf"),
            ]))
            .unwrap();
        assert!((net.flows[0].symbol_error() - 0.25).abs() < 1e-12);
        assert_eq!(net.flows[2].route[0].phy_rate, 15.0);
        assert!(net.flows[1].deadline.is_infinite());
        assert!(Generator::ParkingLot.build(&kv(&[("w.f9", "1")])).is_err());
        assert!(Generator::ParkingLot.build(&kv(&[("bogus", "1")])).is_err());
    }
}
