//! JSON scenario files.
//!
//! ```json
//! {
//!   "cells": [{ "id": "c1", "period": 1.0 }],
//!   "flows": [
//!     { "id": "f1", "route": [{ "cell": "c1", "alpha": 0.01, "w": 10.0 }],
//!       "deadline": 1, "m": 1 },
//!     { "id": "f2", "route": [{ "cell": "c1", "alpha": 0.01, "w": 10.0 }],
//!       "deadline": "inf" }
//!   ]
//! }
//! ```
//!
//! `period` is in seconds and `w` in symbols per second. `deadline` is a
//! positive integer number of schedule periods or the string `"inf"`. `m`
//! (bits per symbol) defaults to 1. Unknown keys are rejected.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Cell, Deadline, Flow, Hop, Network};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub cells: Vec<CellEntry>,
    pub flows: Vec<FlowEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellEntry {
    pub id: String,
    pub period: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopEntry {
    pub cell: String,
    pub alpha: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEntry {
    pub id: String,
    pub route: Vec<HopEntry>,
    pub deadline: Deadline,
    #[serde(default = "default_m")]
    pub m: u32,
}

fn default_m() -> u32 {
    1
}

impl Serialize for Deadline {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Deadline::Finite(d) => s.serialize_u32(*d),
            Deadline::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Deadline {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct DeadlineVisitor;

        impl Visitor<'_> for DeadlineVisitor {
            type Value = Deadline;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Deadline, E> {
                match u32::try_from(v) {
                    Ok(0) | Err(_) => Err(E::invalid_value(de::Unexpected::Unsigned(v), &self)),
                    Ok(d) => Ok(Deadline::Finite(d)),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Deadline, E> {
                Err(E::invalid_value(de::Unexpected::Signed(v), &self))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Deadline, E> {
                v.parse()
                    .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self))
            }
        }

        d.deserialize_any(DeadlineVisitor)
    }
}

impl std::str::FromStr for Deadline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinite") {
            return Ok(Deadline::Infinite);
        }
        match t.parse::<u32>() {
            Ok(d) if d >= 1 => Ok(Deadline::Finite(d)),
            _ => Err(Error::Scenario(format!(
                "deadline '{s}' is not a positive integer or \"inf\""
            ))),
        }
    }
}

impl From<ScenarioFile> for Network {
    fn from(f: ScenarioFile) -> Self {
        Network {
            cells: f
                .cells
                .into_iter()
                .map(|c| Cell {
                    id: c.id,
                    period: c.period,
                })
                .collect(),
            flows: f
                .flows
                .into_iter()
                .map(|fl| Flow {
                    id: fl.id,
                    route: fl
                        .route
                        .into_iter()
                        .map(|h| Hop {
                            cell: h.cell,
                            crossover: h.alpha,
                            phy_rate: h.w,
                        })
                        .collect(),
                    deadline: fl.deadline,
                    alphabet_bits: fl.m,
                })
                .collect(),
        }
    }
}

impl From<&Network> for ScenarioFile {
    fn from(net: &Network) -> Self {
        ScenarioFile {
            cells: net
                .cells
                .iter()
                .map(|c| CellEntry {
                    id: c.id.clone(),
                    period: c.period,
                })
                .collect(),
            flows: net
                .flows
                .iter()
                .map(|f| FlowEntry {
                    id: f.id.clone(),
                    route: f
                        .route
                        .iter()
                        .map(|h| HopEntry {
                            cell: h.cell.clone(),
                            alpha: h.crossover,
                            w: h.phy_rate,
                        })
                        .collect(),
                    deadline: f.deadline,
                    m: f.alphabet_bits,
                })
                .collect(),
        }
    }
}

/// Parses and validates a scenario. Parse errors carry line and column.
pub fn parse_scenario(text: &str) -> Result<Network> {
    let file: ScenarioFile = serde_json::from_str(text)
        .map_err(|e| Error::Scenario(format!("{e} (line {}, column {})", e.line(), e.column())))?;
    let net = Network::from(file);
    net.ensure_valid()?;
    Ok(net)
}

pub fn load_scenario(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Scenario(msg) => Error::Scenario(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn to_json(net: &Network) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from(net)).expect("scenario serializes")
}
