//! Command-line front end. Commands write to caller-supplied streams and
//! return the process exit code: 0 success, 1 input or domain error,
//! 2 non-convergence.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bounds::{chernoff_upper, exact_error, lower_bound};
use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::model::{Deadline, Network};
use crate::oracle::monte_carlo_error;
use crate::scenario::load_scenario;
use crate::solver::{classical_baseline, solve, Allocation, Solution, SolverConfig};
use crate::sweep::{run_sweep, write_csv, Source, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NON_CONVERGENCE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pfcoding",
    version,
    about = "Proportional-fair airtime and coding-rate allocation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario and print the allocation.
    Solve(CommonArgs),
    /// Solve one instance per parameter value and write CSV.
    Sweep(SweepArgs),
    /// Check bound ordering and Monte Carlo agreement at the solved allocation.
    Verify(CommonArgs),
    /// Compare the optimum with equal-airtime allocation.
    CompareBaseline(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario JSON file, or `gen:single-cell` / `gen:parking-lot`.
    pub scenario: String,
    /// Also write CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Constant subgradient step, 1/s^2.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Price-change convergence threshold.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    /// Also report floor-rounded integer packet sizes.
    #[arg(long)]
    pub round: bool,
    /// Generator parameter, `key=value`; repeatable.
    #[arg(long = "set", value_parser = parse_kv)]
    pub set: Vec<(String, String)>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Generator key or scenario path such as `flows.f1.deadline`.
    #[arg(long)]
    pub param: String,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<String>,
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got '{s}'"))
}

impl CommonArgs {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig {
            step_size: self.gamma,
            ..SolverConfig::default()
        };
        if let Some(m) = self.max_iter {
            cfg.max_iterations = m;
        }
        if let Some(t) = self.tol {
            cfg.tol_price = t;
        }
        cfg
    }

    fn source(&self) -> Result<Source> {
        match self.scenario.strip_prefix("gen:") {
            Some(name) => Ok(Source::Generated {
                generator: name.parse::<Generator>()?,
                params: self.set.clone(),
            }),
            None => {
                if !self.set.is_empty() {
                    return Err(Error::Scenario(
                        "--set applies to generated scenarios only".into(),
                    ));
                }
                Ok(Source::Network(load_scenario(Path::new(&self.scenario))?))
            }
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli, out, err),
        Err(e) if e.use_stderr() => {
            let _ = write!(err, "{e}");
            EXIT_INPUT
        }
        // --help and --version
        Err(e) => {
            let _ = write!(out, "{e}");
            EXIT_OK
        }
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::CompareBaseline(a) => cmd_compare_baseline(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
                _ => EXIT_INPUT,
            }
        }
    }
}

fn io_err(e: io::Error) -> Error {
    Error::Io(e)
}

/// Solves, printing the best feasible iterate on non-convergence.
fn solve_or_report(
    net: &Network,
    cfg: &SolverConfig,
    out: &mut dyn Write,
) -> Result<Option<Solution>> {
    match solve(net, cfg) {
        Ok(s) => Ok(Some(s)),
        Err(Error::NonConvergence {
            iterations,
            best_feasible,
            ..
        }) => {
            writeln!(out, "did not converge after {iterations} iterations").map_err(io_err)?;
            if let Some(a) = best_feasible {
                writeln!(out, "best feasible iterate:").map_err(io_err)?;
                write_flow_table(net, &a, out)?;
            }
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn write_flow_table(net: &Network, a: &Allocation, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{:<10} {:>12} {:>10} {:>10} {:>12} {:>12} {:>9}",
        "flow", "n", "r", "x", "e", "throughput", "airtime"
    )
    .map_err(io_err)?;
    for f in &a.flows {
        writeln!(
            out,
            "{:<10} {:>12.6} {:>10.6} {:>10.6} {:>12.4e} {:>12.6} {:>9.6}",
            f.flow_id,
            f.n,
            f.coding.r,
            f.coding.x,
            f.error_bound,
            f.throughput,
            f.airtime_fraction(net)
        )
        .map_err(io_err)?;
    }
    writeln!(out, "utility {:.12}", a.utility).map_err(io_err)?;
    Ok(())
}

fn write_allocation_csv(path: &Path, net: &Network, a: &Allocation) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let fail = |e: csv::Error| Error::Scenario(format!("{}: {e}", path.display()));
    w.write_record(["flow", "n", "r", "x", "e", "throughput", "airtime"])
        .map_err(fail)?;
    for f in &a.flows {
        w.write_record([
            f.flow_id.clone(),
            f.n.to_string(),
            f.coding.r.to_string(),
            f.coding.x.to_string(),
            f.error_bound.to_string(),
            f.throughput.to_string(),
            f.airtime_fraction(net).to_string(),
        ])
        .map_err(fail)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_solve(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    let net = args.source()?.base()?;
    let cfg = args.config();
    let Some(sol) = solve_or_report(&net, &cfg, out)? else {
        return Ok(EXIT_NON_CONVERGENCE);
    };
    write_flow_table(&net, &sol.allocation, out)?;
    writeln!(
        out,
        "\n{:<10} {:>14} {:>14} {:>10}",
        "cell", "price", "slack", "airtime"
    )
    .map_err(io_err)?;
    for (i, c) in net.cells.iter().enumerate() {
        writeln!(
            out,
            "{:<10} {:>14.8} {:>14.4e} {:>10.6}",
            c.id,
            sol.prices.0[i],
            sol.slack[i],
            sol.allocation.cell_load[i] / c.period
        )
        .map_err(io_err)?;
    }
    writeln!(
        out,
        "\niterations {}  duality gap {:.3e}",
        sol.iterations, sol.duality_gap
    )
    .map_err(io_err)?;
    for w in &sol.warnings {
        writeln!(out, "warning: {w}").map_err(io_err)?;
    }
    if args.round {
        let points: Vec<(f64, f64)> = sol
            .allocation
            .flows
            .iter()
            .map(|f| (f.n.floor(), f.coding.x))
            .collect();
        writeln!(out, "\nrounded packet sizes (not optimal):").map_err(io_err)?;
        match Allocation::evaluate(&net, &points) {
            Ok(r) => {
                write_flow_table(&net, &r, out)?;
                let feasible = net.cell_load(&r.packet_sizes()).feasible();
                writeln!(out, "feasible {feasible}").map_err(io_err)?;
            }
            Err(e) => writeln!(out, "not evaluable: {e}").map_err(io_err)?,
        }
    }
    if let Some(path) = &args.out {
        write_allocation_csv(path, &net, &sol.allocation)?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<i32> {
    let source = args.common.source()?;
    let spec = SweepSpec::new(args.param.clone(), args.values.clone())?;
    let rows = run_sweep(&source, &spec, &args.common.config())?;
    match &args.common.out {
        Some(path) => write_csv(File::create(path)?, &spec.param, &rows)?,
        None => write_csv(&mut *out, &spec.param, &rows)?,
    }
    Ok(if rows.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_NON_CONVERGENCE
    })
}

/// Bound check at one solved flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheck {
    pub flow_id: String,
    /// `(Dn, Dk)` after rounding; `None` when the deadline is infinite.
    pub block: Option<(u64, u64)>,
    pub lower: f64,
    pub exact: f64,
    pub upper: f64,
    pub sandwich: bool,
    pub mc: Option<crate::oracle::McReport>,
}

/// Rounds each flow's block to integer `(Dn, Dk)` and evaluates the
/// bounds, the exact tail and a Monte Carlo estimate.
pub fn verify_allocation(
    net: &Network,
    a: &Allocation,
    trials: u64,
    seed: u64,
) -> Result<Vec<FlowCheck>> {
    let mut checks = Vec::with_capacity(a.flows.len());
    for (flow, fa) in net.flows.iter().zip(&a.flows) {
        let beta = flow.symbol_error();
        let d = match flow.deadline {
            Deadline::Infinite => {
                checks.push(FlowCheck {
                    flow_id: fa.flow_id.clone(),
                    block: None,
                    lower: 0.0,
                    exact: 0.0,
                    upper: 0.0,
                    sandwich: true,
                    mc: None,
                });
                continue;
            }
            Deadline::Finite(d) => d,
        };
        let dn = (f64::from(d) * fa.n).round() as u64;
        let dk = (f64::from(d) * fa.info_symbols).round() as u64;
        if dn == 0 || dk == 0 {
            return Err(Error::domain(format!(
                "{}: rounded block (Dn={dn}, Dk={dk}) carries no information symbols",
                fa.flow_id
            )));
        }
        let mc = Some(monte_carlo_error(1, dn, dk, beta, trials, seed)?);
        if beta == 0.0 {
            checks.push(FlowCheck {
                flow_id: fa.flow_id.clone(),
                block: Some((dn, dk)),
                lower: 0.0,
                exact: 0.0,
                upper: 0.0,
                sandwich: true,
                mc,
            });
            continue;
        }
        let x = (dn - dk) as f64 / (2.0 * dn as f64);
        if !(x > beta) {
            return Err(Error::domain(format!(
                "{}: rounded block (Dn={dn}, Dk={dk}) has x={x} <= beta={beta}; bounds undefined",
                fa.flow_id
            )));
        }
        let n = dn as f64;
        let lower = lower_bound(1, n, x, beta)?;
        let exact = exact_error(1, dn, dk, beta)?;
        let upper = chernoff_upper(1, n, x, beta)?;
        checks.push(FlowCheck {
            flow_id: fa.flow_id.clone(),
            block: Some((dn, dk)),
            lower,
            exact,
            upper,
            sandwich: lower <= exact && exact <= upper,
            mc,
        });
    }
    Ok(checks)
}

pub fn cmd_verify(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    let net = args.source()?.base()?;
    let Some(sol) = solve_or_report(&net, &args.config(), out)? else {
        return Ok(EXIT_NON_CONVERGENCE);
    };
    let checks = verify_allocation(&net, &sol.allocation, args.trials, args.seed)?;
    writeln!(
        out,
        "{:<10} {:>6} {:>6} {:>11} {:>11} {:>11} {:>8}  monte carlo (99% CI)",
        "flow", "Dn", "Dk", "lower", "exact", "upper", "ordered"
    )
    .map_err(io_err)?;
    for c in &checks {
        let (dn, dk) = c
            .block
            .map_or(("-".to_string(), "-".to_string()), |(a, b)| {
                (a.to_string(), b.to_string())
            });
        let mc =
            c.mc.as_ref()
                .map_or("n/a (infinite deadline)".to_string(), |m| {
                    format!(
                        "{:.4e} [{:.4e}, {:.4e}] {}",
                        m.estimate,
                        m.ci_low,
                        m.ci_high,
                        if m.contains(c.exact) {
                            "covers exact"
                        } else {
                            "misses exact"
                        }
                    )
                });
        writeln!(
            out,
            "{:<10} {:>6} {:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>8}  {}",
            c.flow_id,
            dn,
            dk,
            c.lower,
            c.exact,
            c.upper,
            if c.sandwich { "pass" } else { "FAIL" },
            mc
        )
        .map_err(io_err)?;
    }
    writeln!(out, "seed {} trials {}", args.seed, args.trials).map_err(io_err)?;
    Ok(if checks.iter().all(|c| c.sandwich) {
        EXIT_OK
    } else {
        EXIT_INPUT
    })
}

pub fn cmd_compare_baseline(args: &CommonArgs, out: &mut dyn Write) -> Result<i32> {
    let net = args.source()?.base()?;
    let cfg = args.config();
    let Some(sol) = solve_or_report(&net, &cfg, out)? else {
        return Ok(EXIT_NON_CONVERGENCE);
    };
    let base = classical_baseline(&net, &cfg)?;
    let (u_opt, u_base) = (sol.allocation.utility, base.utility);
    writeln!(out, "{:<10} {:>14} {:>14}", "flow", "optimal", "baseline").map_err(io_err)?;
    for (o, b) in sol.allocation.flows.iter().zip(&base.flows) {
        writeln!(
            out,
            "{:<10} {:>14.6} {:>14.6}",
            o.flow_id,
            o.airtime_fraction(&net),
            b.airtime_fraction(&net)
        )
        .map_err(io_err)?;
    }
    writeln!(out, "U_optimal  {u_opt:.12}").map_err(io_err)?;
    writeln!(out, "U_baseline {u_base:.12}").map_err(io_err)?;
    writeln!(out, "gap        {:.6e}", u_opt - u_base).map_err(io_err)?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let fail = |e: csv::Error| Error::Scenario(format!("{}: {e}", path.display()));
        w.write_record(["utility_optimal", "utility_baseline", "gap"])
            .map_err(fail)?;
        w.write_record([
            u_opt.to_string(),
            u_base.to_string(),
            (u_opt - u_base).to_string(),
        ])
        .map_err(fail)?;
        w.flush()?;
    }
    Ok(EXIT_OK)
}
