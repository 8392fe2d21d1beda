//! Command-line front end.
//!
//! Every subcommand builds one or more [`OutputTable`]s. Threshold, mixing
//! and subordinator choices use a `name:key=value,key=value` grammar, for
//! example `geometric:p=0.3`, `mixture:lomax`, `tss:alpha=0.6,theta=1`.
//! `--config <path>` reads a JSON object whose keys are flag names; its
//! values are applied first, so flags given on the command line win.

use crate::error::{Error, Result};
use crate::montecarlo::{
    estimate_pmf_cells, estimate_subordinator_laplace, report_failure_law, simulate_failures, SimConfig, SimReport,
};
use crate::process::{btsfpp_pmf, btsfpp_pmf_derivative_capped, btsfpp_pmf_wright, BivariateCount, ProcessParams};
use crate::shock::{
    hazard_rate_closed, hazard_rate_with, hitting_reliability, reliability_general_geometric, reliability_lomax_closed,
    reliability_mixture, reliability_series, reliability_uniform_closed, reliability_weibull_closed,
    reliability_yule_simon, FailureSemantics, MixingLaw, ThresholdDist,
};
use crate::process::{HoppeNormalization, SubordinatedPoisson};
use crate::subordinator::SubordinatorSpec;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable overriding the default simulation seed.
pub const SEED_ENV: &str = "BTSFPP_SEED";

/// Rectangular numeric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl OutputTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Usage(format!("row has {} values for {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV with a header row. Integral values below 2^53 print as integers,
    /// everything else with 17 significant digits, so parsing and
    /// re-emitting reproduces the text exactly.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> =
            reader.headers().map_err(|e| Error::Parse(e.to_string()))?.iter().map(str::to_string).collect();
        let mut table = Self::new(columns);
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let row = record
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            table.push(row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        Ok(table)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else if v == v.trunc() && v.abs() < 9.007_199_254_740_992e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.16e}")
    }
}

/// `start:stop:steps`, `steps` points including both ends.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Usage(format!("grid must be start:stop:steps, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Usage(format!("grid needs steps >= 1 and start <= stop, got {s:?}")));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
}

/// `name:key=value,key=value` split into a name and its keys.
fn parse_spec(s: &str) -> Result<(String, BTreeMap<String, String>)> {
    let (name, rest) = match s.split_once(':') {
        Some((n, r)) => (n, r),
        None => (s, ""),
    };
    let mut keys = BTreeMap::new();
    for item in rest.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        match item.split_once('=') {
            Some((k, v)) => {
                keys.insert(k.trim().to_string(), v.trim().to_string());
            }
            // a bare word after the name, as in `mixture:uniform`
            None => {
                keys.insert(String::new(), item.to_string());
            }
        }
    }
    Ok((name.trim().to_ascii_lowercase(), keys))
}

struct Keys {
    spec: String,
    map: BTreeMap<String, String>,
}

impl Keys {
    fn num(&mut self, key: &str) -> Result<f64> {
        let v = self.map.remove(key).ok_or_else(|| Error::Usage(format!("{:?} needs {key}=<value>", self.spec)))?;
        v.parse().map_err(|_| Error::Usage(format!("{key}={v:?} in {:?} is not a number", self.spec)))
    }

    fn opt(&mut self, key: &str) -> Result<Option<f64>> {
        if self.map.contains_key(key) {
            self.num(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn done(self) -> Result<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Usage(format!("unexpected key {k:?} in {:?}", self.spec))),
        }
    }
}

/// Parses a threshold spec. Mixing laws named without parameters (`lomax`,
/// `weibull`) are tied to `p`.
pub fn parse_threshold(s: &str, p: &ProcessParams) -> Result<ThresholdDist> {
    let (name, map) = parse_spec(s)?;
    let mut keys = Keys { spec: s.to_string(), map };
    let d = match name.as_str() {
        "geometric" => ThresholdDist::Geometric { p: keys.num("p")? },
        "discrete-exponential" => ThresholdDist::DiscreteExponential,
        "yule-simon" => ThresholdDist::YuleSimon { rho: keys.num("rho")? },
        "deterministic" => {
            let m = keys.num("m")?;
            if !(m >= 1.0 && m == m.trunc()) {
                return Err(Error::Usage(format!("deterministic threshold needs an integer m >= 1, got {m}")));
            }
            ThresholdDist::Deterministic { m: m as u64 }
        }
        "empirical" => {
            let v = keys.map.remove("pmf").ok_or_else(|| Error::Usage("empirical needs pmf=q1/q2/...".into()))?;
            let pmf = v
                .split('/')
                .map(|q| q.trim().parse::<f64>().map_err(|_| Error::Usage(format!("bad pmf entry {q:?}"))))
                .collect::<Result<_>>()?;
            ThresholdDist::Empirical { pmf }
        }
        "mixture" => {
            let law = keys.map.remove("").ok_or_else(|| Error::Usage(format!("{s:?} needs a mixing law")))?;
            let law = match law.as_str() {
                "uniform" => MixingLaw::Uniform,
                "lomax" => match (keys.opt("a")?, keys.opt("b")?) {
                    (Some(a), Some(b)) => MixingLaw::TruncatedLomax { a, b },
                    (None, None) => MixingLaw::lomax_for(p)?,
                    _ => return Err(Error::Usage("lomax needs both a and b, or neither".into())),
                },
                "weibull" => match (keys.opt("a")?, keys.opt("b")?, keys.opt("c")?) {
                    (Some(a), Some(b), c) => MixingLaw::TruncatedWeibull { a, b, c: c.unwrap_or(0.0) },
                    (None, None, None) => MixingLaw::weibull_for(p),
                    _ => return Err(Error::Usage("weibull needs a and b (and optionally c), or nothing".into())),
                },
                "point" => MixingLaw::PointMass { p: keys.num("p")? },
                other => return Err(Error::Usage(format!("unknown mixing law {other:?}"))),
            };
            ThresholdDist::GeometricMixture { law }
        }
        other => return Err(Error::Usage(format!("unknown threshold {other:?}"))),
    };
    keys.done()?;
    d.validate()?;
    Ok(d)
}

pub fn parse_subordinator(s: &str) -> Result<SubordinatorSpec> {
    let (name, map) = parse_spec(s)?;
    let mut keys = Keys { spec: s.to_string(), map };
    let spec = match name.as_str() {
        "tss" | "tempered-stable" => SubordinatorSpec::TemperedStable { alpha: keys.num("alpha")?, theta: keys.num("theta")? },
        "stable" => SubordinatorSpec::Stable { alpha: keys.num("alpha")? },
        "gamma" => SubordinatorSpec::Gamma { shape: keys.num("shape")?, rate: keys.num("rate")? },
        "deterministic" => SubordinatorSpec::Deterministic { drift: keys.num("drift")? },
        other => return Err(Error::Usage(format!("unknown subordinator {other:?}"))),
    };
    keys.done()?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Parser)]
#[command(name = "btsfpp", version, args_override_self = true, about = "Bivariate tempered space-fractional Poisson process and its shock model")]
pub struct Cli {
    /// JSON object of flag values applied before the command-line flags
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint pmf table for k1 + k2 <= max-h
    #[command(args_override_self = true)]
    Pmf(PmfArgs),
    /// Reliability of the shock model on a time grid
    #[command(args_override_self = true)]
    Reliability(ReliabilityArgs),
    /// Hazard of a type-n failure from state (k1, k2)
    #[command(args_override_self = true)]
    Hazard(HazardArgs),
    /// Monte Carlo comparison report (JSON)
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Data behind the mixture-reliability figures
    #[command(args_override_self = true)]
    Figures(FiguresArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ProcessArgs {
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda1: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub lambda2: f64,
}

impl ProcessArgs {
    pub fn params(&self) -> Result<ProcessParams> {
        ProcessParams::new(self.alpha, self.theta, self.lambda1, self.lambda2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Write to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PmfRoute {
    /// compound-Poisson recursion
    Recursion,
    Wright,
    /// finite derivative sums
    Derivative,
    /// Wright and derivative routes side by side
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long, default_value_t = 10)]
    pub max_h: u64,
    #[arg(long, value_enum, default_value_t = PmfRoute::Recursion)]
    pub route: PmfRoute,
    /// Highest derivative order of the derivative route
    #[arg(long, default_value_t = crate::process::DEFAULT_DERIVATIVE_CAP)]
    pub derivative_cap: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SemanticsArg {
    Crossing,
    Hitting,
}

impl From<SemanticsArg> for FailureSemantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::Crossing => FailureSemantics::Crossing,
            SemanticsArg::Hitting => FailureSemantics::Hitting,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ReliabilityArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// e.g. geometric:p=0.3, yule-simon:rho=1.5, mixture:uniform
    #[arg(long)]
    pub threshold: String,
    #[arg(long, default_value = "0:5:101")]
    pub t_grid: String,
    /// Replaces the tempered stable subordinator, e.g. gamma:shape=2,rate=1.5
    #[arg(long)]
    pub subordinator: Option<String>,
    /// Add a column per available route
    #[arg(long)]
    pub compare: bool,
    #[arg(long, value_enum, default_value_t = SemanticsArg::Crossing)]
    pub semantics: SemanticsArg,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct HazardArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub k1: u64,
    #[arg(long, default_value_t = 0)]
    pub k2: u64,
    #[arg(long, default_value = "0.05:5:100")]
    pub t_grid: String,
    /// Highest derivative order, k1 + k2 must not exceed it
    #[arg(long, default_value_t = crate::process::DEFAULT_DERIVATIVE_CAP)]
    pub derivative_cap: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Pmf,
    Failure,
    Laplace,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long, value_enum, default_value_t = Quantity::Pmf)]
    pub quantity: Quantity,
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    /// Defaults to $BTSFPP_SEED, then to a fixed seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Defaults to the available parallelism
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub horizon: f64,
    #[arg(long, value_enum, default_value_t = SemanticsArg::Crossing)]
    pub semantics: SemanticsArg,
    #[arg(long, default_value_t = crate::montecarlo::DEFAULT_Z_THRESHOLD)]
    pub z_threshold: f64,
    /// Evaluation time of pmf and Laplace runs
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    #[arg(long, default_value_t = 6)]
    pub max_h: u64,
    #[arg(long, default_value = "geometric:p=0.4")]
    pub threshold: String,
    /// Survival comparison points, spread evenly over (0, horizon]
    #[arg(long, default_value_t = 10)]
    pub grid_points: usize,
    /// Comma-separated Laplace arguments
    #[arg(long, default_value = "0.5,1,2,4")]
    pub u_grid: String,
    #[arg(long)]
    pub subordinator: Option<String>,
    /// Also write per-path failure outcomes as CSV
    #[arg(long, value_name = "PATH")]
    pub raw: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FiguresArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub figure: u8,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "0:5:101")]
    pub t_grid: String,
}

fn process_system(p: &ProcessParams, subordinator: &Option<String>) -> Result<SubordinatedPoisson> {
    match subordinator {
        Some(s) => SubordinatedPoisson::new(parse_subordinator(s)?, p.lambda1, p.lambda2),
        None => Ok(p.as_subordinated()),
    }
}

pub fn cmd_pmf(a: &PmfArgs) -> Result<OutputTable> {
    let p = a.process.params()?;
    if !(a.t > 0.0) {
        return Err(Error::Usage(format!("--t must be > 0 for the series routes, got {}", a.t)));
    }
    let mut columns = vec!["k1".to_string(), "k2".into(), "probability".into()];
    if a.route == PmfRoute::Both {
        columns.extend(["derivative".to_string(), "difference".into()]);
    }
    let mut table = OutputTable::new(columns);
    for k in BivariateCount::lattice(a.max_h) {
        let derivative = || btsfpp_pmf_derivative_capped(&p, k, a.t, a.derivative_cap).map_err(cap_flag);
        let mut row = vec![k.k1 as f64, k.k2 as f64];
        match a.route {
            PmfRoute::Recursion => row.push(btsfpp_pmf(&p, k, a.t)?),
            PmfRoute::Wright => row.push(btsfpp_pmf_wright(&p, k, a.t)?),
            PmfRoute::Derivative => row.push(derivative()?),
            PmfRoute::Both => {
                let w = btsfpp_pmf_wright(&p, k, a.t)?;
                let d = derivative()?;
                row.extend([w, d, (w - d).abs()]);
            }
        }
        table.push(row)?;
    }
    Ok(table)
}

fn cap_flag(e: Error) -> Error {
    match e {
        Error::CapExceeded { what, needed, cap } => {
            Error::CapExceeded { what: format!("{what} (raise --derivative-cap)"), needed, cap }
        }
        other => other,
    }
}

/// Closed-form reliability when one exists for this threshold and system.
fn closed_reliability(p: &ProcessParams, sys: &SubordinatedPoisson, tss: bool, d: &ThresholdDist, t: f64) -> Result<Option<f64>> {
    let (l1, l2, s) = (sys.lambda1, sys.lambda2, &sys.subordinator);
    let geometric = |q: f64| reliability_general_geometric(s, l1, l2, q, t).map(Some);
    let tied = tss && p.alpha < 1.0 && p.theta > 0.0;
    match d {
        ThresholdDist::Geometric { p: q } => geometric(*q),
        ThresholdDist::DiscreteExponential => geometric(1.0 - (-1f64).exp()),
        ThresholdDist::GeometricMixture { law: MixingLaw::PointMass { p: q } } => geometric(*q),
        ThresholdDist::GeometricMixture { law: MixingLaw::Uniform } if tied => reliability_uniform_closed(p, t).map(Some),
        ThresholdDist::GeometricMixture { law } if tied && MixingLaw::lomax_for(p).ok().as_ref() == Some(law) => {
            reliability_lomax_closed(p, t).map(Some)
        }
        ThresholdDist::GeometricMixture { law } if tss && *law == MixingLaw::weibull_for(p) => {
            reliability_weibull_closed(p, t).map(Some)
        }
        _ => Ok(None),
    }
}

fn quadrature_reliability(p: &ProcessParams, sys: &SubordinatedPoisson, tss: bool, d: &ThresholdDist, t: f64) -> Result<Option<f64>> {
    match d {
        ThresholdDist::GeometricMixture { law } => {
            reliability_mixture(&sys.subordinator, sys.lambda1, sys.lambda2, law, t).map(Some)
        }
        // the integral form needs t > 0; the series is exact at 0
        ThresholdDist::YuleSimon { rho } if tss && t > 0.0 => reliability_yule_simon(p, *rho, t).map(Some),
        _ => Ok(None),
    }
}

pub fn cmd_reliability(a: &ReliabilityArgs) -> Result<OutputTable> {
    let p = a.process.params()?;
    let d = parse_threshold(&a.threshold, &p)?;
    let sys = process_system(&p, &a.subordinator)?;
    let tss = a.subordinator.is_none();
    let grid = parse_grid(&a.t_grid)?;
    if grid[0] < 0.0 {
        return Err(Error::Usage("--t-grid must start at t >= 0".into()));
    }
    if FailureSemantics::from(a.semantics) == FailureSemantics::Hitting {
        let mut table = OutputTable::new(vec!["t".into(), "reliability".into()]);
        for &t in &grid {
            table.push(vec![t, hitting_reliability(&sys, &d, t)?])?;
        }
        return Ok(table);
    }
    let has_closed = closed_reliability(&p, &sys, tss, &d, 1.0)?.is_some();
    let has_quad = quadrature_reliability(&p, &sys, tss, &d, 1.0)?.is_some();
    let mut columns = vec!["t".to_string(), "reliability".into()];
    if a.compare {
        if has_closed {
            columns.push("closed_form".into());
        }
        if has_quad {
            columns.push("quadrature".into());
        }
        columns.push("series".into());
    }
    let mut table = OutputTable::new(columns);
    for &t in &grid {
        let closed = closed_reliability(&p, &sys, tss, &d, t)?;
        let quad = if has_quad { Some(quadrature_reliability(&p, &sys, tss, &d, t)?.map_or_else(|| reliability_series(&sys, &d, t), Ok)?) } else { None };
        let series = if a.compare || (closed.is_none() && quad.is_none()) { Some(reliability_series(&sys, &d, t)?) } else { None };
        let best = closed.or(quad).or(series).expect("series computed when nothing else is");
        let mut row = vec![t, best];
        if a.compare {
            row.extend(closed);
            row.extend(quad);
            row.extend(series);
        }
        table.push(row)?;
    }
    Ok(table)
}

pub fn cmd_hazard(a: &HazardArgs) -> Result<OutputTable> {
    let p = a.process.params()?;
    if a.n != 1 && a.n != 2 {
        return Err(Error::Usage(format!("--n must be 1 or 2, got {}", a.n)));
    }
    let grid = parse_grid(&a.t_grid)?;
    if grid[0] <= 0.0 {
        return Err(Error::Usage("--t-grid must start at t > 0".into()));
    }
    let k = BivariateCount::new(a.k1, a.k2);
    let closed = hazard_rate_closed(&p, a.n)?;
    let mut table = OutputTable::new(vec!["t".into(), "hazard".into(), "closed_form".into(), "difference".into()]);
    for &t in &grid {
        let h = hazard_rate_with(&p, a.n, k, t, a.derivative_cap, HoppeNormalization::Corrected).map_err(cap_flag)?;
        table.push(vec![t, h, closed, (h - closed).abs()])?;
    }
    Ok(table)
}

/// Seed from the flag, then the environment, then a fixed default.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not a 64-bit integer"))),
        Err(_) => Ok(SimConfig::default().master_seed),
    }
}

/// Runs the simulation; the per-path table is returned for failure runs.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<(SimReport, Option<OutputTable>)> {
    let p = a.process.params()?;
    let mut cfg = SimConfig {
        paths: a.paths,
        master_seed: resolve_seed(a.seed)?,
        horizon: a.horizon,
        semantics: a.semantics.into(),
        z_threshold: a.z_threshold,
        ..SimConfig::default()
    };
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    cfg.validate().map_err(|e| Error::Usage(e.to_string()))?;
    let sys = process_system(&p, &a.subordinator)?;
    match a.quantity {
        Quantity::Pmf => Ok((estimate_pmf_cells(&sys, a.t, a.max_h, &cfg)?, None)),
        Quantity::Laplace => {
            let us = a
                .u_grid
                .split(',')
                .map(|u| u.trim().parse::<f64>().map_err(|_| Error::Usage(format!("bad --u-grid entry {u:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((estimate_subordinator_laplace(&sys.subordinator, a.t, &us, &cfg)?, None))
        }
        Quantity::Failure => {
            let start = Instant::now();
            let d = parse_threshold(&a.threshold, &p)?;
            let n = a.grid_points.max(1);
            let grid: Vec<f64> = (1..=n).map(|i| cfg.horizon * i as f64 / n as f64).collect();
            let outcomes = simulate_failures(&sys, &d, &cfg)?;
            let report = report_failure_law(&sys, &d, &grid, &cfg, &outcomes, start)?;
            let mut raw = OutputTable::new(vec!["path".into(), "threshold".into(), "failure_time".into(), "cause".into()]);
            for (i, o) in outcomes.iter().enumerate() {
                let cause = match o.cause {
                    crate::montecarlo::PathCause::Type1 => 1.0,
                    crate::montecarlo::PathCause::Type2 => 2.0,
                    crate::montecarlo::PathCause::Multiple => 3.0,
                    crate::montecarlo::PathCause::Overshoot => 4.0,
                    crate::montecarlo::PathCause::Censored => 0.0,
                };
                let ft = o.failure_time(cfg.semantics).unwrap_or(f64::INFINITY);
                raw.push(vec![i as f64, o.threshold as f64, ft, cause])?;
            }
            Ok((report, Some(raw)))
        }
    }
}

/// Parameter sweeps of the figures: left panel varies alpha at theta = 1,
/// right panel varies theta at alpha = 0.5, both with unit rates.
pub const FIGURE_ALPHAS: [f64; 4] = [0.25, 0.5, 0.75, 0.9];
pub const FIGURE_THETAS: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

/// Closed-form reliability drawn in figure `n`.
pub fn figure_curve(figure: u8, p: &ProcessParams, t: f64) -> Result<f64> {
    match figure {
        1 => reliability_uniform_closed(p, t),
        2 => reliability_lomax_closed(p, t),
        3 => reliability_weibull_closed(p, t),
        _ => Err(Error::Usage(format!("--figure must be 1, 2 or 3, got {figure}"))),
    }
}

/// Left and right panels of figure `n` on `grid`.
pub fn figure_tables(figure: u8, grid: &[f64]) -> Result<(OutputTable, OutputTable)> {
    let panel = |label: &str, params: Vec<(f64, ProcessParams)>| -> Result<OutputTable> {
        let mut cols = vec!["t".to_string()];
        cols.extend(params.iter().map(|(v, _)| format!("{label}={v}")));
        let mut table = OutputTable::new(cols);
        for &t in grid {
            let mut row = vec![t];
            for (_, p) in &params {
                row.push(figure_curve(figure, p, t)?);
            }
            table.push(row)?;
        }
        Ok(table)
    };
    let left = FIGURE_ALPHAS.iter().map(|&a| Ok((a, ProcessParams::new(a, 1.0, 1.0, 1.0)?))).collect::<Result<_>>()?;
    let right = FIGURE_THETAS.iter().map(|&th| Ok((th, ProcessParams::new(0.5, th, 1.0, 1.0)?))).collect::<Result<_>>()?;
    Ok((panel("alpha", left)?, panel("theta", right)?))
}

/// Writes `fig<n>_left.csv` and `fig<n>_right.csv`; returns their paths.
pub fn cmd_figures(a: &FiguresArgs) -> Result<Vec<PathBuf>> {
    let grid = parse_grid(&a.t_grid)?;
    if grid[0] < 0.0 {
        return Err(Error::Usage("--t-grid must start at t >= 0".into()));
    }
    let (left, right) = figure_tables(a.figure, &grid)?;
    std::fs::create_dir_all(&a.out)?;
    let mut paths = Vec::new();
    for (side, table) in [("left", left), ("right", right)] {
        let path = a.out.join(format!("fig{}_{side}.csv", a.figure));
        std::fs::write(&path, table.to_csv())?;
        paths.push(path);
    }
    Ok(paths)
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_table(table: &OutputTable, o: &OutputArgs, stdout: &mut dyn Write) -> Result<()> {
    let text = match o.format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json()? + "\n",
    };
    emit(&text, &o.out, stdout)
}

/// Turns a `--config` JSON object into flag tokens.
fn config_tokens(path: &Path) -> Result<Vec<OsString>> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let obj = value.as_object().ok_or_else(|| Error::Usage("--config must hold a JSON object".into()))?;
    let mut tokens = Vec::new();
    for (key, v) in obj {
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => tokens.push(flag.into()),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => tokens.extend([flag.into(), s.into()]),
            serde_json::Value::Number(n) => tokens.extend([flag.into(), n.to_string().into()]),
            _ => return Err(Error::Usage(format!("--config value of {key:?} must be a scalar"))),
        }
    }
    Ok(tokens)
}

/// Splices `--config` values in right after the subcommand name.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            path = Some(PathBuf::from(it.next().ok_or_else(|| Error::Usage("--config needs a path".into()))?));
        } else if let Some(p) = a.to_str().and_then(|s| s.strip_prefix("--config=")) {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let tokens = config_tokens(&path)?;
    let cmd = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')).map(|i| i + 2);
    match cmd {
        Some(at) => {
            let tail = rest.split_off(at.min(rest.len()));
            rest.extend(tokens);
            rest.extend(tail);
            Ok(rest)
        }
        None => Err(Error::Usage("--config needs a subcommand".into())),
    }
}

/// Parses `args` (program name first) and runs the command, writing tables
/// to `stdout` unless `--out` says otherwise.
pub fn run(args: Vec<OsString>, stdout: &mut dyn Write) -> Result<()> {
    let args = expand_config(args)?;
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            stdout.write_all(e.render().to_string().as_bytes())?;
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            return Err(Error::Usage(first.trim_start_matches("error: ").to_string()));
        }
    };
    match &cli.command {
        Command::Pmf(a) => emit_table(&cmd_pmf(a)?, &a.output, stdout),
        Command::Reliability(a) => emit_table(&cmd_reliability(a)?, &a.output, stdout),
        Command::Hazard(a) => emit_table(&cmd_hazard(a)?, &a.output, stdout),
        Command::Simulate(a) => {
            let (report, raw) = cmd_simulate(a)?;
            if let Some(seconds) = report.runtime_seconds {
                eprintln!("runtime: {seconds:.3} s");
            }
            if let (Some(path), Some(raw)) = (&a.raw, raw) {
                std::fs::write(path, raw.to_csv())?;
            }
            emit(&(report.to_json()? + "\n"), &a.out, stdout)
        }
        Command::Figures(a) => {
            let mut text = String::new();
            for p in cmd_figures(a)? {
                text.push_str(&p.display().to_string());
                text.push('\n');
            }
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// Process exit code for an error: 2 for usage and domain errors, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Domain(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

/// Single-line error report.
pub fn error_line(e: &Error) -> String {
    format!("error: {e}").replace('\n', " ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> Result<String> {
        let mut out = Vec::new();
        let mut argv: Vec<OsString> = vec!["btsfpp".into()];
        argv.extend(args.iter().map(OsString::from));
        run(argv, &mut out)?;
        Ok(String::from_utf8(out).unwrap())
    }

    #[test]
    fn csv_round_trip() {
        let mut t = OutputTable::new(vec!["k".into(), "x".into()]);
        t.push(vec![3.0, 0.1]).unwrap();
        t.push(vec![4.0, 1.0 / 3.0]).unwrap();
        t.push(vec![5.0, f64::NAN]).unwrap();
        let text = t.to_csv();
        assert_eq!(OutputTable::from_csv(&text).unwrap().to_csv(), text);
        assert!(text.starts_with("k,x\n3,1.0000000000000001e-1\n"));
        assert!(t.push(vec![1.0]).is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_grid("0:5:101").unwrap().len(), 101);
        assert_eq!(*parse_grid("0:5:101").unwrap().last().unwrap(), 5.0);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn spec_grammar() {
        let p = ProcessParams::new(0.5, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(parse_threshold("geometric:p=0.3", &p).unwrap(), ThresholdDist::Geometric { p: 0.3 });
        assert_eq!(parse_threshold("yule-simon:rho=1.5", &p).unwrap(), ThresholdDist::YuleSimon { rho: 1.5 });
        assert_eq!(
            parse_threshold("mixture:uniform", &p).unwrap(),
            ThresholdDist::GeometricMixture { law: MixingLaw::Uniform }
        );
        assert_eq!(
            parse_threshold("mixture:lomax", &p).unwrap(),
            ThresholdDist::GeometricMixture { law: MixingLaw::lomax_for(&p).unwrap() }
        );
        assert_eq!(
            parse_threshold("empirical:pmf=0.5/0.5", &p).unwrap(),
            ThresholdDist::Empirical { pmf: vec![0.5, 0.5] }
        );
        for bad in ["geometric", "binomial:n=3", "geometric:p=0.3,q=1", "mixture:beta"] {
            assert!(matches!(parse_threshold(bad, &p), Err(Error::Usage(_))), "{bad}");
        }
        assert!(matches!(parse_threshold("geometric:p=2", &p), Err(Error::Domain(_))));
        assert_eq!(parse_subordinator("gamma:shape=2,rate=1.5").unwrap(), SubordinatorSpec::Gamma { shape: 2.0, rate: 1.5 });
        assert!(parse_subordinator("tss:alpha=1.5,theta=1").is_err());
    }

    #[test]
    fn pmf_command() {
        let out = run_str(&["pmf", "--alpha", "1", "--max-h", "2"]).unwrap();
        let t = OutputTable::from_csv(&out).unwrap();
        assert_eq!(t.columns, ["k1", "k2", "probability"]);
        let want = (-3f64).exp() * 2.0;
        assert!((t.rows[1][2] - want).abs() < 1e-15, "{:?}", t.rows[1]);
        let both = OutputTable::from_csv(&run_str(&["pmf", "--route", "both"]).unwrap()).unwrap();
        assert!(both.column("difference").unwrap().iter().all(|d| *d <= 1e-8));
        assert!(matches!(run_str(&["pmf", "--t", "0"]), Err(Error::Usage(_))));
        assert!(matches!(run_str(&["pmf", "--alpha", "1.5"]), Err(Error::Domain(m)) if m.contains("alpha")));
    }

    #[test]
    fn reliability_command() {
        let out = run_str(&["reliability", "--threshold", "mixture:uniform", "--alpha", "0.5", "--theta", "1", "--lambda2", "1", "--compare", "--t-grid", "0:2:5"]).unwrap();
        let t = OutputTable::from_csv(&out).unwrap();
        assert_eq!(t.columns, ["t", "reliability", "closed_form", "quadrature", "series"]);
        for row in &t.rows {
            assert!((row[2] - row[3]).abs() < 1e-6 && (row[2] - row[4]).abs() < 1e-6, "{row:?}");
        }
        let g = OutputTable::from_csv(&run_str(&["reliability", "--threshold", "geometric:p=1", "--t-grid", "0:1:3"]).unwrap()).unwrap();
        let p = ProcessParams::new(0.7, 0.5, 1.0, 2.0).unwrap();
        for row in &g.rows {
            assert!((row[1] - (-row[0] * p.psi(3.0)).exp()).abs() < 1e-15);
        }
        assert!(matches!(run_str(&["reliability", "--threshold", "poisson:mu=1"]), Err(Error::Usage(_))));
    }

    #[test]
    fn hazard_command() {
        let out = run_str(&["hazard", "--alpha", "1", "--n", "2", "--t-grid", "0.5:1:2"]).unwrap();
        let t = OutputTable::from_csv(&out).unwrap();
        assert!(t.rows.iter().all(|r| (r[1] - 2.0).abs() < 1e-12 && r[2] == 2.0));
        assert!(matches!(run_str(&["hazard", "--n", "3"]), Err(Error::Usage(_))));
        let e = run_str(&["hazard", "--k1", "30", "--k2", "20"]).unwrap_err();
        assert!(error_line(&e).contains("--derivative-cap"), "{}", error_line(&e));
    }

    #[test]
    fn simulate_is_deterministic() {
        let args = ["simulate", "--quantity", "failure", "--paths", "3000", "--seed", "11", "--horizon", "2"];
        let a = run_str(&args).unwrap();
        assert_eq!(a, run_str(&args).unwrap());
        let report: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert!(report["censored_fraction"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn config_file_supplies_flags() {
        let dir = std::env::temp_dir().join(format!("btsfpp-cli-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = dir.join("cfg.json");
        std::fs::write(&cfg, r#"{"alpha": 1, "max_h": 1}"#).unwrap();
        let out = run_str(&["pmf", "--config", cfg.to_str().unwrap(), "--lambda2", "1"]).unwrap();
        let t = OutputTable::from_csv(&out).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!((t.rows[0][2] - (-2f64).exp()).abs() < 1e-15);
        // the command line wins over the file
        let out = run_str(&["--config", cfg.to_str().unwrap(), "pmf", "--max-h", "2"]).unwrap();
        assert_eq!(OutputTable::from_csv(&out).unwrap().rows.len(), 6);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn figure_tables_start_at_one() {
        let grid = parse_grid("0:5:11").unwrap();
        for fig in 1..=3 {
            let (l, r) = figure_tables(fig, &grid).unwrap();
            for table in [l, r] {
                assert!(table.rows[0][1..].iter().all(|v| (v - 1.0).abs() < 1e-12));
                for c in 1..table.columns.len() {
                    assert!(table.rows.windows(2).all(|w| w[1][c] <= w[0][c] + 1e-15));
                }
            }
        }
    }
}
