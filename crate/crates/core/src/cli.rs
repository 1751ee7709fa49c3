//! Command-line orchestration: EFP tables, scaling scans, verification suites
//! and the OPC demo.
//!
//! Exit codes: 0 ok, 1 check failure, 2 usage, 3 memory budget.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{self, Check, ScalingFit};
use crate::error::Error;
use crate::exact::{self, build_hamiltonian, projector_contour, projector_q, spectrum, OperatorMatrix};
use crate::lattice::build_torus;
use crate::loops;
use crate::opc::{self, Corner, MoveDirection, OscPathConfig};
use crate::sixvertex;

pub const THREADS_ENV: &str = "EFP_THREADS";
pub const CSV_HEADER: &str = "L,efp,stderr,route,delta,beta,n,d,seed,wall_ms";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Lib(Error::InvalidArgument(_)) => 2,
            CliError::Lib(Error::Budget { .. }) => 3,
            _ => 1,
        }
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Exact,
    Mc,
    Potential,
    Sixvertex,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Exact => "exact",
            Route::Mc => "mc",
            Route::Potential => "potential",
            Route::Sixvertex => "sixvertex",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FitMode {
    Free,
    Fixed,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Holder,
    Chessboard,
    Rp,
    Den,
    Sutherland,
    Opc,
    SixvertexStructure,
    All,
}

#[derive(Parser, Debug)]
#[command(name = "efp", version, about = "Emptiness formation probability of the XXZ model")]
pub struct Cli {
    /// Worker threads (default: $EFP_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// EFP table over a range of block sizes.
    Efp(RunArgs),
    /// EFP table plus a scaling fit.
    Scan(ScanArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Render the highest-OPC transformation of a random rectangle.
    OpcDemo(OpcArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    /// key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub route: Option<Route>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Twice the magnetization of the ground-state sector.
    #[arg(long, allow_negative_numbers = true)]
    pub m2: Option<i64>,
    /// Block sizes: `3`, `1..6` (inclusive) or `1,2,5`.
    #[arg(long)]
    pub l: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Leave wall_ms empty so output is byte-identical across runs.
    #[arg(long)]
    pub reproducible: bool,
}

#[derive(Args, Debug, Default, Clone)]
pub struct ScanArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Fit mode: free nu with bootstrap interval, nu fixed to d+1, or none.
    #[arg(long, value_enum)]
    pub fit: Option<FitMode>,
    /// Inverse temperatures for a scan in beta at a single block size.
    #[arg(long)]
    pub betas: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    pub suite: Suite,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Include every check in the JSON summary, not only failures.
    #[arg(long)]
    pub details: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OpcArgs {
    #[arg(long, default_value_t = 6)]
    pub width: usize,
    #[arg(long, default_value_t = 6)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the configuration after every + move.
    #[arg(long)]
    pub trace: bool,
    /// Aligned-run length to look for (default: width / 2).
    #[arg(long)]
    pub run: Option<usize>,
}

/// Fully resolved run parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub route: Route,
    pub d: usize,
    pub n: usize,
    pub delta: Option<f64>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
    pub m2: Option<i64>,
    pub ls: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub format: Format,
    pub reproducible: bool,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            route: Route::Exact,
            d: 1,
            n: 4,
            delta: Some(0.0),
            kappa: None,
            beta: Some(0.0),
            m2: None,
            ls: vec![1],
            samples: 100_000,
            seed: 0,
            output: None,
            format: Format::Csv,
            reproducible: false,
            threads: 1,
        }
    }
}

const CONFIG_KEYS: [&str; 15] = [
    "route", "d", "n", "delta", "kappa", "beta", "m2", "l", "samples", "seed", "output", "format", "reproducible", "fit", "betas",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key=value", i + 1));
        };
        let (k, v) = (k.trim().replace('-', "_"), v.trim().to_string());
        if !CONFIG_KEYS.contains(&k.as_str()) {
            return usage(format!("config line {}: unknown key `{k}`", i + 1));
        }
        out.insert(k, v);
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::Usage(format!("bad value `{v}` for {key}")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> CliResult<T> {
    T::from_str(v, true).map_err(|_| CliError::Usage(format!("bad value `{v}` for {key}")))
}

/// Parses `3`, `1..6` (inclusive) or `1,2,5`.
pub fn parse_l_range(s: &str) -> CliResult<Vec<usize>> {
    let s = s.trim();
    let out: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = parse_value("l", a.trim())?;
        let b: usize = parse_value("l", b.trim_start_matches('=').trim())?;
        (a..=b).collect()
    } else {
        s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_value("l", t.trim())).collect::<CliResult<_>>()?
    };
    if out.is_empty() {
        return usage(format!("empty block-size range `{s}`"));
    }
    Ok(out)
}

fn parse_list(key: &str, s: &str) -> CliResult<Vec<f64>> {
    let out: Vec<f64> = s.split(',').filter(|t| !t.trim().is_empty()).map(|t| parse_value(key, t.trim())).collect::<CliResult<_>>()?;
    if out.is_empty() {
        return usage(format!("empty list for {key}"));
    }
    Ok(out)
}

/// Thread count from the flag, then `EFP_THREADS`, then the number of cores.
pub fn resolve_threads(flag: Option<usize>) -> CliResult<usize> {
    if let Some(t) = flag {
        return if t == 0 { usage("--threads must be positive") } else { Ok(t) };
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let t: usize = parse_value(THREADS_ENV, &v)?;
        return if t == 0 { usage(format!("{THREADS_ENV} must be positive")) } else { Ok(t) };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

impl RunConfig {
    /// Merges a config file (if any) with flags; flags win.
    pub fn resolve(args: &RunArgs, threads: usize) -> CliResult<(RunConfig, BTreeMap<String, String>)> {
        let file = match &args.config {
            Some(p) => parse_config_text(&std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)?,
            None => BTreeMap::new(),
        };
        let get = |k: &str| file.get(k).map(String::as_str);
        let route = match args.route {
            Some(r) => r,
            None => get("route").map(|v| parse_enum("route", v)).transpose()?.unwrap_or(Route::Exact),
        };
        let num = |flag: Option<f64>, k: &str| -> CliResult<Option<f64>> {
            Ok(match flag {
                Some(v) => Some(v),
                None => get(k).map(|v| parse_value(k, v)).transpose()?,
            })
        };
        let delta = num(args.delta, "delta")?;
        let kappa = num(args.kappa, "kappa")?;
        let beta = num(args.beta, "beta")?;
        let m2 = match args.m2 {
            Some(v) => Some(v),
            None => get("m2").map(|v| parse_value("m2", v)).transpose()?,
        };
        let d = match args.d {
            Some(v) => v,
            None => get("d").map(|v| parse_value("d", v)).transpose()?.unwrap_or(1),
        };
        let Some(n) = (match args.n {
            Some(v) => Some(v),
            None => get("n").map(|v| parse_value("n", v)).transpose()?,
        }) else {
            return usage("--n is required");
        };
        let ls = match (&args.l, get("l")) {
            (Some(s), _) => parse_l_range(s)?,
            (None, Some(s)) => parse_l_range(s)?,
            (None, None) => return usage("--l is required"),
        };
        let samples = match args.samples {
            Some(v) => v,
            None => get("samples").map(|v| parse_value("samples", v)).transpose()?.unwrap_or(100_000),
        };
        let seed = match args.seed {
            Some(v) => v,
            None => get("seed").map(|v| parse_value("seed", v)).transpose()?.unwrap_or(0),
        };
        let format = match args.format {
            Some(f) => f,
            None => get("format").map(|v| parse_enum("format", v)).transpose()?.unwrap_or(Format::Csv),
        };
        let reproducible = args.reproducible || get("reproducible").map(|v| parse_value::<bool>("reproducible", v)).transpose()?.unwrap_or(false);
        let output = args.output.clone().or_else(|| get("output").map(PathBuf::from));
        let cfg = RunConfig {
            route,
            d,
            n,
            delta,
            kappa,
            beta,
            m2,
            ls,
            samples,
            seed,
            output,
            format,
            reproducible,
            threads,
        };
        cfg.validate()?;
        Ok((cfg, file))
    }

    pub fn validate(&self) -> CliResult<()> {
        match (self.delta, self.kappa) {
            (Some(_), Some(_)) => return usage("give exactly one of delta and kappa"),
            (None, None) => return usage("one of delta and kappa is required"),
            (None, Some(_)) if self.route != Route::Sixvertex => return usage("kappa is only meaningful for route=sixvertex"),
            _ => {}
        }
        if self.ls.is_empty() {
            return usage("empty block-size range");
        }
        if self.d == 0 || self.n == 0 {
            return usage("d and n must be positive");
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return usage("beta must be finite and nonnegative");
            }
        }
        match self.route {
            Route::Exact => match (self.beta, self.m2) {
                (Some(_), Some(_)) => usage("route=exact takes either beta (thermal) or m2 (ground sector), not both"),
                (None, None) => usage("route=exact needs beta (thermal) or m2 (ground sector)"),
                _ => Ok(()),
            },
            Route::Mc | Route::Potential => {
                if self.beta.is_none() {
                    return usage(format!("route={} needs beta", self.route.name()));
                }
                if self.m2.is_some() {
                    return usage(format!("route={} samples the thermal state; drop m2", self.route.name()));
                }
                Ok(())
            }
            Route::Sixvertex => {
                if self.d != 1 {
                    return usage("route=sixvertex needs d=1");
                }
                if self.beta.is_some() {
                    return usage("route=sixvertex computes the ground sector; drop beta");
                }
                Ok(())
            }
        }
    }

    /// Anisotropy of the run (converted from kappa for the six-vertex route).
    pub fn delta_value(&self) -> f64 {
        self.delta.unwrap_or_else(|| sixvertex::delta_of_kappa(self.kappa.unwrap_or(0.0)))
    }

    fn kappa_value(&self) -> CliResult<f64> {
        match (self.kappa, self.delta) {
            (Some(k), _) => Ok(k),
            (None, Some(d)) => Ok(sixvertex::kappa_of_delta(d)?),
            _ => usage("one of delta and kappa is required"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfpRow {
    pub l: usize,
    pub beta: Option<f64>,
    pub efp: f64,
    pub stderr: Option<f64>,
    pub wall_ms: Option<u64>,
}

fn timed<T>(f: impl FnOnce() -> CliResult<T>) -> CliResult<(T, u64)> {
    let t0 = Instant::now();
    let v = f()?;
    Ok((v, t0.elapsed().as_millis() as u64))
}

fn budget_hint(e: Error) -> CliError {
    match e {
        Error::Budget { required_bytes, budget_bytes } => CliError::Lib(Error::Budget { required_bytes, budget_bytes }),
        other => CliError::Lib(other),
    }
}

/// One row per block size at the configured inverse temperature.
pub fn cmd_efp(cfg: &RunConfig) -> CliResult<Vec<EfpRow>> {
    efp_rows(cfg, cfg.beta, &cfg.ls)
}

fn efp_rows(cfg: &RunConfig, beta: Option<f64>, ls: &[usize]) -> CliResult<Vec<EfpRow>> {
    let torus = build_torus(cfg.d, cfg.n)?;
    let mut rows = Vec::with_capacity(ls.len());
    match cfg.route {
        Route::Exact => {
            if let Some(m2) = cfg.m2 {
                for &l in ls {
                    let (v, ms) = timed(|| exact::efp_ground_sector(&torus, cfg.delta_value(), m2, l).map_err(budget_hint))?;
                    rows.push(EfpRow { l, beta: None, efp: v, stderr: None, wall_ms: Some(ms) });
                }
            } else {
                let beta = beta.unwrap_or(0.0);
                if beta == 0.0 {
                    for &l in ls {
                        let (v, ms) = timed(|| Ok(exact::tracial_efp(&torus, l)?))?;
                        rows.push(EfpRow { l, beta: Some(0.0), efp: v, stderr: None, wall_ms: Some(ms) });
                    }
                } else {
                    let t0 = Instant::now();
                    let spec = spectrum(&build_hamiltonian(&torus, cfg.delta_value())?).map_err(budget_hint)?;
                    let setup = t0.elapsed().as_millis() as u64;
                    for &l in ls {
                        let (v, ms) = timed(|| Ok(spec.expectation(&projector_q(&torus, l)?, beta)?))?;
                        rows.push(EfpRow { l, beta: Some(beta), efp: v, stderr: None, wall_ms: Some(ms + setup) });
                    }
                }
            }
        }
        Route::Mc | Route::Potential => {
            let beta = beta.unwrap_or(0.0);
            for &l in ls {
                let (e, ms) = timed(|| {
                    Ok(if cfg.route == Route::Mc {
                        loops::estimate_efp_mc(&torus, cfg.delta_value(), beta, l, cfg.samples, cfg.seed)?
                    } else {
                        loops::estimate_efp_potential(&torus, cfg.delta_value(), beta, l, cfg.samples, cfg.seed)?
                    })
                })?;
                rows.push(EfpRow { l, beta: Some(beta), efp: e.value, stderr: Some(e.stderr), wall_ms: Some(ms) });
            }
        }
        Route::Sixvertex => {
            let kappa = cfg.kappa_value()?;
            let m2 = cfg.m2.unwrap_or(0);
            for &l in ls {
                let (v, ms) = timed(|| sixvertex::efp_sixvertex(cfg.n, kappa, m2, l).map_err(budget_hint))?;
                rows.push(EfpRow { l, beta: None, efp: v, stderr: None, wall_ms: Some(ms) });
            }
        }
    }
    if cfg.reproducible {
        for r in &mut rows {
            r.wall_ms = None;
        }
    }
    Ok(rows)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with a leading comment line naming the route and units.
pub fn render_csv(cfg: &RunConfig, rows: &[EfpRow]) -> String {
    let mut s = String::new();
    let kappa = cfg.kappa.map(|k| format!("; kappa={k}")).unwrap_or_default();
    let m2 = cfg.m2.map(|m| format!("; m2={m}")).unwrap_or_default();
    writeln!(
        s,
        "# route={}{kappa}{m2}; efp and stderr are probabilities; beta in units of inverse coupling; wall_ms in milliseconds; samples={}; threads={}",
        cfg.route.name(),
        cfg.samples,
        cfg.threads
    )
    .unwrap();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            r.l,
            r.efp,
            opt(r.stderr),
            cfg.route.name(),
            cfg.delta_value(),
            opt(r.beta),
            cfg.n,
            cfg.d,
            cfg.seed,
            opt(r.wall_ms)
        )
        .unwrap();
    }
    s
}

#[derive(Serialize)]
struct EfpJson<'a> {
    config: &'a RunConfig,
    rows: &'a [EfpRow],
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<&'a serde_json::Value>,
}

pub fn render_json(cfg: &RunConfig, rows: &[EfpRow], fit: Option<&serde_json::Value>) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(&EfpJson { config: cfg, rows, fit }).map_err(Error::from)? + "\n")
}

/// Least-squares line `-ln efp = a + b beta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaFit {
    pub intercept: f64,
    pub slope: f64,
}

fn beta_fit(rows: &[EfpRow]) -> Option<BetaFit> {
    let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.efp > 0.0).filter_map(|r| Some((r.beta?, -r.efp.ln()))).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Some(BetaFit { intercept: my - slope * mx, slope })
}

/// Result of a scan: the table and the fit footer.
#[derive(Clone, Debug)]
pub struct ScanResult {
    pub rows: Vec<EfpRow>,
    pub fit: Option<ScalingFit>,
    pub beta_fit: Option<BetaFit>,
    pub fit_error: Option<String>,
}

impl ScanResult {
    fn footer(&self) -> serde_json::Value {
        if let Some(f) = &self.fit {
            serde_json::json!({ "scaling_fit": f })
        } else if let Some(b) = &self.beta_fit {
            serde_json::json!({ "beta_fit": b })
        } else {
            serde_json::json!({ "error": self.fit_error.clone().unwrap_or_else(|| "no fit requested".into()) })
        }
    }
}

pub fn cmd_scan(cfg: &RunConfig, fit: FitMode, betas: Option<&[f64]>) -> CliResult<ScanResult> {
    if let Some(bs) = betas {
        if cfg.ls.len() != 1 {
            return usage("a beta scan needs a single block size");
        }
        if cfg.route == Route::Sixvertex || cfg.m2.is_some() {
            return usage("a beta scan needs a thermal route");
        }
        let mut rows = Vec::new();
        for &b in bs {
            rows.extend(efp_rows(cfg, Some(b), &cfg.ls)?);
        }
        let bf = beta_fit(&rows);
        return Ok(ScanResult {
            fit_error: bf.is_none().then(|| "fewer than two usable points".to_string()),
            rows,
            fit: None,
            beta_fit: bf,
        });
    }
    if fit != FitMode::None && cfg.ls.len() < 4 {
        return usage("a scaling fit needs at least 4 block sizes");
    }
    let rows = cmd_efp(cfg)?;
    let (fit, fit_error) = match fit {
        FitMode::None => (None, None),
        mode => {
            let nu = (mode == FitMode::Fixed).then_some(cfg.d as f64 + 1.0);
            let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.l, r.efp)).collect();
            match bounds::fit_scaling(&pts, nu, cfg.seed) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
    };
    Ok(ScanResult { rows, fit, beta_fit: None, fit_error })
}

/// Summary of a verification suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub suite: Suite,
    pub seed: u64,
    pub checks: usize,
    pub failures: usize,
    pub failed: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub details: Vec<Check>,
}

impl SuiteSummary {
    fn from_checks(suite: Suite, seed: u64, checks: Vec<Check>, details: bool) -> Self {
        let failed: Vec<Check> = checks.iter().filter(|c| !c.pass).cloned().collect();
        SuiteSummary {
            suite,
            seed,
            checks: checks.len(),
            failures: failed.len(),
            failed,
            details: if details { checks } else { Vec::new() },
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

fn flag_check(name: String, violations: usize) -> Check {
    Check { name, lhs: violations as f64, rhs: 0.0, pass: violations == 0 }
}

fn random_symmetric(dim: usize, rng: &mut ChaCha8Rng) -> OperatorMatrix {
    let m = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    OperatorMatrix::Dense((&m + m.transpose()) * 0.5)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Hoelder on n=4: identity, Q_l, the contour projectors and random symmetric operators.
pub fn suite_holder(seed: u64) -> CliResult<Vec<Check>> {
    let torus = build_torus(1, 4)?;
    let grid: Vec<(f64, f64)> = [-1.0, -0.5, 0.0, 0.5].iter().flat_map(|&d| [0.5, 1.0, 2.0].map(|b| (d, b))).collect();
    let out: Vec<CliResult<Vec<Check>>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(delta, beta))| {
            let mut rng = stream_rng(seed, k as u64);
            let mut ops = vec![OperatorMatrix::identity(16), projector_q(&torus, 2)?, projector_contour(&torus, 1)?, projector_contour(&torus, 2)?];
            for _ in 0..5 {
                ops.push(random_symmetric(16, &mut rng));
            }
            let h = build_hamiltonian(&torus, delta)?;
            let mut checks = bounds::holder_verify_many(&h, &ops, &[1, 2, 4], beta)?;
            for c in &mut checks {
                c.name = format!("{} delta={delta}", c.name);
            }
            Ok(checks)
        })
        .collect();
    flatten(out)
}

fn flatten(parts: Vec<CliResult<Vec<Check>>>) -> CliResult<Vec<Check>> {
    let mut all = Vec::new();
    for p in parts {
        all.extend(p?);
    }
    Ok(all)
}

/// Chessboard estimate on rings of length 4 and 8 for Delta <= 0.
pub fn suite_chessboard() -> CliResult<Vec<Check>> {
    let mut grid = Vec::new();
    for (n, ls) in [(4usize, vec![1usize, 2]), (8, vec![1, 2, 4])] {
        for delta in [-2.0, -1.0, -0.5, 0.0] {
            for beta in [0.0, 0.5, 1.0, 2.0, 4.0] {
                for &l in &ls {
                    grid.push((n, delta, beta, l));
                }
            }
        }
    }
    let out: Vec<CliResult<Vec<Check>>> = grid
        .par_iter()
        .map(|&(n, delta, beta, l)| Ok(vec![bounds::chessboard_verify(&build_torus(1, n)?, delta, beta, l)?]))
        .collect();
    flatten(out)
}

/// Den >= 1 on rings of length 4, 6 and 8.
pub fn suite_den() -> CliResult<Vec<Check>> {
    let mut grid = Vec::new();
    for n in [4usize, 6, 8] {
        for delta in [-2.0, -1.0, 0.0, 0.5, 0.9] {
            for beta in [0.25, 1.0, 4.0] {
                grid.push((n, delta, beta));
            }
        }
    }
    let out: Vec<CliResult<Vec<Check>>> = grid
        .par_iter()
        .map(|&(n, delta, beta)| Ok(vec![bounds::den_verify(&build_torus(1, n)?, delta, beta)?]))
        .collect();
    flatten(out)
}

/// Reflection positivity on rings of length 4 and 6.
pub fn suite_rp(seed: u64) -> CliResult<Vec<Check>> {
    let mut grid = Vec::new();
    for n in [4usize, 6] {
        for delta in [-1.0, -0.7, 0.0] {
            for beta in [0.5, 1.0, 2.0] {
                grid.push((n, delta, beta));
            }
        }
    }
    let out: Vec<CliResult<Vec<Check>>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(n, delta, beta))| Ok(bounds::rp_verify(&build_torus(1, n)?, delta, beta, 10, seed.wrapping_add(k as u64))?))
        .collect();
    flatten(out)
}

/// Transfer matrix commutes with the matched XXZ chain, and not with a mismatched one.
pub fn suite_sutherland() -> CliResult<Vec<Check>> {
    let mut grid = Vec::new();
    for n in [4usize, 6, 8] {
        for kappa in [-0.5, 0.0, 0.2, 0.4] {
            grid.push((n, kappa));
        }
    }
    let out: Vec<CliResult<Vec<Check>>> = grid
        .par_iter()
        .map(|&(n, kappa)| {
            let r = sixvertex::sutherland_check(n, kappa)?;
            let wrong = sixvertex::commutator_residual(n, kappa, sixvertex::delta_of_kappa(kappa) + 0.3)?;
            Ok(vec![
                Check { name: format!("sutherland(n={n}, kappa={kappa})"), lhs: r, rhs: 1e-10, pass: r < 1e-10 },
                Check { name: format!("mismatched(n={n}, kappa={kappa})"), lhs: 1e-3, rhs: wrong, pass: wrong > 1e-3 },
            ])
        })
        .collect();
    flatten(out)
}

/// Saturates + moves in random order, counting moves whose height step is not +1.
fn random_saturation(x: &OscPathConfig, rng: &mut ChaCha8Rng) -> CliResult<(OscPathConfig, usize)> {
    let mut y = x.clone();
    let mut h = y.height()?.value;
    let mut bad = 0;
    loop {
        let avail: Vec<_> = y.flippable_plaquettes()?.into_iter().filter(|p| p.corner == Corner::Minus).collect();
        let Some(p) = avail.choose(rng) else { break };
        y = opc::apply_move(&y, p.a, p.b, MoveDirection::Up)?;
        let nh = y.height()?.value;
        bad += usize::from(nh != h + 1);
        h = nh;
    }
    Ok((y, bad))
}

/// Confluence, +1 height steps and blockades on random rectangles.
pub fn suite_opc(seed: u64, fixtures: usize) -> CliResult<Vec<Check>> {
    let out: Vec<CliResult<Vec<Check>>> = (0..fixtures)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k as u64);
            let (l, r) = (rng.random_range(2..=7), rng.random_range(2..=7));
            let x = opc::random_rectangle(l, r, &mut rng);
            let top = opc::highest_opc(&x)?;
            let (other, bad) = random_saturation(&x, &mut rng)?;
            let blk = opc::blockade_check(&top)?;
            Ok(vec![
                flag_check(format!("confluence(fixture={k}, {l}x{r})"), usize::from(top != other)),
                flag_check(format!("height_step(fixture={k}, {l}x{r})"), bad),
                flag_check(format!("blockade(fixture={k}, {l}x{r})"), usize::from(!blk.passed())),
            ])
        })
        .collect();
    flatten(out)
}

/// Trace identity and row structure on every enumerated torus configuration.
pub fn suite_sixvertex_structure() -> CliResult<Vec<Check>> {
    let sizes = [(4usize, 2usize), (4, 3), (4, 4), (6, 2), (6, 3)];
    let out: Vec<CliResult<Vec<Check>>> = sizes
        .par_iter()
        .map(|&(n, t)| {
            let mut checks = Vec::new();
            for kappa in [-0.3, 0.0, 0.3] {
                let tr = sixvertex::transfer_trace_power(n, t, kappa)?;
                let z = sixvertex::brute_force_partition(n, t, kappa)?;
                let rel = (tr - z).abs() / z.abs();
                checks.push(Check { name: format!("trace(n={n}, t={t}, kappa={kappa})"), lhs: rel, rhs: 1e-9, pass: rel <= 1e-9 });
            }
            let (mut alt, mut win, mut configs) = (0, 0, 0);
            let mut err = None;
            sixvertex::for_each_config(n, t, |c| match sixvertex::row_structure_checks(c) {
                Ok(rep) => {
                    configs += 1;
                    alt += rep.alternation_violations.len();
                    win += rep.window_violations.len();
                }
                Err(e) => err = Some(e),
            })?;
            if let Some(e) = err {
                return Err(e.into());
            }
            checks.push(flag_check(format!("alternation(n={n}, t={t}, configs={configs})"), alt));
            checks.push(flag_check(format!("window_increment(n={n}, t={t}, configs={configs})"), win));
            Ok(checks)
        })
        .collect();
    flatten(out)
}

pub fn cmd_verify(suite: Suite, seed: u64, details: bool) -> CliResult<SuiteSummary> {
    let checks = match suite {
        Suite::Holder => suite_holder(seed)?,
        Suite::Chessboard => suite_chessboard()?,
        Suite::Rp => suite_rp(seed)?,
        Suite::Den => suite_den()?,
        Suite::Sutherland => suite_sutherland()?,
        Suite::Opc => suite_opc(seed, 300)?,
        Suite::SixvertexStructure => suite_sixvertex_structure()?,
        Suite::All => {
            let mut all = suite_holder(seed)?;
            all.extend(suite_chessboard()?);
            all.extend(suite_rp(seed)?);
            all.extend(suite_den()?);
            all.extend(suite_sutherland()?);
            all.extend(suite_opc(seed, 300)?);
            all.extend(suite_sixvertex_structure()?);
            all
        }
    };
    Ok(SuiteSummary::from_checks(suite, seed, checks, details))
}

/// ASCII rendering of a random rectangle, its highest OPC and the checks on it.
pub fn cmd_opc_demo(args: &OpcArgs) -> CliResult<String> {
    if args.width < 2 || args.height < 2 {
        return usage("width and height must be at least 2");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let x = opc::random_rectangle(args.width, args.height, &mut rng);
    let mut s = String::new();
    writeln!(s, "initial {}x{} (height {}):", args.width, args.height, x.height()?.value).unwrap();
    s.push_str(&opc::render_ascii(&x)?);
    let mut y = x.clone();
    let mut moves = 0;
    loop {
        let next = y.flippable_plaquettes()?.into_iter().find(|p| p.corner == Corner::Minus);
        let Some(p) = next else { break };
        y = opc::apply_move(&y, p.a, p.b, MoveDirection::Up)?;
        moves += 1;
        if args.trace {
            writeln!(s, "\nmove {moves}: + at face ({}, {}), height {}", p.a, p.b, y.height()?.value).unwrap();
            s.push_str(&opc::render_ascii(&y)?);
        }
    }
    writeln!(s, "\nhighest (height {}, {moves} moves):", y.height()?.value).unwrap();
    s.push_str(&opc::render_ascii(&y)?);
    let blk = opc::blockade_check(&y)?;
    writeln!(
        s,
        "\nblockades: {} vertices checked, {} violations",
        blk.checked,
        blk.chain_violations.len()
    )
    .unwrap();
    let run = args.run.unwrap_or((args.width / 2).max(1));
    match opc::aligned_run_detector(&y, run)? {
        Some((b, i)) => writeln!(s, "aligned run of length {run}: row {b}, starting at column {i}").unwrap(),
        None => writeln!(s, "aligned run of length {run}: none").unwrap(),
    }
    Ok(s)
}

fn emit(output: Option<&Path>, text: &str, out: &mut dyn std::io::Write) -> CliResult<()> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(Error::from)?,
        None => out.write_all(text.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

fn execute(cli: Cli, out: &mut dyn std::io::Write) -> CliResult<i32> {
    let threads = resolve_threads(cli.threads)?;
    // A global pool can only be installed once per process; later calls keep the first.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    match cli.command {
        Command::Efp(args) => {
            let (cfg, _) = RunConfig::resolve(&args, threads)?;
            let rows = cmd_efp(&cfg)?;
            let text = match cfg.format {
                Format::Csv => render_csv(&cfg, &rows),
                Format::Json => render_json(&cfg, &rows, None)?,
            };
            emit(cfg.output.as_deref(), &text, out)?;
            Ok(0)
        }
        Command::Scan(mut args) => {
            let file = match &args.run.config {
                Some(p) => parse_config_text(&std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?)?,
                None => BTreeMap::new(),
            };
            let betas = match (&args.betas, file.get("betas")) {
                (Some(s), _) | (None, Some(s)) => Some(parse_list("betas", s)?),
                _ => None,
            };
            if let Some(bs) = &betas {
                if args.run.beta.is_none() && !file.contains_key("beta") {
                    args.run.beta = bs.first().copied();
                }
            }
            let (cfg, _) = RunConfig::resolve(&args.run, threads)?;
            let fit = match args.fit {
                Some(f) => f,
                None => file.get("fit").map(|v| parse_enum("fit", v)).transpose()?.unwrap_or(FitMode::Free),
            };
            let res = cmd_scan(&cfg, fit, betas.as_deref())?;
            let footer = res.footer();
            let text = match cfg.format {
                Format::Csv => format!("{}# fit={}\n", render_csv(&cfg, &res.rows), serde_json::to_string(&footer).map_err(Error::from)?),
                Format::Json => render_json(&cfg, &res.rows, Some(&footer))?,
            };
            emit(cfg.output.as_deref(), &text, out)?;
            Ok(if res.fit_error.is_some() && fit != FitMode::None { 1 } else { 0 })
        }
        Command::Verify(args) => {
            let summary = cmd_verify(args.suite, args.seed, args.details)?;
            let text = serde_json::to_string_pretty(&summary).map_err(Error::from)? + "\n";
            emit(args.output.as_deref(), &text, out)?;
            Ok(if summary.passed() { 0 } else { 1 })
        }
        Command::OpcDemo(args) => {
            let text = cmd_opc_demo(&args)?;
            emit(None, &text, out)?;
            Ok(0)
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if let CliError::Lib(Error::Budget { .. }) = e {
                let _ = writeln!(err, "hint: reduce n or d, use a sector (m2), or switch to route=mc or route=potential");
            }
            e.exit_code()
        }
    }
}
