//! Command-line front end: construction, simulation and verification runs
//! driven by a TOML config document with flag overrides.
//!
//! Every run writes `report.json` plus CSV tables into the output directory.
//! Each artifact carries the library version and a SHA-256 digest of the
//! resolved config, so identical configs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use revchain::block::{exact_alpha, exact_beta, exact_cov, n_step_joint};
use revchain::diagnostics::{
    abs_law, limit_law_trend, limit_reference_sample, limit_trend_checks, quantile_of, verify_quantile_intervals,
    verify_tail_quantile_bound, verify_theorem, Budget, Rates,
};
use revchain::limit::ks_distance;
use revchain::rates::{ConvexRate, Linear, LogInverse, LogShift, PowerRate, RateFn, SubexpRate};
use revchain::report::{all_passed, worst_at_most, Check, Status};
use revchain::schedule::{
    engineered_schedule, mixing_schedule, tail_schedule, validate_schedule, variance_schedule, LevelSchedule,
    ScheduleError, ScheduleKind,
};
use revchain::superposed::{block_beta, SuperChain, DEFAULT_BUDGET};
use revchain::{construct_block, LogNum};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default output directory when neither `--out` nor the config sets one.
pub const OUT_DIR_ENV: &str = "REVCHAIN_OUT";
const DEFAULT_OUT: &str = "revchain-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad configs, 3 for failures writing artifacts.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// `"a/b"` with integers, or a decimal literal, as the nearest double.
fn rational_arg(text: &str) -> Result<f64, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

pub fn parse_rational(text: &str) -> Result<f64, CliError> {
    let t = text.trim();
    let bad = || usage(format!("malformed number {text:?}: expected a/b or a decimal"));
    if let Some((a, b)) = t.split_once('/') {
        let a: i128 = a.trim().parse().map_err(|_| bad())?;
        let b: i128 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(usage(format!("{text:?} divides by zero")));
        }
        let g = gcd(a.unsigned_abs(), b.unsigned_abs()) as i128;
        let (a, b) = (a / g, b / g);
        // Both exact in f64, so IEEE division rounds the true quotient once.
        const EXACT: u128 = 1 << 53;
        if a.unsigned_abs() > EXACT || b.unsigned_abs() > EXACT {
            return Err(usage(format!("{text:?}: numerator and denominator must be at most 2^53 after reduction")));
        }
        return Ok(a as f64 / b as f64);
    }
    let ok = !t.is_empty()
        && t.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        && t.chars().any(|c| c.is_ascii_digit());
    if !ok {
        return Err(bad());
    }
    t.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Block,
    Schedule,
    Simulate,
    Verify,
    Limits,
    Quantile,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Block => "block",
            Command::Schedule => "schedule",
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Limits => "limits",
            Command::Quantile => "quantile",
        }
    }
}

/// One run. Unset fields take per-command defaults when resolved; the resolved
/// config (without `out`) is what the digest covers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub kind: Option<String>,
    pub epsilon: Option<String>,
    pub theta: Option<String>,
    pub n_max: Option<u64>,
    pub q: Option<String>,
    pub g: Option<String>,
    pub f: Option<String>,
    pub jmax: Option<usize>,
    pub truncation: Option<usize>,
    pub schedule: Option<PathBuf>,
    pub n: Option<u64>,
    pub level: Option<usize>,
    pub replicates: Option<usize>,
    pub limit_replicates: Option<usize>,
    pub seed: Option<u64>,
    pub budget: Option<f64>,
    pub h: Option<Vec<f64>>,
    pub probs: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        RunConfig::from_toml(&fs::read_to_string(path).map_err(|e| usage(format!("config {}: {e}", path.display())))?)
    }

    /// Fields set in `top` win.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay!(base, top; command, kind, epsilon, theta, n_max, q, g, f, jmax, truncation, schedule, n, level,
            replicates, limit_replicates, seed, budget, h, probs, out)
    }
}

#[derive(Debug, Parser)]
#[command(name = "revchain", version, about = "Reversible Markov chains without a central limit theorem")]
pub struct Cli {
    /// TOML config document; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed (required by simulate, verify and limits).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: $REVCHAIN_OUT or ./revchain-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Expected simulated sojourns allowed per Monte Carlo check.
    #[arg(long, global = true)]
    pub budget: Option<f64>,
    #[command(subcommand)]
    pub command: Option<CommandArgs>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScheduleFlags {
    /// variance, mixing, tail or custom (the engineered small-horizon levels).
    #[arg(long)]
    pub kind: Option<String>,
    /// Variance rate: log-inverse.
    #[arg(long)]
    pub q: Option<String>,
    /// Sequence or companion function: log, log-e or linear.
    #[arg(long)]
    pub g: Option<String>,
    /// Tail rate: power:p or subexp:q.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub jmax: Option<usize>,
    /// Read levels from a schedule document instead of constructing them.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Matrices, beta and covariance tables of one block.
    Block {
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        n_max: Option<u64>,
    },
    /// Construct and validate a level schedule.
    Schedule {
        #[command(flatten)]
        s: ScheduleFlags,
    },
    /// Sample stationary paths of the superposed chain.
    Simulate {
        #[command(flatten)]
        s: ScheduleFlags,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Every check that applies to a schedule kind.
    Verify {
        #[command(flatten)]
        s: ScheduleFlags,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        limit_replicates: Option<usize>,
    },
    /// Normalized level sums against the compound Poisson-Laplace law.
    Limits {
        #[command(flatten)]
        s: ScheduleFlags,
        /// Single level; all feasible levels when omitted.
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Quantile function of |X_0| and its tail integrals, or interval checks.
    Quantile {
        #[command(flatten)]
        s: ScheduleFlags,
        /// Amplitudes for the interval check, e.g. 1,2,4,8.
        #[arg(long, value_delimiter = ',', value_parser = rational_arg)]
        h: Option<Vec<f64>>,
        /// Event probabilities for the interval check [default: 4^-j].
        #[arg(long, value_delimiter = ',', value_parser = rational_arg)]
        probs: Option<Vec<f64>>,
    },
}

impl Cli {
    /// Config file (if any) overlaid with the flags.
    pub fn into_config(self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let mut top = RunConfig { seed: self.seed, out: self.out, budget: self.budget, ..RunConfig::default() };
        let put = |top: &mut RunConfig, s: ScheduleFlags| {
            top.kind = s.kind;
            top.q = s.q;
            top.g = s.g;
            top.f = s.f;
            top.jmax = s.jmax;
            top.schedule = s.schedule;
        };
        match self.command {
            None => {}
            Some(CommandArgs::Block { epsilon, theta, n_max }) => {
                top.command = Some(Command::Block);
                top.epsilon = epsilon;
                top.theta = theta;
                top.n_max = n_max;
            }
            Some(CommandArgs::Schedule { s }) => {
                top.command = Some(Command::Schedule);
                put(&mut top, s);
            }
            Some(CommandArgs::Simulate { s, truncation, n, replicates }) => {
                top.command = Some(Command::Simulate);
                put(&mut top, s);
                top.truncation = truncation;
                top.n = n;
                top.replicates = replicates;
            }
            Some(CommandArgs::Verify { s, truncation, replicates, limit_replicates }) => {
                top.command = Some(Command::Verify);
                put(&mut top, s);
                top.truncation = truncation;
                top.replicates = replicates;
                top.limit_replicates = limit_replicates;
            }
            Some(CommandArgs::Limits { s, level, replicates }) => {
                top.command = Some(Command::Limits);
                put(&mut top, s);
                top.level = level;
                top.replicates = replicates;
            }
            Some(CommandArgs::Quantile { s, h, probs }) => {
                top.command = Some(Command::Quantile);
                put(&mut top, s);
                top.h = h;
                top.probs = probs;
            }
        }
        Ok(base.overlay(top))
    }
}

fn default_kind(cmd: Command) -> Option<&'static str> {
    match cmd {
        Command::Limits => Some("custom"),
        Command::Quantile => Some("tail"),
        _ => None,
    }
}

/// Fills per-command defaults, drops fields the command ignores and checks
/// every value, so two configs that would run identically resolve identically.
pub fn resolve(cfg: &RunConfig) -> Result<RunConfig, CliError> {
    let cmd = cfg.command.ok_or_else(|| usage("no command given (block, schedule, simulate, verify, limits, quantile)"))?;
    let mut r = RunConfig { command: Some(cmd), out: cfg.out.clone(), ..RunConfig::default() };
    let needs_seed = matches!(cmd, Command::Simulate | Command::Verify | Command::Limits);
    if needs_seed {
        r.seed = Some(cfg.seed.ok_or_else(|| usage(format!("{} needs --seed", cmd.name())))?);
        let b = cfg.budget.unwrap_or(DEFAULT_BUDGET);
        if !(b > 0.0 && b.is_finite()) {
            return Err(usage(format!("budget must be positive, got {b}")));
        }
        r.budget = Some(b);
    }
    if cmd == Command::Block {
        let e = cfg.epsilon.clone().unwrap_or_else(|| "1/9".into());
        let t = cfg.theta.clone().unwrap_or_else(|| "1/9".into());
        let (ev, tv) = (parse_rational(&e)?, parse_rational(&t)?);
        construct_block(ev, tv).map_err(|err| usage(err.to_string()))?;
        r.epsilon = Some(e);
        r.theta = Some(t);
        r.n_max = Some(cfg.n_max.unwrap_or(50).max(1));
        return Ok(r);
    }
    if cmd == Command::Quantile && cfg.h.is_some() {
        let h = cfg.h.clone().unwrap_or_default();
        if h.is_empty() {
            return Err(usage("--h needs at least one amplitude"));
        }
        let probs = cfg.probs.clone().unwrap_or_else(|| (1..=h.len()).map(|j| 0.25f64.powi(j as i32)).collect());
        if probs.len() != h.len() {
            return Err(usage(format!("{} amplitudes but {} probabilities", h.len(), probs.len())));
        }
        r.h = Some(h);
        r.probs = Some(probs);
        return Ok(r);
    }

    if let Some(p) = &cfg.schedule {
        r.schedule = Some(p.clone());
    } else {
        let kind = cfg.kind.clone().or(default_kind(cmd).map(String::from)).ok_or_else(|| {
            usage(format!("{} needs --kind (variance, mixing, tail, custom) or --schedule", cmd.name()))
        })?;
        let k: ScheduleKind = kind.parse().map_err(usage)?;
        match k {
            ScheduleKind::Variance => r.q = Some(cfg.q.clone().unwrap_or_else(|| "log-inverse".into())),
            ScheduleKind::Mixing => r.g = Some(cfg.g.clone().unwrap_or_else(|| "log".into())),
            ScheduleKind::Tail => {
                r.f = Some(cfg.f.clone().unwrap_or_else(|| "power:2".into()));
                r.g = Some(cfg.g.clone().unwrap_or_else(|| "log-e".into()));
            }
            ScheduleKind::Custom => {}
        }
        let default_j = match (cmd, k) {
            (_, ScheduleKind::Custom) => 3,
            (Command::Quantile, _) => 4,
            (Command::Verify, _) => 5,
            _ => 4,
        };
        let j = cfg.jmax.unwrap_or(default_j);
        if j == 0 {
            return Err(usage("jmax must be at least 1"));
        }
        r.kind = Some(k.name().into());
        r.jmax = Some(j);
        // Validate selectors early.
        if let Some(q) = &r.q {
            rate_fn(q, "q")?;
        }
        if let Some(g) = &r.g {
            rate_fn(g, "g")?;
        }
        if let Some(f) = &r.f {
            convex_rate(f)?;
        }
    }
    let kind = r.kind.as_deref();
    if cmd == Command::Verify && kind == Some("custom") {
        return Err(usage("verify needs --kind variance, mixing or tail"));
    }
    match cmd {
        Command::Simulate => {
            r.truncation = cfg.truncation;
            r.n = Some(cfg.n.unwrap_or(1000).max(1));
            r.replicates = Some(cfg.replicates.unwrap_or(10).max(1));
        }
        Command::Verify => {
            r.truncation = cfg.truncation;
            let d = Budget::default();
            r.replicates = Some(cfg.replicates.unwrap_or(d.replicates).max(2));
            r.limit_replicates = Some(cfg.limit_replicates.unwrap_or(d.limit_replicates).max(2));
        }
        Command::Limits => {
            r.level = cfg.level;
            if r.level == Some(0) {
                return Err(usage("levels are numbered from 1"));
            }
            r.replicates = Some(cfg.replicates.unwrap_or(100_000).max(2));
        }
        _ => {}
    }
    if r.truncation == Some(0) {
        return Err(usage("truncation must be at least 1"));
    }
    Ok(r)
}

/// SHA-256 of the resolved config without its output path, plus the
/// contents of any schedule document it names.
pub fn config_digest(resolved: &RunConfig) -> Result<String, CliError> {
    let mut c = resolved.clone();
    c.out = None;
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&c)?);
    if let Some(p) = &resolved.schedule {
        hasher.update(fs::read(p).map_err(|e| usage(format!("schedule {}: {e}", p.display())))?);
    }
    let mut s = String::from("sha256:");
    for b in hasher.finalize() {
        let _ = write!(s, "{b:02x}");
    }
    Ok(s)
}

pub fn rate_fn(name: &str, which: &str) -> Result<Box<dyn RateFn>, CliError> {
    match name {
        "log-inverse" => Ok(Box::new(LogInverse)),
        "log" => Ok(Box::new(LogShift { shift: 3.0 })),
        "log-e" => Ok(Box::new(LogShift { shift: std::f64::consts::E })),
        "linear" => Ok(Box::new(Linear)),
        _ => Err(usage(format!("unknown {which} preset {name:?} (log-inverse, log, log-e, linear)"))),
    }
}

pub fn convex_rate(name: &str) -> Result<Box<dyn ConvexRate>, CliError> {
    let param = |s: &str| parse_rational(s).map_err(|_| usage(format!("bad parameter in {name:?}")));
    match name.split_once(':') {
        Some(("power", p)) => {
            let p = param(p)?;
            if p > 0.0 {
                Ok(Box::new(PowerRate { p }))
            } else {
                Err(usage(format!("power exponent must be positive in {name:?}")))
            }
        }
        Some(("subexp", q)) => {
            let q = param(q)?;
            if q > 0.0 && q < 1.0 {
                Ok(Box::new(SubexpRate { q }))
            } else {
                Err(usage(format!("subexp exponent must lie in (0, 1) in {name:?}")))
            }
        }
        _ => Err(usage(format!("unknown f preset {name:?} (power:p, subexp:q)"))),
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
    pub digest: String,
    /// Human-readable summary for stdout.
    pub text: String,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        all_passed(&self.checks)
    }

    pub fn failed_names(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name.as_str()).collect()
    }

    pub fn exit_code(&self) -> u8 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

#[derive(Serialize)]
struct Report<'a, D: Serialize> {
    command: &'static str,
    version: &'static str,
    config_digest: &'a str,
    config: &'a RunConfig,
    passed: bool,
    checks: &'a [Check],
    details: D,
}

struct Sink {
    dir: PathBuf,
    digest: String,
    files: Vec<PathBuf>,
}

impl Sink {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    /// Rows get `config_digest` and `version` columns appended.
    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p)?;
        let mut h: Vec<&str> = header.to_vec();
        h.extend(["config_digest", "version"]);
        w.write_record(&h)?;
        for mut row in rows {
            row.push(self.digest.clone());
            row.push(VERSION.into());
            w.write_record(&row)?;
        }
        w.flush().map_err(io_err(&p))?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, body).map_err(io_err(&p))
    }

    fn report<D: Serialize>(&mut self, cfg: &RunConfig, checks: &[Check], details: D) -> Result<(), CliError> {
        let mut c = cfg.clone();
        c.out = None;
        let r = Report {
            command: cfg.command.map_or("", Command::name),
            version: VERSION,
            config_digest: &self.digest,
            config: &c,
            passed: all_passed(checks),
            checks,
            details,
        };
        let mut body = serde_json::to_string_pretty(&r)?;
        body.push('\n');
        self.text("report.json", &body)
    }
}

/// `{:e}`-style number that round-trips exactly.
fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Output directory: the config's `out`, else `$REVCHAIN_OUT`, else `./revchain-out`.
pub fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Resolves, runs and writes the artifacts of one config.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let r = resolve(cfg)?;
    let digest = config_digest(&r)?;
    let dir = output_dir(cfg);
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut sink = Sink { dir, digest: digest.clone(), files: Vec::new() };
    let (checks, text) = match r.command.expect("resolved") {
        Command::Block => run_block(&r, &mut sink)?,
        Command::Schedule => run_schedule(&r, &mut sink)?,
        Command::Simulate => run_simulate(&r, &mut sink)?,
        Command::Verify => run_verify(&r, &mut sink)?,
        Command::Limits => run_limits(&r, &mut sink)?,
        Command::Quantile => run_quantile(&r, &mut sink)?,
    };
    Ok(Outcome { checks, files: sink.files, digest, text })
}

fn summarize(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let tag = match c.status {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Skipped => "skip",
        };
        let _ = write!(s, "{tag:4}  {}", c.name);
        if c.status != Status::Skipped {
            let _ = write!(s, "  measured {:.6e} bound {:.6e}", c.measured, c.bound);
        }
        if !c.note.is_empty() {
            let _ = write!(s, "  ({})", c.note);
        }
        s.push('\n');
    }
    s
}

type Ran = (Vec<Check>, String);

fn run_block(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    let eps = parse_rational(r.epsilon.as_deref().unwrap_or_default())?;
    let theta = parse_rational(r.theta.as_deref().unwrap_or_default())?;
    let n_max = r.n_max.unwrap_or(50);
    let (params, kernel) = construct_block(eps, theta).map_err(|e| usage(e.to_string()))?;
    let mut text = String::new();
    let _ = writeln!(text, "epsilon = {eps}, theta = {theta}, theta* = {}, I = {}", params.theta_star, params.i_cap);
    let _ = writeln!(text, "marginal on (-1, 0, 1): {:?}", kernel.marginal);
    let _ = writeln!(text, "transition matrix:");
    for row in &kernel.transition {
        let _ = writeln!(text, "  {:>12.9} {:>12.9} {:>12.9}", row[0], row[1], row[2]);
    }
    let _ = writeln!(text, "one-step joint law:");
    for row in &kernel.joint {
        let _ = writeln!(text, "  {:>12.9} {:>12.9} {:>12.9}", row[0], row[1], row[2]);
    }

    let mut rows = Vec::new();
    let mut cov_items = Vec::new();
    let mut beta_items = Vec::new();
    let mut closed_items = Vec::new();
    let mut alpha_items = Vec::new();
    let mut sym_items = Vec::new();
    let mut one_items = Vec::new();
    let _ = writeln!(text, "{:>5} {:>16} {:>16} {:>16}", "n", "cov", "beta", "alpha");
    for n in 1..=n_max {
        let cov = exact_cov(&kernel, n).map_err(|e| usage(e.to_string()))?;
        let beta = exact_beta(&kernel, n).map_err(|e| usage(e.to_string()))?;
        let alpha = exact_alpha(&kernel, n).map_err(|e| usage(e.to_string()))?;
        let joint = n_step_joint(&kernel, n).map_err(|e| usage(e.to_string()))?;
        let geo = eps * (1.0 - theta).powi(n as i32);
        let closed = block_beta(LogNum::new(eps), LogNum::new(theta), n).value();
        let asym = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (joint[i][j] - joint[j][i]).abs()).fold(0.0, f64::max);
        let label = format!("n = {n}");
        cov_items.push((label.clone(), (cov - geo).abs() / geo, 0.0));
        beta_items.push((label.clone(), beta, 6.0 * geo));
        closed_items.push((label.clone(), (beta - closed).abs() / closed, 0.0));
        alpha_items.push((label.clone(), 2.0 * alpha, beta));
        one_items.push((label.clone(), beta, 1.0));
        sym_items.push((label, asym, 0.0));
        if n <= 20 || n % 10 == 0 {
            let _ = writeln!(text, "{n:>5} {cov:>16.9e} {beta:>16.9e} {alpha:>16.9e}");
        }
        rows.push(vec![n.to_string(), num(cov), num(geo), num(beta), num(closed), num(alpha)]);
    }
    let checks = vec![
        worst_at_most("cov_geometric", "|cov(n) - eps (1-theta)^n| / eps (1-theta)^n <= 1e-12", 1e-12, cov_items),
        worst_at_most("beta_closed_form", "exact beta matches its closed form, relative 1e-12", 1e-12, closed_items),
        worst_at_most("beta_geometric_bound", "beta(n) <= 6 eps (1-theta)^n", 1e-14, beta_items),
        worst_at_most("alpha_below_beta", "2 alpha(n) <= beta(n)", 1e-14, alpha_items),
        worst_at_most("beta_at_most_one", "beta(n) <= 1", 0.0, one_items),
        worst_at_most("joint_symmetric", "max |P(X_0=i, X_n=j) - P(X_0=j, X_n=i)| <= 1e-14", 1e-14, sym_items),
    ];
    sink.csv("block.csv", &["n", "cov", "cov_geometric", "beta", "beta_closed_form", "alpha"], rows)?;
    sink.report(r, &checks, serde_json::json!({ "block": params, "kernel": kernel }))?;
    text.push_str(&summarize(&checks));
    Ok((checks, text))
}

/// Schedule named by the config, with a failing check when construction
/// stopped early. An empty schedule comes back as `None`.
fn build_schedule(r: &RunConfig) -> Result<(LevelSchedule, Vec<Check>), CliError> {
    if let Some(p) = &r.schedule {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("schedule {}: {e}", p.display())))?;
        let s = LevelSchedule::from_text(&text).map_err(|e| usage(e.to_string()))?;
        return Ok((s, Vec::new()));
    }
    let kind: ScheduleKind = r.kind.as_deref().unwrap_or_default().parse().map_err(usage)?;
    let j = r.jmax.unwrap_or(1);
    let built = match kind {
        ScheduleKind::Variance => variance_schedule(rate_fn(r.q.as_deref().unwrap_or_default(), "q")?.as_ref(), j),
        ScheduleKind::Mixing => mixing_schedule(rate_fn(r.g.as_deref().unwrap_or_default(), "g")?.as_ref(), j),
        ScheduleKind::Tail => {
            let phi = convex_rate(r.f.as_deref().unwrap_or_default())?;
            let g = rate_fn(r.g.as_deref().unwrap_or_default(), "g")?;
            tail_schedule(phi.as_ref(), g.as_ref(), j)
        }
        ScheduleKind::Custom => Ok(engineered_schedule(j)),
    };
    match built {
        Ok(s) => Ok((s, Vec::new())),
        Err(e @ ScheduleError::Level { .. }) => {
            let partial = e.partial().cloned().expect("level errors carry a partial schedule");
            let c = Check::flag(
                "schedule_construction",
                &format!("all {j} requested levels constructed"),
                false,
                format!("{e}; kept {} level(s)", partial.len()),
            );
            Ok((partial, vec![c]))
        }
        Err(e @ ScheduleError::Hypothesis { .. }) => {
            let c = Check::flag("schedule_hypotheses", "rate function meets the construction hypotheses", false, e.to_string());
            Ok((empty_like(kind), vec![c]))
        }
        Err(e) => Err(usage(e.to_string())),
    }
}

fn empty_like(kind: ScheduleKind) -> LevelSchedule {
    let mut s = engineered_schedule(0);
    s.kind = kind;
    s.inputs.clear();
    s
}

fn chain_from(r: &RunConfig, schedule: LevelSchedule) -> Result<SuperChain, CliError> {
    let t = r.truncation.unwrap_or(schedule.len()).min(schedule.len());
    SuperChain::new(schedule, t).map_err(|e| usage(e.to_string()))
}

fn header(sink: &Sink) -> String {
    format!("# revchain {VERSION}, config {}\n", sink.digest)
}

fn run_schedule(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    let (s, mut checks) = build_schedule(r)?;
    checks.extend(validate_schedule(&s));
    let doc = format!("{}{}", header(sink), s.to_text());
    sink.text("schedule.toml", &doc)?;
    let rows: Vec<Vec<String>> = s
        .levels
        .iter()
        .map(|l| {
            vec![
                l.j.to_string(),
                num(l.epsilon.ln()),
                num(l.theta.ln()),
                num(l.h.ln()),
                num(l.i_cap.ln()),
                l.m.map_or(String::new(), |m| num(m.ln())),
            ]
        })
        .collect();
    sink.csv("levels.csv", &["level", "ln_epsilon", "ln_theta", "ln_h", "ln_i", "ln_m"], rows)?;
    sink.report(r, &checks, serde_json::json!({ "levels": s.len(), "schedule": s }))?;
    let mut text = format!("{} schedule with {} level(s): {}\n", s.kind.name(), s.len(), s.inputs);
    text.push_str(&summarize(&checks));
    Ok((checks, text))
}

fn run_simulate(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    let (s, mut checks) = build_schedule(r)?;
    if s.is_empty() {
        sink.report(r, &checks, serde_json::Value::Null)?;
        return Ok((checks.clone(), summarize(&checks)));
    }
    let chain = chain_from(r, s)?;
    let (n, reps, seed) = (r.n.unwrap_or(1) as usize, r.replicates.unwrap_or(1), r.seed.unwrap_or(0));
    let mut rows = Vec::new();
    let mut sums = Vec::new();
    let bound: f64 = chain.levels().iter().map(|l| l.h.value()).sum();
    let mut worst = 0.0f64;
    for rep in 0..reps {
        let path = chain
            .sample_super_path(n, seed, rep as u64)
            .map_err(|e| usage(e.to_string()))?;
        let mut acc = 0.0;
        for (k, x) in path.iter().enumerate() {
            acc += x;
            worst = worst.max(x.abs());
            rows.push(vec![rep.to_string(), (k + 1).to_string(), num(*x)]);
        }
        sums.push(acc);
    }
    checks.push(Check::at_most("path_bounded", "|X_k| <= sum_j h_j on every sampled state", worst, bound, bound * 1e-12));
    sink.csv("paths.csv", &["replicate", "k", "value"], rows)?;
    sink.csv(
        "sums.csv",
        &["replicate", "sum"],
        sums.iter().enumerate().map(|(i, s)| vec![i.to_string(), num(*s)]),
    )?;
    sink.report(r, &checks, serde_json::json!({ "levels": chain.truncation_j, "n": n, "replicates": reps }))?;
    let text = format!("{reps} path(s) of length {n} over {} level(s)\n{}", chain.truncation_j, summarize(&checks));
    Ok((checks, text))
}

fn run_verify(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    let (s, construction) = build_schedule(r)?;
    if s.is_empty() {
        sink.report(r, &construction, serde_json::Value::Null)?;
        return Ok((construction.clone(), summarize(&construction)));
    }
    let chain = chain_from(r, s)?;
    let budget = Budget {
        max_sojourns: r.budget.unwrap_or(DEFAULT_BUDGET),
        replicates: r.replicates.unwrap_or(10_000),
        limit_replicates: r.limit_replicates.unwrap_or(100_000),
        ..Budget::default()
    };
    let q = r.q.as_deref().map(|q| rate_fn(q, "q")).transpose()?;
    let g = r.g.as_deref().map(|g| rate_fn(g, "g")).transpose()?;
    let phi = r.f.as_deref().map(convex_rate).transpose()?;
    let rates = match chain.schedule.kind {
        ScheduleKind::Variance => Rates::Variance { q: q.as_deref().unwrap_or(&LogInverse) },
        ScheduleKind::Mixing => Rates::Mixing { g: g.as_deref().unwrap_or(&LogShift { shift: 3.0 }) },
        ScheduleKind::Tail => Rates::Tail {
            phi: phi.as_deref().unwrap_or(&PowerRate { p: 2.0 }),
            g: g.as_deref().unwrap_or(&LogShift { shift: std::f64::consts::E }),
        },
        ScheduleKind::Custom => return Err(usage("verify needs a variance, mixing or tail schedule")),
    };
    let mut report = verify_theorem(&chain, &rates, &budget, r.seed.unwrap_or(0));
    report.config_digest = sink.digest.clone();
    let mut checks = construction;
    checks.extend(report.checks.iter().cloned());
    report.checks = checks.clone();
    report.passed = all_passed(&checks);
    sink.csv(
        "checks.csv",
        &["name", "status", "measured", "bound", "slack"],
        checks.iter().map(|c| {
            let st = match c.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Skipped => "skipped",
            };
            vec![c.name.clone(), st.into(), num(c.measured), num(c.bound), num(c.slack)]
        }),
    )?;
    sink.report(r, &checks, &report)?;
    let text = format!("{} levels of a {} schedule\n{}", chain.truncation_j, chain.schedule.kind.name(), summarize(&checks));
    Ok((checks, text))
}

fn run_limits(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    let (s, mut checks) = build_schedule(r)?;
    if s.is_empty() {
        sink.report(r, &checks, serde_json::Value::Null)?;
        return Ok((checks.clone(), summarize(&checks)));
    }
    let chain = chain_from(r, s)?;
    let (reps, seed, budget) = (r.replicates.unwrap_or(2), r.seed.unwrap_or(0), r.budget.unwrap_or(DEFAULT_BUDGET));
    let Some(level) = r.level else {
        let trend = limit_law_trend(&chain, reps, seed, budget);
        checks.extend(limit_trend_checks(&trend, 0.05));
        sink.csv(
            "limits.csv",
            &["level", "horizon", "ks", "whole_sum_ks", "lower_sd", "upper_active"],
            trend.levels.iter().map(|l| {
                vec![
                    l.level.to_string(),
                    l.horizon.to_string(),
                    num(l.ks),
                    l.chain_ks.map_or(String::new(), num),
                    num(l.lower_sd),
                    num(l.upper_active),
                ]
            }),
        )?;
        sink.report(r, &checks, &trend)?;
        return Ok((checks.clone(), summarize(&checks)));
    };
    if level > chain.truncation_j {
        return Err(usage(format!("level {level} beyond the {} available", chain.truncation_j)));
    }
    let part = chain.level_normalized_sums(level, reps, seed, budget).map_err(|e| usage(e.to_string()))?;
    let whole = chain.normalized_sum_samples(level, reps, seed, budget).ok();
    let reference = limit_reference_sample(seed, reps);
    let ks = ks_distance(&part, &reference);
    let whole_ks = whole.as_ref().map(|w| ks_distance(w, &reference));
    let (lower, upper) = chain.normalized_contamination(level).map_err(|e| usage(e.to_string()))?;
    let note = format!(
        "whole normalized sum KS {}, lower levels sd {:.3e}, higher levels active w.p. <= {:.3e}",
        whole_ks.map_or("not simulated".into(), |k| format!("{k:.4}")),
        lower.value(),
        upper.value()
    );
    checks.push(
        Check::at_most("limit_law_ks", "KS of the normalized level sum to the compound Poisson-Laplace law", ks, 0.05, 0.0)
            .with_note(note),
    );
    sink.csv(
        "limits.csv",
        &["replicate", "level_sum", "whole_sum"],
        part.iter().enumerate().map(|(i, x)| {
            vec![i.to_string(), num(*x), whole.as_ref().map_or(String::new(), |w| num(w[i]))]
        }),
    )?;
    let horizon = chain.levels()[level - 1].i_exact;
    sink.report(
        r,
        &checks,
        serde_json::json!({
            "level": level, "horizon": horizon, "ks": ks, "whole_sum_ks": whole_ks,
            "lower_sd": lower.value(), "upper_active": upper.value(),
        }),
    )?;
    Ok((checks.clone(), summarize(&checks)))
}

fn run_quantile(r: &RunConfig, sink: &mut Sink) -> Result<Ran, CliError> {
    if let (Some(h), Some(probs)) = (&r.h, &r.probs) {
        let checks = verify_quantile_intervals(h, probs).map_err(|e| usage(e.to_string()))?;
        sink.report(r, &checks, serde_json::json!({ "h": h, "probs": probs }))?;
        return Ok((checks.clone(), summarize(&checks)));
    }
    let (s, mut checks) = build_schedule(r)?;
    if s.is_empty() {
        sink.report(r, &checks, serde_json::Value::Null)?;
        return Ok((checks.clone(), summarize(&checks)));
    }
    let chain = chain_from(r, s)?;
    let law = abs_law(&chain).map_err(|e| usage(e.to_string()))?;
    let q = quantile_of(&law).map_err(|e| usage(e.to_string()))?;
    let mut lo = LogNum::ZERO;
    let rows: Vec<Vec<String>> = q
        .thresholds
        .iter()
        .zip(&q.values)
        .map(|(t, v)| {
            let row = vec![num(lo.ln()), num(t.ln()), num(v.ln())];
            lo = *t;
            row
        })
        .collect();
    sink.csv("quantile.csv", &["ln_u_from", "ln_u_to", "ln_value"], rows)?;
    if chain.schedule.kind == ScheduleKind::Tail {
        let phi = convex_rate(r.f.as_deref().unwrap_or("power:2"))?;
        let g = rate_fn(r.g.as_deref().unwrap_or("log-e"), "g")?;
        let xs = Budget::default().x_grid;
        checks.extend(verify_tail_quantile_bound(&chain, phi.as_ref(), g.as_ref(), &xs).map_err(|e| usage(e.to_string()))?);
        let rows = xs.iter().map(|&x| {
            let fx = LogNum::from_ln(phi.value(x));
            let bound = LogNum::new(g.value(x)) * LogNum::new(-phi.derivative(x));
            vec![num(x), num(q.tail_integral(fx).ln()), num(bound.ln())]
        });
        sink.csv("tail.csv", &["x", "ln_tail_integral", "ln_bound"], rows.collect::<Vec<_>>())?;
    }
    sink.report(r, &checks, serde_json::json!({ "levels": chain.truncation_j, "atoms": q.values.len() }))?;
    Ok((checks.clone(), summarize(&checks)))
}
