//! The `gsls` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use gsls_core::backtest::OptimizerConfig;
use gsls_core::gbm::{mle_standard_errors, TRADING_DAYS_PER_YEAR};
use gsls_core::optimizer::{linspace, SearchProblem};
use gsls_core::{
    estimate_mle, simulate_path, ControlParams, DateWindow, GbmParams, GridPoint, GridSpec,
    Objective, OptimizationResult, PriceSeries, SplitSpec, TargetPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::error::{CliError, ExitCode, Result};
use crate::io::{ensure_dir, load_series, load_universe, read_json, write_json, write_series};
use crate::parallel::{par_search, par_table, with_jobs};
use crate::plotdata::{gain_vs_k, gain_vs_q, histogram, CurvePoint, DEFAULT_BINS};
use crate::report::{
    daily_rows, run_universe, write_daily_csv, write_params_csv, write_rows, write_summary_csv,
    BacktestReport, Manifest, Provenance, Strategy, StrategyOutcome,
};

const DEFAULT_TARGET: f64 = 0.15;

#[derive(Debug, Parser)]
#[command(
    name = "gsls",
    version,
    about = "Generalized simultaneous long-short feedback trading"
)]
pub struct Cli {
    /// Flat `key = value` file; keys are long flag names. Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = one per CPU).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a universe of simulated GBM price series.
    Simulate(SimulateArgs),
    /// Fit GBM drift and volatility to a price series.
    Estimate(EstimateArgs),
    /// Grid-search controller parameters for one model.
    Optimize(OptimizeArgs),
    /// Train/test backtest over a universe directory.
    Backtest(BacktestArgs),
    /// Emit plot-ready CSV tables.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Annualized drift.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "mu_range")]
    pub mu: Option<f64>,
    /// Per-series drift drawn uniformly from LO:HI.
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    pub mu_range: Option<String>,
    /// Annualized volatility.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Time step in years [default: 1/252].
    #[arg(long)]
    pub dt: Option<f64>,
    /// Steps per series (prices = steps + 1) [default: 252].
    #[arg(long)]
    pub steps: Option<usize>,
    /// Number of series [default: 1].
    #[arg(long)]
    pub count: Option<usize>,
    /// Base seed; series i uses seed + i [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Initial price [default: 100].
    #[arg(long)]
    pub p0: Option<f64>,
    /// First date; later prices fall on consecutive weekdays [default: 2016-01-01].
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// File name prefix [default: SIM].
    #[arg(long)]
    pub prefix: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Price series CSV.
    #[arg(long = "in", value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Restrict to START:END (inclusive, ISO dates).
    #[arg(long)]
    pub train_window: Option<DateWindow>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output JSON file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Search settings shared by `optimize` and `backtest`.
#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub grid_min: Option<f64>,
    #[arg(long)]
    pub grid_max: Option<f64>,
    /// Values per parameter.
    #[arg(long)]
    pub grid_n: Option<usize>,
    /// Fix α = β = 1 and search K only.
    #[arg(long)]
    pub sls_only: bool,
    /// Fixed target gain.
    #[arg(long, allow_negative_numbers = true, conflicts_with = "target_drift")]
    pub target_fixed: Option<f64>,
    /// Drift-adaptive target |μ̂| + C.
    #[arg(long, allow_negative_numbers = true)]
    pub target_drift: Option<f64>,
    /// Horizon in years [default: 1].
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Initial investment [default: 1].
    #[arg(long)]
    pub i0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// Price series to estimate from.
    #[arg(long = "in", value_name = "FILE", conflicts_with_all = ["mu", "sigma"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub train_window: Option<DateWindow>,
    /// Explicit drift (with --sigma) instead of --in.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// bias or mse [default: mse].
    #[arg(long)]
    pub objective: Option<Objective>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write every grid point to this CSV.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Output JSON file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Universe directory of `date,close` CSV files.
    #[arg(long = "in", value_name = "DIR")]
    pub input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub train_window: Option<DateWindow>,
    #[arg(long)]
    pub test_window: Option<DateWindow>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Repeatable [default: bias and mse].
    #[arg(long)]
    pub objective: Vec<Objective>,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Fixed controller `K` (SLS) or `K,ALPHA,BETA`; repeatable. Replaces
    /// optimization with a fixed-parameter sweep.
    #[arg(long, value_name = "K[,A,B]")]
    pub fixed: Vec<String>,
    /// Cut trajectories to the shortest instead of failing on misalignment.
    #[arg(long)]
    pub truncate: bool,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub kind: PlotKind,
}

#[derive(Debug, Subcommand)]
pub enum PlotKind {
    /// Histogram density of final gains from a backtest report.
    Density {
        #[arg(long = "in", value_name = "REPORT")]
        input: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// Only this strategy label.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Daily mean and quantile curves from a backtest report.
    Daily {
        #[arg(long = "in", value_name = "REPORT")]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form gain against q, one curve per K.
    GainQ {
        /// Repeatable.
        #[arg(long = "k")]
        k: Vec<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        q_min: Option<f64>,
        #[arg(long)]
        q_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form gain against K, one curve per q.
    GainK {
        /// Repeatable.
        #[arg(long = "q")]
        q: Vec<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        k_min: Option<f64>,
        #[arg(long)]
        k_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        i0: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::Usage as i32
            } else {
                ExitCode::Success as i32
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::Success as i32,
        Err(e) => {
            eprintln!("gsls: {e}");
            e.exit_code() as i32
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let jobs = cfg.pick_or(cli.jobs, "jobs", 0usize)?;
    match cli.command {
        Command::Simulate(a) => simulate(a, &cfg, jobs),
        Command::Estimate(a) => estimate(a, &cfg, jobs),
        Command::Optimize(a) => optimize(a, &cfg, jobs),
        Command::Backtest(a) => backtest(a, &cfg, jobs),
        Command::Plotdata(a) => plotdata(a, &cfg, jobs),
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn positive(value: f64, flag: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(usage(format!("--{flag} must be > 0, got {value}")))
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => write_json(path, value),
        None => {
            let text = serde_json::to_string_pretty(value)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// Writes CSV rows to `out` (plus a provenance sidecar) or to stdout.
fn emit_csv<T: Serialize>(out: Option<&Path>, rows: &[T], provenance: &Provenance) -> Result<()> {
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            write_rows(
                std::io::BufWriter::new(file),
                rows,
                &path.display().to_string(),
            )?;
            write_json(
                &sidecar(path),
                &Manifest {
                    provenance: provenance.clone(),
                    files: vec![file_name(path)],
                },
            )
        }
        None => write_rows(std::io::stdout().lock(), rows, "<stdout>"),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

const COMMON_KEYS: &[&str] = &["jobs"];

fn check_keys(cfg: &ConfigFile, keys: &[&str]) -> Result<()> {
    let all: Vec<&str> = COMMON_KEYS.iter().chain(keys).copied().collect();
    cfg.check_keys(&all)
}

// simulate

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftSpec {
    Fixed(f64),
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub drift: DriftSpec,
    pub volatility: f64,
    pub dt: f64,
    pub steps: usize,
    pub count: usize,
    pub seed: u64,
    pub p0: f64,
    pub start: NaiveDate,
    pub prefix: String,
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SimulatedSeries {
    symbol: String,
    file: String,
    drift: f64,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct SimulateManifest {
    #[serde(flatten)]
    provenance: Provenance,
    series: Vec<SimulatedSeries>,
}

fn parse_range(text: &str) -> Result<(f64, f64)> {
    let bad = || usage(format!("--mu-range expects LO:HI, got '{text}'"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

impl SimulateConfig {
    fn resolve(a: SimulateArgs, cfg: &ConfigFile) -> Result<Self> {
        check_keys(
            cfg,
            &[
                "mu", "mu-range", "sigma", "dt", "steps", "count", "seed", "p0", "start", "prefix",
                "out",
            ],
        )?;
        let mu = cfg.pick(a.mu, "mu")?;
        let range = cfg.pick(a.mu_range, "mu-range")?;
        let drift = match (mu, range) {
            (Some(_), Some(_)) => return Err(usage("--mu and --mu-range are exclusive")),
            (None, Some(r)) => {
                let (lo, hi) = parse_range(&r)?;
                DriftSpec::Uniform { lo, hi }
            }
            (mu, None) => DriftSpec::Fixed(mu.unwrap_or(0.1)),
        };
        let steps = cfg.pick_or(a.steps, "steps", 252)?;
        if steps == 0 {
            return Err(usage("--steps must be at least 1"));
        }
        let count = cfg.pick_or(a.count, "count", 1)?;
        if count == 0 {
            return Err(usage("--count must be at least 1"));
        }
        let config = SimulateConfig {
            drift,
            volatility: cfg.pick_or(a.sigma, "sigma", 0.2)?,
            dt: positive(cfg.pick_or(a.dt, "dt", 1.0 / TRADING_DAYS_PER_YEAR)?, "dt")?,
            steps,
            count,
            seed: cfg.pick_or(a.seed, "seed", 0)?,
            p0: positive(cfg.pick_or(a.p0, "p0", 100.0)?, "p0")?,
            start: cfg.pick_or(
                a.start,
                "start",
                NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid date"),
            )?,
            prefix: cfg.pick_or(a.prefix, "prefix", "SIM".to_string())?,
            out: required(cfg.pick(a.out, "out")?, "out")?,
        };
        let probe = match config.drift {
            DriftSpec::Fixed(mu) => mu,
            DriftSpec::Uniform { lo, .. } => lo,
        };
        GbmParams::new(probe, config.volatility, config.dt).map_err(|e| usage(e.to_string()))?;
        Ok(config)
    }
}

fn simulate(a: SimulateArgs, cfg: &ConfigFile, jobs: usize) -> Result<()> {
    let config = SimulateConfig::resolve(a, cfg)?;
    let mut drift_rng = ChaCha8Rng::seed_from_u64(config.seed);
    drift_rng.set_stream(1);
    let drifts: Vec<f64> = (0..config.count)
        .map(|_| match config.drift {
            DriftSpec::Fixed(mu) => mu,
            DriftSpec::Uniform { lo, hi } if lo == hi => lo,
            DriftSpec::Uniform { lo, hi } => drift_rng.random_range(lo..hi),
        })
        .collect();
    let width = config.count.saturating_sub(1).to_string().len().max(4);
    ensure_dir(&config.out)?;
    let entries: Vec<SimulatedSeries> = drifts
        .iter()
        .enumerate()
        .map(|(i, &drift)| {
            let symbol = format!("{}{:0width$}", config.prefix, i);
            SimulatedSeries {
                file: format!("{symbol}.csv"),
                symbol,
                drift,
                seed: config.seed.wrapping_add(i as u64),
            }
        })
        .collect();
    let written: Vec<Result<()>> = with_jobs(jobs, || {
        use rayon::prelude::*;
        entries
            .par_iter()
            .map(|e| {
                let gp = GbmParams::new(e.drift, config.volatility, config.dt)?;
                let path = simulate_path(&gp, config.p0, config.steps, e.seed)?;
                let series = PriceSeries::on_weekdays(e.symbol.clone(), config.start, path.prices)?;
                write_series(&config.out.join(&e.file), &series)
            })
            .collect()
    })?;
    written.into_iter().collect::<Result<()>>()?;
    let manifest = SimulateManifest {
        provenance: Provenance::new("simulate", &config)?,
        series: entries,
    };
    write_json(&config.out.join("manifest.json"), &manifest)?;
    println!("wrote {} series to {}", config.count, config.out.display());
    Ok(())
}

// estimate

#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    pub input: PathBuf,
    pub train_window: Option<DateWindow>,
    pub dt: f64,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct StandardErrors {
    drift: f64,
    volatility: f64,
}

#[derive(Debug, Serialize)]
struct EstimateOutput {
    #[serde(flatten)]
    provenance: Provenance,
    symbol: String,
    observations: usize,
    estimate: GbmParams,
    standard_errors: StandardErrors,
}

fn load_window(path: &Path, window: Option<&DateWindow>) -> Result<PriceSeries> {
    if !path.exists() {
        return Err(usage(format!("input {} does not exist", path.display())));
    }
    let series = load_series(path)?;
    match window {
        Some(w) => Ok(w.slice(&series)?),
        None => Ok(series),
    }
}

fn fit(series: &PriceSeries, dt: f64) -> Result<GbmParams> {
    estimate_mle(series.prices(), dt)
        .map_err(|e| CliError::Data(format!("{}: {e}", series.symbol())))
}

fn estimate(a: EstimateArgs, cfg: &ConfigFile, _jobs: usize) -> Result<()> {
    check_keys(cfg, &["in", "train-window", "dt", "out"])?;
    let config = EstimateConfig {
        input: required(cfg.pick(a.input, "in")?, "in")?,
        train_window: cfg.pick(a.train_window, "train-window")?,
        dt: positive(cfg.pick_or(a.dt, "dt", 1.0 / TRADING_DAYS_PER_YEAR)?, "dt")?,
        out: cfg.pick(a.out, "out")?,
    };
    let series = load_window(&config.input, config.train_window.as_ref())?;
    let gp = fit(&series, config.dt)?;
    let (se_drift, se_vol) = mle_standard_errors(&gp, series.len() - 1);
    let output = EstimateOutput {
        provenance: Provenance::new("estimate", &config)?,
        symbol: series.symbol().to_string(),
        observations: series.len(),
        estimate: gp,
        standard_errors: StandardErrors {
            drift: se_drift,
            volatility: se_vol,
        },
    };
    emit_json(config.out.as_deref(), &output)
}

// optimize

#[derive(Debug, Clone, Serialize)]
pub struct SearchConfig {
    pub grid: GridSpec,
    pub sls_only: bool,
    pub policy: TargetPolicy,
    pub horizon: f64,
    pub initial_investment: f64,
}

const SEARCH_KEYS: &[&str] = &[
    "grid-min",
    "grid-max",
    "grid-n",
    "sls-only",
    "target-fixed",
    "target-drift",
    "horizon",
    "i0",
];

impl SearchConfig {
    fn resolve(a: SearchArgs, cfg: &ConfigFile) -> Result<Self> {
        let min = positive(cfg.pick_or(a.grid_min, "grid-min", 0.5)?, "grid-min")?;
        let max = positive(cfg.pick_or(a.grid_max, "grid-max", 5.0)?, "grid-max")?;
        let n = cfg.pick_or(a.grid_n, "grid-n", 10usize)?;
        if n == 0 || max < min || (n == 1 && max != min) {
            return Err(usage(format!(
                "grid needs --grid-n >= 1 and --grid-min <= --grid-max (n=1 requires min = max); got {n} values over [{min}, {max}]"
            )));
        }
        let sls_only = cfg.pick_switch(a.sls_only, "sls-only")?;
        let values = if n == 1 {
            vec![min]
        } else {
            linspace(min, max, n)
        };
        let grid = if sls_only {
            GridSpec::sls(values)?
        } else {
            GridSpec::new(values.clone(), values.clone(), values)?
        };
        let fixed = cfg.pick(a.target_fixed, "target-fixed")?;
        let drift = cfg.pick(a.target_drift, "target-drift")?;
        let policy = match (fixed, drift) {
            (Some(_), Some(_)) => {
                return Err(usage("--target-fixed and --target-drift are exclusive"))
            }
            (None, Some(c)) => TargetPolicy::DriftAdaptive(c),
            (g, None) => TargetPolicy::Fixed(g.unwrap_or(DEFAULT_TARGET)),
        };
        policy.validate().map_err(|e| usage(e.to_string()))?;
        Ok(SearchConfig {
            grid,
            sls_only,
            policy,
            horizon: positive(cfg.pick_or(a.horizon, "horizon", 1.0)?, "horizon")?,
            initial_investment: positive(cfg.pick_or(a.i0, "i0", 1.0)?, "i0")?,
        })
    }

    fn optimizer(&self, objective: Objective, dt: f64) -> OptimizerConfig {
        OptimizerConfig {
            objective,
            policy: self.policy,
            grid: self.grid.clone(),
            horizon: self.horizon,
            dt,
            initial_investment: self.initial_investment,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Series {
        input: PathBuf,
        train_window: Option<DateWindow>,
    },
    Explicit {
        drift: f64,
        volatility: f64,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizeConfig {
    pub model: ModelSource,
    pub dt: f64,
    pub objective: Objective,
    pub search: SearchConfig,
    pub table: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
}

#[derive(Debug, Serialize)]
struct OptimizeOutput {
    #[serde(flatten)]
    provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    symbol: Option<String>,
    result: OptimizationResult,
}

#[derive(Debug, Serialize)]
struct TableRow {
    #[serde(rename = "K")]
    k: f64,
    alpha: f64,
    beta: f64,
    expected_gain: f64,
    variance: f64,
    objective: f64,
}

impl From<&GridPoint> for TableRow {
    fn from(p: &GridPoint) -> Self {
        TableRow {
            k: p.params.feedback_gain(),
            alpha: p.params.alpha(),
            beta: p.params.beta(),
            expected_gain: p.expected_gain,
            variance: p.variance,
            objective: p.objective,
        }
    }
}

fn optimize(a: OptimizeArgs, cfg: &ConfigFile, jobs: usize) -> Result<()> {
    let keys: Vec<&str> = [
        "in",
        "train-window",
        "mu",
        "sigma",
        "dt",
        "objective",
        "table",
        "out",
    ]
    .into_iter()
    .chain(SEARCH_KEYS.iter().copied())
    .collect();
    check_keys(cfg, &keys)?;
    let input = cfg.pick(a.input, "in")?;
    let mu = cfg.pick(a.mu, "mu")?;
    let sigma = cfg.pick(a.sigma, "sigma")?;
    let model = match (input, mu, sigma) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(usage("give either --in or --mu/--sigma, not both"))
        }
        (Some(input), None, None) => ModelSource::Series {
            input,
            train_window: cfg.pick(a.train_window, "train-window")?,
        },
        (None, Some(drift), Some(volatility)) => ModelSource::Explicit { drift, volatility },
        _ => {
            return Err(usage(
                "missing input: give --in FILE or both --mu and --sigma",
            ))
        }
    };
    let config = OptimizeConfig {
        model,
        dt: positive(cfg.pick_or(a.dt, "dt", 1.0 / TRADING_DAYS_PER_YEAR)?, "dt")?,
        objective: cfg.pick_or(a.objective, "objective", Objective::Mse)?,
        search: SearchConfig::resolve(a.search, cfg)?,
        table: cfg.pick(a.table, "table")?,
        out: cfg.pick(a.out, "out")?,
        jobs,
    };
    let (symbol, gp) = match &config.model {
        ModelSource::Series {
            input,
            train_window,
        } => {
            let series = load_window(input, train_window.as_ref())?;
            (Some(series.symbol().to_string()), fit(&series, config.dt)?)
        }
        ModelSource::Explicit { drift, volatility } => (
            None,
            GbmParams::new(*drift, *volatility, config.dt).map_err(|e| usage(e.to_string()))?,
        ),
    };
    let s = &config.search;
    let problem = SearchProblem::new(
        &gp,
        s.horizon,
        &s.policy,
        config.objective,
        s.initial_investment,
    )?;
    let (result, table) = with_jobs(jobs, || -> gsls_core::Result<_> {
        let result = par_search(&problem, &s.grid)?;
        let table = match config.table {
            Some(_) => Some(par_table(&problem, &s.grid)?),
            None => None,
        };
        Ok((result, table))
    })??;
    let provenance = Provenance::new("optimize", &config)?;
    if let (Some(path), Some(table)) = (&config.table, &table) {
        let rows: Vec<TableRow> = table.iter().map(TableRow::from).collect();
        emit_csv(Some(path), &rows, &provenance)?;
    }
    if config.out.is_some() {
        println!("{}", result.summary());
    }
    emit_json(
        config.out.as_deref(),
        &OptimizeOutput {
            provenance,
            symbol,
            result,
        },
    )
}

// backtest

#[derive(Debug, Clone, Serialize)]
pub struct BacktestConfig {
    pub input: PathBuf,
    pub out: PathBuf,
    pub split: SplitSpec,
    pub dt: f64,
    pub truncate: bool,
    pub strategies: Vec<Strategy>,
    pub jobs: usize,
}

fn fmt_num(x: f64) -> String {
    x.to_string()
}

fn parse_fixed(text: &str, i0: f64) -> Result<Strategy> {
    let bad = |e: String| usage(format!("--fixed '{text}': {e}"));
    let nums = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| bad(e.to_string())))
        .collect::<Result<Vec<f64>>>()?;
    let (params, label) = match nums[..] {
        [k] => (ControlParams::sls(i0, k), format!("sls-K{}", fmt_num(k))),
        [k, a, b] => (
            ControlParams::new(i0, k, a, b),
            format!("gsls-K{}-a{}-b{}", fmt_num(k), fmt_num(a), fmt_num(b)),
        ),
        _ => return Err(bad("expected K or K,ALPHA,BETA".into())),
    };
    Ok(Strategy::Fixed {
        label,
        params: params.map_err(|e| bad(e.to_string()))?,
    })
}

impl BacktestConfig {
    fn resolve(a: BacktestArgs, cfg: &ConfigFile, jobs: usize) -> Result<Self> {
        let keys: Vec<&str> = [
            "in",
            "out",
            "train-window",
            "test-window",
            "dt",
            "objective",
            "fixed",
            "truncate",
        ]
        .into_iter()
        .chain(SEARCH_KEYS.iter().copied())
        .collect();
        check_keys(cfg, &keys)?;
        let input = required(cfg.pick(a.input, "in")?, "in")?;
        let out = required(cfg.pick(a.out, "out")?, "out")?;
        let test = required(cfg.pick(a.test_window, "test-window")?, "test-window")?;
        let train = cfg.pick(a.train_window, "train-window")?;
        let dt = positive(cfg.pick_or(a.dt, "dt", 1.0 / TRADING_DAYS_PER_YEAR)?, "dt")?;
        let search = SearchConfig::resolve(a.search, cfg)?;
        let fixed = cfg.pick_all(a.fixed, "fixed")?;
        let objectives = cfg.pick_all(a.objective, "objective")?;
        let (strategies, train) = if fixed.is_empty() {
            let train = required(train, "train-window")?;
            let objectives = if objectives.is_empty() {
                vec![Objective::BiasSquared, Objective::Mse]
            } else {
                objectives
            };
            let family = if search.sls_only { "sls" } else { "gsls" };
            let strategies = objectives
                .into_iter()
                .map(|obj| Strategy::Optimized {
                    label: format!("{family}-{}-{}", obj.name(), search.policy.label()),
                    config: search.optimizer(obj, dt),
                })
                .collect();
            (strategies, train)
        } else {
            if !objectives.is_empty() {
                return Err(usage("--fixed and --objective are exclusive"));
            }
            let strategies = fixed
                .iter()
                .map(|f| parse_fixed(f, search.initial_investment))
                .collect::<Result<Vec<_>>>()?;
            // Fixed sweeps have no training step; default to the day before the test.
            let train = match train {
                Some(t) => t,
                None => {
                    let end = test
                        .start
                        .pred_opt()
                        .ok_or_else(|| usage("test window starts too early"))?;
                    DateWindow::new(end, end)?
                }
            };
            (strategies, train)
        };
        let split = SplitSpec::new(train, test).map_err(|e| usage(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        if let Some(dup) = strategies
            .iter()
            .find(|s| !seen.insert(s.label().to_string()))
        {
            return Err(usage(format!("strategy '{}' given twice", dup.label())));
        }
        Ok(BacktestConfig {
            input,
            out,
            split,
            dt,
            truncate: cfg.pick_switch(a.truncate, "truncate")?,
            strategies,
            jobs,
        })
    }
}

pub const REPORT_FILE: &str = "report.json";
pub const DAILY_FILE: &str = "daily_aggregate.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PARAMS_FILE: &str = "params.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

fn backtest(a: BacktestArgs, cfg: &ConfigFile, jobs: usize) -> Result<()> {
    let config = BacktestConfig::resolve(a, cfg, jobs)?;
    if !config.input.is_dir() {
        return Err(usage(format!(
            "universe directory {} does not exist",
            config.input.display()
        )));
    }
    let universe = load_universe(&config.input)?;
    for f in &universe.failures {
        eprintln!("gsls: skipped {}: {}", f.path.display(), f.message);
    }
    let outcomes: Vec<StrategyOutcome> = with_jobs(jobs, || {
        config
            .strategies
            .iter()
            .map(|s| run_universe(&universe.series, s, &config.split, config.truncate))
            .collect::<Result<Vec<_>>>()
    })??;
    ensure_dir(&config.out)?;
    let provenance = Provenance::new("backtest", &config)?;
    let report = BacktestReport {
        provenance: provenance.clone(),
        load_failures: universe.failures,
        strategies: outcomes,
    };
    write_json(&config.out.join(REPORT_FILE), &report)?;
    write_daily_csv(&config.out.join(DAILY_FILE), &report.strategies)?;
    write_summary_csv(&config.out.join(SUMMARY_FILE), &report.strategies)?;
    write_params_csv(&config.out.join(PARAMS_FILE), &report.strategies)?;
    write_json(
        &config.out.join(MANIFEST_FILE),
        &Manifest {
            provenance,
            files: [REPORT_FILE, DAILY_FILE, SUMMARY_FILE, PARAMS_FILE]
                .map(String::from)
                .to_vec(),
        },
    )?;
    let mut any = false;
    for o in &report.strategies {
        for f in &o.failures {
            eprintln!("gsls: {}: {}: {}", o.label, f.symbol, f.message);
        }
        match &o.aggregate {
            Some(agg) => {
                any = true;
                println!(
                    "{}: {} series, mean final gain {:.6}, median {:.6}, {} failed",
                    o.label,
                    agg.series,
                    agg.summary.mean,
                    agg.summary.median,
                    o.failures.len()
                );
            }
            None => println!("{}: every series failed", o.label),
        }
    }
    if any {
        Ok(())
    } else {
        Err(CliError::Data("no series could be backtested".into()))
    }
}

// plotdata

#[derive(Debug, Serialize)]
struct DensityRow<'a> {
    strategy: &'a str,
    lo: f64,
    hi: f64,
    count: usize,
    density: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlotConfig {
    Density {
        input: PathBuf,
        bins: usize,
        strategy: Option<String>,
        out: Option<PathBuf>,
    },
    Daily {
        input: PathBuf,
        out: Option<PathBuf>,
    },
    GainQ {
        k: Vec<f64>,
        alpha: f64,
        beta: f64,
        q: Vec<f64>,
        i0: f64,
        out: Option<PathBuf>,
    },
    GainK {
        q: Vec<f64>,
        alpha: f64,
        beta: f64,
        k: Vec<f64>,
        i0: f64,
        out: Option<PathBuf>,
    },
}

fn load_report(path: &Path) -> Result<BacktestReport> {
    if !path.exists() {
        return Err(usage(format!("report {} does not exist", path.display())));
    }
    read_json(path)
}

fn curve_axis(min: f64, max: f64, points: usize, name: &str) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) || points == 0 {
        return Err(usage(format!(
            "{name} axis needs 0 < min <= max and at least one point"
        )));
    }
    Ok(if points == 1 {
        vec![min]
    } else {
        linspace(min, max, points)
    })
}

fn plotdata(a: PlotArgs, cfg: &ConfigFile, _jobs: usize) -> Result<()> {
    check_keys(
        cfg,
        &[
            "in", "out", "bins", "strategy", "k", "q", "alpha", "beta", "q-min", "q-max", "k-min",
            "k-max", "points", "i0",
        ],
    )?;
    let config = match a.kind {
        PlotKind::Density {
            input,
            bins,
            strategy,
            out,
        } => PlotConfig::Density {
            input: required(cfg.pick(input, "in")?, "in")?,
            bins: cfg.pick_or(bins, "bins", DEFAULT_BINS)?,
            strategy: cfg.pick(strategy, "strategy")?,
            out: cfg.pick(out, "out")?,
        },
        PlotKind::Daily { input, out } => PlotConfig::Daily {
            input: required(cfg.pick(input, "in")?, "in")?,
            out: cfg.pick(out, "out")?,
        },
        PlotKind::GainQ {
            k,
            alpha,
            beta,
            q_min,
            q_max,
            points,
            i0,
            out,
        } => {
            let k = cfg.pick_all(k, "k")?;
            PlotConfig::GainQ {
                k: if k.is_empty() { vec![1.0, 3.0] } else { k },
                alpha: cfg.pick_or(alpha, "alpha", 1.0)?,
                beta: cfg.pick_or(beta, "beta", 1.0)?,
                q: curve_axis(
                    cfg.pick_or(q_min, "q-min", 0.2)?,
                    cfg.pick_or(q_max, "q-max", 3.0)?,
                    cfg.pick_or(points, "points", 100)?,
                    "q",
                )?,
                i0: cfg.pick_or(i0, "i0", 1.0)?,
                out: cfg.pick(out, "out")?,
            }
        }
        PlotKind::GainK {
            q,
            alpha,
            beta,
            k_min,
            k_max,
            points,
            i0,
            out,
        } => {
            let q = cfg.pick_all(q, "q")?;
            PlotConfig::GainK {
                q: if q.is_empty() { vec![0.8, 1.2] } else { q },
                alpha: cfg.pick_or(alpha, "alpha", 1.0)?,
                beta: cfg.pick_or(beta, "beta", 1.0)?,
                k: curve_axis(
                    cfg.pick_or(k_min, "k-min", 0.05)?,
                    cfg.pick_or(k_max, "k-max", 5.0)?,
                    cfg.pick_or(points, "points", 100)?,
                    "K",
                )?,
                i0: cfg.pick_or(i0, "i0", 1.0)?,
                out: cfg.pick(out, "out")?,
            }
        }
    };
    let provenance = Provenance::new("plotdata", &config)?;
    match &config {
        PlotConfig::Density {
            input,
            bins,
            strategy,
            out,
        } => {
            let report = load_report(input)?;
            let mut rows = Vec::new();
            let mut matched = false;
            for o in &report.strategies {
                if strategy.as_ref().is_some_and(|s| s != &o.label) {
                    continue;
                }
                matched = true;
                let finals: Vec<f64> = o.series.iter().map(|r| r.final_gain).collect();
                let hist = histogram(&finals, *bins).map_err(|e| match e {
                    CliError::Data(m) => CliError::Data(format!("strategy '{}': {m}", o.label)),
                    other => other,
                })?;
                rows.extend(hist.into_iter().map(|b| DensityRow {
                    strategy: &o.label,
                    lo: b.lo,
                    hi: b.hi,
                    count: b.count,
                    density: b.density,
                }));
            }
            if !matched {
                return Err(CliError::Data(match strategy {
                    Some(s) => format!("no strategy '{s}' in {}", input.display()),
                    None => format!("no strategies in {}", input.display()),
                }));
            }
            emit_csv(out.as_deref(), &rows, &provenance)
        }
        PlotConfig::Daily { input, out } => {
            let report = load_report(input)?;
            let rows: Vec<_> = daily_rows(&report.strategies).collect();
            emit_csv(out.as_deref(), &rows, &provenance)
        }
        PlotConfig::GainQ {
            k,
            alpha,
            beta,
            q,
            i0,
            out,
        } => {
            let rows: Vec<CurvePoint> = gain_vs_q(*i0, k, *alpha, *beta, q).map_err(as_usage)?;
            emit_csv(out.as_deref(), &rows, &provenance)
        }
        PlotConfig::GainK {
            q,
            alpha,
            beta,
            k,
            i0,
            out,
        } => {
            let rows: Vec<CurvePoint> = gain_vs_k(*i0, q, *alpha, *beta, k).map_err(as_usage)?;
            emit_csv(out.as_deref(), &rows, &provenance)
        }
    }
}

/// Closed-form curves take all their inputs from flags.
fn as_usage(e: CliError) -> CliError {
    match e {
        CliError::Data(m) => CliError::Usage(m),
        other => other,
    }
}
