//! Train/test pipeline and cross-series aggregation.
//!
//! Per series: fit GBM on the training window, resolve the target gain,
//! grid-search the controller, then run it over the testing window. Series
//! are aligned by position in the testing window when aggregated.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::executor::run_strategy;
use crate::gbm::{estimate_mle, GbmParams, TRADING_DAYS_PER_YEAR};
use crate::optimizer::{GridSpec, Objective, OptimizationResult, SearchProblem, TargetPolicy};
use crate::params::ControlParams;
use crate::series::PriceSeries;
use crate::stats;

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if start > end {
            return Err(Error::input(format!(
                "window start {start} is after end {end}"
            )));
        }
        Ok(DateWindow { start, end })
    }

    pub fn slice(&self, series: &PriceSeries) -> Result<PriceSeries> {
        series.between(self.start, self.end)
    }
}

impl fmt::Display for DateWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

/// Parses `YYYY-MM-DD:YYYY-MM-DD`.
impl FromStr for DateWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| Error::input(format!("window '{s}' must look like START:END")))?;
        let parse = |d: &str| {
            d.trim()
                .parse::<NaiveDate>()
                .map_err(|e| Error::input(format!("bad date '{d}': {e}")))
        };
        DateWindow::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: DateWindow,
    pub test: DateWindow,
}

impl SplitSpec {
    pub fn new(train: DateWindow, test: DateWindow) -> Result<Self> {
        if train.end >= test.start {
            return Err(Error::input(format!(
                "training window {train} must end before testing window {test} starts"
            )));
        }
        Ok(SplitSpec { train, test })
    }
}

/// Everything the per-series optimizer needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub objective: Objective,
    pub policy: TargetPolicy,
    pub grid: GridSpec,
    /// Horizon the objective is evaluated at, in the units of `dt`.
    pub horizon: f64,
    /// Spacing of observations used by the estimator.
    pub dt: f64,
    pub initial_investment: f64,
}

impl OptimizerConfig {
    /// One-year horizon on daily data, `I0 = 1`, default grid.
    pub fn new(objective: Objective, policy: TargetPolicy) -> Self {
        OptimizerConfig {
            objective,
            policy,
            grid: GridSpec::default(),
            horizon: 1.0,
            dt: 1.0 / TRADING_DAYS_PER_YEAR,
            initial_investment: 1.0,
        }
    }

    pub fn optimize(&self, gp: &GbmParams) -> Result<OptimizationResult> {
        SearchProblem::new(
            gp,
            self.horizon,
            &self.policy,
            self.objective,
            self.initial_investment,
        )?
        .search(&self.grid)
    }
}

/// Outcome of trading one series over its testing window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesReport {
    pub symbol: String,
    pub params: ControlParams,
    /// Target gain used by the optimizer; absent for fixed-parameter runs.
    pub target: Option<f64>,
    /// GBM fit on the training window; absent for fixed-parameter runs.
    pub estimate: Option<GbmParams>,
    pub objective_value: Option<f64>,
    /// Cumulative gain at each testing-window observation (starts at 0).
    pub gains: Vec<f64>,
    pub final_gain: f64,
}

fn trade(symbol: &str, params: ControlParams, test: &PriceSeries) -> Result<(Vec<f64>, f64)> {
    if test.len() < 2 {
        return Err(Error::input(format!(
            "series '{symbol}': testing window has {} observation(s), need at least 2",
            test.len()
        )));
    }
    let trace = run_strategy(&params, test.prices())?;
    let gains: Vec<f64> = trace.gains().collect();
    Ok((gains, trace.final_gain()))
}

/// estimate → resolve target → grid search → run on the testing window.
pub fn backtest_one(
    series: &PriceSeries,
    split: &SplitSpec,
    config: &OptimizerConfig,
) -> Result<SeriesReport> {
    let train = split.train.slice(series)?;
    let test = split.test.slice(series)?;
    if test.len() < 2 {
        return Err(Error::input(format!(
            "series '{}': testing window has {} observation(s), need at least 2",
            series.symbol(),
            test.len()
        )));
    }
    let estimate = estimate_mle(train.prices(), config.dt)
        .map_err(|e| Error::Estimation(format!("series '{}': {e}", series.symbol())))?;
    let chosen = config.optimize(&estimate)?;
    let (gains, final_gain) = trade(series.symbol(), chosen.params, &test)?;
    Ok(SeriesReport {
        symbol: series.symbol().into(),
        params: chosen.params,
        target: Some(chosen.target),
        estimate: Some(estimate),
        objective_value: Some(chosen.objective_value),
        gains,
        final_gain,
    })
}

/// Trades a fixed controller over the testing window, with no training step.
pub fn run_fixed_series(
    series: &PriceSeries,
    params: &ControlParams,
    test: &DateWindow,
) -> Result<SeriesReport> {
    let test = test.slice(series)?;
    let (gains, final_gain) = trade(series.symbol(), *params, &test)?;
    Ok(SeriesReport {
        symbol: series.symbol().into(),
        params: *params,
        target: None,
        estimate: None,
        objective_value: None,
        gains,
        final_gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DailyStats {
    pub day: usize,
    pub mean: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

/// Distribution of end-of-period gains across series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndSummary {
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    /// `q3 - q1`.
    pub iqr: f64,
}

impl EndSummary {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::input("no values to summarize"));
        }
        let sorted = stats::sorted(values);
        let q1 = stats::quantile_sorted(&sorted, 0.25);
        let q3 = stats::quantile_sorted(&sorted, 0.75);
        Ok(EndSummary {
            q1,
            median: stats::quantile_sorted(&sorted, 0.5),
            mean: stats::mean(values),
            q3,
            iqr: q3 - q1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub series: usize,
    pub days: usize,
    pub daily: Vec<DailyStats>,
    pub summary: EndSummary,
}

/// Per-day mean and 2.5/50/97.5% quantiles, plus the end-of-period quartile
/// summary. Trajectories must have equal length unless `truncate` is set, in
/// which case all are cut to the shortest.
pub fn aggregate(reports: &[SeriesReport], truncate: bool) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::input("nothing to aggregate"));
    }
    let shortest = reports.iter().map(|r| r.gains.len()).min().unwrap_or(0);
    let longest = reports.iter().map(|r| r.gains.len()).max().unwrap_or(0);
    if shortest != longest && !truncate {
        let odd = reports
            .iter()
            .find(|r| r.gains.len() != longest)
            .expect("length mismatch");
        return Err(Error::input(format!(
            "trajectories are misaligned: '{}' has {} days, others up to {longest}",
            odd.symbol,
            odd.gains.len()
        )));
    }
    if shortest == 0 {
        return Err(Error::input("empty gain trajectory"));
    }
    let mut column = Vec::with_capacity(reports.len());
    let daily = (0..shortest)
        .map(|day| {
            column.clear();
            column.extend(reports.iter().map(|r| r.gains[day]));
            let mean = stats::mean(&column);
            column.sort_by(f64::total_cmp);
            DailyStats {
                day,
                mean,
                q025: stats::quantile_sorted(&column, 0.025),
                q50: stats::quantile_sorted(&column, 0.5),
                q975: stats::quantile_sorted(&column, 0.975),
            }
        })
        .collect();
    let finals: Vec<f64> = reports.iter().map(|r| r.gains[shortest - 1]).collect();
    Ok(AggregateReport {
        series: reports.len(),
        days: shortest,
        daily,
        summary: EndSummary::from_values(&finals)?,
    })
}
