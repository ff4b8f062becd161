//! Backtest orchestration over a universe and the report files it produces.

use std::fs::File;
use std::path::Path;

use gsls_core::backtest::OptimizerConfig;
use gsls_core::optimizer::SearchProblem;
use gsls_core::{
    aggregate, estimate_mle, run_fixed_series, AggregateReport, ControlParams, DateWindow, Error,
    PriceSeries, SeriesReport, SplitSpec,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::LoadFailure;
use crate::parallel::{par_map_series, par_search};

/// One way of choosing controller parameters for every series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Strategy {
    /// Estimate on the training window, then grid-search per series.
    Optimized {
        label: String,
        config: OptimizerConfig,
    },
    /// The same controller for every series.
    Fixed {
        label: String,
        params: ControlParams,
    },
}

impl Strategy {
    pub fn label(&self) -> &str {
        match self {
            Strategy::Optimized { label, .. } | Strategy::Fixed { label, .. } => label,
        }
    }

    pub fn run_one(
        &self,
        series: &PriceSeries,
        split: &SplitSpec,
    ) -> gsls_core::Result<SeriesReport> {
        match self {
            Strategy::Optimized { config, .. } => optimized_one(series, split, config),
            Strategy::Fixed { params, .. } => run_fixed_series(series, params, &split.test),
        }
    }
}

/// Same pipeline as [`gsls_core::backtest_one`], with the grid search run in
/// parallel.
fn optimized_one(
    series: &PriceSeries,
    split: &SplitSpec,
    config: &OptimizerConfig,
) -> gsls_core::Result<SeriesReport> {
    let train = split.train.slice(series)?;
    let test = split.test.slice(series)?;
    if test.len() < 2 {
        return Err(Error::Input(format!(
            "series '{}': testing window has {} observation(s), need at least 2",
            series.symbol(),
            test.len()
        )));
    }
    let estimate = estimate_mle(train.prices(), config.dt)
        .map_err(|e| Error::Estimation(format!("series '{}': {e}", series.symbol())))?;
    let problem = SearchProblem::new(
        &estimate,
        config.horizon,
        &config.policy,
        config.objective,
        config.initial_investment,
    )?;
    let chosen = par_search(&problem, &config.grid)?;
    let window = DateWindow::new(test.dates()[0], test.dates()[test.len() - 1])?;
    let traded = run_fixed_series(&test, &chosen.params, &window)?;
    Ok(SeriesReport {
        target: Some(chosen.target),
        estimate: Some(estimate),
        objective_value: Some(chosen.objective_value),
        ..traded
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesFailure {
    pub symbol: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyOutcome {
    pub label: String,
    pub strategy: Strategy,
    /// Absent when every series failed.
    pub aggregate: Option<AggregateReport>,
    pub failures: Vec<SeriesFailure>,
    pub series: Vec<SeriesReport>,
}

/// Runs one strategy over all series. Per-series failures are collected,
/// not fatal.
pub fn run_universe(
    series: &[PriceSeries],
    strategy: &Strategy,
    split: &SplitSpec,
    truncate: bool,
) -> Result<StrategyOutcome> {
    let results = par_map_series(series, |s| strategy.run_one(s, split));
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (s, result) in series.iter().zip(results) {
        match result {
            Ok(r) => reports.push(r),
            Err(e) => failures.push(SeriesFailure {
                symbol: s.symbol().to_string(),
                message: e.to_string(),
            }),
        }
    }
    let aggregate = if reports.is_empty() {
        None
    } else {
        Some(
            aggregate(&reports, truncate)
                .map_err(|e| CliError::Data(format!("strategy '{}': {e}", strategy.label())))?,
        )
    };
    Ok(StrategyOutcome {
        label: strategy.label().to_string(),
        strategy: strategy.clone(),
        aggregate,
        failures,
        series: reports,
    })
}

/// Header shared by every JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Provenance {
            tool: "gsls".into(),
            version: gsls_core::VERSION.into(),
            command: command.into(),
            config: serde_json::to_value(config)
                .map_err(|e| CliError::Runtime(format!("config: {e}")))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub load_failures: Vec<LoadFailure>,
    pub strategies: Vec<StrategyOutcome>,
}

/// Listing of an output directory, written last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub files: Vec<String>,
}

/// Serializes `rows` as CSV with a header from the field names.
pub fn write_rows<T: Serialize>(
    w: impl std::io::Write,
    rows: impl IntoIterator<Item = T>,
    label: &str,
) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for row in rows {
        csv.serialize(row)
            .map_err(|e| CliError::Runtime(format!("{label}: {e}")))?;
    }
    csv.flush().map_err(|e| CliError::io(label, e))
}

fn write_file<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_rows(
        std::io::BufWriter::new(file),
        rows,
        &path.display().to_string(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DailyRow<'a> {
    pub strategy: &'a str,
    pub day: usize,
    pub mean: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
}

pub fn daily_rows(outcomes: &[StrategyOutcome]) -> impl Iterator<Item = DailyRow<'_>> {
    outcomes.iter().flat_map(|o| {
        o.aggregate.iter().flat_map(|a| &a.daily).map(|d| DailyRow {
            strategy: &o.label,
            day: d.day,
            mean: d.mean,
            q025: d.q025,
            q50: d.q50,
            q975: d.q975,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow<'a> {
    pub strategy: &'a str,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsRow<'a> {
    pub strategy: &'a str,
    pub symbol: &'a str,
    #[serde(rename = "K")]
    pub feedback_gain: f64,
    pub alpha: f64,
    pub beta: f64,
    pub target: Option<f64>,
    pub drift: Option<f64>,
    pub volatility: Option<f64>,
    pub final_gain: f64,
}

/// `strategy,day,mean,q025,q50,q975`
pub fn write_daily_csv(path: &Path, outcomes: &[StrategyOutcome]) -> Result<()> {
    write_file(path, daily_rows(outcomes))
}

/// `strategy,q1,median,mean,q3,iqr`, one row per strategy that has at least
/// one successful series.
pub fn write_summary_csv(path: &Path, outcomes: &[StrategyOutcome]) -> Result<()> {
    write_file(
        path,
        outcomes.iter().filter_map(|o| {
            o.aggregate.as_ref().map(|a| SummaryRow {
                strategy: &o.label,
                q1: a.summary.q1,
                median: a.summary.median,
                mean: a.summary.mean,
                q3: a.summary.q3,
                iqr: a.summary.iqr,
            })
        }),
    )
}

/// Chosen parameters and final gain per strategy and series.
pub fn write_params_csv(path: &Path, outcomes: &[StrategyOutcome]) -> Result<()> {
    write_file(
        path,
        outcomes.iter().flat_map(|o| {
            o.series.iter().map(|r| ParamsRow {
                strategy: &o.label,
                symbol: &r.symbol,
                feedback_gain: r.params.feedback_gain(),
                alpha: r.params.alpha(),
                beta: r.params.beta(),
                target: r.target,
                drift: r.estimate.map(|e| e.drift),
                volatility: r.estimate.map(|e| e.volatility),
                final_gain: r.final_gain,
            })
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use gsls_core::{Objective, TargetPolicy};

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn split() -> SplitSpec {
        SplitSpec::new(
            DateWindow::new(day(2016, 1, 1), day(2016, 12, 31)).unwrap(),
            DateWindow::new(day(2017, 1, 1), day(2017, 12, 31)).unwrap(),
        )
        .unwrap()
    }

    fn exponential(symbol: &str, mu: f64) -> PriceSeries {
        let prices = (0..521).map(|i| (mu * i as f64 / 252.0).exp()).collect();
        PriceSeries::on_weekdays(symbol, day(2016, 1, 1), prices).unwrap()
    }

    #[test]
    fn parallel_pipeline_matches_core() {
        let config = OptimizerConfig::new(Objective::Mse, TargetPolicy::DriftAdaptive(0.05));
        let s = exponential("E", 0.08);
        let strategy = Strategy::Optimized {
            label: "x".into(),
            config: config.clone(),
        };
        let ours = strategy.run_one(&s, &split()).unwrap();
        let core = gsls_core::backtest_one(&s, &split(), &config).unwrap();
        assert_eq!(ours, core);
    }

    #[test]
    fn failures_are_itemized() {
        let short = PriceSeries::on_weekdays("SHORT", day(2016, 1, 1), vec![1.0; 100]).unwrap();
        let universe = vec![exponential("A", 0.1), short, exponential("B", 0.05)];
        let strategy = Strategy::Fixed {
            label: "sls-K1".into(),
            params: ControlParams::sls(1.0, 1.0).unwrap(),
        };
        let out = run_universe(&universe, &strategy, &split(), false).unwrap();
        assert_eq!(out.series.len(), 2);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].symbol, "SHORT");
        let agg = out.aggregate.unwrap();
        let mean = (out.series[0].final_gain + out.series[1].final_gain) / 2.0;
        assert!((agg.summary.mean - mean).abs() < 1e-15);
    }
}
