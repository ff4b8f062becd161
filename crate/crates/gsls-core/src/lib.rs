//! Generalized simultaneous long-short (GSLS) feedback trading.
//!
//! A GSLS controller runs a long position `I_L = I0 + K g_L` next to a short
//! position `I_S = -α I0 - β K g_S`. With `α = β = 1` it is the classical
//! simultaneous long-short (SLS) strategy.
//!
//! This crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. It contains:
//!
//! - [`gain`]: closed-form gains, the `β = 1` root structure, the
//!   positive-gain condition and feedback sensitivities.
//! - [`executor`]: the discrete-time controller run over a price series.
//! - [`gbm`]: geometric Brownian motion simulation, maximum-likelihood
//!   estimation, and the expected gain and gain variance under GBM.
//! - [`optimizer`]: bias / MSE objectives and the grid search.
//! - [`backtest`]: train/test pipeline and cross-series aggregation.
//!
//! All elementary functions go through `libm`, so results are identical on
//! every platform and in both `std` and `no_std` builds.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod backtest;
pub mod error;
pub mod executor;
pub mod gain;
pub mod gbm;
pub mod math;
pub mod optimizer;
pub mod params;
pub mod series;
pub mod stats;

pub use backtest::{
    aggregate, backtest_one, run_fixed_series, AggregateReport, DateWindow, EndSummary,
    SeriesReport, SplitSpec,
};
pub use error::{Error, Result};
pub use executor::{final_gain, run_strategy, StrategyState, StrategyTrace, TraceStep};
pub use gain::{
    beta1_roots, gain_long_closed, gain_lower_bound, gain_short_closed, gain_total_closed,
    positive_gain_condition, Beta1Structure,
};
pub use gbm::{estimate_mle, expected_gain, gain_variance, simulate_path, GbmParams, GbmPath};
pub use optimizer::{
    grid_search, resolve_target, trading_bias, trading_mse, GridPoint, GridSpec, Objective,
    OptimizationResult, TargetPolicy,
};
pub use params::{ControlParams, PriceRatio};
pub use series::PriceSeries;

/// Crate version, embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
