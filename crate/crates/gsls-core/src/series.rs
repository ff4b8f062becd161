use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A named, date-ordered sequence of strictly positive prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    /// Validates and builds a series. Dates must be strictly increasing and
    /// every price finite and positive; errors name the offending row
    /// (0-based, data rows only).
    pub fn new(symbol: impl Into<String>, dates: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        let symbol = symbol.into();
        if prices.is_empty() {
            return Err(Error::input(format!("series '{symbol}' is empty")));
        }
        if dates.len() != prices.len() {
            return Err(Error::input(format!(
                "series '{symbol}': {} dates for {} prices",
                dates.len(),
                prices.len()
            )));
        }
        if let Some(row) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::input(format!(
                "series '{symbol}': row {row} has non-positive or non-finite price {}",
                prices[row]
            )));
        }
        if let Some(row) = dates.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::input(format!(
                "series '{symbol}': date {} at row {} does not follow {}",
                dates[row + 1],
                row + 1,
                dates[row]
            )));
        }
        Ok(PriceSeries {
            symbol,
            dates,
            prices,
        })
    }

    /// Assigns consecutive weekdays starting at `start` (or the next weekday).
    pub fn on_weekdays(
        symbol: impl Into<String>,
        start: NaiveDate,
        prices: Vec<f64>,
    ) -> Result<Self> {
        let dates = weekdays_from(start, prices.len());
        Self::new(symbol, dates, prices)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// Observations with `first <= date <= last`.
    pub fn between(&self, first: NaiveDate, last: NaiveDate) -> Result<Self> {
        let lo = self.dates.partition_point(|d| *d < first);
        let hi = self.dates.partition_point(|d| *d <= last);
        if lo >= hi {
            return Err(Error::input(format!(
                "series '{}' has no observations between {first} and {last}",
                self.symbol
            )));
        }
        Ok(PriceSeries {
            symbol: self.symbol.clone(),
            dates: self.dates[lo..hi].to_vec(),
            prices: self.prices[lo..hi].to_vec(),
        })
    }
}

/// `count` consecutive Monday-to-Friday dates starting at `start`.
pub fn weekdays_from(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut day = start;
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day.succ_opt().expect("date overflow");
    }
    out
}
