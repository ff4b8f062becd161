//! Discrete-time GSLS controller.
//!
//! Investments are set from the current gains at the start of each period and
//! held until the next price, so the period gain is investment times simple
//! return:
//!
//! ```text
//! I_L = I0 + K g_L          g_L += r I_L
//! I_S = -α I0 - β K g_S     g_S += r I_S
//! ```

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ControlParams;

/// Running controller state between price observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyState {
    params: ControlParams,
    gain_long: f64,
    gain_short: f64,
}

impl StrategyState {
    pub fn new(params: ControlParams) -> Self {
        StrategyState {
            params,
            gain_long: 0.0,
            gain_short: 0.0,
        }
    }

    pub fn gain_long(&self) -> f64 {
        self.gain_long
    }

    pub fn gain_short(&self) -> f64 {
        self.gain_short
    }

    pub fn gain(&self) -> f64 {
        self.gain_long + self.gain_short
    }

    pub fn investment_long(&self) -> f64 {
        self.params.initial_investment() + self.params.feedback_gain() * self.gain_long
    }

    pub fn investment_short(&self) -> f64 {
        -(self.params.alpha() * self.params.initial_investment())
            - (self.params.beta() * self.params.feedback_gain()) * self.gain_short
    }

    /// Applies one period with simple return `r = (p_next - p) / p`.
    #[inline]
    pub fn step(&mut self, r: f64) {
        let invest_long = self.investment_long();
        let invest_short = self.investment_short();
        self.gain_long += r * invest_long;
        self.gain_short += r * invest_short;
    }

    fn record(&self, step: usize, price: f64) -> TraceStep {
        let invest_long = self.investment_long();
        let invest_short = self.investment_short();
        TraceStep {
            step,
            price,
            gain_long: self.gain_long,
            gain_short: self.gain_short,
            gain: self.gain(),
            invest_long,
            invest_short,
            invest_net: invest_long + invest_short,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// Index of the price observation.
    pub step: usize,
    pub price: f64,
    pub gain_long: f64,
    pub gain_short: f64,
    pub gain: f64,
    pub invest_long: f64,
    pub invest_short: f64,
    pub invest_net: f64,
}

/// Per-observation record of a discrete run. `steps[0]` is the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrace {
    pub params: ControlParams,
    pub steps: Vec<TraceStep>,
}

impl StrategyTrace {
    pub fn final_gain(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.gain)
    }

    pub fn gains(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.gain)
    }
}

fn validate_prices(prices: &[f64]) -> Result<()> {
    if prices.is_empty() {
        return Err(Error::input("price series is empty"));
    }
    if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::input(format!(
            "price at index {i} must be finite and > 0, got {}",
            prices[i]
        )));
    }
    Ok(())
}

/// Runs the controller over `prices`, recording every observation.
pub fn run_strategy(params: &ControlParams, prices: &[f64]) -> Result<StrategyTrace> {
    validate_prices(prices)?;
    let mut state = StrategyState::new(*params);
    let mut steps = Vec::with_capacity(prices.len());
    steps.push(state.record(0, prices[0]));
    for (n, w) in prices.windows(2).enumerate() {
        state.step((w[1] - w[0]) / w[0]);
        steps.push(state.record(n + 1, w[1]));
    }
    Ok(StrategyTrace {
        params: *params,
        steps,
    })
}

/// Final gain of [`run_strategy`] without materializing the trace.
pub fn final_gain(params: &ControlParams, prices: &[f64]) -> Result<f64> {
    validate_prices(prices)?;
    let mut state = StrategyState::new(*params);
    for w in prices.windows(2) {
        state.step((w[1] - w[0]) / w[0]);
    }
    Ok(state.gain())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::gain_total_closed;
    use crate::params::PriceRatio;
    use alloc::vec;

    #[test]
    fn constant_prices_do_nothing() {
        let p = ControlParams::new(2.0, 3.0, 0.5, 1.5).unwrap();
        let trace = run_strategy(&p, &[7.0; 20]).unwrap();
        for s in &trace.steps {
            assert_eq!(s.gain, 0.0);
            assert_eq!(s.invest_long, 2.0);
            assert_eq!(s.invest_short, -1.0);
            assert_eq!(s.invest_net, 1.0);
        }
        assert_eq!(trace.steps.len(), 20);
    }

    #[test]
    fn single_step_by_hand() {
        let p = ControlParams::sls(1.0, 1.0).unwrap();
        let trace = run_strategy(&p, &[100.0, 110.0]).unwrap();
        let last = trace.steps[1];
        assert!((last.gain_long - 0.1).abs() < 1e-15);
        assert!((last.gain_short + 0.1).abs() < 1e-15);
        assert!(last.gain.abs() < 1e-15);
        assert_eq!(trace.final_gain(), last.gain);
    }

    #[test]
    fn initial_state() {
        let p = ControlParams::new(3.0, 1.0, 0.25, 2.0).unwrap();
        let s = run_strategy(&p, &[5.0, 6.0, 4.0]).unwrap().steps[0];
        assert_eq!((s.gain_long, s.gain_short, s.gain), (0.0, 0.0, 0.0));
        assert_eq!(s.invest_long, 3.0);
        assert_eq!(s.invest_short, -0.75);
        assert_eq!(s.invest_net, 2.25);
    }

    #[test]
    fn trace_and_final_gain_agree() {
        let p = ControlParams::new(1.0, 2.0, 0.8, 1.3).unwrap();
        let prices = [10.0, 10.5, 9.7, 11.2, 12.0, 8.8];
        let trace = run_strategy(&p, &prices).unwrap();
        assert_eq!(trace.final_gain(), final_gain(&p, &prices).unwrap());
        for s in &trace.steps {
            assert_eq!(s.gain, s.gain_long + s.gain_short);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let p = ControlParams::sls(1.0, 1.0).unwrap();
        assert!(run_strategy(&p, &[]).is_err());
        assert!(run_strategy(&p, &[1.0, 0.0]).is_err());
        assert!(final_gain(&p, &[1.0, -3.0]).is_err());
        assert!(final_gain(&p, &[f64::NAN]).is_err());
    }

    #[test]
    fn converges_linearly_on_geometric_path() {
        let p = ControlParams::sls(1.0, 1.0).unwrap();
        let q_end = 1.001_f64.powi(999);
        let closed = gain_total_closed(&p, PriceRatio::new(q_end).unwrap());
        let error = |n: usize| {
            let prices: Vec<f64> = (0..=n)
                .map(|i| 100.0 * q_end.powf(i as f64 / n as f64))
                .collect();
            (final_gain(&p, &prices).unwrap() - closed).abs()
        };
        let errors: Vec<f64> = vec![999, 1998, 3996, 7992].into_iter().map(error).collect();
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.8..2.2).contains(&ratio), "refinement ratio {ratio}");
        }
        assert!(errors[3] < 1e-4 * closed.abs());
    }
}
