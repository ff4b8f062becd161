//! Control-parameter selection by exhaustive grid search.
//!
//! For a GBM model and horizon `t`, each candidate `(K, α, β)` is scored by
//! the squared trading bias `(E g(t) - g*)²` or by the trading MSE
//! `bias² + Var g(t)`. The minimizer wins; exact ties go to the
//! lexicographically smallest `(K, α, β)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbm::{expected_gain_at, gain_variance_at, GbmParams};
use crate::math;
use crate::params::ControlParams;

/// How the target gain `g*` is chosen for a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Same `g*` for every series.
    Fixed(f64),
    /// `g* = |μ̂| + C`.
    DriftAdaptive(f64),
}

impl TargetPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetPolicy::Fixed(g) if !g.is_finite() => Err(Error::domain(format!(
                "fixed target must be finite, got {g}"
            ))),
            TargetPolicy::DriftAdaptive(c) if !(c.is_finite() && c >= 0.0) => Err(Error::domain(
                format!("drift-adaptive margin must be finite and >= 0, got {c}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TargetPolicy::Fixed(_) => "fixed",
            TargetPolicy::DriftAdaptive(_) => "varied",
        }
    }
}

pub fn resolve_target(policy: &TargetPolicy, gp: &GbmParams) -> f64 {
    match *policy {
        TargetPolicy::Fixed(g) => g,
        TargetPolicy::DriftAdaptive(c) => math::abs(gp.drift) + c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    #[serde(rename = "bias")]
    BiasSquared,
    Mse,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::BiasSquared => "bias",
            Objective::Mse => "mse",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bias" => Ok(Objective::BiasSquared),
            "mse" => Ok(Objective::Mse),
            other => Err(Error::input(format!(
                "unknown objective '{other}' (expected bias or mse)"
            ))),
        }
    }
}

/// Candidate values for `K`, `α` and `β`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub feedback_gain: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Default for GridSpec {
    /// `{0.5, 1.0, ..., 5.0}` for each parameter: 1000 combinations.
    fn default() -> Self {
        let values = linspace(0.5, 5.0, 10);
        GridSpec {
            feedback_gain: values.clone(),
            alpha: values.clone(),
            beta: values,
        }
    }
}

/// `n` equally spaced values from `min` to `max` inclusive.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![min],
        _ => {
            let step = (max - min) / (n - 1) as f64;
            (0..n).map(|i| min + i as f64 * step).collect()
        }
    }
}

impl GridSpec {
    pub fn new(feedback_gain: Vec<f64>, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        let grid = GridSpec {
            feedback_gain,
            alpha,
            beta,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// The same equally spaced values for all three parameters.
    pub fn uniform(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && max >= min) {
            return Err(Error::input(format!(
                "grid range must satisfy 0 < min <= max, got [{min}, {max}]"
            )));
        }
        let values = linspace(min, max, n);
        Self::new(values.clone(), values.clone(), values)
    }

    /// SLS search: `α = β = 1`, only `K` varies.
    pub fn sls(feedback_gain: Vec<f64>) -> Result<Self> {
        Self::new(feedback_gain, alloc::vec![1.0], alloc::vec![1.0])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, values) in [
            ("K", &self.feedback_gain),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
        ] {
            if values.is_empty() {
                return Err(Error::input(format!("grid for {name} is empty")));
            }
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(Error::input(format!(
                    "grid for {name} contains non-positive value {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.feedback_gain.len() * self.alpha.len() * self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All `(K, α, β)` in `K`-major, then `α`, then `β` order.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.feedback_gain.iter().flat_map(move |&k| {
            self.alpha
                .iter()
                .flat_map(move |&a| self.beta.iter().map(move |&b| (k, a, b)))
        })
    }
}

/// `E g(t) - g*`.
pub fn trading_bias(cp: &ControlParams, gp: &GbmParams, t: f64, target: f64) -> Result<f64> {
    check_horizon(t)?;
    Ok(expected_gain_at(cp, gp.drift, t) - target)
}

/// `bias² + Var g(t)`.
pub fn trading_mse(cp: &ControlParams, gp: &GbmParams, t: f64, target: f64) -> Result<f64> {
    let bias = trading_bias(cp, gp, t, target)?;
    Ok(bias * bias + gain_variance_at(cp, gp, t))
}

fn check_horizon(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "horizon must be finite and > 0, got {t}"
        )))
    }
}

/// One scored grid candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub params: ControlParams,
    pub expected_gain: f64,
    pub variance: f64,
    pub objective: f64,
}

impl GridPoint {
    fn key(&self) -> (f64, f64, f64) {
        (
            self.params.feedback_gain(),
            self.params.alpha(),
            self.params.beta(),
        )
    }

    /// Objective ordering with NaN treated as worst, then the tie-break on
    /// `(K, α, β)`.
    pub fn cmp_rank(&self, other: &GridPoint) -> Ordering {
        let obj = |p: &GridPoint| {
            if p.objective.is_nan() {
                f64::INFINITY
            } else {
                p.objective
            }
        };
        obj(self).total_cmp(&obj(other)).then_with(|| {
            let (a, b) = (self.key(), other.key());
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
    }

    /// The better of two candidates; associative and commutative, so any
    /// reduction order gives the same winner.
    pub fn better(self, other: GridPoint) -> GridPoint {
        if other.cmp_rank(&self) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

/// A fully resolved search: model, horizon, target and objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub gbm: GbmParams,
    pub horizon: f64,
    pub target: f64,
    pub objective: Objective,
    pub initial_investment: f64,
}

impl SearchProblem {
    pub fn new(
        gp: &GbmParams,
        horizon: f64,
        policy: &TargetPolicy,
        objective: Objective,
        initial_investment: f64,
    ) -> Result<Self> {
        check_horizon(horizon)?;
        policy.validate()?;
        if !(initial_investment.is_finite() && initial_investment > 0.0) {
            return Err(Error::domain(format!(
                "initial investment must be > 0, got {initial_investment}"
            )));
        }
        Ok(SearchProblem {
            gbm: *gp,
            horizon,
            target: resolve_target(policy, gp),
            objective,
            initial_investment,
        })
    }

    pub fn evaluate(&self, k: f64, alpha: f64, beta: f64) -> Result<GridPoint> {
        let params = ControlParams::new(self.initial_investment, k, alpha, beta)?;
        let expected_gain = expected_gain_at(&params, self.gbm.drift, self.horizon);
        let variance = gain_variance_at(&params, &self.gbm, self.horizon);
        let bias = expected_gain - self.target;
        let objective = match self.objective {
            Objective::BiasSquared => bias * bias,
            Objective::Mse => bias * bias + variance,
        };
        Ok(GridPoint {
            params,
            expected_gain,
            variance,
            objective,
        })
    }

    pub fn evaluate_grid(&self, grid: &GridSpec) -> Result<Vec<GridPoint>> {
        grid.validate()?;
        grid.points()
            .map(|(k, a, b)| self.evaluate(k, a, b))
            .collect()
    }

    pub fn search(&self, grid: &GridSpec) -> Result<OptimizationResult> {
        grid.validate()?;
        let mut best: Option<GridPoint> = None;
        for (k, a, b) in grid.points() {
            let point = self.evaluate(k, a, b)?;
            best = Some(match best {
                Some(current) => current.better(point),
                None => point,
            });
        }
        let best = best.ok_or_else(|| Error::input("grid is empty"))?;
        Ok(self.result(best, grid.len()))
    }

    pub fn result(&self, best: GridPoint, evaluated: usize) -> OptimizationResult {
        OptimizationResult {
            params: best.params,
            objective_value: best.objective,
            expected_gain: best.expected_gain,
            variance: best.variance,
            objective: self.objective,
            target: self.target,
            horizon: self.horizon,
            gbm: self.gbm,
            evaluated,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub params: ControlParams,
    pub objective_value: f64,
    pub expected_gain: f64,
    pub variance: f64,
    pub objective: Objective,
    pub target: f64,
    pub horizon: f64,
    pub gbm: GbmParams,
    pub evaluated: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<GridPoint>>,
}

impl OptimizationResult {
    pub fn summary(&self) -> String {
        format!(
            "{} objective={:.6e} E[g]={:.6} target={}",
            self.params, self.objective_value, self.expected_gain, self.target
        )
    }
}

/// Sequential exhaustive search.
pub fn grid_search(
    gp: &GbmParams,
    horizon: f64,
    policy: &TargetPolicy,
    grid: &GridSpec,
    objective: Objective,
    initial_investment: f64,
) -> Result<OptimizationResult> {
    SearchProblem::new(gp, horizon, policy, objective, initial_investment)?.search(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbm::expected_gain;

    fn gbm(mu: f64, sigma: f64) -> GbmParams {
        GbmParams::daily(mu, sigma).unwrap()
    }

    #[test]
    fn default_grid() {
        let g = GridSpec::default();
        assert_eq!(
            g.feedback_gain,
            [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0]
        );
        assert_eq!(g.len(), 1000);
        assert_eq!(g.points().next(), Some((0.5, 0.5, 0.5)));
        assert_eq!(g.points().nth(1), Some((0.5, 0.5, 1.0)));
        assert_eq!(g.points().last(), Some((5.0, 5.0, 5.0)));
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(GridSpec::new(alloc::vec![], alloc::vec![1.0], alloc::vec![1.0]).is_err());
        assert!(GridSpec::new(alloc::vec![0.0], alloc::vec![1.0], alloc::vec![1.0]).is_err());
        assert!(GridSpec::uniform(0.0, 5.0, 10).is_err());
        assert!(GridSpec::uniform(2.0, 1.0, 10).is_err());
        assert!(GridSpec::uniform(1.0, 2.0, 0).is_err());
        assert_eq!(GridSpec::uniform(1.0, 1.0, 1).unwrap().len(), 1);
    }

    #[test]
    fn target_resolution() {
        assert_eq!(
            resolve_target(&TargetPolicy::Fixed(0.15), &gbm(0.3, 0.1)),
            0.15
        );
        let adaptive = TargetPolicy::DriftAdaptive(0.05);
        assert!((resolve_target(&adaptive, &gbm(0.1, 0.1)) - 0.15).abs() < 1e-15);
        assert!((resolve_target(&adaptive, &gbm(-0.2, 0.1)) - 0.25).abs() < 1e-15);
        assert!(TargetPolicy::DriftAdaptive(-0.1).validate().is_err());
        assert!(TargetPolicy::Fixed(f64::NAN).validate().is_err());
    }

    #[test]
    fn bias_examples() {
        let cp = ControlParams::new(1.0, 2.0, 0.7, 1.3).unwrap();
        let gp = gbm(0.1, 0.2);
        let e = expected_gain(&cp, &gp, 1.0).unwrap();
        assert_eq!(trading_bias(&cp, &gp, 1.0, e).unwrap(), 0.0);
        assert_eq!(trading_bias(&cp, &gbm(0.0, 0.2), 1.0, 0.15).unwrap(), -0.15);

        let sls = ControlParams::sls(1.0, 1.0).unwrap();
        let b = trading_bias(&sls, &gp, 1.0, 0.15).unwrap();
        assert!((b + 0.139_991_663_888_392_77).abs() < 1e-15);
        assert!(trading_bias(&sls, &gp, 0.0, 0.15).is_err());
    }

    #[test]
    fn mse_examples() {
        let cp = ControlParams::new(1.0, 2.0, 0.7, 1.3).unwrap();
        let flat = gbm(0.1, 0.0);
        let b = trading_bias(&cp, &flat, 1.0, 0.15).unwrap();
        assert_eq!(trading_mse(&cp, &flat, 1.0, 0.15).unwrap(), b * b);
        let e = expected_gain(&cp, &flat, 1.0).unwrap();
        assert_eq!(trading_mse(&cp, &flat, 1.0, e).unwrap(), 0.0);
    }

    #[test]
    fn single_point_grid() {
        let grid = GridSpec::new(alloc::vec![2.0], alloc::vec![0.5], alloc::vec![3.0]).unwrap();
        let r = grid_search(
            &gbm(0.1, 0.2),
            1.0,
            &TargetPolicy::Fixed(0.15),
            &grid,
            Objective::Mse,
            1.0,
        )
        .unwrap();
        assert_eq!(
            (r.params.feedback_gain(), r.params.alpha(), r.params.beta()),
            (2.0, 0.5, 3.0)
        );
        assert_eq!(r.evaluated, 1);
    }

    #[test]
    fn bias_search_matches_independent_enumeration() {
        let gp = gbm(0.1, 0.0);
        let r = grid_search(
            &gp,
            1.0,
            &TargetPolicy::Fixed(0.15),
            &GridSpec::default(),
            Objective::BiasSquared,
            1.0,
        )
        .unwrap();
        // independent scan: |E g - g*| written out from the closed form
        let mut best = (f64::INFINITY, (0.0, 0.0, 0.0));
        for i in 1..=10 {
            for j in 1..=10 {
                for l in 1..=10 {
                    let (k, a, b) = (0.5 * i as f64, 0.5 * j as f64, 0.5 * l as f64);
                    let eg =
                        ((k * 0.1f64).exp() - 1.0 + a / b * ((-b * k * 0.1f64).exp() - 1.0)) / k;
                    let d = (eg - 0.15).abs();
                    if d < best.0 - 1e-13 {
                        best = (d, (k, a, b));
                    }
                }
            }
        }
        assert_eq!(
            (r.params.feedback_gain(), r.params.alpha(), r.params.beta()),
            best.1
        );
    }

    #[test]
    fn objectives_coincide_without_volatility() {
        let gp = gbm(0.08, 0.0);
        let grid = GridSpec::default();
        let policy = TargetPolicy::Fixed(0.05);
        let b = grid_search(&gp, 1.0, &policy, &grid, Objective::BiasSquared, 1.0).unwrap();
        let m = grid_search(&gp, 1.0, &policy, &grid, Objective::Mse, 1.0).unwrap();
        assert_eq!(b.params, m.params);
    }

    #[test]
    fn mse_trades_expected_gain_for_lower_variance() {
        let policy = TargetPolicy::Fixed(0.15);
        let grid = GridSpec::default();
        let mut found = false;
        for sigma in [0.05, 0.1, 0.2, 0.4] {
            let gp = gbm(0.1, sigma);
            let b = grid_search(&gp, 1.0, &policy, &grid, Objective::BiasSquared, 1.0).unwrap();
            let m = grid_search(&gp, 1.0, &policy, &grid, Objective::Mse, 1.0).unwrap();
            found |= m.expected_gain < b.expected_gain && m.expected_gain < 0.15;
        }
        assert!(found);
    }

    #[test]
    fn tie_break_prefers_smallest_parameters() {
        // with μ = 0 every candidate has E g = 0 and the same bias
        let gp = gbm(0.0, 0.2);
        let r = grid_search(
            &gp,
            1.0,
            &TargetPolicy::Fixed(0.15),
            &GridSpec::default(),
            Objective::BiasSquared,
            1.0,
        )
        .unwrap();
        assert_eq!(
            (r.params.feedback_gain(), r.params.alpha(), r.params.beta()),
            (0.5, 0.5, 0.5)
        );
    }

    #[test]
    fn better_is_order_independent() {
        let problem = SearchProblem::new(
            &gbm(0.0, 0.2),
            1.0,
            &TargetPolicy::Fixed(0.1),
            Objective::BiasSquared,
            1.0,
        )
        .unwrap();
        let a = problem.evaluate(1.0, 2.0, 3.0).unwrap();
        let b = problem.evaluate(1.0, 1.0, 4.0).unwrap();
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.better(b), b);
        assert_eq!(b.better(a), b);
    }
}
