//! Rayon drivers. Work is split freely; results are combined either in input
//! order or through an order-independent reduction, so the output never
//! depends on scheduling.

use gsls_core::backtest::OptimizerConfig;
use gsls_core::optimizer::SearchProblem;
use gsls_core::{GridPoint, GridSpec, OptimizationResult, PriceSeries, Result, SeriesReport};
use rayon::prelude::*;

use crate::error::CliError;

/// Runs `f` on a pool of `jobs` threads (0 picks the rayon default).
pub fn with_jobs<R: Send>(
    jobs: usize,
    f: impl FnOnce() -> R + Send,
) -> std::result::Result<R, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Parallel exhaustive search. Same result as [`SearchProblem::search`],
/// tie-breaks included, because [`GridPoint::better`] is associative and
/// commutative.
pub fn par_search(problem: &SearchProblem, grid: &GridSpec) -> Result<OptimizationResult> {
    grid.validate()?;
    let points: Vec<(f64, f64, f64)> = grid.points().collect();
    let best = points
        .par_iter()
        .map(|&(k, a, b)| problem.evaluate(k, a, b))
        .try_reduce_with(|x, y| Ok(x.better(y)))
        .expect("validated grid is non-empty")?;
    Ok(problem.result(best, points.len()))
}

/// Every grid point, in grid order.
pub fn par_table(problem: &SearchProblem, grid: &GridSpec) -> Result<Vec<GridPoint>> {
    grid.validate()?;
    let points: Vec<(f64, f64, f64)> = grid.points().collect();
    points
        .par_iter()
        .map(|&(k, a, b)| problem.evaluate(k, a, b))
        .collect()
}

/// Applies `f` to every series; results come back in input order.
pub fn par_map_series<F>(series: &[PriceSeries], f: F) -> Vec<Result<SeriesReport>>
where
    F: Fn(&PriceSeries) -> Result<SeriesReport> + Sync + Send,
{
    series.par_iter().map(f).collect()
}

/// Parallel counterpart of [`OptimizerConfig::optimize`].
pub fn par_optimize(
    config: &OptimizerConfig,
    gp: &gsls_core::GbmParams,
) -> Result<OptimizationResult> {
    let problem = SearchProblem::new(
        gp,
        config.horizon,
        &config.policy,
        config.objective,
        config.initial_investment,
    )?;
    par_search(&problem, &config.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gsls_core::{GbmParams, Objective, TargetPolicy};

    #[test]
    fn matches_sequential_search() {
        for (mu, sigma, obj) in [
            (0.1, 0.0, Objective::BiasSquared),
            (0.1, 0.2, Objective::Mse),
            (-0.05, 0.3, Objective::BiasSquared),
            (0.0, 0.1, Objective::Mse),
        ] {
            let gp = GbmParams::daily(mu, sigma).unwrap();
            let problem =
                SearchProblem::new(&gp, 1.0, &TargetPolicy::Fixed(0.15), obj, 1.0).unwrap();
            let grid = GridSpec::default();
            let seq = problem.search(&grid).unwrap();
            let par = with_jobs(4, || par_search(&problem, &grid))
                .unwrap()
                .unwrap();
            assert_eq!(seq, par);
            let table = with_jobs(3, || par_table(&problem, &grid))
                .unwrap()
                .unwrap();
            assert_eq!(table, problem.evaluate_grid(&grid).unwrap());
        }
    }
}
