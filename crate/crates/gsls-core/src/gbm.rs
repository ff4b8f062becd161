//! Geometric Brownian motion: `dp/p = μ dt + σ dW`.
//!
//! Under GBM the long investment `I_L` is itself a GBM with drift `Kμ` and
//! volatility `Kσ`, and the short investment magnitude is a GBM with drift
//! `-βKμ` and volatility `-βKσ`. Writing `X = I_L / I0` and
//! `Y = I_S / (-α I0)`, the gain is `g = (I0/K)(X - 1) + (α I0/(βK))(Y - 1)`
//! with
//!
//! ```text
//! E X = e^{Kμt}              Var X = e^{2Kμt} (e^{K²σ²t} - 1)
//! E Y = e^{-βKμt}            Var Y = e^{-2βKμt} (e^{β²K²σ²t} - 1)
//! Cov(X, Y) = e^{(1-β)Kμt} (e^{-βK²σ²t} - 1)
//! ```

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gain::gain_total_log;
use crate::math;
use crate::params::ControlParams;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// `μ`, per unit time.
    pub drift: f64,
    /// `σ`, per square-root unit time.
    pub volatility: f64,
    /// Observation spacing in the same time unit.
    pub dt: f64,
}

impl GbmParams {
    pub fn new(drift: f64, volatility: f64, dt: f64) -> Result<Self> {
        if !drift.is_finite() {
            return Err(Error::domain(format!("drift must be finite, got {drift}")));
        }
        if !(volatility.is_finite() && volatility >= 0.0) {
            return Err(Error::domain(format!(
                "volatility must be finite and >= 0, got {volatility}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::domain(format!(
                "time step must be finite and > 0, got {dt}"
            )));
        }
        Ok(GbmParams {
            drift,
            volatility,
            dt,
        })
    }

    /// Annualized parameters observed once per trading day.
    pub fn daily(drift: f64, volatility: f64) -> Result<Self> {
        Self::new(drift, volatility, 1.0 / TRADING_DAYS_PER_YEAR)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmPath {
    pub params: GbmParams,
    pub initial_price: f64,
    pub seed: u64,
    /// `steps + 1` prices, starting with `initial_price`.
    pub prices: Vec<f64>,
}

impl GbmPath {
    pub fn steps(&self) -> usize {
        self.prices.len() - 1
    }
}

/// Exact log-normal stepping:
/// `p_{n+1} = p_n exp((μ - σ²/2) Δt + σ √Δt Z_n)`.
pub fn simulate_path(
    params: &GbmParams,
    initial_price: f64,
    steps: usize,
    seed: u64,
) -> Result<GbmPath> {
    let params = GbmParams::new(params.drift, params.volatility, params.dt)?;
    if !(initial_price.is_finite() && initial_price > 0.0) {
        return Err(Error::input(format!(
            "initial price must be > 0, got {initial_price}"
        )));
    }
    if steps == 0 {
        return Err(Error::input("path needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift_step = (params.drift - 0.5 * params.volatility * params.volatility) * params.dt;
    let vol_step = params.volatility * math::sqrt(params.dt);
    let mut prices = Vec::with_capacity(steps + 1);
    let mut price = initial_price;
    prices.push(price);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        price *= math::exp(drift_step + vol_step * z);
        prices.push(price);
    }
    Ok(GbmPath {
        params,
        initial_price,
        seed,
        prices,
    })
}

/// Maximum-likelihood GBM fit from equally spaced prices.
///
/// With log returns `r_i`: `σ̂² = mean((r_i - r̄)²) / Δt` (divisor `n`) and
/// `μ̂ = r̄ / Δt + σ̂² / 2`.
pub fn estimate_mle(prices: &[f64], dt: f64) -> Result<GbmParams> {
    if prices.len() < 3 {
        return Err(Error::input(format!(
            "need at least 3 prices to estimate GBM parameters, got {}",
            prices.len()
        )));
    }
    if let Some(i) = prices.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::input(format!(
            "price at index {i} must be finite and > 0"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain(format!("time step must be > 0, got {dt}")));
    }
    let returns: Vec<f64> = prices.windows(2).map(|w| math::ln(w[1] / w[0])).collect();
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    let sigma2 = var / dt;
    let params = GbmParams::new(mean / dt + 0.5 * sigma2, math::sqrt(sigma2), dt)
        .map_err(|e| Error::Estimation(format!("{e}")))?;
    Ok(params)
}

/// Asymptotic standard errors `(se(μ̂), se(σ̂))` of [`estimate_mle`] from
/// `returns` log returns: `σ/√(nΔt)` and `σ/√(2n)`.
pub fn mle_standard_errors(params: &GbmParams, returns: usize) -> (f64, f64) {
    let n = returns as f64;
    (
        params.volatility / math::sqrt(n * params.dt),
        params.volatility / math::sqrt(2.0 * n),
    )
}

fn check_horizon(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "horizon must be finite and >= 0, got {t}"
        )))
    }
}

/// `E g(t) = (I0/K) [e^{Kμt} - 1 + (α/β)(e^{-βKμt} - 1)]`, the deterministic
/// gain evaluated at `q = e^{μt}`.
pub fn expected_gain(cp: &ControlParams, gp: &GbmParams, t: f64) -> Result<f64> {
    check_horizon(t)?;
    Ok(expected_gain_at(cp, gp.drift, t))
}

pub(crate) fn expected_gain_at(cp: &ControlParams, drift: f64, t: f64) -> f64 {
    gain_total_log(cp, drift * t)
}

/// `Var g(t)`; see the module docs for the moment decomposition. Tiny
/// negative values from cancellation are clamped to zero.
pub fn gain_variance(cp: &ControlParams, gp: &GbmParams, t: f64) -> Result<f64> {
    check_horizon(t)?;
    Ok(gain_variance_at(cp, gp, t))
}

pub(crate) fn gain_variance_at(cp: &ControlParams, gp: &GbmParams, t: f64) -> f64 {
    let k_long = cp.long_feedback();
    let k_short = cp.short_feedback();
    let mu_t = gp.drift * t;
    let s2t = gp.volatility * gp.volatility * t;
    let a = cp.initial_investment() / k_long;
    let b = cp.short_initial_investment() / k_short;
    let var_long = math::exp(2.0 * k_long * mu_t) * math::expm1(k_long * k_long * s2t);
    let var_short = math::exp(-2.0 * k_short * mu_t) * math::expm1(k_short * k_short * s2t);
    let cov = math::exp((k_long - k_short) * mu_t) * math::expm1(-k_long * k_short * s2t);
    let var = a * a * var_long + b * b * var_short + 2.0 * a * b * cov;
    var.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::gain_total_closed;
    use crate::params::PriceRatio;

    #[test]
    fn zero_noise_paths() {
        let gp = GbmParams::daily(0.1, 0.0).unwrap();
        let path = simulate_path(&gp, 50.0, 252, 9).unwrap();
        for (n, p) in path.prices.iter().enumerate() {
            let exact = 50.0 * (0.1 * n as f64 / 252.0).exp();
            assert!((p - exact).abs() < 1e-12 * exact);
        }
        let flat = simulate_path(&GbmParams::daily(0.0, 0.0).unwrap(), 3.0, 10, 1).unwrap();
        assert!(flat.prices.iter().all(|p| *p == 3.0));
        assert_eq!(flat.steps(), 10);
    }

    #[test]
    fn simulation_is_seeded() {
        let gp = GbmParams::daily(0.05, 0.3).unwrap();
        let a = simulate_path(&gp, 1.0, 100, 42).unwrap();
        let b = simulate_path(&gp, 1.0, 100, 42).unwrap();
        let c = simulate_path(&gp, 1.0, 100, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.prices, c.prices);
    }

    #[test]
    fn simulation_rejects_bad_input() {
        let gp = GbmParams::daily(0.05, 0.3).unwrap();
        assert!(simulate_path(&gp, 1.0, 0, 1).is_err());
        assert!(simulate_path(&gp, 0.0, 5, 1).is_err());
        assert!(GbmParams::new(0.0, -0.1, 1.0).is_err());
        assert!(GbmParams::new(0.0, 0.1, 0.0).is_err());
    }

    #[test]
    fn terminal_mean_matches_lognormal() {
        let gp = GbmParams::daily(0.1, 0.2).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for seed in 0..n {
            let path = simulate_path(&gp, 1.0, 252, seed).unwrap();
            let ratio = *path.prices.last().unwrap();
            sum += ratio;
            sum_sq += ratio * ratio;
        }
        let mean = sum / n as f64;
        let se = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 0.1f64.exp()).abs() < 3.0 * se, "{mean} ± {se}");
    }

    #[test]
    fn mle_on_deterministic_path() {
        let dt = 1.0 / 252.0;
        let prices: Vec<f64> = (0..300)
            .map(|n| 20.0 * (0.07 * n as f64 * dt).exp())
            .collect();
        let est = estimate_mle(&prices, dt).unwrap();
        assert!((est.drift - 0.07).abs() < 1e-9);
        assert!(est.volatility < 1e-9);
    }

    #[test]
    fn mle_on_alternating_returns() {
        let dt = 1.0 / 252.0;
        let c: f64 = 0.01;
        let prices: Vec<f64> = (0..101)
            .map(|n| if n % 2 == 0 { 1.0 } else { c.exp() })
            .collect();
        let est = estimate_mle(&prices, dt).unwrap();
        assert!((est.volatility.powi(2) - c * c / dt).abs() < 1e-12);
        assert!((est.drift - c * c / (2.0 * dt)).abs() < 1e-12);
    }

    #[test]
    fn mle_rejects_bad_input() {
        assert!(estimate_mle(&[1.0, 2.0], 1.0).is_err());
        assert!(estimate_mle(&[1.0, 2.0, 0.0], 1.0).is_err());
        assert!(estimate_mle(&[1.0, 2.0, 3.0], 0.0).is_err());
    }

    #[test]
    fn mle_sampling_distribution() {
        let gp = GbmParams::daily(0.1, 0.2).unwrap();
        let steps = 2520;
        let seeds = 1000;
        let se_mu = 0.2 / (steps as f64 * gp.dt).sqrt();
        let se_sigma = 0.2 / (2.0 * steps as f64).sqrt();
        let (mut mu_ok, mut sigma_ok) = (0, 0);
        for seed in 0..seeds {
            let path = simulate_path(&gp, 1.0, steps, 10_000 + seed).unwrap();
            let est = estimate_mle(&path.prices, gp.dt).unwrap();
            mu_ok += usize::from((est.drift - 0.1).abs() <= 2.0 * se_mu);
            sigma_ok += usize::from((est.volatility - 0.2).abs() <= 2.0 * se_sigma);
        }
        let (mu_rate, sigma_rate) = (mu_ok as f64 / seeds as f64, sigma_ok as f64 / seeds as f64);
        assert!(mu_rate >= 0.95, "drift coverage {mu_rate}");
        assert!(sigma_rate >= 0.95, "volatility coverage {sigma_rate}");
    }

    #[test]
    fn expected_gain_examples() {
        let cp = ControlParams::new(2.0, 1.5, 0.3, 2.0).unwrap();
        let gp = GbmParams::daily(0.1, 0.2).unwrap();
        assert_eq!(expected_gain(&cp, &gp, 0.0).unwrap(), 0.0);
        let flat = GbmParams::daily(0.0, 0.4).unwrap();
        assert_eq!(expected_gain(&cp, &flat, 3.0).unwrap(), 0.0);

        let sls = ControlParams::sls(1.0, 1.0).unwrap();
        let e = expected_gain(&sls, &gp, 1.0).unwrap();
        assert!((e - (0.1f64.exp() + (-0.1f64).exp() - 2.0)).abs() < 1e-15);
        assert!((e - 0.010_008_336_111_607_23).abs() < 1e-15);
        assert!(expected_gain(&sls, &gp, -1.0).is_err());
    }

    #[test]
    fn expected_gain_is_closed_form_at_drift_ratio() {
        let cp = ControlParams::new(1.2, 2.5, 0.6, 1.7).unwrap();
        for mu in [-0.3, -0.05, 0.0, 0.12, 0.4] {
            let gp = GbmParams::daily(mu, 0.25).unwrap();
            for t in [0.5, 1.0, 2.0] {
                let e = expected_gain(&cp, &gp, t).unwrap();
                let q = PriceRatio::new((mu * t).exp()).unwrap();
                let g = gain_total_closed(&cp, q);
                assert!((e - g).abs() <= 1e-12 * g.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn variance_degenerate_cases() {
        let cp = ControlParams::new(1.0, 2.0, 0.5, 3.0).unwrap();
        assert_eq!(
            gain_variance(&cp, &GbmParams::daily(0.1, 0.0).unwrap(), 1.0).unwrap(),
            0.0
        );
        assert_eq!(
            gain_variance(&cp, &GbmParams::daily(0.1, 0.3).unwrap(), 0.0).unwrap(),
            0.0
        );
    }

    /// Exact moments of the discrete controller: each period multiplies
    /// `X` by `1 + K r` and `Y` by `1 - βK r`, with `1 + r` log-normal.
    /// As the period count grows these converge to the continuous moments.
    fn discrete_variance(cp: &ControlParams, gp: &GbmParams, t: f64, periods: u32) -> f64 {
        let dt = t / periods as f64;
        let m1 = (gp.drift * dt).exp();
        let m2 = ((2.0 * gp.drift + gp.volatility.powi(2)) * dt).exp();
        let (kl, ks) = (cp.long_feedback(), cp.short_feedback());
        let joint =
            |c0: f64, c1: f64, d0: f64, d1: f64| c0 * d0 + (c0 * d1 + c1 * d0) * m1 + c1 * d1 * m2;
        let n = periods as i32;
        let ex = ((1.0 - kl) + kl * m1).powi(n);
        let ey = ((1.0 + ks) - ks * m1).powi(n);
        let exx = joint(1.0 - kl, kl, 1.0 - kl, kl).powi(n);
        let eyy = joint(1.0 + ks, -ks, 1.0 + ks, -ks).powi(n);
        let exy = joint(1.0 - kl, kl, 1.0 + ks, -ks).powi(n);
        let a = cp.initial_investment() / kl;
        let b = cp.short_initial_investment() / ks;
        a * a * (exx - ex * ex) + b * b * (eyy - ey * ey) + 2.0 * a * b * (exy - ex * ey)
    }

    #[test]
    fn variance_is_the_fine_step_limit_of_discrete_moments() {
        for (i0, k, alpha, beta, mu, sigma) in [
            (1.0, 1.0, 1.0, 1.0, 0.1, 0.2),
            (1.0, 3.0, 0.5, 2.0, 0.1, 0.05),
            (2.0, 1.0, 2.0, 0.5, -0.1, 0.2),
            (1.0, 2.5, 1.5, 1.2, 0.0, 0.3),
        ] {
            let cp = ControlParams::new(i0, k, alpha, beta).unwrap();
            let gp = GbmParams::daily(mu, sigma).unwrap();
            let closed = gain_variance(&cp, &gp, 1.0).unwrap();
            let fine = discrete_variance(&cp, &gp, 1.0, 1 << 20);
            assert!((closed - fine).abs() < 1e-4 * closed, "{closed} vs {fine}");
        }
    }

    #[test]
    fn sls_variance_example() {
        // α=β=1, I0=K=1, μ=0.1, σ=0.2, t=1: e^{0.2}(e^{0.04}-1)(1 + e^{-0.4}) + 2(e^{-0.04}-1)
        let cp = ControlParams::sls(1.0, 1.0).unwrap();
        let gp = GbmParams::daily(0.1, 0.2).unwrap();
        let v = gain_variance(&cp, &gp, 1.0).unwrap();
        let by_hand = 0.2f64.exp() * 0.04f64.exp_m1()
            + (-0.2f64).exp() * 0.04f64.exp_m1()
            + 2.0 * (-0.04f64).exp_m1();
        assert!((v - by_hand).abs() < 1e-15);
        assert!((v - 0.004_838_306).abs() < 1e-8);
    }
}
