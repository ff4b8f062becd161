//! Closed-form gain of the GSLS controller under deterministic price
//! evolution, as a function of the price ratio `q = p(t)/p(0)`.
//!
//! ```text
//! g_L(q) = (I0 / K)        (q^K      - 1)
//! g_S(q) = (α I0 / (β K))  (q^(-βK)  - 1)
//! g(q)   = g_L(q) + g_S(q)
//! ```
//!
//! Powers are evaluated as `expm1(x ln q)` so small exponents keep full
//! relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::params::{ControlParams, PriceRatio};

/// Long-side gain at log price ratio `log_ratio = ln q`.
#[inline]
pub fn gain_long_log(params: &ControlParams, log_ratio: f64) -> f64 {
    let k = params.feedback_gain();
    params.initial_investment() / k * math::expm1(k * log_ratio)
}

/// Short-side gain at log price ratio `log_ratio = ln q`.
#[inline]
pub fn gain_short_log(params: &ControlParams, log_ratio: f64) -> f64 {
    let k_short = params.beta() * params.feedback_gain();
    (params.alpha() * params.initial_investment()) / k_short * math::expm1(-k_short * log_ratio)
}

/// Total gain at log price ratio. Shared by the deterministic closed form and
/// the GBM expected gain, which evaluates it at `ln q = μ t`.
#[inline]
pub fn gain_total_log(params: &ControlParams, log_ratio: f64) -> f64 {
    gain_long_log(params, log_ratio) + gain_short_log(params, log_ratio)
}

pub fn gain_long_closed(params: &ControlParams, q: PriceRatio) -> f64 {
    gain_long_log(params, q.ln())
}

pub fn gain_short_closed(params: &ControlParams, q: PriceRatio) -> f64 {
    gain_short_log(params, q.ln())
}

/// `g(q) = (I0/K) [q^K - 1 + (α/β)(q^(-βK) - 1)]`, computed as
/// `gain_long_closed + gain_short_closed`.
pub fn gain_total_closed(params: &ControlParams, q: PriceRatio) -> f64 {
    gain_total_log(params, q.ln())
}

/// `I0 (1 - α) ln q`, a lower bound on [`gain_total_closed`] for every `K`
/// and `β`.
pub fn gain_lower_bound(params: &ControlParams, q: PriceRatio) -> f64 {
    params.initial_investment() * (1.0 - params.alpha()) * q.ln()
}

/// True when `(1 - α) ln q >= 0`, in which case the gain is non-negative for
/// every `K, β > 0`.
pub fn positive_gain_condition(params: &ControlParams, q: PriceRatio) -> bool {
    (1.0 - params.alpha()) * q.ln() >= 0.0
}

/// Partial derivatives of the gain with respect to the long and short
/// feedback gains `K_L = K` and `K_S = β K`. Both are non-negative.
///
/// ```text
/// ∂g/∂K_L = I0   (q^K_L  (K_L ln q - 1) + 1) / K_L^2
/// ∂g/∂K_S = α I0 (q^-K_S (-K_S ln q - 1) + 1) / K_S^2
/// ```
pub fn feedback_sensitivity(params: &ControlParams, q: PriceRatio) -> (f64, f64) {
    let ln_q = q.ln();
    let k_long = params.long_feedback();
    let k_short = params.short_feedback();
    let i0 = params.initial_investment();
    let d_long = i0 * (math::exp(k_long * ln_q) * (k_long * ln_q - 1.0) + 1.0) / (k_long * k_long);
    let d_short =
        params.alpha() * i0 * (math::exp(-k_short * ln_q) * (-k_short * ln_q - 1.0) + 1.0)
            / (k_short * k_short);
    (d_long, d_short)
}

/// Zeros and global minimum of the gain curve when `β = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Beta1Structure {
    /// Always 1: no price change, no gain.
    pub unit_root: f64,
    /// `α^(1/K)`.
    pub alpha_root: f64,
    /// `α^(1/(2K))`, between the two roots.
    pub minimizer: f64,
    /// `-I0 (√α - 1)^2 / K`.
    pub minimum: f64,
}

pub fn beta1_roots(params: &ControlParams) -> Result<Beta1Structure> {
    if params.beta() != 1.0 {
        return Err(Error::Precondition(alloc::format!(
            "root structure requires beta = 1, got {}",
            params.beta()
        )));
    }
    let k = params.feedback_gain();
    let alpha = params.alpha();
    let shortfall = math::sqrt(alpha) - 1.0;
    Ok(Beta1Structure {
        unit_root: 1.0,
        alpha_root: math::powf(alpha, 1.0 / k),
        minimizer: math::powf(alpha, 1.0 / (2.0 * k)),
        minimum: -params.initial_investment() * shortfall * shortfall / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> PriceRatio {
        PriceRatio::new(v).unwrap()
    }

    fn params(i0: f64, k: f64, alpha: f64, beta: f64) -> ControlParams {
        ControlParams::new(i0, k, alpha, beta).unwrap()
    }

    /// Integrates `dg = (dp/p) I(g)` along a geometric path from 1 to `q_end`
    /// with explicit Euler steps, doubling the step count until two
    /// successive Richardson-extrapolated results agree.
    fn integrate(investment: impl Fn(f64) -> f64, q_end: f64) -> f64 {
        let run = |n: usize| {
            let h = q_end.ln() / n as f64;
            let mut g = 0.0;
            let mut p = 1.0_f64;
            for i in 0..n {
                let next = ((i + 1) as f64 * h).exp();
                g += (next - p) / p * investment(g);
                p = next;
            }
            g
        };
        let mut n = 1_000;
        let mut prev = 2.0 * run(2 * n) - run(n);
        loop {
            n *= 2;
            let cur = 2.0 * run(2 * n) - run(n);
            if (cur - prev).abs() < 1e-9 * cur.abs().max(1.0) || n > 1 << 22 {
                return cur;
            }
            prev = cur;
        }
    }

    #[test]
    fn long_gain_examples() {
        let p = params(1.0, 1.0, 1.0, 1.0);
        assert_eq!(gain_long_closed(&p, q(1.0)), 0.0);
        assert!((gain_long_closed(&p, q(2.0)) - 1.0).abs() < 1e-15);

        let p = params(1.0, 3.0, 1.0, 1.0);
        let oracle = integrate(|g| 1.0 + 3.0 * g, 1.5);
        assert!((oracle - 0.791_666_666_7).abs() < 1e-7, "oracle {oracle}");
        assert!((gain_long_closed(&p, q(1.5)) - oracle).abs() < 1e-7);
    }

    #[test]
    fn short_gain_examples() {
        assert_eq!(gain_short_closed(&params(1.0, 1.0, 1.0, 1.0), q(1.0)), 0.0);
        let g = gain_short_closed(&params(1.0, 1.0, 0.5, 1.0), q(2.0));
        assert!((g + 0.25).abs() < 1e-15);

        let p = params(1.0, 1.0, 2.0, 2.0);
        let oracle = integrate(|g| -2.0 - 2.0 * g, 0.5);
        assert!((oracle - 3.0).abs() < 1e-7, "oracle {oracle}");
        assert!((gain_short_closed(&p, q(0.5)) - oracle).abs() < 1e-7);
    }

    #[test]
    fn total_gain_examples() {
        let sls = params(1.0, 1.0, 1.0, 1.0);
        assert!((gain_total_closed(&sls, q(2.0)) - 0.5).abs() < 1e-15);
        for k in [0.1, 1.0, 2.5, 7.0] {
            assert_eq!(gain_total_closed(&params(1.0, k, 1.0, 1.0), q(1.0)), 0.0);
        }

        let p = params(1.0, 1.0, 0.5, 1.0);
        let long = integrate(|g| 1.0 + g, 2.0);
        let short = integrate(|g| -0.5 - g, 2.0);
        assert!((long + short - 0.75).abs() < 1e-7);
        assert!((gain_total_closed(&p, q(2.0)) - 0.75).abs() < 1e-14);
    }

    #[test]
    fn decomposition_is_exact() {
        let p = params(3.0, 2.2, 0.7, 1.9);
        for v in [0.2, 0.9, 1.0, 1.3, 4.0] {
            let r = q(v);
            assert_eq!(
                gain_total_closed(&p, r),
                gain_long_closed(&p, r) + gain_short_closed(&p, r)
            );
        }
    }

    #[test]
    fn beta1_examples() {
        let s = beta1_roots(&params(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!((s.unit_root, s.alpha_root, s.minimizer), (1.0, 1.0, 1.0));
        assert_eq!(s.minimum, 0.0);

        let s = beta1_roots(&params(1.0, 2.0, 4.0, 1.0)).unwrap();
        assert!((s.alpha_root - 2.0).abs() < 1e-15);
        assert!((s.minimizer - 2f64.sqrt()).abs() < 1e-15);
        assert!((s.minimum + 0.5).abs() < 1e-15);

        let p = params(1.0, 1.0, 0.25, 1.0);
        let s = beta1_roots(&p).unwrap();
        assert!((s.alpha_root - 0.25).abs() < 1e-15);
        assert!((s.minimum + 0.25).abs() < 1e-15);
        // golden-section search over q in (0.25, 1)
        let (mut a, mut b) = (0.25_f64, 1.0_f64);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if gain_total_closed(&p, q(c)) < gain_total_closed(&p, q(d)) {
                b = d;
            } else {
                a = c;
            }
        }
        let q_min = 0.5 * (a + b);
        assert!((q_min - s.minimizer).abs() < 1e-6);
        assert!((gain_total_closed(&p, q(q_min)) - s.minimum).abs() < 1e-12);
    }

    #[test]
    fn beta1_requires_unit_beta() {
        assert!(matches!(
            beta1_roots(&params(1.0, 1.0, 1.0, 2.0)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn positive_gain_condition_examples() {
        for v in [0.1, 1.0, 3.0] {
            assert!(positive_gain_condition(&params(1.0, 2.0, 1.0, 3.0), q(v)));
        }
        assert!(positive_gain_condition(&params(1.0, 1.0, 0.5, 1.0), q(2.0)));

        let p = params(1.0, 0.5, 2.0, 1.0);
        assert!(!positive_gain_condition(&p, q(2.0)));
        let g = gain_total_closed(&p, q(2.0));
        // (1/0.5) [√2 - 1 + 2 (1/√2 - 1)]
        assert!((g + 0.343_145_750_507_619_8).abs() < 1e-12, "{g}");
    }

    #[test]
    fn sensitivity_matches_central_difference() {
        let p = params(1.3, 1.7, 0.6, 2.1);
        for v in [0.3, 0.8, 1.4, 3.0] {
            let r = q(v);
            let (dl, ds) = feedback_sensitivity(&p, r);
            let h = 1e-5;
            let at = |kl: f64, ks: f64| gain_total_closed(&params(1.3, kl, 0.6, ks / kl), r);
            let (kl, ks) = (p.long_feedback(), p.short_feedback());
            let fd_l = (at(kl + h, ks) - at(kl - h, ks)) / (2.0 * h);
            let fd_s = (at(kl, ks + h) - at(kl, ks - h)) / (2.0 * h);
            assert!((fd_l - dl).abs() <= 1e-6 * dl.abs(), "{fd_l} vs {dl}");
            assert!((fd_s - ds).abs() <= 1e-6 * ds.abs(), "{fd_s} vs {ds}");
        }
    }
}
