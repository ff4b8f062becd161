use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a GSLS controller.
///
/// The long side starts at `I0` with feedback `K`; the short side starts at
/// `-α I0` with feedback `β K`. Every field is strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawControlParams", into = "RawControlParams")]
pub struct ControlParams {
    initial_investment: f64,
    feedback_gain: f64,
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawControlParams {
    initial_investment: f64,
    feedback_gain: f64,
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawControlParams> for ControlParams {
    type Error = Error;

    fn try_from(raw: RawControlParams) -> Result<Self> {
        ControlParams::new(
            raw.initial_investment,
            raw.feedback_gain,
            raw.alpha,
            raw.beta,
        )
    }
}

impl From<ControlParams> for RawControlParams {
    fn from(p: ControlParams) -> Self {
        RawControlParams {
            initial_investment: p.initial_investment,
            feedback_gain: p.feedback_gain,
            alpha: p.alpha,
            beta: p.beta,
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(alloc::format!(
            "{name} must be finite and > 0, got {value}"
        )))
    }
}

impl ControlParams {
    pub fn new(initial_investment: f64, feedback_gain: f64, alpha: f64, beta: f64) -> Result<Self> {
        check_positive("initial investment", initial_investment)?;
        check_positive("feedback gain K", feedback_gain)?;
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(ControlParams {
            initial_investment,
            feedback_gain,
            alpha,
            beta,
        })
    }

    /// Classical SLS controller (`α = β = 1`).
    pub fn sls(initial_investment: f64, feedback_gain: f64) -> Result<Self> {
        Self::new(initial_investment, feedback_gain, 1.0, 1.0)
    }

    /// Same controller with a different initial investment.
    pub fn with_initial_investment(self, initial_investment: f64) -> Result<Self> {
        Self::new(
            initial_investment,
            self.feedback_gain,
            self.alpha,
            self.beta,
        )
    }

    pub fn initial_investment(&self) -> f64 {
        self.initial_investment
    }

    pub fn feedback_gain(&self) -> f64 {
        self.feedback_gain
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `K_L = K`.
    pub fn long_feedback(&self) -> f64 {
        self.feedback_gain
    }

    /// `K_S = β K`.
    pub fn short_feedback(&self) -> f64 {
        self.beta * self.feedback_gain
    }

    /// Short-side initial investment magnitude, `α I0`.
    pub fn short_initial_investment(&self) -> f64 {
        self.alpha * self.initial_investment
    }

    pub fn is_sls(&self) -> bool {
        self.alpha == 1.0 && self.beta == 1.0
    }
}

impl fmt::Display for ControlParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "I0={} K={} alpha={} beta={}",
            self.initial_investment, self.feedback_gain, self.alpha, self.beta
        )
    }
}

/// Price relative to its initial value, `q = p(t) / p(0) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PriceRatio(f64);

impl PriceRatio {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 {
            Ok(PriceRatio(q))
        } else {
            Err(Error::domain(alloc::format!(
                "price ratio must be finite and > 0, got {q}"
            )))
        }
    }

    pub fn from_prices(initial: f64, current: f64) -> Result<Self> {
        if initial.is_nan() || initial <= 0.0 {
            return Err(Error::domain(alloc::format!(
                "initial price must be > 0, got {initial}"
            )));
        }
        Self::new(current / initial)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn ln(self) -> f64 {
        crate::math::ln(self.0)
    }
}

impl TryFrom<f64> for PriceRatio {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        PriceRatio::new(q)
    }
}

impl From<PriceRatio> for f64 {
    fn from(q: PriceRatio) -> f64 {
        q.0
    }
}
