//! Plot-ready tables. Nothing here renders; each function returns rows that
//! the CLI writes as CSV.

use gsls_core::{gain_total_closed, ControlParams, PriceRatio};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (n * width)`; integrates to 1 over all bins.
    pub density: f64,
}

/// Equal-width histogram over the observed range. The last bin is closed on
/// the right. A degenerate range is widened to unit width around the value.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<Bin>> {
    if bins == 0 {
        return Err(CliError::Usage("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(CliError::Data("histogram of 0 observations".into()));
    }
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(CliError::Data(format!("non-finite observation {bad}")));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let n = values.len() as f64;
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            lo: lo + i as f64 * width,
            hi: if i + 1 == bins {
                hi
            } else {
                lo + (i + 1) as f64 * width
            },
            count,
            density: count as f64 / (n * width),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "K")]
    pub feedback_gain: f64,
    pub alpha: f64,
    pub beta: f64,
    pub q: f64,
    pub gain: f64,
}

fn point(i0: f64, k: f64, alpha: f64, beta: f64, q: f64) -> Result<CurvePoint> {
    let p = ControlParams::new(i0, k, alpha, beta)?;
    let ratio = PriceRatio::new(q)?;
    Ok(CurvePoint {
        feedback_gain: k,
        alpha,
        beta,
        q,
        gain: gain_total_closed(&p, ratio),
    })
}

/// Closed-form gain against the price ratio `q`, one curve per `K`.
pub fn gain_vs_q(
    i0: f64,
    ks: &[f64],
    alpha: f64,
    beta: f64,
    qs: &[f64],
) -> Result<Vec<CurvePoint>> {
    let mut rows = Vec::with_capacity(ks.len() * qs.len());
    for &k in ks {
        for &q in qs {
            rows.push(point(i0, k, alpha, beta, q)?);
        }
    }
    Ok(rows)
}

/// Closed-form gain against `K`, one curve per `q`.
pub fn gain_vs_k(
    i0: f64,
    qs: &[f64],
    alpha: f64,
    beta: f64,
    ks: &[f64],
) -> Result<Vec<CurvePoint>> {
    let mut rows = Vec::with_capacity(ks.len() * qs.len());
    for &q in qs {
        for &k in ks {
            rows.push(point(i0, k, alpha, beta, q)?);
        }
    }
    Ok(rows)
}
