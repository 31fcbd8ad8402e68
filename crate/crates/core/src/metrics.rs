//! Evaluation metrics. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Rmae,
    Perplexity,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Rmae => "rmae",
            Metric::Perplexity => "perplexity",
        }
    }
}

fn check_pair(op: &'static str, predictions: &[f64], targets: &[f64]) -> Result<()> {
    if predictions.is_empty() {
        return Err(Error::Empty { op });
    }
    if predictions.len() != targets.len() {
        return Err(Error::shape(
            op,
            format!("{} predictions for {} targets", predictions.len(), targets.len()),
        ));
    }
    Ok(())
}

fn abs_error_sum(predictions: &[f64], targets: &[f64]) -> f64 {
    predictions.iter().zip(targets).map(|(p, y)| (y - p).abs()).sum()
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair("mae", predictions, targets)?;
    Ok(abs_error_sum(predictions, targets) / predictions.len() as f64)
}

/// Absolute error normalized by the target sum.
pub fn rmae(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    check_pair("rmae", predictions, targets)?;
    let total: f64 = targets.iter().sum();
    if total == 0.0 {
        return Err(Error::Metric("rmae with zero target sum".into()));
    }
    Ok(abs_error_sum(predictions, targets) / total)
}

/// `exp(mean NLL)` of per-token negative log-likelihoods.
///
/// The mean is taken relative to the first value, so a constant input has
/// an exact mean, and the exponential is inverted consistently with `ln`
/// (see [`exp_inverting_ln`]). A uniform model over `V` classes therefore
/// reports exactly `V`.
pub fn perplexity(nlls: &[f64]) -> Result<f64> {
    let first = *nlls.first().ok_or(Error::Empty { op: "perplexity" })?;
    let offset: f64 = nlls.iter().map(|x| x - first).sum();
    Ok(exp_inverting_ln(first + offset / nlls.len() as f64))
}

/// `exp(x)`, snapped to the double with the shortest mantissa among the
/// few neighbours of `exp(x)` whose natural log rounds back to `x`.
///
/// `exp(ln(v))` is generally a few ulps away from `v` because `ln(v)` is
/// rounded; this picks the simplest preimage instead, which is `v` itself
/// for integers and other short-mantissa values. The result never moves
/// more than 16 ulps from `exp(x)`.
pub fn exp_inverting_ln(x: f64) -> f64 {
    let y = x.exp();
    if !y.is_finite() || y <= 0.0 {
        return y;
    }
    let bits = y.to_bits() as i64;
    // (trailing zeros, -distance) ranks candidates; ties keep the closest.
    let mut best: Option<((u32, i64), f64)> = None;
    for delta in -16i64..=16 {
        let cand = f64::from_bits((bits + delta) as u64);
        if cand.ln() != x {
            continue;
        }
        let rank = ((cand.to_bits() & ((1u64 << 52) - 1)).trailing_zeros(), -delta.abs());
        if best.is_none_or(|(r, _)| rank > r) {
            best = Some((rank, cand));
        }
    }
    best.map_or(y, |(_, v)| v)
}
