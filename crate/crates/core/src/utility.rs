//! Leontief service rates and α-fair provider utilities.

use std::cmp::Ordering;

use crate::error::{MarketError, Result};
use crate::model::Alpha;

/// Leontief service rate `min_r x_r / d_r`.
pub fn service_rate(bundle: &[f64], demand: &[f64]) -> Result<f64> {
    if bundle.len() != demand.len() {
        return Err(MarketError::DimensionMismatch { expected: demand.len(), actual: bundle.len() });
    }
    let mut rate = f64::INFINITY;
    for (&x, &d) in bundle.iter().zip(demand) {
        if !(d > 0.0) {
            return Err(MarketError::InvalidScenario(format!("base demand must be positive, got {d}")));
        }
        rate = rate.min(x.max(0.0) / d);
    }
    Ok(if rate.is_finite() { rate } else { 0.0 })
}

/// Value of the additive α-fair utility. Zero rates at `α ≥ 1` do not yield a
/// usable number, so they are reported as markers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    Finite(f64),
    /// `α > 1` with a zero rate on a positively weighted class.
    NegInfinity,
    /// `α = 1` product form with a zero rate.
    ZeroProduct,
}

impl Utility {
    pub fn as_f64(self) -> f64 {
        match self {
            Utility::Finite(v) => v,
            Utility::NegInfinity => f64::NEG_INFINITY,
            Utility::ZeroProduct => 0.0,
        }
    }
}

impl PartialOrd for Utility {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.as_f64().partial_cmp(&other.as_f64())
    }
}

fn check_inputs(weights: &[f64], rates: &[f64]) -> Result<()> {
    if weights.len() != rates.len() {
        return Err(MarketError::DimensionMismatch { expected: weights.len(), actual: rates.len() });
    }
    if let Some(&u) = rates.iter().find(|&&u| !(u >= 0.0)) {
        return Err(MarketError::NegativeRate(u));
    }
    Ok(())
}

fn check_alpha(alpha: Alpha) -> Result<()> {
    match alpha {
        Alpha::Finite(a) if !(a >= 0.0) => Err(MarketError::NegativeAlpha(a)),
        _ => Ok(()),
    }
}

/// Additive α-fair utility `Σ w u^{1-α}/(1-α)` with the usual special cases:
/// weighted sum at `α = 0`, product `Π u^w` at `α = 1`, `min u/w` at `α = ∞`
/// (with the default weights, `w = n` there).
pub fn sp_utility(alpha: Alpha, weights: &[f64], rates: &[f64]) -> Result<Utility> {
    check_inputs(weights, rates)?;
    check_alpha(alpha)?;
    let pairs = weights.iter().zip(rates).filter(|(&w, _)| w > 0.0);
    let value = match alpha {
        Alpha::Infinite => pairs.map(|(w, u)| u / w).fold(f64::INFINITY, f64::min),
        Alpha::Finite(0.0) => pairs.map(|(w, u)| w * u).sum(),
        Alpha::Finite(1.0) => {
            let mut log_sum = 0.0;
            for (w, &u) in pairs {
                if u == 0.0 {
                    return Ok(Utility::ZeroProduct);
                }
                log_sum += w * u.ln();
            }
            log_sum.exp()
        }
        Alpha::Finite(a) => {
            let rho = 1.0 - a;
            let mut sum = 0.0;
            for (w, &u) in pairs {
                if u == 0.0 && a > 1.0 {
                    return Ok(Utility::NegInfinity);
                }
                sum += w * u.powf(rho) / rho;
            }
            sum
        }
    };
    Ok(Utility::Finite(value))
}

/// Degree-one homogeneous aggregate `(Σ w u^{1-α})^{1/(1-α)}`.
///
/// At `α = 1` this is the weighted geometric mean `Π u^{w/Σw}`, at `α = 0`
/// the weighted sum and at `α = ∞` the egalitarian `min u/w`. Evaluated in
/// log space so that weights like `n^α` with large `α` stay representable.
pub fn sp_utility_homog(alpha: Alpha, weights: &[f64], rates: &[f64]) -> Result<f64> {
    check_inputs(weights, rates)?;
    check_alpha(alpha)?;
    Ok(homog_unchecked(alpha, weights, rates))
}

pub(crate) fn homog_unchecked(alpha: Alpha, weights: &[f64], rates: &[f64]) -> f64 {
    let pairs = || weights.iter().zip(rates).filter(|(&w, _)| w > 0.0);
    match alpha {
        Alpha::Infinite => {
            let m = pairs().map(|(w, u)| u / w).fold(f64::INFINITY, f64::min);
            if m.is_finite() {
                m
            } else {
                0.0
            }
        }
        Alpha::Finite(0.0) => pairs().map(|(w, u)| w * u).sum(),
        Alpha::Finite(1.0) => {
            let total: f64 = pairs().map(|(w, _)| w).sum();
            let mut log_mean = 0.0;
            for (w, &u) in pairs() {
                if u == 0.0 {
                    return 0.0;
                }
                log_mean += (w / total) * u.ln();
            }
            log_mean.exp()
        }
        Alpha::Finite(a) => {
            let rho = 1.0 - a;
            let mut terms = Vec::with_capacity(weights.len());
            for (w, &u) in pairs() {
                if u == 0.0 {
                    if a > 1.0 {
                        return 0.0;
                    }
                    continue;
                }
                terms.push(w.ln() + rho * u.ln());
            }
            if terms.is_empty() {
                return 0.0;
            }
            (log_sum_exp(&terms) / rho).exp()
        }
    }
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
