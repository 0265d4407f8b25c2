//! Welfare aggregates and the price-of-anarchy bound.

use serde::Serialize;

use crate::error::{MarketError, Result};

/// Nash welfare `Π U_s^{B_s}`, evaluated in log space.
pub fn nash_welfare(utilities: &[f64], budgets: &[f64]) -> Result<f64> {
    if utilities.len() != budgets.len() {
        return Err(MarketError::DimensionMismatch { expected: budgets.len(), actual: utilities.len() });
    }
    let mut log = 0.0;
    for (&u, &b) in utilities.iter().zip(budgets) {
        if !(u > 0.0) {
            return Err(MarketError::NonPositiveUtility(u));
        }
        log += b * u.ln();
    }
    Ok(log.exp())
}

/// Utilitarian welfare `Σ B_s U_s`.
pub fn utilitarian_welfare(utilities: &[f64], budgets: &[f64]) -> f64 {
    utilities.iter().zip(budgets).map(|(u, b)| u * b).sum()
}

/// Upper bound on the relative welfare loss of the equilibrium,
/// `1 − ((2√S − 1)/S)(min Û/max Û) − 1/S + min Û/Σ Û`.
pub fn anarchy_bound(max_utilities: &[f64]) -> Result<f64> {
    if let Some(&u) = max_utilities.iter().find(|&&u| !(u > 0.0)) {
        return Err(MarketError::NonPositiveUtility(u));
    }
    let n = max_utilities.len() as f64;
    let min = max_utilities.iter().copied().fold(f64::INFINITY, f64::min);
    let max = max_utilities.iter().copied().fold(0.0, f64::max);
    let sum: f64 = max_utilities.iter().sum();
    Ok(1.0 - (2.0 * n.sqrt() - 1.0) / n * (min / max) - 1.0 / n + min / sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceOfAnarchy {
    pub value: f64,
    pub bound: f64,
}

/// `(W_SO − W_ME)/W_SO` together with its bound.
pub fn poa_bound(so_welfare: f64, me_welfare: f64, max_utilities: &[f64]) -> Result<PriceOfAnarchy> {
    if !(so_welfare > 0.0) {
        return Err(MarketError::NonPositiveWelfare(so_welfare));
    }
    Ok(PriceOfAnarchy { value: (so_welfare - me_welfare) / so_welfare, bound: anarchy_bound(max_utilities)? })
}
