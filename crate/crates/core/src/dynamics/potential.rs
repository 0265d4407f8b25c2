//! Potential function of the bid dynamics, its gradient and the dual objective.

use serde::Serialize;

use crate::dynamics::divergence::bregman_divergence;
use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market, Provider};
use crate::solvers::best_response::best_response;
use crate::trading_post::{BidTensor, PriceVector};

/// Bids are floored here before logarithms, in evaluation only.
const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialBreakdown {
    /// Providers with `α = 1`.
    pub phi_eq1: f64,
    /// Providers with `1 < α < ∞`.
    pub phi_between: f64,
    /// Providers with `α = ∞`.
    pub phi_inf: f64,
    pub phi_total: f64,
}

fn require_supported(market: &Market, operation: &'static str) -> Result<()> {
    for (s, p) in market.providers.iter().enumerate() {
        if let Alpha::Finite(a) = p.alpha {
            if !(a >= 1.0) {
                return Err(MarketError::UnsupportedRegime { operation, sp: s, alpha: a });
            }
        }
    }
    Ok(())
}

fn xlogy(x: f64, ratio_den: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x.max(LOG_FLOOR) / ratio_den.max(LOG_FLOOR)).ln()
    }
}

/// Potential terms of one provider with bids `b` against fixed prices.
fn provider_term(p: &Provider, bids: &[Vec<f64>], prices: &PriceVector) -> f64 {
    let mut v = 0.0;
    for (group, row) in p.groups.iter().zip(bids) {
        let scale = if p.alpha.is_infinite() { group.weight } else { 1.0 };
        for (d, &b) in group.demand.iter().zip(row) {
            v += xlogy(b, scale * prices[d.resource] * d.amount);
        }
        if let Alpha::Finite(a) = p.alpha {
            if a > 1.0 {
                let bg: f64 = row.iter().sum();
                v += xlogy(bg, group.weight) / (a - 1.0);
            }
        }
    }
    v
}

fn breakdown(market: &Market, bids: &BidTensor, prices: &PriceVector) -> PotentialBreakdown {
    let (mut eq1, mut between, mut inf) = (0.0, 0.0, 0.0);
    for (s, p) in market.providers.iter().enumerate() {
        let v = provider_term(p, &bids[s], prices);
        match p.alpha {
            Alpha::Infinite => inf += v,
            Alpha::Finite(1.0) => eq1 += v,
            Alpha::Finite(_) => between += v,
        }
    }
    PotentialBreakdown { phi_eq1: eq1, phi_between: between, phi_inf: inf, phi_total: eq1 + between + inf }
}

/// `Φ(b)` with prices `p(b) = Σ b`:
///
/// * `α = 1`: `Σ b log(b/(p d))`
/// * `1 < α < ∞`: `Σ b log(b/(p d)) + (1/(α−1)) Σ_g b_g log(b_g/w_g)`
/// * `α = ∞`: `Σ b log(b/(w p d))`
pub fn eval_potential(market: &Market, bids: &BidTensor) -> Result<PotentialBreakdown> {
    require_supported(market, "eval_potential")?;
    Ok(breakdown(market, bids, &bids.prices(market)))
}

/// Analytic gradient of `Φ` in bid coordinates.
pub fn potential_gradient(market: &Market, bids: &BidTensor) -> Result<BidTensor> {
    require_supported(market, "potential_gradient")?;
    let prices = bids.prices(market);
    let mut grad = BidTensor::zeros(market);
    for (s, p) in market.providers.iter().enumerate() {
        for (g, group) in p.groups.iter().enumerate() {
            let bg: f64 = bids[s][g].iter().sum();
            for (j, d) in group.demand.iter().enumerate() {
                let b = bids[s][g][j];
                if !(b > 0.0) {
                    return Err(MarketError::ZeroCoordinate { sp: s, group: g, entry: j });
                }
                let base = (b / (prices[d.resource] * d.amount)).ln();
                grad[s][g][j] = match p.alpha {
                    Alpha::Infinite => base - group.weight.ln(),
                    Alpha::Finite(a) if a > 1.0 => base + ((bg / group.weight).ln() + 1.0) / (a - 1.0),
                    Alpha::Finite(_) => base,
                };
            }
        }
    }
    Ok(grad)
}

/// First-order gap `Φ(b) − Φ(b′) − ⟨∇Φ(b′), b − b′⟩` and the remaining room
/// `d_g(b, b′) − gap` below the Bregman upper bound.
pub fn bregman_gap(market: &Market, b: &BidTensor, b_prev: &BidTensor) -> Result<(f64, f64)> {
    let grad = potential_gradient(market, b_prev)?;
    let phi = eval_potential(market, b)?.phi_total;
    let phi_prev = eval_potential(market, b_prev)?.phi_total;
    let linear: f64 = grad
        .flatten()
        .iter()
        .zip(b.flatten().iter().zip(b_prev.flatten()))
        .map(|(g, (x, y))| g * (x - y))
        .sum();
    let lower = phi - phi_prev - linear;
    let upper = bregman_divergence(market, b, b_prev)? - lower;
    Ok((lower, upper))
}

/// Dual objective `Υ(p)`: the potential terms evaluated at the best-response
/// bids `b(p)` with the prices held fixed at `p`.
pub fn eval_dual(market: &Market, prices: &PriceVector) -> Result<f64> {
    require_supported(market, "eval_dual")?;
    let mut total = 0.0;
    for (s, p) in market.providers.iter().enumerate() {
        let bids = best_response(market, prices, s)?;
        total += provider_term(p, &bids, prices);
    }
    Ok(total)
}
