//! Closed-form best responses of a price-taking provider.

use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::trading_post::PriceVector;
use crate::utility::{homog_unchecked, log_sum_exp};

fn unit_costs(market: &Market, prices: &PriceVector, s: usize) -> Result<Vec<f64>> {
    let q = market.providers[s].unit_costs(prices.as_slice());
    if let Some(g) = q.iter().position(|&c| !(c > 0.0)) {
        return Err(MarketError::ZeroPriceRow { sp: s, group: g });
    }
    Ok(q)
}

/// Utility-maximizing service rates of provider `s` under budget `B_s` at
/// the given prices. Finite `α > 0` uses the KKT solution
/// `u_g ∝ (w_g/q_g)^{1/α}` and needs every `q_g > 0`. `α = ∞` uses the
/// equalizing rates `u_g = t·w_g` and only needs one priced group.
pub fn best_response_rates(market: &Market, prices: &PriceVector, s: usize) -> Result<Vec<f64>> {
    let p = &market.providers[s];
    let w = p.weights();
    let a = match p.alpha {
        Alpha::Infinite => {
            let q = p.unit_costs(prices.as_slice());
            let cost: f64 = w.iter().zip(&q).map(|(w, q)| w * q).sum();
            if !(cost > 0.0) {
                return Err(MarketError::ZeroPriceRow { sp: s, group: 0 });
            }
            let t = p.budget / cost;
            return Ok(w.iter().map(|w| t * w).collect());
        }
        Alpha::Finite(0.0) => return Err(MarketError::DegenerateLinear { sp: s }),
        Alpha::Finite(a) if a < 0.0 => return Err(MarketError::NegativeAlpha(a)),
        Alpha::Finite(a) => a,
    };
    let q = unit_costs(market, prices, s)?;
    let log_w: Vec<f64> = w.iter().map(|w| w.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|q| q.ln()).collect();
    let shares: Vec<f64> = log_w.iter().zip(&log_q).map(|(lw, lq)| lw / a + (1.0 - 1.0 / a) * lq).collect();
    let norm = p.budget.ln() - log_sum_exp(&shares);
    Ok(log_w.iter().zip(&log_q).map(|(lw, lq)| (norm + (lw - lq) / a).exp()).collect())
}

/// Best-response bids `b_gj = u_g·p_r·d_gj`, renormalized to exhaust `B_s`.
pub fn best_response(market: &Market, prices: &PriceVector, s: usize) -> Result<Vec<Vec<f64>>> {
    let u = best_response_rates(market, prices, s)?;
    let p = &market.providers[s];
    let mut bids: Vec<Vec<f64>> = p
        .groups
        .iter()
        .zip(&u)
        .map(|(g, &u)| g.demand.iter().map(|d| u * prices[d.resource] * d.amount).collect())
        .collect();
    let total: f64 = bids.iter().flatten().sum();
    let scale = p.budget / total;
    bids.iter_mut().flatten().for_each(|b| *b *= scale);
    Ok(bids)
}

/// Largest homogeneous utility provider `s` can afford at these prices.
///
/// Defined for every `α`, including the linear case `α = 0` where the value
/// is `B·max w/q`. Infinite when some group is free.
pub fn best_response_value(market: &Market, prices: &PriceVector, s: usize) -> Result<f64> {
    let p = &market.providers[s];
    let q = p.unit_costs(prices.as_slice());
    if !p.alpha.is_infinite() && q.iter().any(|&c| !(c > 0.0)) {
        return Ok(f64::INFINITY);
    }
    if p.alpha == Alpha::Finite(0.0) {
        return Ok(p.budget * p.groups.iter().zip(&q).map(|(g, q)| g.weight / q).fold(0.0, f64::max));
    }
    let u = best_response_rates(market, prices, s)?;
    Ok(homog_unchecked(p.alpha, &p.weights(), &u))
}
