use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::trading_post::PriceVector;
use crate::utility::log_sum_exp;

/// Next-round bids of provider `s` against the current prices.
///
/// `α = ∞`: `b ∝ w·p·d`, so groups on free resources bid nothing. Finite `α ≥ 1`: group spend proportional to
/// `w^{1/α} q^{(α−1)/α}` with `q = Σ p·d`, split inside the group by `p·d`.
/// The result is rescaled to spend exactly `B_s`.
pub fn bid_update(market: &Market, prices: &PriceVector, s: usize) -> Result<Vec<Vec<f64>>> {
    let provider = &market.providers[s];
    if let Alpha::Finite(a) = provider.alpha {
        if !(a >= 1.0) {
            return Err(MarketError::UnsupportedRegime { operation: "bid_update", sp: s, alpha: a });
        }
    }
    let spend: Vec<Vec<f64>> = provider
        .groups
        .iter()
        .map(|g| g.demand.iter().map(|d| prices[d.resource] * d.amount).collect())
        .collect();
    let q: Vec<f64> = spend.iter().map(|row| row.iter().sum()).collect();
    let unpriced = if provider.alpha.is_infinite() {
        q.iter().all(|&c| !(c > 0.0)).then_some(0)
    } else {
        q.iter().position(|&c| !(c > 0.0))
    };
    if let Some(g) = unpriced {
        return Err(MarketError::ZeroPriceRow { sp: s, group: g });
    }

    let mut bids: Vec<Vec<f64>> = match provider.alpha {
        Alpha::Infinite => provider
            .groups
            .iter()
            .zip(&spend)
            .map(|(g, row)| row.iter().map(|pd| g.weight * pd).collect())
            .collect(),
        Alpha::Finite(a) => {
            let logs: Vec<f64> = provider
                .groups
                .iter()
                .zip(&q)
                .map(|(g, q)| g.weight.ln() / a + (a - 1.0) / a * q.ln())
                .collect();
            let norm = log_sum_exp(&logs);
            logs.iter()
                .zip(&spend)
                .zip(&q)
                .map(|((l, row), q)| {
                    let share = provider.budget * (l - norm).exp();
                    row.iter().map(|pd| share * pd / q).collect()
                })
                .collect()
        }
    };
    let total: f64 = bids.iter().flatten().sum();
    let scale = provider.budget / total;
    bids.iter_mut().flatten().for_each(|b| *b *= scale);
    Ok(bids)
}
