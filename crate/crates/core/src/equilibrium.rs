//! Market-equilibrium certificate for an allocation/price pair.

use serde::Serialize;

use crate::model::Market;
use crate::solvers::best_response::best_response_value;
use crate::trading_post::{Allocation, PriceVector};
use crate::utility::homog_unchecked;

pub const DEFAULT_EQUILIBRIUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    /// `max_s |Σ p·x_s − B_s|`.
    pub budget_gap: f64,
    /// `max_r |Σ x_r − 1|·p_r`.
    pub clearing_gap: f64,
    /// Largest relative utility shortfall against the best response,
    /// `(U_s(best) − U_s(x_s)) / U_s(best)`.
    pub br_gap: f64,
    pub tolerance: f64,
}

impl EquilibriumReport {
    pub fn max_gap(&self) -> f64 {
        self.budget_gap.max(self.clearing_gap).max(self.br_gap)
    }

    pub fn is_equilibrium(&self) -> bool {
        self.max_gap() <= self.tolerance
    }
}

pub fn verify_equilibrium(market: &Market, allocation: &Allocation, prices: &PriceVector, tol: f64) -> EquilibriumReport {
    let spending = allocation.spending(market, prices);
    let budget_gap = spending
        .iter()
        .zip(&market.providers)
        .map(|(x, p)| (x - p.budget).abs())
        .fold(0.0, f64::max);

    let clearing_gap = allocation
        .usage(market)
        .iter()
        .zip(prices.as_slice())
        .map(|(used, p)| ((used - 1.0) * p).abs())
        .fold(0.0, f64::max);

    let mut br_gap: f64 = 0.0;
    for (s, p) in market.providers.iter().enumerate() {
        let best = best_response_value(market, prices, s).unwrap_or(f64::INFINITY);
        let held = homog_unchecked(p.alpha, &p.weights(), &allocation.rates[s]);
        let gap = if best.is_infinite() {
            f64::INFINITY
        } else if best > 0.0 {
            ((best - held) / best).max(0.0)
        } else {
            0.0
        };
        br_gap = br_gap.max(gap);
    }

    EquilibriumReport { budget_gap, clearing_gap, br_gap, tolerance: tol }
}
