use serde::Serialize;

use crate::equilibrium::EquilibriumReport;
use crate::trading_post::{Allocation, BidTensor, PriceVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Dynamics,
    Tatonnement,
    InteriorPoint,
}

/// Outcome of any solver.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub allocation: Allocation,
    pub prices: PriceVector,
    /// Final bids, when the solver works in bid space.
    pub bids: Option<BidTensor>,
    /// Homogeneous utility `U_s` of every provider.
    pub utilities: Vec<f64>,
    pub spending: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when an `α = 0` provider was solved through a smoothed surrogate.
    pub surrogate: bool,
    /// Equilibrium residuals, absent for schemes that have no market prices.
    pub residuals: Option<EquilibriumReport>,
    /// `(iteration, Φ)` samples.
    pub potential_trace: Vec<(usize, f64)>,
    /// `(iteration, prices)` samples.
    pub price_trace: Vec<(usize, PriceVector)>,
    /// Dual objective at the final prices, when defined.
    pub dual_value: Option<f64>,
}

impl SolveReport {
    /// Utilitarian welfare `Σ B_s U_s`.
    pub fn welfare(&self, budgets: &[f64]) -> f64 {
        self.utilities.iter().zip(budgets).map(|(u, b)| u * b).sum()
    }
}
