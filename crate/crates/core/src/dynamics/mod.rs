//! Decentralized Trading-Post bid dynamics for providers with `α ≥ 1`.

pub mod divergence;
pub mod potential;
pub mod update;

pub use divergence::{bregman_divergence, kl, kl_a, kl_b};
pub use potential::{bregman_gap, eval_dual, eval_potential, potential_gradient, PotentialBreakdown};
pub use update::bid_update;

use crate::equilibrium::{verify_equilibrium, DEFAULT_EQUILIBRIUM_TOLERANCE};
use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::report::{Method, SolveReport};
use crate::trading_post::{relative_price_change, tp_allocate, BidTensor};
use crate::utility::homog_unchecked;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialBids {
    /// Budget split evenly over each provider's (cell, class, resource) triples.
    Uniform,
    Custom(BidTensor),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsConfig {
    pub max_iterations: usize,
    /// Stop once the largest relative price change drops below this.
    pub tolerance: f64,
    pub initial: InitialBids,
    /// Record Φ and prices every `trace_stride` rounds (and at the last one).
    pub trace_stride: usize,
    pub equilibrium_tolerance: f64,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            max_iterations: 10_000,
            tolerance: 1e-8,
            initial: InitialBids::Uniform,
            trace_stride: 1,
            equilibrium_tolerance: DEFAULT_EQUILIBRIUM_TOLERANCE,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(MarketError::InvalidScenario(format!("dynamics tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(MarketError::InvalidScenario("max_iterations must be at least 1".into()));
        }
        if self.trace_stride == 0 {
            return Err(MarketError::InvalidScenario("trace_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simultaneous round: every provider responds to the prices of `bids`.
pub fn step(market: &Market, bids: &BidTensor) -> Result<BidTensor> {
    let prices = bids.prices(market);
    let mut next = BidTensor::zeros(market);
    for s in 0..market.n_providers() {
        next[s] = bid_update(market, &prices, s)?;
    }
    Ok(next)
}

/// Iterate simultaneous bid updates from the initial bids until prices settle.
pub fn run_dynamics(market: &Market, config: &DynamicsConfig) -> Result<SolveReport> {
    config.validate()?;
    for (s, p) in market.providers.iter().enumerate() {
        if let Alpha::Finite(a) = p.alpha {
            if !(a >= 1.0) {
                return Err(MarketError::UnsupportedRegime { operation: "run_dynamics", sp: s, alpha: a });
            }
        }
    }
    let idle = market.undemanded_resources();
    if !idle.is_empty() {
        log::warn!("{} resources are not demanded by any provider and stay unpriced", idle.len());
    }

    let mut bids = match &config.initial {
        InitialBids::Uniform => BidTensor::uniform(market),
        InitialBids::Custom(b) => b.clone(),
    };
    let mut prices = bids.prices(market);
    let mut potential_trace = vec![(0, eval_potential(market, &bids)?.phi_total)];
    let mut price_trace = vec![(0, prices.clone())];
    let mut converged = false;
    let mut t = 0;

    while t < config.max_iterations {
        let next = step(market, &bids)?;
        let next_prices = next.prices(market);
        let change = relative_price_change(market, &prices, &next_prices);
        bids = next;
        prices = next_prices;
        t += 1;
        converged = change < config.tolerance;
        if t % config.trace_stride == 0 || converged || t == config.max_iterations {
            potential_trace.push((t, eval_potential(market, &bids)?.phi_total));
            price_trace.push((t, prices.clone()));
        }
        if converged {
            break;
        }
    }
    if !converged {
        log::warn!("bid dynamics stopped after {t} rounds without settling");
    }

    let (prices, allocation) = tp_allocate(&bids, market);
    let residuals = verify_equilibrium(market, &allocation, &prices, config.equilibrium_tolerance);
    let utilities = market
        .providers
        .iter()
        .zip(&allocation.rates)
        .map(|(p, u)| homog_unchecked(p.alpha, &p.weights(), u))
        .collect();
    let spending = allocation.spending(market, &prices);
    let dual_value = eval_dual(market, &prices).ok();
    Ok(SolveReport {
        method: Method::Dynamics,
        allocation,
        prices,
        bids: Some(bids),
        utilities,
        spending,
        iterations: t,
        converged,
        surrogate: false,
        residuals: Some(residuals),
        potential_trace,
        price_trace,
        dual_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellSpec, ClassSpec, ProviderSpec, ResourceSpec, ScenarioSpec, SupportSpec};

    fn symmetric() -> Market {
        ScenarioSpec {
            schema_version: 1,
            cells: vec![CellSpec {
                id: "c".into(),
                resources: vec![
                    ResourceSpec { name: "a".into(), capacity: 2.0 },
                    ResourceSpec { name: "b".into(), capacity: 1.0 },
                ],
            }],
            classes: vec![ClassSpec { name: "k".into(), demand: [("a".into(), 0.5), ("b".into(), 0.1)].into() }],
            sps: (0..2)
                .map(|s| ProviderSpec {
                    name: format!("sp{s}"),
                    budget: 0.5,
                    alpha: Alpha::Finite(1.0),
                    support: vec![SupportSpec { cell: "c".into(), class: "k".into(), users: 10, weight: None }],
                })
                .collect(),
        }
        .normalize()
        .unwrap()
    }

    #[test]
    fn symmetric_market_settles_on_equal_split() {
        let m = symmetric();
        let rep = run_dynamics(&m, &DynamicsConfig::default()).unwrap();
        assert!(rep.converged);
        assert!((rep.utilities[0] - rep.utilities[1]).abs() < 1e-12);
        assert!((rep.prices.total() - 1.0).abs() < 1e-12);
        // only a is scarce; the surplus resource b loses its price
        assert!(rep.prices[0] > 1.0 - 1e-9);
        assert!(rep.residuals.unwrap().is_equilibrium());
        assert_eq!(rep.potential_trace.len(), rep.iterations + 1);
        assert_eq!(rep.price_trace.len(), rep.iterations + 1);
    }

    #[test]
    fn unconverged_run_is_flagged() {
        let m = symmetric();
        let cfg = DynamicsConfig { max_iterations: 1, tolerance: 1e-300, ..Default::default() };
        let rep = run_dynamics(&m, &cfg).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn trace_stride_thins_samples() {
        let m = symmetric();
        let cfg = DynamicsConfig { max_iterations: 10, tolerance: 1e-300, trace_stride: 4, ..Default::default() };
        let rep = run_dynamics(&m, &cfg).unwrap();
        let its: Vec<usize> = rep.potential_trace.iter().map(|t| t.0).collect();
        assert_eq!(its, vec![0, 4, 8, 10]);
    }
}
