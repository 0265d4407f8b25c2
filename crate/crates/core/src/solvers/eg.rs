//! Centralized equilibrium computation.

use crate::dynamics::{eval_dual, run_dynamics, DynamicsConfig};
use crate::equilibrium::{verify_equilibrium, DEFAULT_EQUILIBRIUM_TOLERANCE};
use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market};
use crate::report::{Method, SolveReport};
use crate::solvers::barrier::{solve_program, BarrierConfig, Objective};
use crate::solvers::best_response::best_response_rates;
use crate::trading_post::{Allocation, PriceVector};
use crate::utility::homog_unchecked;

/// `α` used in place of 0 when tâtonnement needs a well-defined demand.
pub const LINEAR_SURROGATE_ALPHA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    /// Bid dynamics when every provider has `α ≥ 1`, interior point otherwise.
    Auto,
    Dynamics,
    Tatonnement,
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: SolveMethod,
    /// Tâtonnement step `κ_t = κ₀ t^{−decay}`.
    pub kappa0: f64,
    pub decay: f64,
    pub max_iterations: usize,
    /// Target for the largest equilibrium residual.
    pub tolerance: f64,
    /// Residual level at which a reported solution counts as converged.
    pub equilibrium_tolerance: f64,
    pub barrier: BarrierConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolveMethod::Auto,
            kappa0: 0.1,
            decay: 0.5,
            max_iterations: 50_000,
            tolerance: 1e-7,
            equilibrium_tolerance: DEFAULT_EQUILIBRIUM_TOLERANCE,
            barrier: BarrierConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa0 > 0.0) {
            return Err(MarketError::InvalidScenario(format!("kappa0 must be positive, got {}", self.kappa0)));
        }
        if !(self.tolerance > 0.0) {
            return Err(MarketError::InvalidScenario(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

pub(crate) fn utilities(market: &Market, rates: &[Vec<f64>]) -> Vec<f64> {
    market
        .providers
        .iter()
        .zip(rates)
        .map(|(p, u)| homog_unchecked(p.alpha, &p.weights(), u))
        .collect()
}

fn priced_report(
    market: &Market,
    method: Method,
    allocation: Allocation,
    prices: PriceVector,
    iterations: usize,
    solver_converged: bool,
    config: &SolverConfig,
) -> SolveReport {
    let residuals = verify_equilibrium(market, &allocation, &prices, config.equilibrium_tolerance);
    let utilities = utilities(market, &allocation.rates);
    let spending = allocation.spending(market, &prices);
    SolveReport {
        method,
        converged: solver_converged && residuals.is_equilibrium(),
        dual_value: eval_dual(market, &prices).ok(),
        price_trace: vec![(iterations, prices.clone())],
        allocation,
        prices,
        bids: None,
        utilities,
        spending,
        iterations,
        surrogate: false,
        residuals: Some(residuals),
        potential_trace: vec![],
    }
}

/// Market equilibrium of the Eisenberg-Gale program.
pub fn solve_eg(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let all_complementary = market.providers.iter().all(|p| p.alpha.value() >= 1.0);
    match config.method {
        SolveMethod::Auto if all_complementary => solve_by_dynamics(market, config),
        SolveMethod::Auto | SolveMethod::InteriorPoint => solve_by_barrier(market, config),
        SolveMethod::Dynamics => solve_by_dynamics(market, config),
        SolveMethod::Tatonnement => tatonnement(market, config),
    }
}

/// Run the bid dynamics, tightening the price-change stop rule until the
/// equilibrium residuals reach `config.tolerance`.
fn solve_by_dynamics(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    let mut dyn_cfg = DynamicsConfig {
        max_iterations: config.max_iterations,
        equilibrium_tolerance: config.equilibrium_tolerance,
        ..DynamicsConfig::default()
    };
    loop {
        let mut rep = run_dynamics(market, &dyn_cfg)?;
        let residual = rep.residuals.map_or(f64::INFINITY, |r| r.max_gap());
        if residual <= config.tolerance || !rep.converged || dyn_cfg.tolerance < 1e-15 {
            rep.converged = rep.residuals.is_some_and(|r| r.is_equilibrium());
            return Ok(rep);
        }
        dyn_cfg.tolerance *= 1e-2;
    }
}

fn solve_by_barrier(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    let all: Vec<usize> = (0..market.n_providers()).collect();
    let caps = vec![1.0; market.n_resources()];
    let sol = solve_program(market, &all, Objective::Log, &market.budgets(), &caps, &config.barrier)?;
    let allocation = Allocation::from_rates(market, sol.rates);
    Ok(priced_report(
        market,
        Method::InteriorPoint,
        allocation,
        PriceVector(sol.duals),
        sol.newton_steps,
        sol.converged,
        config,
    ))
}

/// Damped multiplicative tâtonnement `p ← p·exp(κ_t (demand − 1))`, followed
/// by a proportional feasibility repair.
pub fn tatonnement(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    let mut surrogate = false;
    let mut smoothed = market.clone();
    for p in &mut smoothed.providers {
        if p.alpha == Alpha::Finite(0.0) {
            p.alpha = Alpha::Finite(LINEAR_SURROGATE_ALPHA);
            surrogate = true;
        }
    }
    let n = market.n_resources();
    let idle = market.undemanded_resources();
    let demanded = n - idle.len();
    let mut prices = PriceVector(vec![1.0 / demanded as f64; n]);
    for &r in &idle {
        prices.0[r] = 0.0;
    }
    let mut price_trace = vec![(0, prices.clone())];
    let mut rates = Vec::new();
    let mut converged = false;
    let mut t = 0;
    while t < config.max_iterations {
        t += 1;
        rates = (0..smoothed.n_providers())
            .map(|s| best_response_rates(&smoothed, &prices, s))
            .collect::<Result<Vec<_>>>()?;
        let usage = Allocation::from_rates(&smoothed, rates.clone()).usage(&smoothed);
        let excess = usage
            .iter()
            .zip(prices.as_slice())
            .map(|(u, p)| ((u - 1.0) * p).abs().max(u - 1.0))
            .fold(0.0, f64::max);
        if excess <= config.tolerance {
            converged = true;
            break;
        }
        let kappa = config.kappa0 * (t as f64).powf(-config.decay);
        for (p, u) in prices.0.iter_mut().zip(&usage) {
            if *p > 0.0 {
                *p *= (kappa * (u - 1.0)).exp();
            }
        }
        price_trace.push((t, prices.clone()));
    }
    let mut allocation = Allocation::from_rates(market, rates);
    allocation.repair_feasibility(market);
    let mut rep = priced_report(market, Method::Tatonnement, allocation, prices, t, converged, config);
    rep.surrogate = surrogate;
    rep.price_trace = price_trace;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CellSpec, ClassSpec, ProviderSpec, ResourceSpec, ScenarioSpec, SupportSpec};

    fn disjoint(alpha: Alpha) -> Market {
        ScenarioSpec {
            schema_version: 1,
            cells: vec![CellSpec {
                id: "c".into(),
                resources: vec![
                    ResourceSpec { name: "a".into(), capacity: 1.0 },
                    ResourceSpec { name: "b".into(), capacity: 1.0 },
                ],
            }],
            classes: vec![
                ClassSpec { name: "ka".into(), demand: [("a".into(), 0.5)].into() },
                ClassSpec { name: "kb".into(), demand: [("b".into(), 0.25)].into() },
            ],
            sps: ["ka", "kb"]
                .iter()
                .enumerate()
                .map(|(s, k)| ProviderSpec {
                    name: format!("sp{s}"),
                    budget: 0.5,
                    alpha,
                    support: vec![SupportSpec { cell: "c".into(), class: k.to_string(), users: 1, weight: None }],
                })
                .collect(),
        }
        .normalize()
        .unwrap()
    }

    #[test]
    fn disjoint_demands_price_each_resource_at_its_owner_budget() {
        for method in [SolveMethod::Auto, SolveMethod::InteriorPoint, SolveMethod::Tatonnement] {
            let m = disjoint(Alpha::Finite(1.0));
            let cfg = SolverConfig { method, ..Default::default() };
            let rep = solve_eg(&m, &cfg).unwrap();
            assert!(rep.converged, "{method:?}");
            assert!((rep.prices[0] - 0.5).abs() < 1e-6 && (rep.prices[1] - 0.5).abs() < 1e-6, "{method:?}");
            assert!((rep.allocation.rates[0][0] - 2.0).abs() < 1e-6);
            assert!((rep.allocation.rates[1][0] - 4.0).abs() < 1e-6);
        }
    }

    #[test]
    fn linear_providers_use_interior_point() {
        let m = disjoint(Alpha::Finite(0.0));
        let rep = solve_eg(&m, &SolverConfig::default()).unwrap();
        assert_eq!(rep.method, Method::InteriorPoint);
        assert!(rep.converged, "{:?}", rep.residuals);
        assert!(!rep.surrogate);
        let rep = solve_eg(&m, &SolverConfig { method: SolveMethod::Tatonnement, ..Default::default() }).unwrap();
        assert!(rep.surrogate);
    }

    #[test]
    fn deterministic() {
        let m = disjoint(Alpha::Finite(2.0));
        let a = solve_eg(&m, &SolverConfig::default()).unwrap();
        let b = solve_eg(&m, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
