//! Social-optimum and static-sharing reference schemes.

use crate::error::{MarketError, Result};
use crate::model::Market;
use crate::report::{Method, SolveReport};
use crate::solvers::barrier::{solve_program, Objective};
use crate::solvers::eg::{utilities, SolverConfig};
use crate::trading_post::{Allocation, PriceVector};

fn unpriced_report(market: &Market, rates: Vec<Vec<f64>>, prices: PriceVector, iterations: usize, converged: bool) -> SolveReport {
    let allocation = Allocation::from_rates(market, rates);
    let utilities = utilities(market, &allocation.rates);
    let spending = allocation.spending(market, &prices);
    SolveReport {
        method: Method::InteriorPoint,
        allocation,
        prices,
        bids: None,
        utilities,
        spending,
        iterations,
        converged,
        surrogate: false,
        residuals: None,
        potential_trace: vec![],
        price_trace: vec![],
        dual_value: None,
    }
}

/// Maximize `Σ_s B_s U_s` over all capacity-feasible rates. The reported
/// prices are the capacity multipliers of that program.
pub fn solve_social_optimal(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    let all: Vec<usize> = (0..market.n_providers()).collect();
    let caps = vec![1.0; market.n_resources()];
    let sol = solve_program(market, &all, Objective::Linear, &market.budgets(), &caps, &config.barrier)?;
    if !sol.objective.is_finite() {
        return Err(MarketError::Numerical(format!("social optimum is unbounded ({})", sol.objective)));
    }
    Ok(unpriced_report(market, sol.rates, PriceVector(sol.duals), sol.newton_steps, sol.converged))
}

/// Every provider owns the share `B_s` of each resource and splits it among
/// its own classes to maximize its utility.
pub fn static_share(market: &Market, config: &SolverConfig) -> Result<SolveReport> {
    let mut rates = vec![Vec::new(); market.n_providers()];
    let mut steps = 0;
    let mut converged = true;
    for (s, p) in market.providers.iter().enumerate() {
        let caps = vec![p.budget; market.n_resources()];
        let sol = solve_program(market, &[s], Objective::Log, &[1.0], &caps, &config.barrier)?;
        rates[s] = sol.rates[s].clone();
        steps += sol.newton_steps;
        converged &= sol.converged;
    }
    Ok(unpriced_report(market, rates, PriceVector::zeros(market.n_resources()), steps, converged))
}

/// `Û_s`: the utility provider `s` reaches when it holds every resource alone.
pub fn max_utilities(market: &Market, config: &SolverConfig) -> Result<Vec<f64>> {
    let caps = vec![1.0; market.n_resources()];
    let mut out = Vec::with_capacity(market.n_providers());
    for s in 0..market.n_providers() {
        let sol = solve_program(market, &[s], Objective::Log, &[1.0], &caps, &config.barrier)?;
        out.push(utilities(market, &sol.rates)[s]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alpha, CellSpec, ClassSpec, ProviderSpec, ResourceSpec, ScenarioSpec, SupportSpec};
    use crate::solvers::eg::solve_eg;

    fn spec(alphas: &[Alpha], classes_per_sp: usize) -> ScenarioSpec {
        ScenarioSpec {
            schema_version: 1,
            cells: vec![CellSpec {
                id: "c".into(),
                resources: vec![
                    ResourceSpec { name: "a".into(), capacity: 10.0 },
                    ResourceSpec { name: "b".into(), capacity: 4.0 },
                ],
            }],
            classes: vec![
                ClassSpec { name: "k0".into(), demand: [("a".into(), 1.0), ("b".into(), 0.2)].into() },
                ClassSpec { name: "k1".into(), demand: [("a".into(), 0.5), ("b".into(), 1.0)].into() },
            ],
            sps: alphas
                .iter()
                .enumerate()
                .map(|(s, &alpha)| ProviderSpec {
                    name: format!("sp{s}"),
                    budget: 1.0 / alphas.len() as f64,
                    alpha,
                    support: (0..classes_per_sp)
                        .map(|k| SupportSpec {
                            cell: "c".into(),
                            class: format!("k{}", (k + s) % 2),
                            users: 10 + 5 * k as u64,
                            weight: None,
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn static_share_caps_single_class_at_budget() {
        let m = spec(&[Alpha::Finite(1.0); 3], 1).normalize().unwrap();
        let rep = static_share(&m, &SolverConfig::default()).unwrap();
        for (s, p) in m.providers.iter().enumerate() {
            let expect = p.groups[0].demand.iter().map(|d| p.budget / d.amount).fold(f64::INFINITY, f64::min);
            assert!((rep.allocation.rates[s][0] - expect).abs() < 1e-8 * expect);
        }
        for used in rep.allocation.usage(&m) {
            assert!(used <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn single_provider_schemes_coincide() {
        for alpha in [Alpha::Finite(0.5), Alpha::Finite(1.0), Alpha::Finite(3.0), Alpha::Infinite] {
            let m = spec(&[alpha], 2).normalize().unwrap();
            let cfg = SolverConfig::default();
            let me = solve_eg(&m, &cfg).unwrap();
            let so = solve_social_optimal(&m, &cfg).unwrap();
            let ss = static_share(&m, &cfg).unwrap();
            let hat = max_utilities(&m, &cfg).unwrap();
            for v in [so.utilities[0], ss.utilities[0], hat[0]] {
                assert!((v - me.utilities[0]).abs() < 1e-6 * me.utilities[0], "{alpha}: {v} vs {}", me.utilities[0]);
            }
        }
    }

    #[test]
    fn linear_corner_goes_to_dominant_provider() {
        // sp0 (class k0) gets more rate per unit of every resource than sp1 (k1)
        let mut s = spec(&[Alpha::Finite(0.0), Alpha::Finite(0.0)], 1);
        s.classes[1].demand = [("a".into(), 2.0), ("b".into(), 0.4)].into();
        let m = s.normalize().unwrap();
        let so = solve_social_optimal(&m, &SolverConfig::default()).unwrap();
        assert!((so.allocation.rates[0][0] - 10.0).abs() < 1e-6);
        assert!(so.allocation.rates[1][0] < 1e-6);
    }

    #[test]
    fn welfare_ordering() {
        let m = spec(&[Alpha::Finite(1.0), Alpha::Finite(2.0), Alpha::Infinite], 2).normalize().unwrap();
        let cfg = SolverConfig::default();
        let b = m.budgets();
        let me = solve_eg(&m, &cfg).unwrap();
        let so = solve_social_optimal(&m, &cfg).unwrap();
        let ss = static_share(&m, &cfg).unwrap();
        assert!(so.welfare(&b) >= me.welfare(&b) - 1e-9);
        assert!(so.welfare(&b) >= ss.welfare(&b) - 1e-9);
        for s in 0..3 {
            assert!(me.utilities[s] >= ss.utilities[s] - 1e-8);
        }
    }
}
