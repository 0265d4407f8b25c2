//! Batch experiments: scheme comparison across fairness levels, budget
//! sensitivity and the price-convergence trace.

mod config;
mod output;
mod svg;

pub use config::{BudgetSweepConfig, ExperimentConfig, Scheme, ScenarioSource};
pub use output::{
    aggregate_alpha_effect, aggregate_sensitivity, aggregate_welfare, class_rate_gaps, emit_csv, emit_plotdata,
    AlphaEffectRow, SensitivityRow, WelfareRow,
};

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{run_dynamics, DynamicsConfig};
use crate::error::{MarketError, Result};
use crate::model::{Alpha, Market, ScenarioSpec};
use crate::scenarios::{budget_sweep, generate_instance};
use crate::solvers::{
    max_utilities, nash_welfare, poa_bound, solve_eg, solve_social_optimal, static_share, utilitarian_welfare,
    PriceOfAnarchy, SolverConfig,
};

/// Outcome of one scheme on one market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeOutcome {
    pub scheme: Scheme,
    pub rates: Vec<Vec<f64>>,
    pub utilities: Vec<f64>,
    pub welfare: f64,
    /// `NaN` when some utility is zero.
    pub nash_welfare: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SchemeOutcome {
    fn failed(market: &Market, scheme: Scheme) -> Self {
        SchemeOutcome {
            scheme,
            rates: market.providers.iter().map(|p| vec![f64::NAN; p.groups.len()]).collect(),
            utilities: vec![f64::NAN; market.n_providers()],
            welfare: f64::NAN,
            nash_welfare: f64::NAN,
            converged: false,
            iterations: 0,
        }
    }
}

/// Solve one scheme. Solver errors are logged and reported as an
/// unconverged outcome filled with `NaN`.
pub fn run_scheme(market: &Market, scheme: Scheme, config: &SolverConfig) -> SchemeOutcome {
    let solved = match scheme {
        Scheme::Me => solve_eg(market, config),
        Scheme::So => solve_social_optimal(market, config),
        Scheme::Ss => static_share(market, config),
    };
    match solved {
        Ok(rep) => {
            let budgets = market.budgets();
            SchemeOutcome {
                scheme,
                welfare: utilitarian_welfare(&rep.utilities, &budgets),
                nash_welfare: nash_welfare(&rep.utilities, &budgets).unwrap_or(f64::NAN),
                rates: rep.allocation.rates,
                utilities: rep.utilities,
                converged: rep.converged,
                iterations: rep.iterations,
            }
        }
        Err(e) => {
            log::warn!("{scheme} solve failed: {e}");
            SchemeOutcome::failed(market, scheme)
        }
    }
}

/// Three-scheme comparison of one market at one fairness level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WelfareReport {
    pub alpha: Alpha,
    pub me: SchemeOutcome,
    pub so: SchemeOutcome,
    pub ss: SchemeOutcome,
    /// Utility of each provider holding every resource alone.
    pub max_utilities: Vec<f64>,
    pub poa: Option<PriceOfAnarchy>,
    /// `U_s(ME) − U_s(SS)` per provider.
    pub me_minus_ss: Vec<f64>,
    pub dominance_holds: bool,
    pub poa_within_bound: Option<bool>,
}

/// Run ME, SO and SS on `spec` with every provider set to each `α` in turn.
pub fn compare_schemes(spec: &ScenarioSpec, alphas: &[Alpha], config: &SolverConfig) -> Result<Vec<WelfareReport>> {
    alphas
        .iter()
        .map(|&alpha| {
            let market = spec.with_uniform_alpha(alpha).normalize()?;
            let me = run_scheme(&market, Scheme::Me, config);
            let so = run_scheme(&market, Scheme::So, config);
            let ss = run_scheme(&market, Scheme::Ss, config);
            let max_utilities = max_utilities(&market, config)?;
            let poa = poa_bound(so.welfare, me.welfare, &max_utilities).ok();
            let me_minus_ss: Vec<f64> = me.utilities.iter().zip(&ss.utilities).map(|(a, b)| a - b).collect();
            let dominance_holds = me_minus_ss.iter().all(|d| *d >= -1e-8 * (1.0 + d.abs()));
            Ok(WelfareReport {
                alpha,
                poa_within_bound: poa.map(|p| p.value <= p.bound + 1e-9),
                poa,
                me_minus_ss,
                dominance_holds,
                max_utilities,
                me,
                so,
                ss,
            })
        })
        .collect()
}

/// One line of the long-format results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: usize,
    pub alpha: Alpha,
    pub scheme: Scheme,
    pub sp: String,
    pub cell: String,
    pub class: String,
    /// Per-user service rate `u/n`.
    pub rate: f64,
    pub utility: f64,
    pub welfare: f64,
    pub nash_welfare: f64,
    /// Relative welfare loss against the social optimum.
    pub poa: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Per-user rate of one provider in one budget-sweep step.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub instance: usize,
    pub alpha: Alpha,
    pub fraction: f64,
    pub sp: String,
    /// `Σ u / Σ n` over the provider's groups.
    pub user_rate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub cell: String,
    pub resource: String,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultSet {
    pub rows: Vec<ResultRow>,
    pub sweep: Vec<SweepRow>,
    pub price_trace: Vec<TracePoint>,
}

fn rows_for(instance: usize, alpha: Alpha, market: &Market, outcome: &SchemeOutcome, so_welfare: f64) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (s, p) in market.providers.iter().enumerate() {
        for (g, group) in p.groups.iter().enumerate() {
            rows.push(ResultRow {
                instance,
                alpha,
                scheme: outcome.scheme,
                sp: p.name.clone(),
                cell: market.cells[group.cell].id.clone(),
                class: market.classes[group.class].clone(),
                rate: outcome.rates[s][g] / group.users as f64,
                utility: outcome.utilities[s],
                welfare: outcome.welfare,
                nash_welfare: outcome.nash_welfare,
                poa: (so_welfare - outcome.welfare) / so_welfare,
                converged: outcome.converged,
                iterations: outcome.iterations,
            });
        }
    }
    rows
}

fn user_rate(market: &Market, rates: &[Vec<f64>], s: usize) -> f64 {
    let users: f64 = market.providers[s].users().iter().sum();
    rates[s].iter().sum::<f64>() / users
}

struct InstanceResult {
    rows: Vec<ResultRow>,
    sweep: Vec<SweepRow>,
}

fn evaluate_instance(config: &ExperimentConfig, template: &ScenarioSpec, index: usize) -> Result<InstanceResult> {
    let spec = match &config.load_model {
        Some(load) => {
            let load = crate::scenarios::LoadModel { seed: config.seed, ..load.clone() };
            generate_instance(template, &load, index as u64)?
        }
        None => template.clone(),
    };
    let solver = SolverConfig::default();
    let mut rows = Vec::new();
    for &alpha in &config.alphas {
        let market = spec.with_uniform_alpha(alpha).normalize()?;
        let outcomes: Vec<SchemeOutcome> = config.schemes.iter().map(|&s| run_scheme(&market, s, &solver)).collect();
        let so_welfare = outcomes.iter().find(|o| o.scheme == Scheme::So).map_or(f64::NAN, |o| o.welfare);
        for outcome in &outcomes {
            rows.extend(rows_for(index, alpha, &market, outcome, so_welfare));
        }
    }

    let mut sweep = Vec::new();
    if let Some(bs) = &config.budget_sweep {
        for &alpha in &bs.alphas {
            let base = spec.with_uniform_alpha(alpha);
            for (f, variant) in bs.fractions.iter().zip(budget_sweep(&base, bs.sp, &bs.fractions)?) {
                let market = variant.normalize()?;
                let me = run_scheme(&market, Scheme::Me, &solver);
                for (s, p) in market.providers.iter().enumerate() {
                    sweep.push(SweepRow {
                        instance: index,
                        alpha,
                        fraction: *f,
                        sp: p.name.clone(),
                        user_rate: user_rate(&market, &me.rates, s),
                        converged: me.converged,
                    });
                }
            }
        }
    }
    Ok(InstanceResult { rows, sweep })
}

/// Price trajectory of the bid dynamics on the first instance with every
/// provider at `α = 1`.
fn convergence_trace(config: &ExperimentConfig, template: &ScenarioSpec) -> Result<Vec<TracePoint>> {
    let spec = match &config.load_model {
        Some(load) => generate_instance(template, &crate::scenarios::LoadModel { seed: config.seed, ..load.clone() }, 0)?,
        None => template.clone(),
    };
    let market = spec.with_uniform_alpha(Alpha::Finite(1.0)).normalize()?;
    let rep = run_dynamics(&market, &DynamicsConfig::default())?;
    let mut out = Vec::new();
    for (t, prices) in &rep.price_trace {
        for r in 0..market.n_resources() {
            let (cell, resource) = market.resource_label(r);
            out.push(TracePoint { iteration: *t, cell: cell.to_string(), resource: resource.to_string(), price: prices[r] });
        }
    }
    Ok(out)
}

/// Compute every configured study. The result does not depend on `jobs`.
pub fn evaluate(config: &ExperimentConfig) -> Result<ResultSet> {
    config.validate()?;
    let template = config.scenario.load()?;
    let count = if config.load_model.is_some() { config.instances } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| MarketError::Numerical(format!("thread pool: {e}")))?;
    let per_instance: Vec<Result<InstanceResult>> =
        pool.install(|| (0..count).into_par_iter().map(|i| evaluate_instance(config, &template, i)).collect());
    let mut set = ResultSet::default();
    for r in per_instance {
        let r = r?;
        set.rows.extend(r.rows);
        set.sweep.extend(r.sweep);
    }
    if config.convergence_trace {
        set.price_trace = convergence_trace(config, &template)?;
    }
    Ok(set)
}

/// Files written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub rows: usize,
    pub unconverged_rows: usize,
    pub files: Vec<PathBuf>,
}

/// Evaluate the configured studies and write CSV tables, plot data and SVG
/// charts into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<ExperimentSummary, output::OutputError> {
    let set = evaluate(config)?;
    let mut files = emit_csv(&set, &config.output_dir)?;
    files.extend(emit_plotdata(&set, &config.output_dir)?);
    Ok(ExperimentSummary {
        rows: set.rows.len(),
        unconverged_rows: set.rows.iter().filter(|r| !r.converged).count(),
        files,
    })
}

pub use output::OutputError;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::seven_cell_preset;

    #[test]
    fn single_provider_schemes_agree() {
        let mut spec = seven_cell_preset();
        spec.sps.truncate(1);
        spec.sps[0].budget = 1.0;
        let reports = compare_schemes(&spec, &[Alpha::Finite(1.0), Alpha::Finite(2.0)], &SolverConfig::default()).unwrap();
        for rep in reports {
            for (a, b) in [(&rep.me, &rep.so), (&rep.me, &rep.ss)] {
                assert!((a.utilities[0] - b.utilities[0]).abs() <= 1e-6 * a.utilities[0]);
            }
            assert!(rep.poa.unwrap().value.abs() < 1e-6);
        }
    }

    #[test]
    fn preset_comparison_checks_hold() {
        let reports = compare_schemes(&seven_cell_preset(), &[Alpha::Finite(1.0), Alpha::Finite(3.0)], &SolverConfig::default()).unwrap();
        for rep in reports {
            assert!(rep.dominance_holds, "{:?}", rep.me_minus_ss);
            assert_eq!(rep.poa_within_bound, Some(true));
        }
    }
}
