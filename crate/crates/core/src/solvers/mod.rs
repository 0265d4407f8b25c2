//! Centralized solvers, reference schemes and welfare diagnostics.

pub mod baselines;
pub mod barrier;
pub mod best_response;
pub mod eg;
pub mod welfare;

pub use baselines::{max_utilities, solve_social_optimal, static_share};
pub use best_response::{best_response, best_response_rates, best_response_value};
pub use eg::{solve_eg, tatonnement, SolveMethod, SolverConfig};
pub use welfare::{anarchy_bound, nash_welfare, poa_bound, utilitarian_welfare, PriceOfAnarchy};
