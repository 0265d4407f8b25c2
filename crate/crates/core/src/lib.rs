//! Market-equilibrium allocation of multi-resource, multi-cell network slices
//! among budget-constrained service providers.
//!
//! Providers bid on resources through a Trading-Post mechanism. The crate
//! computes equilibria either with the decentralized bid dynamics or with a
//! centralized Eisenberg-Gale solve, and compares them against the social
//! optimum and static proportional sharing.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod experiment;
pub mod model;
pub mod report;
pub mod scenarios;
pub mod solvers;
pub mod trading_post;
pub mod utility;

pub use dynamics::{run_dynamics, DynamicsConfig, InitialBids};
pub use equilibrium::{verify_equilibrium, EquilibriumReport};
pub use error::{MarketError, Result};
pub use model::{Alpha, Market, ScenarioSpec};
pub use report::{Method, SolveReport};
pub use solvers::{solve_eg, solve_social_optimal, static_share, SolverConfig};
pub use trading_post::{tp_allocate, Allocation, BidTensor, PriceVector};
pub use utility::{service_rate, sp_utility, sp_utility_homog, Utility};
