//! Approximate model minimization for MDPs whose state splits into an
//! endogenous part and a (much larger) set of exogenous variables.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`mdp`]: factored states, masks, the generative-model trait and reduced
//!   state spaces.
//! - [`estimation`]: policy-free exogenous rollouts, full rollouts, fitted
//!   reduced models, transition mutual information and reward-variable
//!   screening.
//! - [`planner`]: value iteration, policy evaluation, Monte Carlo returns and
//!   the Hoeffding confidence bound.
//! - [`search`]: brute-force, random-greedy and correlational mask search,
//!   plus the sufficient-condition checker for reduced-policy optimality.
//! - [`domains`]: built-in benchmark MDPs.
//!
//! Anything that needs a wall clock, files or threads lives in the
//! `exomask-bench` crate.
#![no_std]
// NaN-rejecting guards read as `!(x > 0.0)`; dense tables are indexed by state.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dist;
pub mod domains;
pub mod error;
pub mod estimation;
pub mod mdp;
pub mod planner;
pub mod search;
pub mod seeding;

pub use error::{Error, Result};
pub use mdp::{
    AnalyticModel, FactoredState, GenerativeMdp, Mask, ReducedSpace, ReducedState, StateBudget,
    VariableSpec,
};
