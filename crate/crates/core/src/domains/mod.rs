//! Built-in benchmark MDPs.
//!
//! - [`gridworld`]: a robot on a small grid with a moving goal, a crash
//!   agent, wind and distractors. Small enough to solve exactly.
//! - [`crowd`]: navigation to one of several objects among agents that walk
//!   around and may carry objects with them.
//! - [`factory`]: a task stream where several variables must line up for an
//!   action to pay off.
//! - [`toy`]: explicit random tables, including generators that satisfy the
//!   exact-reduction conditions for a designated mask.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::Result;
use crate::mdp::GenerativeMdp;

pub mod crowd;
pub mod factory;
pub mod gridworld;
pub mod toy;

pub use crowd::{CrowdMdp, CrowdSpec, ObjectSpec};
pub use factory::{FactoryMdp, FactorySpec};
pub use gridworld::{GridworldMdp, GridworldSpec};
pub use toy::{BlockFactorized, TabularMdp};

pub const PRESETS: &[&str] = &["gridworld-small", "crowd-desk", "factory-desk"];

/// A buildable domain description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    Gridworld(GridworldSpec),
    Crowd(CrowdSpec),
    Factory(FactorySpec),
}

impl DomainSpec {
    pub fn preset(name: &str) -> Option<DomainSpec> {
        match name {
            "gridworld-small" => Some(DomainSpec::Gridworld(GridworldSpec::default())),
            "crowd-desk" => Some(DomainSpec::Crowd(CrowdSpec::default())),
            "factory-desk" => Some(DomainSpec::Factory(FactorySpec::default())),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn GenerativeMdp>> {
        Ok(match self {
            DomainSpec::Gridworld(s) => Box::new(GridworldMdp::new(s.clone())?),
            DomainSpec::Crowd(s) => Box::new(CrowdMdp::new(s.clone())?),
            DomainSpec::Factory(s) => Box::new(FactoryMdp::new(s.clone())?),
        })
    }
}

/// Grid actions: stay, up, down, left, right.
pub const GRID_ACTIONS: usize = 5;

/// Cell reached from `cell` by `action`; moves off the grid stay put.
pub fn grid_step(width: usize, height: usize, cell: usize, action: usize) -> usize {
    let (r, c) = (cell / width, cell % width);
    match action {
        1 if r > 0 => cell - width,
        2 if r + 1 < height => cell + width,
        3 if c > 0 => cell - 1,
        4 if c + 1 < width => cell + 1,
        _ => cell,
    }
}

/// Draws one value per row, in order.
pub(crate) fn sample_rows(rows: &[Categorical], rng: &mut dyn RngCore) -> Vec<usize> {
    rows.iter().map(|r| r.sample(rng)).collect()
}

/// Joint distribution of independent per-variable rows.
pub(crate) fn product_rows(rows: &[Categorical]) -> Vec<(Vec<usize>, f64)> {
    let mut out: Vec<(Vec<usize>, f64)> = vec![(Vec::with_capacity(rows.len()), 1.0)];
    for row in rows {
        let dense = row.to_dense();
        let mut next = Vec::with_capacity(out.len() * 2);
        for (prefix, p) in &out {
            for (v, &q) in dense.iter().enumerate() {
                if q > 0.0 {
                    let mut values = prefix.clone();
                    values.push(v);
                    next.push((values, p * q));
                }
            }
        }
        out = next;
    }
    out
}

/// Stays with probability `stay`, otherwise moves uniformly to another value.
pub(crate) fn lazy_row(cardinality: usize, current: usize, stay: f64) -> Categorical {
    if cardinality == 1 {
        return Categorical::point(1, 0);
    }
    let other = (1.0 - stay) / (cardinality - 1) as f64;
    let weights: Vec<f64> = (0..cardinality)
        .map(|v| if v == current { stay } else { other })
        .collect();
    Categorical::from_dense(&weights)
}
