//! Small gridworld with a moving goal.
//!
//! Exogenous variables, in order:
//!
//! 0. `goal`: which of two cells is rewarding. Flips often while the driver
//!    is on and rarely otherwise.
//! 1. `driver`: a binary chain with no reward of its own.
//! 2. `crash-agent`: position among `agent_cells`, or absent. Sharing its
//!    cell costs `crash_penalty`.
//! 3. `wind`: while on, moves fail with probability `wind_slip`.
//! 4. onwards: independent binary distractors.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{grid_step, lazy_row, product_rows, sample_rows, GRID_ACTIONS};
use crate::dist::Categorical;
use crate::error::{invalid, Error, Result};
use crate::mdp::{AnalyticModel, FactoredState, GenerativeMdp, VariableSpec};

pub const GOAL: usize = 0;
pub const DRIVER: usize = 1;
pub const CRASH_AGENT: usize = 2;
pub const WIND: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridworldSpec {
    pub width: usize,
    pub height: usize,
    pub goal_cells: [usize; 2],
    pub agent_cells: Vec<usize>,
    /// When false the goal ignores the driver and every chain is independent.
    pub coupled: bool,
    pub driver_flip: f64,
    pub goal_flip_driven: f64,
    pub goal_flip_idle: f64,
    pub agent_stay: f64,
    pub wind_flip: f64,
    pub wind_slip: f64,
    pub distractors: usize,
    pub distractor_flip: f64,
    pub goal_reward: f64,
    pub crash_penalty: f64,
    pub move_cost: f64,
    pub discount: f64,
    pub max_states: u64,
}

impl Default for GridworldSpec {
    fn default() -> Self {
        GridworldSpec {
            width: 3,
            height: 3,
            goal_cells: [0, 8],
            agent_cells: vec![0, 4, 8],
            coupled: true,
            driver_flip: 0.3,
            goal_flip_driven: 0.8,
            goal_flip_idle: 0.05,
            agent_stay: 0.8,
            wind_flip: 0.1,
            wind_slip: 0.5,
            distractors: 1,
            distractor_flip: 0.5,
            goal_reward: 1.0,
            crash_penalty: 3.0,
            move_cost: 0.05,
            discount: 0.9,
            max_states: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridworldMdp {
    spec: GridworldSpec,
    variables: Vec<VariableSpec>,
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("{name} must be a probability, got {p}")));
    }
    Ok(())
}

impl GridworldMdp {
    pub fn new(spec: GridworldSpec) -> Result<Self> {
        let cells = spec.width * spec.height;
        if cells == 0 {
            return Err(invalid("grid must have at least one cell"));
        }
        if spec.goal_cells.iter().chain(&spec.agent_cells).any(|&c| c >= cells) {
            return Err(invalid("goal and agent cells must lie on the grid"));
        }
        for (name, p) in [
            ("driver_flip", spec.driver_flip),
            ("goal_flip_driven", spec.goal_flip_driven),
            ("goal_flip_idle", spec.goal_flip_idle),
            ("agent_stay", spec.agent_stay),
            ("wind_flip", spec.wind_flip),
            ("wind_slip", spec.wind_slip),
            ("distractor_flip", spec.distractor_flip),
        ] {
            check_prob(name, p)?;
        }
        if !(0.0..1.0).contains(&spec.discount) {
            return Err(invalid("discount must be in [0, 1)"));
        }
        let mut variables = vec![
            VariableSpec::new(GOAL, 2, "goal"),
            VariableSpec::new(DRIVER, 2, "driver"),
            VariableSpec::new(CRASH_AGENT, spec.agent_cells.len() + 1, "crash-agent"),
            VariableSpec::new(WIND, 2, "wind"),
        ];
        for k in 0..spec.distractors {
            variables.push(VariableSpec::new(4 + k, 2, format!("distractor-{k}")));
        }
        let size = variables
            .iter()
            .fold(cells as u128, |acc, v| acc.saturating_mul(v.cardinality as u128));
        if size > spec.max_states as u128 {
            return Err(Error::StateSpaceTooLarge {
                size,
                budget: spec.max_states,
            });
        }
        Ok(GridworldMdp { spec, variables })
    }

    pub fn spec(&self) -> &GridworldSpec {
        &self.spec
    }

    pub fn full_state_count(&self) -> usize {
        self.variables
            .iter()
            .fold(self.spec.width * self.spec.height, |acc, v| acc * v.cardinality)
    }

    fn flip_row(value: usize, p: f64) -> Categorical {
        let mut w = [1.0 - p, 1.0 - p];
        w[1 - value] = p;
        Categorical::from_dense(&w)
    }

    fn next_rows(&self, exo: &[usize]) -> Vec<Categorical> {
        let s = &self.spec;
        let goal_flip = if s.coupled && exo[DRIVER] == 1 {
            s.goal_flip_driven
        } else {
            s.goal_flip_idle
        };
        let absent = s.agent_cells.len();
        let mut rows = vec![
            Self::flip_row(exo[GOAL], goal_flip),
            Self::flip_row(exo[DRIVER], s.driver_flip),
            lazy_row(absent + 1, exo[CRASH_AGENT], s.agent_stay),
            Self::flip_row(exo[WIND], s.wind_flip),
        ];
        for &v in &exo[4..] {
            rows.push(Self::flip_row(v, s.distractor_flip));
        }
        rows
    }

    fn endo_row(&self, endo: usize, action: usize, exo: &[usize]) -> Categorical {
        let cells = self.spec.width * self.spec.height;
        let target = grid_step(self.spec.width, self.spec.height, endo, action);
        if target == endo || exo[WIND] == 0 || self.spec.wind_slip == 0.0 {
            return Categorical::point(cells, target);
        }
        Categorical::from_sparse(
            cells,
            [(target, 1.0 - self.spec.wind_slip), (endo, self.spec.wind_slip)],
        )
    }
}

impl AnalyticModel for GridworldMdp {
    fn endo_transition(&self, endo: usize, action: usize, exo: &[usize]) -> Categorical {
        self.endo_row(endo, action, exo)
    }

    fn exo_transition(&self, exo: &[usize]) -> Vec<(Vec<usize>, f64)> {
        product_rows(&self.next_rows(exo))
    }

    fn initial_distribution(&self) -> Vec<(FactoredState, f64)> {
        let mut rows = vec![Categorical::uniform(self.spec.width * self.spec.height)];
        rows.extend(self.variables.iter().map(|v| Categorical::uniform(v.cardinality)));
        product_rows(&rows)
            .into_iter()
            .map(|(values, p)| (FactoredState::new(values[0], values[1..].to_vec()), p))
            .collect()
    }
}

impl GenerativeMdp for GridworldMdp {
    fn action_count(&self) -> usize {
        GRID_ACTIONS
    }

    fn endo_cardinality(&self) -> usize {
        self.spec.width * self.spec.height
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn r_max(&self) -> f64 {
        let s = &self.spec;
        let goal_side = s.goal_reward.abs() + s.move_cost.abs();
        goal_side + s.crash_penalty.abs()
    }

    fn sample_transition(
        &self,
        state: &FactoredState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> FactoredState {
        let endo = self.endo_row(state.endo, action, &state.exo).sample(rng);
        let exo = sample_rows(&self.next_rows(&state.exo), rng);
        FactoredState::new(endo, exo)
    }

    fn reward_component(&self, i: usize, endo: usize, value: usize, action: usize) -> f64 {
        let s = &self.spec;
        match i {
            GOAL => {
                let at_goal = if endo == s.goal_cells[value] { s.goal_reward } else { 0.0 };
                let moving = if action != 0 { s.move_cost } else { 0.0 };
                at_goal - moving
            }
            CRASH_AGENT => match s.agent_cells.get(value) {
                Some(&cell) if cell == endo => -s.crash_penalty,
                _ => 0.0,
            },
            _ => 0.0,
        }
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> FactoredState {
        let endo = Categorical::uniform(self.endo_cardinality()).sample(rng);
        let exo = self
            .variables
            .iter()
            .map(|v| Categorical::uniform(v.cardinality).sample(rng))
            .collect();
        FactoredState::new(endo, exo)
    }

    fn analytic(&self) -> Option<&dyn AnalyticModel> {
        Some(self)
    }
}
