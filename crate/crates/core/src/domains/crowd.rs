//! Navigation to a goal object among wandering agents.
//!
//! Exogenous variables, in order: one placement per object (a slot index),
//! one slot per agent, then one binary flag per occupancy cell. Agents take
//! lazy random walks over the slots. The `k`-th manipulable object is carried
//! by agent `k`: each step it jumps to that agent's current slot with
//! probability `carry`. Standing on the goal object's slot earns
//! `goal_reward`; standing on an occupied occupancy cell costs
//! `crash_penalty`. Nothing exogenous reacts to the robot.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{grid_step, lazy_row, sample_rows, GRID_ACTIONS};
use crate::dist::Categorical;
use crate::error::{invalid, Result};
use crate::mdp::{FactoredState, GenerativeMdp, VariableSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub manipulable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrowdSpec {
    pub width: usize,
    pub height: usize,
    /// Cells where objects and agents can be.
    pub slot_cells: Vec<usize>,
    pub n_agents: usize,
    pub objects: Vec<ObjectSpec>,
    pub occupancy_cells: Vec<usize>,
    pub occupancy_arrive: f64,
    pub occupancy_leave: f64,
    /// Index into `objects`.
    pub goal: usize,
    pub agent_move: f64,
    pub carry: f64,
    pub goal_reward: f64,
    pub crash_penalty: f64,
    pub discount: f64,
}

impl Default for CrowdSpec {
    fn default() -> Self {
        CrowdSpec {
            width: 3,
            height: 3,
            slot_cells: vec![0, 2, 6],
            n_agents: 4,
            objects: vec![ObjectSpec { manipulable: false }, ObjectSpec { manipulable: true }],
            occupancy_cells: vec![4, 7],
            occupancy_arrive: 0.3,
            occupancy_leave: 0.5,
            goal: 1,
            agent_move: 0.3,
            carry: 0.9,
            goal_reward: 1.0,
            crash_penalty: 1.0,
            discount: 0.9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariableKind {
    Object(usize),
    Agent(usize),
    Occupancy(usize),
}

#[derive(Clone, Debug)]
pub struct CrowdMdp {
    spec: CrowdSpec,
    variables: Vec<VariableSpec>,
    /// Carrier agent per object.
    carriers: Vec<Option<usize>>,
}

impl CrowdMdp {
    pub fn new(spec: CrowdSpec) -> Result<Self> {
        let cells = spec.width * spec.height;
        if cells == 0 || spec.slot_cells.is_empty() {
            return Err(invalid("need a nonempty grid and at least one slot"));
        }
        if spec.slot_cells.iter().chain(&spec.occupancy_cells).any(|&c| c >= cells) {
            return Err(invalid("slot and occupancy cells must lie on the grid"));
        }
        if spec.goal >= spec.objects.len() {
            return Err(invalid("goal must index an object"));
        }
        for p in [spec.occupancy_arrive, spec.occupancy_leave, spec.agent_move, spec.carry] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("probability out of range: {p}")));
            }
        }
        if !(0.0..1.0).contains(&spec.discount) {
            return Err(invalid("discount must be in [0, 1)"));
        }
        let slots = spec.slot_cells.len();
        let mut variables = Vec::new();
        for k in 0..spec.objects.len() {
            variables.push(VariableSpec::new(variables.len(), slots, format!("object-{k}")));
        }
        for k in 0..spec.n_agents {
            variables.push(VariableSpec::new(variables.len(), slots, format!("agent-{k}")));
        }
        for k in 0..spec.occupancy_cells.len() {
            variables.push(VariableSpec::new(variables.len(), 2, format!("occupancy-{k}")));
        }
        let mut next_carrier = 0;
        let carriers = spec
            .objects
            .iter()
            .map(|o| {
                if o.manipulable && next_carrier < spec.n_agents {
                    next_carrier += 1;
                    Some(next_carrier - 1)
                } else {
                    None
                }
            })
            .collect();
        Ok(CrowdMdp {
            spec,
            variables,
            carriers,
        })
    }

    pub fn spec(&self) -> &CrowdSpec {
        &self.spec
    }

    pub fn kind(&self, i: usize) -> VariableKind {
        let objects = self.spec.objects.len();
        if i < objects {
            VariableKind::Object(i)
        } else if i < objects + self.spec.n_agents {
            VariableKind::Agent(i - objects)
        } else {
            VariableKind::Occupancy(i - objects - self.spec.n_agents)
        }
    }

    pub fn object_var(&self, k: usize) -> usize {
        k
    }

    pub fn agent_var(&self, k: usize) -> usize {
        self.spec.objects.len() + k
    }

    /// The agent that carries object `k`, if any.
    pub fn carrier(&self, k: usize) -> Option<usize> {
        self.carriers[k]
    }

    fn next_rows(&self, exo: &[usize]) -> Vec<Categorical> {
        let s = &self.spec;
        let slots = s.slot_cells.len();
        let mut rows = Vec::with_capacity(exo.len());
        for (k, &v) in exo[..s.objects.len()].iter().enumerate() {
            let row = match self.carriers[k] {
                Some(agent) if exo[self.agent_var(agent)] != v => Categorical::from_sparse(
                    slots,
                    [(exo[self.agent_var(agent)], s.carry), (v, 1.0 - s.carry)],
                ),
                _ => Categorical::point(slots, v),
            };
            rows.push(row);
        }
        for k in 0..s.n_agents {
            rows.push(lazy_row(slots, exo[self.agent_var(k)], 1.0 - s.agent_move));
        }
        for &v in &exo[s.objects.len() + s.n_agents..] {
            let up = if v == 1 { 1.0 - s.occupancy_leave } else { s.occupancy_arrive };
            rows.push(Categorical::from_dense(&[1.0 - up, up]));
        }
        rows
    }
}

impl GenerativeMdp for CrowdMdp {
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
        self.spec.goal_reward.abs().max(self.spec.crash_penalty.abs())
            + if self.spec.occupancy_cells.is_empty() { 0.0 } else { self.spec.crash_penalty.abs() }
    }

    fn sample_transition(
        &self,
        state: &FactoredState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> FactoredState {
        let endo = grid_step(self.spec.width, self.spec.height, state.endo, action);
        FactoredState::new(endo, sample_rows(&self.next_rows(&state.exo), rng))
    }

    fn reward_component(&self, i: usize, endo: usize, value: usize, _action: usize) -> f64 {
        let s = &self.spec;
        match self.kind(i) {
            VariableKind::Object(k) if k == s.goal && s.slot_cells[value] == endo => s.goal_reward,
            VariableKind::Occupancy(k) if value == 1 && s.occupancy_cells[k] == endo => {
                -s.crash_penalty
            }
            _ => 0.0,
        }
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> FactoredState {
        let endo = Categorical::uniform(self.endo_cardinality()).sample(rng);
        let rows: Vec<Categorical> = self
            .variables
            .iter()
            .map(|v| Categorical::uniform(v.cardinality))
            .collect();
        FactoredState::new(endo, sample_rows(&rows, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_preset_layout() {
        let c = CrowdMdp::new(CrowdSpec::default()).unwrap();
        assert_eq!(c.m(), 8);
        assert_eq!(c.kind(0), VariableKind::Object(0));
        assert_eq!(c.kind(2), VariableKind::Agent(0));
        assert_eq!(c.kind(7), VariableKind::Occupancy(1));
        assert_eq!(c.carrier(0), None);
        assert_eq!(c.carrier(1), Some(0));
        assert!(c.analytic().is_none());
    }

    #[test]
    fn without_agents_objects_are_static() {
        let spec = CrowdSpec {
            n_agents: 0,
            ..CrowdSpec::default()
        };
        let c = CrowdMdp::new(spec).unwrap();
        let rows = c.next_rows(&[2, 1, 0, 1]);
        assert_eq!(rows[0], Categorical::point(3, 2));
        assert_eq!(rows[1], Categorical::point(3, 1));
    }
}
