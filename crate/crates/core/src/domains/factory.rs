//! Task-stream factory.
//!
//! The robot is either at its base (0) or at the assembly station (1), and
//! can wait, move to the other location, or assemble. Each task variable is a
//! binary ready flag. Assembling at the station earns `ready_reward` per ready
//! task and loses `unready_penalty` per task that is not ready, so it only
//! pays when every task is ready at once. Distractors are binary chains with
//! no reward.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{product_rows, sample_rows};
use crate::dist::Categorical;
use crate::error::{invalid, Result};
use crate::mdp::{AnalyticModel, FactoredState, GenerativeMdp, VariableSpec};
use crate::planner::{simulate_policy, Policy};

pub const WAIT: usize = 0;
pub const MOVE: usize = 1;
pub const ASSEMBLE: usize = 2;
pub const STATION: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorySpec {
    pub tasks: usize,
    pub distractors: usize,
    /// `P(ready' = 1 | ready = 1)`.
    pub ready_stay: f64,
    /// `P(ready' = 1 | ready = 0)`.
    pub ready_arrive: f64,
    pub distractor_flip: f64,
    pub ready_reward: f64,
    pub unready_penalty: f64,
    pub discount: f64,
}

impl Default for FactorySpec {
    fn default() -> Self {
        FactorySpec {
            tasks: 3,
            distractors: 3,
            ready_stay: 0.8,
            ready_arrive: 0.2,
            distractor_flip: 0.3,
            ready_reward: 1.0,
            unready_penalty: 3.0,
            discount: 0.9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FactoryMdp {
    spec: FactorySpec,
    variables: Vec<VariableSpec>,
}

impl FactoryMdp {
    pub fn new(spec: FactorySpec) -> Result<Self> {
        for p in [spec.ready_stay, spec.ready_arrive, spec.distractor_flip] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("probability out of range: {p}")));
            }
        }
        if !(0.0..1.0).contains(&spec.discount) {
            return Err(invalid("discount must be in [0, 1)"));
        }
        if spec.tasks + spec.distractors > 40 {
            return Err(invalid("at most 40 variables"));
        }
        let mut variables = Vec::new();
        for k in 0..spec.tasks {
            variables.push(VariableSpec::new(k, 2, format!("task-{k}")));
        }
        for k in 0..spec.distractors {
            variables.push(VariableSpec::new(spec.tasks + k, 2, format!("distractor-{k}")));
        }
        Ok(FactoryMdp { spec, variables })
    }

    pub fn spec(&self) -> &FactorySpec {
        &self.spec
    }

    pub fn is_task(&self, i: usize) -> bool {
        i < self.spec.tasks
    }

    /// Assembling at the station while every task is ready.
    pub fn is_success(&self, state: &FactoredState, action: usize) -> bool {
        self.spec.tasks > 0
            && state.endo == STATION
            && action == ASSEMBLE
            && state.exo[..self.spec.tasks].iter().all(|&v| v == 1)
    }

    /// Total successes of `policy` over `n_rollouts` rollouts.
    pub fn count_successes(
        &self,
        policy: &Policy,
        n_rollouts: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<u64> {
        let mut successes = 0u64;
        simulate_policy(self, policy, n_rollouts, horizon, seed, |step| {
            if self.is_success(step.state, step.action) {
                successes += 1;
            }
        })?;
        Ok(successes)
    }

    fn next_rows(&self, exo: &[usize]) -> Vec<Categorical> {
        let s = &self.spec;
        exo.iter()
            .enumerate()
            .map(|(i, &v)| {
                let up = if i < s.tasks {
                    if v == 1 { s.ready_stay } else { s.ready_arrive }
                } else if v == 1 {
                    1.0 - s.distractor_flip
                } else {
                    s.distractor_flip
                };
                Categorical::from_dense(&[1.0 - up, up])
            })
            .collect()
    }

    fn endo_next(endo: usize, action: usize) -> usize {
        if action == MOVE { 1 - endo } else { endo }
    }
}

impl AnalyticModel for FactoryMdp {
    fn endo_transition(&self, endo: usize, action: usize, _exo: &[usize]) -> Categorical {
        Categorical::point(2, Self::endo_next(endo, action))
    }

    fn exo_transition(&self, exo: &[usize]) -> Vec<(Vec<usize>, f64)> {
        product_rows(&self.next_rows(exo))
    }

    fn initial_distribution(&self) -> Vec<(FactoredState, f64)> {
        let rows: Vec<Categorical> = self.variables.iter().map(|_| Categorical::uniform(2)).collect();
        product_rows(&rows)
            .into_iter()
            .map(|(exo, p)| (FactoredState::new(0, exo), p))
            .collect()
    }
}

impl GenerativeMdp for FactoryMdp {
    fn action_count(&self) -> usize {
        3
    }

    fn endo_cardinality(&self) -> usize {
        2
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn discount(&self) -> f64 {
        self.spec.discount
    }

    fn r_max(&self) -> f64 {
        self.spec.tasks as f64 * self.spec.ready_reward.abs().max(self.spec.unready_penalty.abs())
    }

    fn sample_transition(
        &self,
        state: &FactoredState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> FactoredState {
        let exo = sample_rows(&self.next_rows(&state.exo), rng);
        FactoredState::new(Self::endo_next(state.endo, action), exo)
    }

    fn reward_component(&self, i: usize, endo: usize, value: usize, action: usize) -> f64 {
        if i >= self.spec.tasks || endo != STATION || action != ASSEMBLE {
            return 0.0;
        }
        if value == 1 {
            self.spec.ready_reward
        } else {
            -self.spec.unready_penalty
        }
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> FactoredState {
        let exo = sample_rows(&vec![Categorical::uniform(2); self.variables.len()], rng);
        FactoredState::new(0, exo)
    }

    fn analytic(&self) -> Option<&dyn AnalyticModel> {
        Some(self)
    }
}
