//! Tabular planning and evaluation.
//!
//! Value functions live on a [`ReducedSpace`]; a full MDP is handled as the
//! reduced space of the full mask.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::TabularReducedMdp;
use crate::mdp::{FactoredState, GenerativeMdp, Mask, ReducedSpace, ReducedState, StateBudget};
use crate::seeding;

/// Two action values closer than this (relative to their magnitude) are
/// treated as tied, and the lower action index wins.
const TIE_TOLERANCE: f64 = 1e-9;

/// A deterministic policy over the reduced states of one mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    space: ReducedSpace,
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(space: ReducedSpace, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != space.len() {
            return Err(invalid("policy table does not cover the reduced space"));
        }
        Ok(Policy { space, actions })
    }

    pub fn constant(space: ReducedSpace, action: usize) -> Self {
        let actions = vec![action; space.len()];
        Policy { space, actions }
    }

    pub fn mask(&self) -> &Mask {
        self.space.mask()
    }

    pub fn space(&self) -> &ReducedSpace {
        &self.space
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn action_at(&self, index: usize) -> usize {
        self.actions[index]
    }

    pub fn action_for_reduced(&self, state: &ReducedState) -> usize {
        self.actions[self.space.index(state)]
    }

    /// Action in a full state, looked up through the policy's mask.
    #[inline]
    pub fn action_for(&self, state: &FactoredState) -> usize {
        self.actions[self.space.index_of_full(state)]
    }

    /// Action table over another space whose mask contains this policy's
    /// mask (for instance the full space).
    pub fn lift_to(&self, target: &ReducedSpace) -> Result<Vec<usize>> {
        if !self.mask().is_subset(target.mask()) {
            return Err(invalid("policy mask is not contained in the target mask"));
        }
        let mut exo = vec![0usize; target.variable_count().max(self.space.variable_count())];
        Ok((0..target.len())
            .map(|s| {
                let (n, x) = target.split(s);
                for (&i, v) in target.mask().indices().iter().zip(target.exo_values(x)) {
                    exo[i] = v;
                }
                self.actions[self.space.compose(n, self.space.exo_index_of_full(&exo))]
            })
            .collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueScope {
    /// Values believed inside a reduced model.
    Reduced,
    /// Exact values of a policy (or the optimum) in the full MDP.
    FullExact,
    /// Monte Carlo estimates in the full MDP.
    FullEmpirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub scope: ValueScope,
    space: ReducedSpace,
    values: Vec<f64>,
}

impl ValueTable {
    pub fn new(scope: ValueScope, space: ReducedSpace, values: Vec<f64>) -> Self {
        debug_assert_eq!(space.len(), values.len());
        ValueTable { scope, space, values }
    }

    pub fn space(&self) -> &ReducedSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    /// Value of the reduced state that `state` projects to.
    pub fn value_of(&self, state: &FactoredState) -> f64 {
        self.values[self.space.index_of_full(state)]
    }

    pub fn max_abs_diff(&self, other: &ValueTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Monotonic seconds. The core crate never reads a real clock itself.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances; planner timeouts never fire.
#[derive(Clone, Copy, Debug, Default)]
pub struct FrozenClock;

impl Clock for FrozenClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerOptions {
    pub epsilon: f64,
    pub timeout_secs: f64,
}

impl Default for PlannerOptions {
    fn default() -> Self {
        PlannerOptions {
            epsilon: 1e-4,
            timeout_secs: 60.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlanOutcome {
    pub policy: Policy,
    pub values: ValueTable,
    pub sweeps: usize,
    /// Max-norm change of the value table after each completed sweep.
    pub residuals: Vec<f64>,
    pub timed_out: bool,
}

/// Reusable buffers for one Bellman backup over a reduced model.
struct Backup {
    /// `W[n', x̃] = Σ_{x̃'} P(x̃' | x̃) V[n', x̃']`.
    lookahead: Vec<f64>,
    /// `Σ_{n'} W[n', x̃]`, needed by rows that carry uniform base mass.
    lookahead_sums: Vec<f64>,
    block_sums: Vec<f64>,
}

impl Backup {
    fn new(model: &TabularReducedMdp) -> Self {
        let space = model.space();
        Backup {
            lookahead: vec![0.0; space.len()],
            lookahead_sums: vec![0.0; space.exo_len()],
            block_sums: vec![0.0; space.endo_cardinality()],
        }
    }

    fn prepare(&mut self, model: &TabularReducedMdp, v: &[f64]) {
        let space = model.space();
        let (e, xl) = (space.endo_cardinality(), space.exo_len());
        for n2 in 0..e {
            self.block_sums[n2] = v[n2 * xl..(n2 + 1) * xl].iter().sum();
        }
        for x in 0..xl {
            let row = model.exo_row(x);
            let mut total = 0.0;
            for n2 in 0..e {
                let block = &v[n2 * xl..(n2 + 1) * xl];
                let w = row.expect(self.block_sums[n2], |x2| block[x2]);
                self.lookahead[n2 * xl + x] = w;
                total += w;
            }
            self.lookahead_sums[x] = total;
        }
    }

    #[inline]
    fn q(&self, model: &TabularReducedMdp, s: usize, a: usize) -> f64 {
        let space = model.space();
        let xl = space.exo_len();
        let (n, x) = space.split(s);
        let row = model.endo_row(n, a, x);
        let future = row.expect(self.lookahead_sums[x], |n2| self.lookahead[n2 * xl + x]);
        model.reward(s, a) + model.discount() * future
    }
}

/// Returns the chosen action and the maximal value.
fn argmax_action(qs: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut chosen: Option<(usize, f64)> = None;
    let mut max = f64::NEG_INFINITY;
    for (a, q) in qs.enumerate() {
        max = max.max(q);
        match chosen {
            Some((_, best)) if q <= best + TIE_TOLERANCE * best.abs().max(1.0) => {}
            _ => chosen = Some((a, q)),
        }
    }
    (chosen.map_or(0, |(a, _)| a), max)
}

/// Greedy policy (lowest action index on ties) with respect to `values`.
pub fn greedy_policy(model: &TabularReducedMdp, values: &[f64]) -> Policy {
    let mut backup = Backup::new(model);
    backup.prepare(model, values);
    let actions = (0..model.state_count())
        .map(|s| argmax_action((0..model.action_count()).map(|a| backup.q(model, s, a))).0)
        .collect();
    Policy {
        space: model.space().clone(),
        actions,
    }
}

/// Synchronous value iteration until the max-norm change drops below
/// `epsilon` or the timeout expires.
///
/// If the timeout expires after at least one full sweep, the last completed
/// values and their greedy policy are returned with `timed_out` set. If it
/// expires during the first sweep, [`Error::PlannerTimeout`] carries the
/// greedy policy of the zero value function.
pub fn value_iteration(
    model: &TabularReducedMdp,
    options: &PlannerOptions,
    clock: &dyn Clock,
) -> Result<PlanOutcome> {
    if !(options.epsilon > 0.0) {
        return Err(invalid("epsilon must be positive"));
    }
    let start = clock.now();
    let expired = || clock.now() - start > options.timeout_secs;
    let n_states = model.state_count();
    let mut v = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut backup = Backup::new(model);
    let mut residuals = Vec::new();
    let mut timed_out = false;

    loop {
        backup.prepare(model, &v);
        let mut aborted = false;
        let mut residual: f64 = 0.0;
        for s in 0..n_states {
            if s % 1024 == 1023 && expired() {
                aborted = true;
                break;
            }
            let (_, q) = argmax_action((0..model.action_count()).map(|a| backup.q(model, s, a)));
            residual = residual.max((q - v[s]).abs());
            next[s] = q;
        }
        if aborted {
            if residuals.is_empty() {
                let best_so_far = greedy_policy(model, &v);
                return Err(Error::PlannerTimeout {
                    best_so_far: Box::new(best_so_far),
                });
            }
            timed_out = true;
            break;
        }
        core::mem::swap(&mut v, &mut next);
        residuals.push(residual);
        if residual < options.epsilon {
            break;
        }
        if expired() {
            timed_out = true;
            break;
        }
    }

    let policy = greedy_policy(model, &v);
    Ok(PlanOutcome {
        policy,
        values: ValueTable::new(ValueScope::Reduced, model.space().clone(), v),
        sweeps: residuals.len(),
        residuals,
        timed_out,
    })
}

const MAX_EVALUATION_SWEEPS: usize = 10_000_000;

/// Evaluates `policy` inside `model` by iterating `V ← R_π + γ P_π V` until
/// the remaining error bound `γ/(1−γ)·‖ΔV‖` is below `tol`. The policy's mask
/// must be contained in the model's mask.
pub fn policy_evaluation(
    model: &TabularReducedMdp,
    policy: &Policy,
    tol: f64,
) -> Result<ValueTable> {
    let gamma = model.discount();
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("policy evaluation needs a discount in [0, 1)"));
    }
    let actions = policy.lift_to(model.space())?;
    let n_states = model.state_count();
    let mut v = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    let mut backup = Backup::new(model);
    for _ in 0..MAX_EVALUATION_SWEEPS {
        backup.prepare(model, &v);
        let mut delta: f64 = 0.0;
        for s in 0..n_states {
            let q = backup.q(model, s, actions[s]);
            delta = delta.max((q - v[s]).abs());
            next[s] = q;
        }
        core::mem::swap(&mut v, &mut next);
        if delta * gamma <= tol * (1.0 - gamma) {
            let scope = if model.mask().len() == model.space().variable_count() {
                ValueScope::FullExact
            } else {
                ValueScope::Reduced
            };
            return Ok(ValueTable::new(scope, model.space().clone(), v));
        }
    }
    Err(invalid("policy evaluation did not converge"))
}

/// `V_π` of a (reduced) policy in the full MDP, from analytic tables.
pub fn exact_policy_evaluation(
    mdp: &dyn GenerativeMdp,
    policy: &Policy,
    budget: StateBudget,
) -> Result<ValueTable> {
    let full = TabularReducedMdp::exact(mdp, &Mask::full(mdp.m()), budget)?;
    let mut table = policy_evaluation(&full, policy, 1e-10)?;
    table.scope = ValueScope::FullExact;
    Ok(table)
}

/// Optimal values of the full MDP by value iteration on analytic tables.
pub fn exact_optimal_values(
    mdp: &dyn GenerativeMdp,
    tol: f64,
    budget: StateBudget,
) -> Result<(Policy, ValueTable)> {
    let full = TabularReducedMdp::exact(mdp, &Mask::full(mdp.m()), budget)?;
    let gamma = full.discount();
    let epsilon = (tol * (1.0 - gamma)).max(f64::EPSILON);
    let out = value_iteration(
        &full,
        &PlannerOptions {
            epsilon,
            timeout_secs: f64::INFINITY,
        },
        &FrozenClock,
    )?;
    let mut values = out.values;
    values.scope = ValueScope::FullExact;
    Ok((out.policy, values))
}

/// Expectation of `values` under the initial-state distribution.
pub fn initial_state_value(mdp: &dyn GenerativeMdp, values: &ValueTable) -> Result<f64> {
    let model = mdp.analytic().ok_or(Error::UnsupportedMdp)?;
    Ok(model
        .initial_distribution()
        .iter()
        .map(|(s, p)| p * values.value_of(s))
        .sum())
}

/// Smallest horizon `H` with `γ^H · r_max / (1 − γ) < tol`.
pub fn truncation_horizon(gamma: f64, r_max: f64, tol: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("truncation horizon needs a discount in [0, 1)"));
    }
    if !(tol > 0.0) {
        return Err(invalid("truncation tolerance must be positive"));
    }
    if r_max <= 0.0 || gamma == 0.0 {
        return Ok(1);
    }
    let tail = r_max / (1.0 - gamma);
    let mut h = 1usize;
    let mut g = gamma;
    while g * tail >= tol {
        g *= gamma;
        h += 1;
    }
    Ok(h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub per_rollout: Vec<f64>,
}

/// One simulated step, passed to rollout observers.
pub struct Step<'a> {
    pub rollout: usize,
    pub t: usize,
    pub state: &'a FactoredState,
    pub action: usize,
    pub reward: f64,
}

/// Runs `policy` in the full MDP and returns the discounted return of every
/// rollout. Rollout `r` uses RNG stream `r` of `seed`.
pub fn simulate_policy(
    mdp: &dyn GenerativeMdp,
    policy: &Policy,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
    mut observe: impl FnMut(&Step<'_>),
) -> Result<Vec<f64>> {
    if n_rollouts == 0 {
        return Err(invalid("n_rollouts must be at least 1"));
    }
    policy.mask().validate(mdp.m())?;
    let gamma = mdp.discount();
    let mut returns = Vec::with_capacity(n_rollouts);
    for r in 0..n_rollouts {
        let mut rng = seeding::stream_rng(seed, r as u64);
        let mut state = mdp.sample_initial(&mut rng);
        let mut discount = 1.0;
        let mut total = 0.0;
        for t in 0..horizon {
            let action = policy.action_for(&state);
            let reward = mdp.reward(&state, action);
            observe(&Step {
                rollout: r,
                t,
                state: &state,
                action,
                reward,
            });
            total += discount * reward;
            discount *= gamma;
            state = mdp.sample_transition(&state, action, &mut rng);
        }
        returns.push(total);
    }
    Ok(returns)
}

/// Mean truncated discounted return of `policy` from the initial-state
/// distribution.
pub fn monte_carlo_value(
    mdp: &dyn GenerativeMdp,
    policy: &Policy,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let per_rollout = simulate_policy(mdp, policy, n_rollouts, horizon, seed, |_| {})?;
    let mean = per_rollout.iter().sum::<f64>() / per_rollout.len() as f64;
    Ok(MonteCarloEstimate { mean, per_rollout })
}

fn check_hoeffding(n: usize, gamma: f64, r_max: f64) -> Result<()> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if gamma >= 1.0 {
        return Err(invalid("Hoeffding bound is degenerate for gamma = 1"));
    }
    if !(gamma > 0.0) {
        return Err(invalid("gamma must be in (0, 1)"));
    }
    if !(r_max > 0.0) {
        return Err(invalid("r_max must be positive"));
    }
    Ok(())
}

/// Probability lower bound that `n` rollouts estimate a value within `lam`,
/// for per-step rewards in `[0, r_max]`:
/// `max(0, 1 − 2·exp(−2·n·lam²·(1−γ)²/r_max²))`.
pub fn hoeffding_confidence(n: usize, lam: f64, gamma: f64, r_max: f64) -> Result<f64> {
    check_hoeffding(n, gamma, r_max)?;
    if !(lam > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    let exponent = -2.0 * n as f64 * lam * lam * (1.0 - gamma) * (1.0 - gamma) / (r_max * r_max);
    Ok((1.0 - 2.0 * libm::exp(exponent)).max(0.0))
}

/// The accuracy `lam` at which [`hoeffding_confidence`] equals `confidence`.
pub fn hoeffding_radius(n: usize, confidence: f64, gamma: f64, r_max: f64) -> Result<f64> {
    check_hoeffding(n, gamma, r_max)?;
    if !(0.0..1.0).contains(&confidence) {
        return Err(invalid("confidence must be in [0, 1)"));
    }
    let k = libm::log(2.0 / (1.0 - confidence));
    Ok(r_max / (1.0 - gamma) * libm::sqrt(k / (2.0 * n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hoeffding_reference_points() {
        let c = hoeffding_confidence(1, 1.0 / (1.0 - 0.5), 0.5, 1.0).unwrap();
        assert!((c - (1.0 - 2.0 * libm::exp(-2.0))).abs() < 1e-12);
        assert!((c - 0.729_329_433_526_5).abs() < 1e-9);
        assert_eq!(hoeffding_confidence(1, 1e-3, 0.9, 1.0).unwrap(), 0.0);
        assert!(hoeffding_confidence(10_000_000, 1.0, 0.9, 1.0).unwrap() > 0.999_999);
        assert!(hoeffding_confidence(10, 1.0, 1.0, 1.0).is_err());
        assert!(hoeffding_confidence(0, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn hoeffding_radius_inverts_confidence() {
        let lam = hoeffding_radius(500, 0.9, 0.9, 2.0).unwrap();
        let c = hoeffding_confidence(500, lam, 0.9, 2.0).unwrap();
        assert!((c - 0.9).abs() < 1e-12);
    }

    #[test]
    fn truncation_horizon_bounds_the_tail() {
        let h = truncation_horizon(0.9, 1.0, 1e-3).unwrap();
        assert!(libm::pow(0.9, h as f64) * 10.0 < 1e-3);
        assert!(libm::pow(0.9, (h - 1) as f64) * 10.0 >= 1e-3);
        assert_eq!(truncation_horizon(0.0, 5.0, 1e-3).unwrap(), 1);
        assert!(truncation_horizon(1.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn ties_go_to_lowest_action() {
        assert_eq!(argmax_action([1.0, 1.0, 0.5].into_iter()).0, 0);
        assert_eq!(argmax_action([1.0, 1.0 + 1e-13, 0.5].into_iter()).0, 0);
        assert_eq!(argmax_action([1.0, 2.0, 2.0].into_iter()).0, 1);
    }
}
