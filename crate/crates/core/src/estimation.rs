//! Rollout collection, reduced-model fitting and the statistics that drive
//! mask search.
//!
//! Exogenous variables ignore the agent's actions, so their dynamics can be
//! estimated from rollouts that never consult a policy. Only the endogenous
//! rows `P(n' | n, a, x̃)` need policy-driven data.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{invalid, Error, Result};
use crate::mdp::{FactoredState, GenerativeMdp, Mask, ReducedSpace, StateBudget};
use crate::planner::Policy;
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExoTransition {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
}

/// Exogenous transitions gathered without a policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExoRolloutDataset {
    pub m: usize,
    pub horizon: usize,
    pub n_rollouts: usize,
    pub seed: u64,
    /// Rollout-major: rollout `r` occupies `r * horizon .. (r + 1) * horizon`.
    pub transitions: Vec<ExoTransition>,
}

impl ExoRolloutDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullTransition {
    pub state: FactoredState,
    pub action: usize,
    pub reward: f64,
    pub next: FactoredState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullRolloutDataset {
    pub m: usize,
    pub horizon: usize,
    pub n_rollouts: usize,
    pub seed: u64,
    pub policy_tag: String,
    pub transitions: Vec<FullTransition>,
}

impl FullRolloutDataset {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Data-gathering policy for full rollouts.
#[derive(Clone, Copy, Debug)]
pub enum Behavior<'a> {
    UniformRandom,
    Policy(&'a Policy),
}

impl Behavior<'_> {
    pub fn tag(&self) -> String {
        match self {
            Behavior::UniformRandom => "uniform-random".into(),
            Behavior::Policy(p) => alloc::format!("policy{}", p.mask()),
        }
    }
}

fn check_counts(n_rollouts: usize, horizon: usize) -> Result<()> {
    if n_rollouts == 0 || horizon == 0 {
        return Err(invalid("n_rollouts and horizon must be at least 1"));
    }
    Ok(())
}

/// Rolls the exogenous process forward from sampled initial states. The
/// action passed to the sampler is always 0; its value is irrelevant for the
/// exogenous components.
pub fn collect_exo_rollouts(
    mdp: &dyn GenerativeMdp,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<ExoRolloutDataset> {
    check_counts(n_rollouts, horizon)?;
    let mut transitions = Vec::with_capacity(n_rollouts * horizon);
    for r in 0..n_rollouts {
        let mut rng = seeding::stream_rng(seed, r as u64);
        let mut state = mdp.sample_initial(&mut rng);
        for _ in 0..horizon {
            let next = mdp.sample_transition(&state, 0, &mut rng);
            transitions.push(ExoTransition {
                from: state.exo.clone(),
                to: next.exo.clone(),
            });
            state = next;
        }
    }
    Ok(ExoRolloutDataset {
        m: mdp.m(),
        horizon,
        n_rollouts,
        seed,
        transitions,
    })
}

pub fn collect_full_rollouts(
    mdp: &dyn GenerativeMdp,
    behavior: Behavior<'_>,
    n_rollouts: usize,
    horizon: usize,
    seed: u64,
) -> Result<FullRolloutDataset> {
    check_counts(n_rollouts, horizon)?;
    let n_actions = mdp.action_count();
    let mut transitions = Vec::with_capacity(n_rollouts * horizon);
    for r in 0..n_rollouts {
        let mut rng = seeding::stream_rng(seed, r as u64);
        let mut state = mdp.sample_initial(&mut rng);
        for _ in 0..horizon {
            let action = match behavior {
                Behavior::UniformRandom => rng.gen_range(0..n_actions),
                Behavior::Policy(p) => p.action_for(&state),
            };
            let reward = mdp.reward(&state, action);
            let next = mdp.sample_transition(&state, action, &mut rng);
            transitions.push(FullTransition {
                state: state.clone(),
                action,
                reward,
                next: next.clone(),
            });
            state = next;
        }
    }
    Ok(FullRolloutDataset {
        m: mdp.m(),
        horizon,
        n_rollouts,
        seed,
        policy_tag: behavior.tag(),
        transitions,
    })
}

/// A tabular reduced model over the states of one mask.
///
/// `P(n', x̃' | n, a, x̃) = P(n' | n, a, x̃) · P(x̃' | x̃)` and the reward is
/// the sum of the masked reward components.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TabularReducedMdp {
    space: ReducedSpace,
    action_count: usize,
    discount: f64,
    /// Indexed by `(n * A + a) * |X̃| + x̃`.
    endo_rows: Vec<Categorical>,
    /// Indexed by `x̃`.
    exo_rows: Vec<Categorical>,
    /// Indexed by `s̃ * A + a`.
    rewards: Vec<f64>,
}

impl TabularReducedMdp {
    pub fn space(&self) -> &ReducedSpace {
        &self.space
    }

    pub fn mask(&self) -> &Mask {
        self.space.mask()
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn state_count(&self) -> usize {
        self.space.len()
    }

    #[inline]
    pub fn endo_row(&self, endo: usize, action: usize, exo_index: usize) -> &Categorical {
        &self.endo_rows[(endo * self.action_count + action) * self.space.exo_len() + exo_index]
    }

    #[inline]
    pub fn exo_row(&self, exo_index: usize) -> &Categorical {
        &self.exo_rows[exo_index]
    }

    #[inline]
    pub fn reward(&self, state_index: usize, action: usize) -> f64 {
        self.rewards[state_index * self.action_count + action]
    }

    /// Replaces the discount factor. Used for myopic and sensitivity checks.
    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    /// Adds `c` to every reward.
    pub fn shift_rewards(mut self, c: f64) -> Self {
        for r in &mut self.rewards {
            *r += c;
        }
        self
    }

    /// Probability of moving from reduced state `from` to `to` under `action`.
    pub fn transition_prob(&self, from: usize, action: usize, to: usize) -> f64 {
        let (n, x) = self.space.split(from);
        let (n2, x2) = self.space.split(to);
        self.endo_row(n, action, x).prob(n2) * self.exo_row(x).prob(x2)
    }

    /// Largest deviation of any row mass from 1.
    pub fn normalization_error(&self) -> f64 {
        self.endo_rows
            .iter()
            .chain(&self.exo_rows)
            .map(|r| (r.total_mass() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Builds the reduced model directly from analytic tables. Variables
    /// outside the mask are marginalized with uniform weight over their joint
    /// values; when the conditions for exact reduction hold the weighting is
    /// irrelevant.
    pub fn exact(mdp: &dyn GenerativeMdp, mask: &Mask, budget: StateBudget) -> Result<Self> {
        let model = mdp.analytic().ok_or(Error::UnsupportedMdp)?;
        let space = ReducedSpace::new(mdp, mask, budget)?;
        let vars = mdp.variables();
        let m = vars.len();
        let complement = mask.complement(m);
        let rest = ReducedSpace::from_parts(1, vars, &complement, budget)?;
        let (e, a_n, xl) = (mdp.endo_cardinality(), mdp.action_count(), space.exo_len());
        let weight = 1.0 / rest.exo_len() as f64;

        let mut exo_acc: Vec<BTreeMap<usize, f64>> = alloc::vec![BTreeMap::new(); xl];
        let mut endo_acc: Vec<Vec<f64>> = alloc::vec![alloc::vec![0.0; e]; e * a_n * xl];
        let mut exo = alloc::vec![0usize; m];
        for xt in 0..xl {
            let masked = space.exo_values(xt);
            for xb in 0..rest.exo_len() {
                let other = rest.exo_values(xb);
                for (&i, &v) in mask.indices().iter().zip(&masked) {
                    exo[i] = v;
                }
                for (&i, &v) in complement.indices().iter().zip(&other) {
                    exo[i] = v;
                }
                for (next, p) in model.exo_transition(&exo) {
                    *exo_acc[xt].entry(space.exo_index_of_full(&next)).or_insert(0.0) += p * weight;
                }
                for n in 0..e {
                    for a in 0..a_n {
                        let row = model.endo_transition(n, a, &exo);
                        let acc = &mut endo_acc[(n * a_n + a) * xl + xt];
                        for (n2, p) in row.to_dense().into_iter().enumerate() {
                            acc[n2] += p * weight;
                        }
                    }
                }
            }
        }
        let exo_rows = exo_acc
            .into_iter()
            .map(|acc| Categorical::from_sparse(xl, acc))
            .collect();
        let endo_rows = endo_acc.iter().map(|w| Categorical::from_dense(w)).collect();
        let rewards = exact_rewards(mdp, &space);
        Ok(TabularReducedMdp {
            space,
            action_count: a_n,
            discount: mdp.discount(),
            endo_rows,
            exo_rows,
            rewards,
        })
    }
}

fn exact_rewards(mdp: &dyn GenerativeMdp, space: &ReducedSpace) -> Vec<f64> {
    let a_n = mdp.action_count();
    let mask = space.mask().indices();
    let mut rewards = Vec::with_capacity(space.len() * a_n);
    for s in 0..space.len() {
        let (n, x) = space.split(s);
        let values = space.exo_values(x);
        for a in 0..a_n {
            rewards.push(
                mask.iter()
                    .zip(&values)
                    .map(|(&i, &v)| mdp.reward_component(i, n, v, a))
                    .sum(),
            );
        }
    }
    rewards
}

fn exo_rows_from_pairs<'a>(
    pairs: impl Iterator<Item = (&'a [usize], &'a [usize])>,
    space: &ReducedSpace,
    smoothing: f64,
) -> Vec<Categorical> {
    let xl = space.exo_len();
    let mut counts: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    for (from, to) in pairs {
        let row = counts.entry(space.exo_index_of_full(from)).or_default();
        *row.entry(space.exo_index_of_full(to)).or_insert(0) += 1;
    }
    let empty = BTreeMap::new();
    (0..xl)
        .map(|x| Categorical::from_counts(xl, counts.get(&x).unwrap_or(&empty), smoothing))
        .collect()
}

/// `P̂(x̃' | x̃)` fitted from policy-free exogenous rollouts.
pub fn exo_table_from_exo(
    data: &ExoRolloutDataset,
    space: &ReducedSpace,
    smoothing: f64,
) -> Vec<Categorical> {
    exo_rows_from_pairs(
        data.transitions.iter().map(|t| (t.from.as_slice(), t.to.as_slice())),
        space,
        smoothing,
    )
}

/// `P̂(x̃' | x̃)` fitted from the exogenous part of full rollouts.
pub fn exo_table_from_full(
    data: &FullRolloutDataset,
    space: &ReducedSpace,
    smoothing: f64,
) -> Vec<Categorical> {
    exo_rows_from_pairs(
        data.transitions
            .iter()
            .map(|t| (t.state.exo.as_slice(), t.next.exo.as_slice())),
        space,
        smoothing,
    )
}

/// Number of times each exogenous row was observed.
pub fn exo_row_visits(
    pairs: impl Iterator<Item = Vec<usize>>,
    space: &ReducedSpace,
) -> BTreeMap<usize, u64> {
    let mut visits = BTreeMap::new();
    for from in pairs {
        *visits.entry(space.exo_index_of_full(&from)).or_insert(0) += 1;
    }
    visits
}

/// Fits the reduced model of `mask`: exogenous rows from `exo_data`,
/// endogenous rows from `full_data` grouped by `(n, a, x̃)`, rewards exactly
/// from the reward components. Unobserved rows are uniform when
/// `smoothing = 0`.
pub fn fit_reduced_mdp(
    mdp: &dyn GenerativeMdp,
    mask: &Mask,
    exo_data: &ExoRolloutDataset,
    full_data: &FullRolloutDataset,
    smoothing: f64,
    budget: StateBudget,
) -> Result<TabularReducedMdp> {
    if exo_data.is_empty() {
        return Err(Error::InsufficientData("exogenous dataset is empty"));
    }
    if full_data.is_empty() {
        return Err(Error::InsufficientData("full-rollout dataset is empty"));
    }
    if exo_data.m != mdp.m() || full_data.m != mdp.m() {
        return Err(invalid("dataset variable count does not match the MDP"));
    }
    if !(smoothing >= 0.0) {
        return Err(invalid("smoothing must be non-negative"));
    }
    let space = ReducedSpace::new(mdp, mask, budget)?;
    let (e, a_n, xl) = (mdp.endo_cardinality(), mdp.action_count(), space.exo_len());

    let exo_rows = exo_table_from_exo(exo_data, &space, smoothing);

    let mut counts: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    for t in &full_data.transitions {
        let key = (t.state.endo * a_n + t.action) * xl + space.exo_index_of_full(&t.state.exo);
        *counts.entry(key).or_default().entry(t.next.endo).or_insert(0) += 1;
    }
    let empty = BTreeMap::new();
    let endo_rows = (0..e * a_n * xl)
        .map(|k| Categorical::from_counts(e, counts.get(&k).unwrap_or(&empty), smoothing))
        .collect();

    Ok(TabularReducedMdp {
        rewards: exact_rewards(mdp, &space),
        space,
        action_count: a_n,
        discount: mdp.discount(),
        endo_rows,
        exo_rows,
    })
}

/// Plug-in mutual information (nats) of the empirical joint distribution of
/// `(a, b)` pairs. Non-negative; zero for an empty iterator.
pub fn mutual_information_of_pairs<A: Ord + Clone, B: Ord + Clone>(
    pairs: impl IntoIterator<Item = (A, B)>,
) -> f64 {
    let mut joint: BTreeMap<(A, B), u64> = BTreeMap::new();
    let mut left: BTreeMap<A, u64> = BTreeMap::new();
    let mut right: BTreeMap<B, u64> = BTreeMap::new();
    let mut n = 0u64;
    for (a, b) in pairs {
        *left.entry(a.clone()).or_insert(0) += 1;
        *right.entry(b.clone()).or_insert(0) += 1;
        *joint.entry((a, b)).or_insert(0) += 1;
        n += 1;
    }
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mi: f64 = joint
        .iter()
        .map(|((a, b), &c)| {
            let c = c as f64;
            let ca = left[a] as f64;
            let cb = right[b] as f64;
            c / nf * libm::log(c * nf / (ca * cb))
        })
        .sum();
    mi.max(0.0)
}

/// Plug-in Shannon entropy (nats) of the empirical distribution of `keys`.
pub fn plugin_entropy<K: Ord>(keys: impl IntoIterator<Item = K>) -> f64 {
    let mut counts: BTreeMap<K, u64> = BTreeMap::new();
    let mut n = 0u64;
    for k in keys {
        *counts.entry(k).or_insert(0) += 1;
        n += 1;
    }
    let nf = n as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / nf;
            -p * libm::log(p)
        })
        .sum::<f64>()
        .max(0.0)
}

/// Atom ids of the masked transition pair `(x̃_t, x̃_{t+1})` for every
/// transition in a dataset. Built once per mask and reused for every
/// candidate variable.
pub struct TransitionAtoms<'a> {
    data: &'a ExoRolloutDataset,
    mask: Mask,
    ids: Vec<u32>,
}

impl<'a> TransitionAtoms<'a> {
    pub fn new(data: &'a ExoRolloutDataset, mask: &Mask) -> Result<Self> {
        mask.validate(data.m)?;
        let mut lookup: BTreeMap<Vec<usize>, u32> = BTreeMap::new();
        let mut key = Vec::with_capacity(2 * mask.len());
        let ids = data
            .transitions
            .iter()
            .map(|t| {
                key.clear();
                key.extend(mask.indices().iter().map(|&i| t.from[i]));
                key.extend(mask.indices().iter().map(|&i| t.to[i]));
                let next = lookup.len() as u32;
                *lookup.entry(key.clone()).or_insert(next)
            })
            .collect();
        Ok(TransitionAtoms {
            data,
            mask: mask.clone(),
            ids,
        })
    }

    /// `I((x̃_t, x̃_{t+1}); (x^j_t, x^j_{t+1}))` in nats.
    pub fn mutual_information(&self, j: usize) -> Result<f64> {
        if j >= self.data.m {
            return Err(Error::InvalidMask { index: j, m: self.data.m });
        }
        if self.mask.contains(j) {
            return Err(invalid(alloc::format!("variable {j} is already in the mask")));
        }
        if self.data.is_empty() {
            return Err(Error::InsufficientData("exogenous dataset is empty"));
        }
        if self.mask.is_empty() {
            return Ok(0.0);
        }
        Ok(mutual_information_of_pairs(
            self.ids
                .iter()
                .zip(&self.data.transitions)
                .map(|(&a, t)| (a, (t.from[j], t.to[j]))),
        ))
    }
}

/// Mutual information between the transition pair of the masked variables
/// and that of candidate variable `j`, estimated from policy-free rollouts.
/// Pools all time steps.
pub fn transition_mutual_information(
    data: &ExoRolloutDataset,
    mask: &Mask,
    j: usize,
) -> Result<f64> {
    TransitionAtoms::new(data, mask)?.mutual_information(j)
}

/// Variant whose masked side also includes the endogenous state, estimated
/// from full rollouts. Depends on the data-gathering policy.
pub fn transition_mutual_information_with_endo(
    data: &FullRolloutDataset,
    mask: &Mask,
    j: usize,
) -> Result<f64> {
    mask.validate(data.m)?;
    if j >= data.m {
        return Err(Error::InvalidMask { index: j, m: data.m });
    }
    if mask.contains(j) {
        return Err(invalid(alloc::format!("variable {j} is already in the mask")));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("full-rollout dataset is empty"));
    }
    Ok(mutual_information_of_pairs(data.transitions.iter().map(|t| {
        let mut a = Vec::with_capacity(2 * mask.len() + 2);
        a.push(t.state.endo);
        a.extend(mask.indices().iter().map(|&i| t.state.exo[i]));
        a.push(t.next.endo);
        a.extend(mask.indices().iter().map(|&i| t.next.exo[i]));
        (a, (t.state.exo[j], t.next.exo[j]))
    })))
}

/// Draws the context (state and action) around which one variable is varied
/// during reward screening. The value of the varied variable is overwritten.
pub trait ContextSampler {
    fn sample_context(
        &self,
        mdp: &dyn GenerativeMdp,
        rng: &mut seeding::Rng,
    ) -> (FactoredState, usize);
}

/// Uniform over the endogenous states, every variable's domain and actions.
pub struct UniformContext;

impl ContextSampler for UniformContext {
    fn sample_context(
        &self,
        mdp: &dyn GenerativeMdp,
        rng: &mut seeding::Rng,
    ) -> (FactoredState, usize) {
        let state = FactoredState {
            endo: rng.gen_range(0..mdp.endo_cardinality()),
            exo: mdp
                .variables()
                .iter()
                .map(|v| rng.gen_range(0..v.cardinality))
                .collect(),
        };
        (state, rng.gen_range(0..mdp.action_count()))
    }
}

/// Variables whose reward component varies, on average, by more than
/// `tau_variance` when the variable alone is resampled.
pub fn estimate_reward_variables(
    mdp: &dyn GenerativeMdp,
    tau_variance: f64,
    n1: usize,
    n2: usize,
    seed: u64,
) -> Result<Mask> {
    estimate_reward_variables_with(mdp, tau_variance, n1, n2, seed, &UniformContext)
}

pub fn estimate_reward_variables_with(
    mdp: &dyn GenerativeMdp,
    tau_variance: f64,
    n1: usize,
    n2: usize,
    seed: u64,
    sampler: &dyn ContextSampler,
) -> Result<Mask> {
    if n1 == 0 {
        return Err(invalid("n1 must be at least 1"));
    }
    if n2 < 2 {
        return Err(invalid("n2 must be at least 2 for a variance"));
    }
    let mut selected = Vec::new();
    let mut rewards = alloc::vec![0.0; n2];
    for (i, var) in mdp.variables().iter().enumerate() {
        let mut rng = seeding::stream_rng(seed, i as u64);
        let mut total = 0.0;
        for _ in 0..n1 {
            let (state, action) = sampler.sample_context(mdp, &mut rng);
            for r in rewards.iter_mut() {
                let v = rng.gen_range(0..var.cardinality);
                *r = mdp.reward_component(i, state.endo, v, action);
            }
            total += sample_variance(&rewards);
        }
        if total / n1 as f64 > tau_variance {
            selected.push(i);
        }
    }
    Mask::new(selected, mdp.m())
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mutual_information_is_symmetric() {
        let pairs: Vec<(u8, u8)> = vec![(0, 0), (0, 1), (1, 1), (1, 1), (2, 0), (0, 0), (2, 2)];
        let ab = mutual_information_of_pairs(pairs.iter().copied());
        let ba = mutual_information_of_pairs(pairs.iter().map(|&(a, b)| (b, a)));
        assert!((ab - ba).abs() < 1e-12);
        assert!(ab > 0.0);
    }

    #[test]
    fn mutual_information_of_identical_variables_is_entropy() {
        let xs = [0u8, 1, 1, 2, 2, 2, 3, 0, 1];
        let mi = mutual_information_of_pairs(xs.iter().map(|&x| (x, x)));
        let h = plugin_entropy(xs.iter().copied());
        assert!((mi - h).abs() < 1e-12);
    }

    #[test]
    fn single_atom_has_zero_information() {
        assert_eq!(mutual_information_of_pairs([(1u8, 2u8)]), 0.0);
        assert_eq!(mutual_information_of_pairs(Vec::<(u8, u8)>::new()), 0.0);
    }

    #[test]
    fn variance_uses_unbiased_denominator() {
        assert!((sample_variance(&[0.0, 1.0]) - 0.5).abs() < 1e-12);
        assert_eq!(sample_variance(&[3.0, 3.0, 3.0]), 0.0);
    }
}
