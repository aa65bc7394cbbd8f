//! Factored states, masks and the generative-model interface.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{invalid, Error, Result};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub id: usize,
    pub cardinality: usize,
    pub name: String,
}

impl VariableSpec {
    pub fn new(id: usize, cardinality: usize, name: impl Into<String>) -> Self {
        assert!(cardinality >= 1, "variable cardinality must be positive");
        VariableSpec {
            id,
            cardinality,
            name: name.into(),
        }
    }
}

/// Checks that ids are `0..m` in order and every cardinality is positive.
pub fn validate_variables(vars: &[VariableSpec]) -> Result<()> {
    for (i, v) in vars.iter().enumerate() {
        if v.id != i {
            return Err(invalid(alloc::format!(
                "variable ids must be contiguous from 0; found id {} at position {i}",
                v.id
            )));
        }
        if v.cardinality == 0 {
            return Err(invalid(alloc::format!("variable {i} has cardinality 0")));
        }
    }
    Ok(())
}

/// A full state: endogenous index plus one value per exogenous variable.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FactoredState {
    pub endo: usize,
    pub exo: Vec<usize>,
}

impl FactoredState {
    pub fn new(endo: usize, exo: Vec<usize>) -> Self {
        FactoredState { endo, exo }
    }
}

/// A set of exogenous variable indices, kept sorted and duplicate free.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mask {
    included: Vec<usize>,
}

impl Mask {
    pub fn empty() -> Self {
        Mask::default()
    }

    pub fn full(m: usize) -> Self {
        Mask {
            included: (0..m).collect(),
        }
    }

    /// Builds a mask from arbitrary indices, rejecting any index `>= m`.
    pub fn new(indices: impl IntoIterator<Item = usize>, m: usize) -> Result<Self> {
        let mut included: Vec<usize> = indices.into_iter().collect();
        included.sort_unstable();
        included.dedup();
        if let Some(&bad) = included.iter().find(|&&i| i >= m) {
            return Err(Error::InvalidMask { index: bad, m });
        }
        Ok(Mask { included })
    }

    /// Mask whose members are the set bits of `bits`.
    pub fn from_bits(bits: u64, m: usize) -> Self {
        Mask {
            included: (0..m).filter(|i| bits >> i & 1 == 1).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.included
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.included.binary_search(&i).is_ok()
    }

    /// Position of variable `i` inside the mask, if present.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.included.binary_search(&i).ok()
    }

    pub fn with(&self, i: usize) -> Mask {
        let mut m = self.clone();
        if let Err(pos) = m.included.binary_search(&i) {
            m.included.insert(pos, i);
        }
        m
    }

    /// Variables in `0..m` that are not in the mask.
    pub fn complement(&self, m: usize) -> Mask {
        Mask {
            included: (0..m).filter(|i| !self.contains(*i)).collect(),
        }
    }

    pub fn is_subset(&self, other: &Mask) -> bool {
        self.included.iter().all(|i| other.contains(*i))
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self.included.iter().find(|&&i| i >= m) {
            Some(&index) => Err(Error::InvalidMask { index, m }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.included.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

/// Parses `{0,2}`, `0,2` or `{}`. The result is not checked against any `m`.
impl FromStr for Mask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('{').trim_end_matches('}');
        let mut included = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let i = part
                .parse::<usize>()
                .map_err(|_| invalid(alloc::format!("bad mask element '{part}'")))?;
            included.push(i);
        }
        Mask::new(included, usize::MAX)
    }
}

/// A state of the reduced model: the endogenous index plus the values of
/// exactly the masked variables, in mask order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReducedState {
    pub endo: usize,
    pub exo_masked: Vec<usize>,
}

/// Upper bound on the number of states any tabular routine may enumerate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateBudget(pub u64);

impl Default for StateBudget {
    fn default() -> Self {
        StateBudget(1_000_000)
    }
}

/// Exact tables for small domains. Built-in toy domains expose these so the
/// theorem checker and exact evaluators can run.
pub trait AnalyticModel {
    /// `P(n' | n, a, x)` over the endogenous states.
    fn endo_transition(&self, endo: usize, action: usize, exo: &[usize]) -> Categorical;

    /// Joint `P(x' | x)` as `(next exo vector, probability)` pairs.
    fn exo_transition(&self, exo: &[usize]) -> Vec<(Vec<usize>, f64)>;

    fn initial_distribution(&self) -> Vec<(FactoredState, f64)>;
}

/// Black-box access to an MDP with an endogenous/exogenous state split and
/// a reward that decomposes as a sum of one component per exogenous
/// variable.
///
/// Implementations must draw the exogenous part of the next state without
/// looking at the action, and must be deterministic given the RNG state.
pub trait GenerativeMdp: Send + Sync {
    fn action_count(&self) -> usize;

    fn endo_cardinality(&self) -> usize;

    fn variables(&self) -> &[VariableSpec];

    fn discount(&self) -> f64;

    /// Declared bound on `|reward(s, a)|`.
    fn r_max(&self) -> f64;

    fn sample_transition(
        &self,
        state: &FactoredState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> FactoredState;

    /// `R^i(n, x^i, a)`.
    fn reward_component(&self, i: usize, endo: usize, value: usize, action: usize) -> f64;

    fn reward(&self, state: &FactoredState, action: usize) -> f64 {
        state
            .exo
            .iter()
            .enumerate()
            .map(|(i, &v)| self.reward_component(i, state.endo, v, action))
            .sum()
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> FactoredState;

    fn analytic(&self) -> Option<&dyn AnalyticModel> {
        None
    }

    fn m(&self) -> usize {
        self.variables().len()
    }
}

/// Projects `state` onto the mask.
pub fn reduce_state(state: &FactoredState, mask: &Mask) -> Result<ReducedState> {
    mask.validate(state.exo.len())?;
    Ok(ReducedState {
        endo: state.endo,
        exo_masked: mask.indices().iter().map(|&i| state.exo[i]).collect(),
    })
}

/// `Σ_{i ∈ mask} R^i(n, x^i, a)`; zero for the empty mask.
pub fn reduced_reward(
    mdp: &dyn GenerativeMdp,
    rstate: &ReducedState,
    action: usize,
    mask: &Mask,
) -> Result<f64> {
    if action >= mdp.action_count() {
        return Err(invalid(alloc::format!("action {action} out of range")));
    }
    mask.validate(mdp.m())?;
    if rstate.exo_masked.len() != mask.len() {
        return Err(invalid("reduced state does not match mask length"));
    }
    Ok(mask
        .indices()
        .iter()
        .zip(&rstate.exo_masked)
        .map(|(&i, &v)| mdp.reward_component(i, rstate.endo, v, action))
        .sum())
}

/// Mixed-radix indexing of the reduced state space of one mask.
///
/// States are ordered lexicographically: endogenous index most significant,
/// then masked variables in mask order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSpace {
    mask: Mask,
    m: usize,
    endo_cardinality: usize,
    radices: Vec<usize>,
    exo_len: usize,
}

impl ReducedSpace {
    pub fn new(mdp: &dyn GenerativeMdp, mask: &Mask, budget: StateBudget) -> Result<Self> {
        Self::from_parts(mdp.endo_cardinality(), mdp.variables(), mask, budget)
    }

    pub fn from_parts(
        endo_cardinality: usize,
        vars: &[VariableSpec],
        mask: &Mask,
        budget: StateBudget,
    ) -> Result<Self> {
        mask.validate(vars.len())?;
        let radices: Vec<usize> = mask.indices().iter().map(|&i| vars[i].cardinality).collect();
        let mut size: u128 = endo_cardinality as u128;
        for &r in &radices {
            size = size.saturating_mul(r as u128);
        }
        if size > budget.0 as u128 {
            return Err(Error::StateSpaceTooLarge {
                size,
                budget: budget.0,
            });
        }
        let exo_len = radices.iter().product();
        Ok(ReducedSpace {
            mask: mask.clone(),
            m: vars.len(),
            endo_cardinality,
            radices,
            exo_len,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn endo_cardinality(&self) -> usize {
        self.endo_cardinality
    }

    /// Number of exogenous variables in the owning MDP.
    pub fn variable_count(&self) -> usize {
        self.m
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    /// Number of joint values of the masked variables.
    pub fn exo_len(&self) -> usize {
        self.exo_len
    }

    pub fn len(&self) -> usize {
        self.endo_cardinality * self.exo_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn compose(&self, endo: usize, exo_index: usize) -> usize {
        endo * self.exo_len + exo_index
    }

    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index / self.exo_len, index % self.exo_len)
    }

    /// Index of masked values given in mask order.
    pub fn exo_index(&self, masked: &[usize]) -> usize {
        debug_assert_eq!(masked.len(), self.radices.len());
        masked
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&v, &r)| acc * r + v)
    }

    /// Index of the masked part of a full exogenous vector.
    #[inline]
    pub fn exo_index_of_full(&self, exo: &[usize]) -> usize {
        self.mask
            .indices()
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&i, &r)| acc * r + exo[i])
    }

    pub fn exo_values(&self, mut exo_index: usize) -> Vec<usize> {
        let mut out = alloc::vec![0; self.radices.len()];
        for (slot, &r) in out.iter_mut().zip(&self.radices).rev() {
            *slot = exo_index % r;
            exo_index /= r;
        }
        out
    }

    pub fn index(&self, state: &ReducedState) -> usize {
        self.compose(state.endo, self.exo_index(&state.exo_masked))
    }

    pub fn index_of_full(&self, state: &FactoredState) -> usize {
        self.compose(state.endo, self.exo_index_of_full(&state.exo))
    }

    pub fn state_at(&self, index: usize) -> ReducedState {
        let (endo, exo) = self.split(index);
        ReducedState {
            endo,
            exo_masked: self.exo_values(exo),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = ReducedState> + '_ {
        (0..self.len()).map(move |i| self.state_at(i))
    }
}

/// Lexicographic enumeration of the reduced states of `mask`.
pub fn enumerate_reduced_states(
    mdp: &dyn GenerativeMdp,
    mask: &Mask,
    budget: StateBudget,
) -> Result<Vec<ReducedState>> {
    let space = ReducedSpace::new(mdp, mask, budget)?;
    Ok(space.states().collect())
}

/// Largest `|reward(s, a) − Σ_i R^i|` over `samples` random state-action
/// pairs drawn uniformly from the declared domains.
pub fn reward_additivity_gap(mdp: &dyn GenerativeMdp, samples: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = seeding::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let state = FactoredState {
            endo: rng.gen_range(0..mdp.endo_cardinality()),
            exo: mdp
                .variables()
                .iter()
                .map(|v| rng.gen_range(0..v.cardinality))
                .collect(),
        };
        let a = rng.gen_range(0..mdp.action_count());
        let parts: f64 = (0..mdp.m())
            .map(|i| mdp.reward_component(i, state.endo, state.exo[i], a))
            .sum();
        worst = worst.max((mdp.reward(&state, a) - parts).abs());
    }
    worst
}

/// Two-sample chi-square homogeneity statistic for next-exogenous-state
/// frequencies under two actions from the same state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
}

/// Samples `n` exogenous successors of `state` under `action_a` and under
/// `action_b` (independent streams) and compares the two histograms.
pub fn exo_action_independence(
    mdp: &dyn GenerativeMdp,
    state: &FactoredState,
    action_a: usize,
    action_b: usize,
    n: usize,
    seed: u64,
) -> ChiSquare {
    let mut hist: BTreeMap<Vec<usize>, (u64, u64)> = BTreeMap::new();
    let mut rng_a = seeding::stream_rng(seed, 0);
    let mut rng_b = seeding::stream_rng(seed, 1);
    for _ in 0..n {
        let xa = mdp.sample_transition(state, action_a, &mut rng_a).exo;
        hist.entry(xa).or_default().0 += 1;
        let xb = mdp.sample_transition(state, action_b, &mut rng_b).exo;
        hist.entry(xb).or_default().1 += 1;
    }
    let statistic = hist
        .values()
        .map(|&(a, b)| {
            let d = a as f64 - b as f64;
            d * d / (a + b) as f64
        })
        .sum();
    ChiSquare {
        statistic,
        dof: hist.len().saturating_sub(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vars(cards: &[usize]) -> Vec<VariableSpec> {
        cards
            .iter()
            .enumerate()
            .map(|(i, &c)| VariableSpec::new(i, c, alloc::format!("x{i}")))
            .collect()
    }

    #[test]
    fn projection_keeps_mask_order() {
        let s = FactoredState::new(3, vec![1, 0, 2]);
        let m = Mask::new([2, 0], 3).unwrap();
        let r = reduce_state(&s, &m).unwrap();
        assert_eq!(r, ReducedState { endo: 3, exo_masked: vec![1, 2] });
        assert_eq!(reduce_state(&s, &Mask::full(3)).unwrap().exo_masked, vec![1, 0, 2]);
        assert_eq!(reduce_state(&s, &Mask::empty()).unwrap().exo_masked, Vec::<usize>::new());
    }

    #[test]
    fn projection_rejects_out_of_range_mask() {
        let s = FactoredState::new(0, vec![1, 0]);
        let m = Mask::new([0, 5], 10).unwrap();
        assert!(matches!(
            reduce_state(&s, &m),
            Err(Error::InvalidMask { index: 5, m: 2 })
        ));
        assert!(Mask::new([3], 3).is_err());
    }

    #[test]
    fn enumeration_counts_and_order() {
        let v = vars(&[3]);
        let space = ReducedSpace::from_parts(2, &v, &Mask::full(1), StateBudget::default()).unwrap();
        assert_eq!(space.states().count(), 6);
        let space = ReducedSpace::from_parts(4, &v, &Mask::empty(), StateBudget::default()).unwrap();
        assert_eq!(space.states().count(), 4);

        let v = vars(&[2, 3]);
        let space = ReducedSpace::from_parts(2, &v, &Mask::full(2), StateBudget::default()).unwrap();
        let all: Vec<_> = space.states().collect();
        assert_eq!(all.len(), 12);
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        assert_eq!(all[0], ReducedState { endo: 0, exo_masked: vec![0, 0] });
        assert_eq!(all[4], ReducedState { endo: 0, exo_masked: vec![1, 1] });
        for (i, s) in all.iter().enumerate() {
            assert_eq!(space.index(s), i);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let v = vars(&[10, 10, 10]);
        let err = ReducedSpace::from_parts(10, &v, &Mask::full(3), StateBudget(999)).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { size: 10_000, budget: 999 }));
    }

    #[test]
    fn mask_parse_and_display() {
        let m: Mask = "{3, 1}".parse().unwrap();
        assert_eq!(m.indices(), &[1, 3]);
        assert_eq!(alloc::format!("{m}"), "{1,3}");
        assert_eq!("{}".parse::<Mask>().unwrap(), Mask::empty());
        assert!("{a}".parse::<Mask>().is_err());
        assert_eq!(Mask::from_bits(0b101, 3).indices(), &[0, 2]);
        assert_eq!(Mask::new([1], 3).unwrap().complement(3).indices(), &[0, 2]);
    }

    #[test]
    fn variable_ids_must_be_contiguous() {
        let mut v = vars(&[2, 2]);
        assert!(validate_variables(&v).is_ok());
        v[1].id = 5;
        assert!(validate_variables(&v).is_err());
    }
}
