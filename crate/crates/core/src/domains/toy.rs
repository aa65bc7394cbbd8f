//! MDPs given by explicit tables.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::dist::Categorical;
use crate::error::{invalid, Result};
use crate::mdp::{
    validate_variables, AnalyticModel, FactoredState, GenerativeMdp, Mask, ReducedSpace,
    StateBudget, VariableSpec,
};
use crate::seeding;

/// Full-state count limit for explicit tables.
const TABLE_LIMIT: u64 = 1 << 20;

#[derive(Clone, Debug)]
pub struct TabularMdp {
    endo_cardinality: usize,
    action_count: usize,
    variables: Vec<VariableSpec>,
    discount: f64,
    exo_space: ReducedSpace,
    /// Indexed by `(n * A + a) * |X| + x`.
    endo_rows: Vec<Categorical>,
    /// Joint successor distribution over exo indices, per exo index.
    exo_rows: Vec<Categorical>,
    /// Per variable, indexed by `(n * card + v) * A + a`.
    rewards: Vec<Vec<f64>>,
    /// Over `n * |X| + x`.
    initial: Categorical,
}

impl TabularMdp {
    /// An MDP with zero rewards, self-loop endogenous rows, static exogenous
    /// variables and a uniform initial distribution. Fill in with setters.
    pub fn new(
        endo_cardinality: usize,
        action_count: usize,
        variables: Vec<VariableSpec>,
        discount: f64,
    ) -> Result<Self> {
        validate_variables(&variables)?;
        if endo_cardinality == 0 || action_count == 0 {
            return Err(invalid("need at least one endogenous state and one action"));
        }
        if !(0.0..1.0).contains(&discount) {
            return Err(invalid("discount must be in [0, 1)"));
        }
        let exo_space = ReducedSpace::from_parts(
            endo_cardinality,
            &variables,
            &Mask::full(variables.len()),
            StateBudget(TABLE_LIMIT),
        )?;
        let xl = exo_space.exo_len();
        let endo_rows = (0..endo_cardinality * action_count * xl)
            .map(|k| Categorical::point(endo_cardinality, k / (action_count * xl)))
            .collect();
        let exo_rows = (0..xl).map(|x| Categorical::point(xl, x)).collect();
        let rewards = variables
            .iter()
            .map(|v| vec![0.0; endo_cardinality * v.cardinality * action_count])
            .collect();
        Ok(TabularMdp {
            endo_cardinality,
            action_count,
            discount,
            initial: Categorical::uniform(endo_cardinality * xl),
            variables,
            exo_space,
            endo_rows,
            exo_rows,
            rewards,
        })
    }

    pub fn exo_len(&self) -> usize {
        self.exo_space.exo_len()
    }

    pub fn exo_index(&self, exo: &[usize]) -> usize {
        self.exo_space.exo_index(exo)
    }

    pub fn exo_values(&self, index: usize) -> Vec<usize> {
        self.exo_space.exo_values(index)
    }

    pub fn full_state_count(&self) -> usize {
        self.exo_space.len()
    }

    pub fn set_endo_row(&mut self, endo: usize, action: usize, exo_index: usize, row: Categorical) {
        assert_eq!(row.outcomes(), self.endo_cardinality);
        let xl = self.exo_len();
        self.endo_rows[(endo * self.action_count + action) * xl + exo_index] = row;
    }

    pub fn endo_row(&self, endo: usize, action: usize, exo_index: usize) -> &Categorical {
        &self.endo_rows[(endo * self.action_count + action) * self.exo_len() + exo_index]
    }

    pub fn set_exo_row(&mut self, exo_index: usize, row: Categorical) {
        assert_eq!(row.outcomes(), self.exo_len());
        self.exo_rows[exo_index] = row;
    }

    pub fn exo_row(&self, exo_index: usize) -> &Categorical {
        &self.exo_rows[exo_index]
    }

    pub fn set_reward(&mut self, i: usize, endo: usize, value: usize, action: usize, r: f64) {
        let card = self.variables[i].cardinality;
        self.rewards[i][(endo * card + value) * self.action_count + action] = r;
    }

    /// Distribution over `n * |X| + x`.
    pub fn set_initial(&mut self, row: Categorical) {
        assert_eq!(row.outcomes(), self.full_state_count());
        self.initial = row;
    }

    pub fn set_discount(&mut self, discount: f64) {
        assert!((0.0..1.0).contains(&discount));
        self.discount = discount;
    }
}

impl AnalyticModel for TabularMdp {
    fn endo_transition(&self, endo: usize, action: usize, exo: &[usize]) -> Categorical {
        self.endo_row(endo, action, self.exo_index(exo)).clone()
    }

    fn exo_transition(&self, exo: &[usize]) -> Vec<(Vec<usize>, f64)> {
        let row = &self.exo_rows[self.exo_index(exo)];
        row.to_dense()
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(x, p)| (self.exo_values(x), p))
            .collect()
    }

    fn initial_distribution(&self) -> Vec<(FactoredState, f64)> {
        let xl = self.exo_len();
        self.initial
            .to_dense()
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(s, p)| (FactoredState::new(s / xl, self.exo_values(s % xl)), p))
            .collect()
    }
}

impl GenerativeMdp for TabularMdp {
    fn action_count(&self) -> usize {
        self.action_count
    }

    fn endo_cardinality(&self) -> usize {
        self.endo_cardinality
    }

    fn variables(&self) -> &[VariableSpec] {
        &self.variables
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn r_max(&self) -> f64 {
        let xl = self.exo_len();
        let mut best: f64 = 0.0;
        for n in 0..self.endo_cardinality {
            for a in 0..self.action_count {
                for x in 0..xl {
                    let s = FactoredState::new(n, self.exo_values(x));
                    best = best.max(self.reward(&s, a).abs());
                }
            }
        }
        best
    }

    fn sample_transition(
        &self,
        state: &FactoredState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> FactoredState {
        let x = self.exo_index(&state.exo);
        let endo = self.endo_row(state.endo, action, x).sample(rng);
        let next = self.exo_rows[x].sample(rng);
        FactoredState::new(endo, self.exo_values(next))
    }

    fn reward_component(&self, i: usize, endo: usize, value: usize, action: usize) -> f64 {
        let card = self.variables[i].cardinality;
        self.rewards[i][(endo * card + value) * self.action_count + action]
    }

    fn sample_initial(&self, rng: &mut dyn RngCore) -> FactoredState {
        let xl = self.exo_len();
        let s = self.initial.sample(rng);
        FactoredState::new(s / xl, self.exo_values(s % xl))
    }

    fn analytic(&self) -> Option<&dyn AnalyticModel> {
        Some(self)
    }
}

/// A random tabular MDP that satisfies the exact-reduction conditions for
/// `mask` by construction: rewards outside the mask are zero, endogenous rows
/// depend on the masked variables only, and the exogenous transition is a
/// product of a masked and an unmasked kernel.
#[derive(Clone, Debug)]
pub struct BlockFactorized {
    pub mdp: TabularMdp,
    pub mask: Mask,
}

fn random_row(rng: &mut seeding::Rng, outcomes: usize) -> Categorical {
    let mut w: Vec<f64> = (0..outcomes)
        .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen::<f64>() + 0.05 })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..outcomes)] = 1.0;
    }
    Categorical::from_dense(&w)
}

fn argmin(row: &Categorical) -> usize {
    let dense = row.to_dense();
    (0..dense.len())
        .min_by(|&a, &b| dense[a].total_cmp(&dense[b]))
        .unwrap_or(0)
}

impl BlockFactorized {
    /// Draws a random instance with at most `max_states` full states. Every
    /// variable outside the mask has cardinality at least 2.
    pub fn random(seed: u64, max_states: usize) -> Result<Self> {
        if max_states < 8 {
            return Err(invalid("need room for at least 8 full states"));
        }
        let mut rng = seeding::rng(seed);
        let (e, a_n, kept_cards, rest_cards) = loop {
            let e = rng.gen_range(2..=3);
            let a_n = rng.gen_range(2..=3);
            let kept: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=3)).collect();
            let rest: Vec<usize> = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(2..=3)).collect();
            let size: usize = e * kept.iter().product::<usize>() * rest.iter().product::<usize>();
            if size <= max_states {
                break (e, a_n, kept, rest);
            }
        };
        let m = kept_cards.len() + rest_cards.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let mask = Mask::new(order[..kept_cards.len()].iter().copied(), m)?;
        let complement = mask.complement(m);
        let mut cards = vec![0usize; m];
        for (&i, &c) in mask.indices().iter().zip(&kept_cards) {
            cards[i] = c;
        }
        for (&i, &c) in complement.indices().iter().zip(&rest_cards) {
            cards[i] = c;
        }
        let variables: Vec<VariableSpec> = cards
            .iter()
            .enumerate()
            .map(|(i, &c)| VariableSpec::new(i, c, format!("x{i}")))
            .collect();
        let discount = rng.gen_range(0.5..0.95);
        let mut mdp = TabularMdp::new(e, a_n, variables.clone(), discount)?;
        let budget = StateBudget(TABLE_LIMIT);
        let kept = ReducedSpace::from_parts(1, &variables, &mask, budget)?;
        let rest = ReducedSpace::from_parts(1, &variables, &complement, budget)?;
        let (kl, rl) = (kept.exo_len(), rest.exo_len());

        let compose = |xt: usize, xb: usize| -> Vec<usize> {
            let mut exo = vec![0usize; m];
            for (&i, v) in mask.indices().iter().zip(kept.exo_values(xt)) {
                exo[i] = v;
            }
            for (&i, v) in complement.indices().iter().zip(rest.exo_values(xb)) {
                exo[i] = v;
            }
            exo
        };

        for n in 0..e {
            for a in 0..a_n {
                for xt in 0..kl {
                    let row = random_row(&mut rng, e);
                    for xb in 0..rl {
                        let x = mdp.exo_index(&compose(xt, xb));
                        mdp.set_endo_row(n, a, x, row.clone());
                    }
                }
            }
        }

        let kept_rows: Vec<Categorical> = (0..kl).map(|_| random_row(&mut rng, kl)).collect();
        let rest_rows: Vec<Categorical> = (0..rl).map(|_| random_row(&mut rng, rl)).collect();
        for xt in 0..kl {
            for xb in 0..rl {
                let x = mdp.exo_index(&compose(xt, xb));
                let row = product_row(&mdp, &kept_rows[xt], &rest_rows[xb], &compose);
                mdp.set_exo_row(x, row);
            }
        }

        for &i in mask.indices() {
            for n in 0..e {
                for v in 0..cards[i] {
                    for a in 0..a_n {
                        mdp.set_reward(i, n, v, a, rng.gen_range(-1.0..1.0));
                    }
                }
            }
        }

        let initial = random_row(&mut rng, mdp.full_state_count());
        mdp.set_initial(initial);
        Ok(BlockFactorized { mdp, mask })
    }

    fn spaces(&self) -> (ReducedSpace, ReducedSpace) {
        let vars = self.mdp.variables();
        let budget = StateBudget(TABLE_LIMIT);
        let complement = self.mask.complement(vars.len());
        (
            ReducedSpace::from_parts(1, vars, &self.mask, budget).expect("within table limit"),
            ReducedSpace::from_parts(1, vars, &complement, budget).expect("within table limit"),
        )
    }

    fn compose(&self, kept: &ReducedSpace, rest: &ReducedSpace, xt: usize, xb: usize) -> Vec<usize> {
        let mut exo = vec![0usize; self.mdp.m()];
        for (&i, v) in kept.mask().indices().iter().zip(kept.exo_values(xt)) {
            exo[i] = v;
        }
        for (&i, v) in rest.mask().indices().iter().zip(rest.exo_values(xb)) {
            exo[i] = v;
        }
        exo
    }

    /// Gives one unmasked variable a nonzero reward somewhere.
    pub fn break_reward(&self, seed: u64) -> TabularMdp {
        let mut rng = seeding::rng(seed);
        let mut mdp = self.mdp.clone();
        let complement = self.mask.complement(mdp.m());
        let i = *complement.indices().choose(&mut rng).expect("complement is nonempty");
        let n = rng.gen_range(0..mdp.endo_cardinality());
        let v = rng.gen_range(0..mdp.variables()[i].cardinality);
        let a = rng.gen_range(0..mdp.action_count());
        mdp.set_reward(i, n, v, a, 0.5);
        mdp
    }

    /// Makes one endogenous row depend on the unmasked variables.
    pub fn break_endo(&self, seed: u64) -> TabularMdp {
        let mut rng = seeding::rng(seed);
        let mut mdp = self.mdp.clone();
        let (kept, rest) = self.spaces();
        let n = rng.gen_range(0..mdp.endo_cardinality());
        let a = rng.gen_range(0..mdp.action_count());
        let xt = rng.gen_range(0..kept.exo_len());
        let xb = rng.gen_range(0..rest.exo_len());
        let x = mdp.exo_index(&self.compose(&kept, &rest, xt, xb));
        let target = argmin(mdp.endo_row(n, a, x));
        mdp.set_endo_row(n, a, x, Categorical::point(mdp.endo_cardinality(), target));
        mdp
    }

    /// Makes the masked variables' transition depend on one setting of the
    /// unmasked variables.
    pub fn break_exo(&self, seed: u64) -> TabularMdp {
        let mut rng = seeding::rng(seed);
        let mut mdp = self.mdp.clone();
        let (kept, rest) = self.spaces();
        let (kl, rl) = (kept.exo_len(), rest.exo_len());
        let xb = rng.gen_range(0..rl);
        // Marginals of the untouched model at (xt, xb).
        for xt in 0..kl {
            let x = mdp.exo_index(&self.compose(&kept, &rest, xt, xb));
            let mut kept_w = vec![0.0; kl];
            let mut rest_w = vec![0.0; rl];
            for (next, p) in mdp.exo_transition(&mdp.exo_values(x)) {
                kept_w[kept.exo_index_of_full(&next)] += p;
                rest_w[rest.exo_index_of_full(&next)] += p;
            }
            let kept_row = Categorical::from_dense(&kept_w);
            let shifted = Categorical::point(kl, argmin(&kept_row));
            let rest_row = Categorical::from_dense(&rest_w);
            let row = product_row(&mdp, &shifted, &rest_row, &|a, b| self.compose(&kept, &rest, a, b));
            mdp.set_exo_row(x, row);
        }
        mdp
    }
}

fn product_row(
    mdp: &TabularMdp,
    kept_row: &Categorical,
    rest_row: &Categorical,
    compose: &dyn Fn(usize, usize) -> Vec<usize>,
) -> Categorical {
    let mut pairs = Vec::new();
    for (a, p) in kept_row.to_dense().into_iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (b, q) in rest_row.to_dense().into_iter().enumerate() {
            if q > 0.0 {
                pairs.push((mdp.exo_index(&compose(a, b)), p * q));
            }
        }
    }
    Categorical::from_sparse(mdp.exo_len(), pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_respect_the_size_limit() {
        for seed in 0..30 {
            let b = BlockFactorized::random(seed, 200).unwrap();
            assert!(b.mdp.full_state_count() <= 200);
            for &i in b.mask.complement(b.mdp.m()).indices() {
                assert!(b.mdp.variables()[i].cardinality >= 2);
            }
            for x in 0..b.mdp.exo_len() {
                assert!((b.mdp.exo_row(x).total_mass() - 1.0).abs() < 1e-12);
            }
        }
    }
}
