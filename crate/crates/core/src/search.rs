//! Mask search: the objective estimator, three search strategies and the
//! sufficient-condition checker for reduced-policy optimality.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Categorical;
use crate::error::{invalid, Error, Result};
use crate::estimation::{
    collect_exo_rollouts, collect_full_rollouts, estimate_reward_variables, fit_reduced_mdp,
    Behavior, ExoRolloutDataset, FullRolloutDataset, TabularReducedMdp, TransitionAtoms,
};
use crate::mdp::{GenerativeMdp, Mask, ReducedSpace, StateBudget};
use crate::planner::{
    exact_optimal_values, exact_policy_evaluation, monte_carlo_value, policy_evaluation,
    truncation_horizon, value_iteration, Clock, FrozenClock, MonteCarloEstimate, PlanOutcome,
    PlannerOptions, Policy,
};
use crate::seeding::{self, purpose_seed};

/// Regularizer on the mask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostFn {
    /// `|x̃|`.
    #[default]
    Cardinality,
    /// Seconds spent fitting and solving the reduced model.
    PlannerWallTime,
}

/// Budgets shared by every mask evaluation in one search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    /// Monte Carlo rollouts per objective estimate.
    pub n_rollouts: usize,
    /// Rollout length; derived from `truncation_tol` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    pub truncation_tol: f64,
    pub exo_rollouts: usize,
    pub exo_horizon: usize,
    pub full_rollouts: usize,
    pub full_horizon: usize,
    /// Separate data budget for the mutual-information estimates.
    pub mi_rollouts: usize,
    pub mi_horizon: usize,
    pub smoothing: f64,
    pub planner: PlannerOptions,
    pub budget: StateBudget,
    pub cost: CostFn,
    /// Greedy search keeps drawing other variables after a rejected one
    /// instead of stopping.
    pub greedy_retry: bool,
    pub brute_force_limit: usize,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            n_rollouts: 500,
            horizon: None,
            truncation_tol: 1e-3,
            exo_rollouts: 1000,
            exo_horizon: 50,
            full_rollouts: 1000,
            full_horizon: 50,
            mi_rollouts: 1000,
            mi_horizon: 50,
            smoothing: 0.0,
            planner: PlannerOptions::default(),
            budget: StateBudget::default(),
            cost: CostFn::Cardinality,
            greedy_retry: false,
            brute_force_limit: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskScore {
    pub mask: Mask,
    pub j_hat: f64,
    pub mean_return: f64,
    pub cost: f64,
    pub lambda: f64,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    ObjectiveDecreased,
    MiBelowThreshold,
    Exhausted,
    Budget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub candidate: Mask,
    /// `(variable, MI in nats)` for every variable outside the mask; empty
    /// for strategies that do not measure it.
    pub mi_scores: Vec<(usize, f64)>,
    pub accepted: bool,
    pub score: Option<MaskScore>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub entries: Vec<TraceEntry>,
    pub terminal: TerminalReason,
}

impl SearchTrace {
    fn push(&mut self, candidate: Mask, mi: Vec<(usize, f64)>, accepted: bool, score: Option<MaskScore>) {
        self.entries.push(TraceEntry {
            iteration: self.entries.len(),
            candidate,
            mi_scores: mi,
            accepted,
            score,
        });
    }

    /// Number of candidate masks whose objective was estimated.
    pub fn evaluations(&self) -> usize {
        self.entries.iter().filter(|e| e.score.is_some()).count()
    }
}

/// Scores masks against fixed datasets and a fixed rollout seed schedule,
/// so that competing masks are compared under common random numbers.
pub struct ObjectiveEstimator<'a> {
    mdp: &'a dyn GenerativeMdp,
    params: SearchParams,
    clock: &'a dyn Clock,
    exo_data: ExoRolloutDataset,
    full_data: FullRolloutDataset,
    rollout_seed: u64,
    horizon: usize,
}

impl<'a> ObjectiveEstimator<'a> {
    /// Collects the model-fitting datasets from seeds derived from `seed`.
    pub fn new(
        mdp: &'a dyn GenerativeMdp,
        params: &SearchParams,
        seed: u64,
        clock: &'a dyn Clock,
    ) -> Result<Self> {
        let exo_data = collect_exo_rollouts(
            mdp,
            params.exo_rollouts,
            params.exo_horizon,
            purpose_seed(seed, "objective-exo"),
        )?;
        let full_data = collect_full_rollouts(
            mdp,
            Behavior::UniformRandom,
            params.full_rollouts,
            params.full_horizon,
            purpose_seed(seed, "objective-full"),
        )?;
        Self::from_data(mdp, params, exo_data, full_data, seed, clock)
    }

    /// Uses pre-collected datasets (e.g. loaded from a cache).
    pub fn from_data(
        mdp: &'a dyn GenerativeMdp,
        params: &SearchParams,
        exo_data: ExoRolloutDataset,
        full_data: FullRolloutDataset,
        seed: u64,
        clock: &'a dyn Clock,
    ) -> Result<Self> {
        if params.n_rollouts == 0 {
            return Err(invalid("n_rollouts must be at least 1"));
        }
        let horizon = match params.horizon {
            Some(h) => h,
            None => truncation_horizon(mdp.discount(), mdp.r_max(), params.truncation_tol)?,
        };
        Ok(ObjectiveEstimator {
            mdp,
            params: params.clone(),
            clock,
            exo_data,
            full_data,
            rollout_seed: purpose_seed(seed, "objective-rollouts"),
            horizon,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn rollout_seed(&self) -> u64 {
        self.rollout_seed
    }

    pub fn exo_data(&self) -> &ExoRolloutDataset {
        &self.exo_data
    }

    pub fn full_data(&self) -> &FullRolloutDataset {
        &self.full_data
    }

    pub fn fit(&self, mask: &Mask) -> Result<TabularReducedMdp> {
        fit_reduced_mdp(
            self.mdp,
            mask,
            &self.exo_data,
            &self.full_data,
            self.params.smoothing,
            self.params.budget,
        )
    }

    /// Fits and solves the reduced model of `mask`. A planner timeout during
    /// the first sweep still yields its best-so-far policy.
    pub fn plan(&self, mask: &Mask) -> Result<Policy> {
        let model = self.fit(mask)?;
        match value_iteration(&model, &self.params.planner, self.clock) {
            Ok(PlanOutcome { policy, .. }) => Ok(policy),
            Err(Error::PlannerTimeout { best_so_far }) => Ok(*best_so_far),
            Err(e) => Err(e),
        }
    }

    pub fn score(&self, mask: &Mask, lambda: f64) -> Result<MaskScore> {
        self.score_with_returns(mask, lambda).map(|(score, _)| score)
    }

    /// Like [`score`](Self::score), also returning the per-rollout returns.
    pub fn score_with_returns(
        &self,
        mask: &Mask,
        lambda: f64,
    ) -> Result<(MaskScore, MonteCarloEstimate)> {
        let started = self.clock.now();
        let policy = self.plan(mask)?;
        let plan_time = self.clock.now() - started;
        let mc = monte_carlo_value(
            self.mdp,
            &policy,
            self.params.n_rollouts,
            self.horizon,
            self.rollout_seed,
        )?;
        let wall_time = self.clock.now() - started;
        let cost = match self.params.cost {
            CostFn::Cardinality => mask.len() as f64,
            CostFn::PlannerWallTime => plan_time,
        };
        let score = MaskScore {
            mask: mask.clone(),
            j_hat: mc.mean - lambda * cost,
            mean_return: mc.mean,
            cost,
            lambda,
            wall_time,
        };
        Ok((score, mc))
    }
}

/// `Ĵ(mask)`: fit the reduced model, solve it, roll the policy out in the
/// full MDP and subtract `λ · Cost(mask)`.
pub fn estimate_objective(
    mdp: &dyn GenerativeMdp,
    mask: &Mask,
    lambda: f64,
    params: &SearchParams,
    seed: u64,
    clock: &dyn Clock,
) -> Result<MaskScore> {
    mask.validate(mdp.m())?;
    ObjectiveEstimator::new(mdp, params, seed, clock)?.score(mask, lambda)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be non-negative"));
    }
    Ok(())
}

/// Better score: higher `Ĵ`, then smaller mask, then lexicographically
/// smaller mask.
fn better(a: &MaskScore, b: &MaskScore) -> bool {
    if a.j_hat != b.j_hat {
        return a.j_hat > b.j_hat;
    }
    if a.mask.len() != b.mask.len() {
        return a.mask.len() < b.mask.len();
    }
    a.mask < b.mask
}

/// Scores every subset of the exogenous variables and returns the best.
pub fn mask_brute_force(
    mdp: &dyn GenerativeMdp,
    lambda: f64,
    params: &SearchParams,
    seed: u64,
    clock: &dyn Clock,
) -> Result<(Mask, SearchTrace)> {
    check_lambda(lambda)?;
    let m = mdp.m();
    if m > params.brute_force_limit || m >= 64 {
        return Err(Error::TooManyVariables {
            m,
            limit: params.brute_force_limit.min(63),
        });
    }
    let estimator = ObjectiveEstimator::new(mdp, params, seed, clock)?;
    brute_force_with(&estimator, m, lambda)
}

pub fn brute_force_with(
    estimator: &ObjectiveEstimator<'_>,
    m: usize,
    lambda: f64,
) -> Result<(Mask, SearchTrace)> {
    let mut trace = SearchTrace {
        entries: Vec::new(),
        terminal: TerminalReason::Exhausted,
    };
    let mut best: Option<MaskScore> = None;
    for bits in 0..(1u64 << m) {
        let mask = Mask::from_bits(bits, m);
        match estimator.score(&mask, lambda) {
            Ok(score) => {
                if best.as_ref().is_none_or(|b| better(&score, b)) {
                    best = Some(score.clone());
                }
                trace.push(mask, Vec::new(), false, Some(score));
            }
            Err(Error::StateSpaceTooLarge { .. }) => {
                trace.terminal = TerminalReason::Budget;
                trace.push(mask, Vec::new(), false, None);
            }
            Err(e) => return Err(e),
        }
    }
    let best = best.ok_or(Error::StateSpaceTooLarge {
        size: 0,
        budget: 0,
    })?;
    for e in &mut trace.entries {
        e.accepted = e.candidate == best.mask;
    }
    Ok((best.mask, trace))
}

/// Random forward selection from the empty mask. Stops the first time an
/// addition fails to increase `Ĵ` unless `params.greedy_retry` is set.
pub fn mask_greedy(
    mdp: &dyn GenerativeMdp,
    lambda: f64,
    params: &SearchParams,
    seed: u64,
    clock: &dyn Clock,
) -> Result<(Mask, SearchTrace)> {
    check_lambda(lambda)?;
    let estimator = ObjectiveEstimator::new(mdp, params, seed, clock)?;
    greedy_with(&estimator, mdp.m(), lambda, params.greedy_retry, seed)
}

pub fn greedy_with(
    estimator: &ObjectiveEstimator<'_>,
    m: usize,
    lambda: f64,
    retry: bool,
    seed: u64,
) -> Result<(Mask, SearchTrace)> {
    let mut rng = seeding::rng(purpose_seed(seed, "greedy-order"));
    let mut trace = SearchTrace {
        entries: Vec::new(),
        terminal: TerminalReason::Exhausted,
    };
    let mut mask = Mask::empty();
    let mut current = estimator.score(&mask, lambda)?;
    trace.push(mask.clone(), Vec::new(), true, Some(current.clone()));
    let mut untried: Vec<usize> = (0..m).collect();
    loop {
        if untried.is_empty() {
            trace.terminal = TerminalReason::Exhausted;
            break;
        }
        let var = untried.remove(rng.gen_range(0..untried.len()));
        let candidate = mask.with(var);
        let score = match estimator.score(&candidate, lambda) {
            Ok(s) => s,
            Err(Error::StateSpaceTooLarge { .. }) => {
                trace.push(candidate, Vec::new(), false, None);
                trace.terminal = TerminalReason::Budget;
                if retry {
                    continue;
                }
                break;
            }
            Err(e) => return Err(e),
        };
        if score.j_hat > current.j_hat {
            trace.push(candidate.clone(), Vec::new(), true, Some(score.clone()));
            mask = candidate;
            current = score;
            untried = (0..m).filter(|i| !mask.contains(*i)).collect();
        } else {
            trace.push(candidate, Vec::new(), false, Some(score));
            trace.terminal = TerminalReason::ObjectiveDecreased;
            if !retry {
                break;
            }
        }
    }
    Ok((mask, trace))
}

/// Thresholds for the correlational search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationalParams {
    /// Stop when every remaining variable's MI (nats) is below this.
    pub tau_correl: f64,
    /// Reward-variance threshold of the first phase (strict `>`).
    pub tau_variance: f64,
    pub n1: usize,
    pub n2: usize,
}

impl Default for CorrelationalParams {
    fn default() -> Self {
        CorrelationalParams {
            tau_correl: 1e-5,
            tau_variance: 0.0,
            n1: 250,
            n2: 5,
        }
    }
}

/// The reward-variable screen alone, with the seed the full search uses.
pub fn first_phase_mask(
    mdp: &dyn GenerativeMdp,
    corr: &CorrelationalParams,
    seed: u64,
) -> Result<Mask> {
    estimate_reward_variables(
        mdp,
        corr.tau_variance,
        corr.n1,
        corr.n2,
        purpose_seed(seed, "reward-variables"),
    )
}

/// Starts from the reward-relevant variables, then repeatedly adds the
/// outside variable whose transitions share the most information with the
/// masked transitions, while the objective keeps increasing. An addition
/// that decreases `Ĵ` is rolled back.
pub fn mask_correlational(
    mdp: &dyn GenerativeMdp,
    corr: &CorrelationalParams,
    lambda: f64,
    params: &SearchParams,
    seed: u64,
    clock: &dyn Clock,
) -> Result<(Mask, SearchTrace)> {
    check_lambda(lambda)?;
    let estimator = ObjectiveEstimator::new(mdp, params, seed, clock)?;
    let mi_data = collect_exo_rollouts(
        mdp,
        params.mi_rollouts,
        params.mi_horizon,
        purpose_seed(seed, "mi-exo"),
    )?;
    correlational_with(&estimator, &mi_data, mdp, corr, lambda, seed)
}

pub fn correlational_with(
    estimator: &ObjectiveEstimator<'_>,
    mi_data: &ExoRolloutDataset,
    mdp: &dyn GenerativeMdp,
    corr: &CorrelationalParams,
    lambda: f64,
    seed: u64,
) -> Result<(Mask, SearchTrace)> {
    let m = mdp.m();
    let mut mask = first_phase_mask(mdp, corr, seed)?;
    let mut trace = SearchTrace {
        entries: Vec::new(),
        terminal: TerminalReason::Exhausted,
    };
    let mut current = match estimator.score(&mask, lambda) {
        Ok(s) => s,
        Err(Error::StateSpaceTooLarge { .. }) => {
            trace.push(mask.clone(), Vec::new(), true, None);
            trace.terminal = TerminalReason::Budget;
            return Ok((mask, trace));
        }
        Err(e) => return Err(e),
    };
    trace.push(mask.clone(), Vec::new(), true, Some(current.clone()));

    loop {
        let remaining = mask.complement(m);
        if remaining.is_empty() {
            trace.terminal = TerminalReason::Exhausted;
            break;
        }
        let atoms = TransitionAtoms::new(mi_data, &mask)?;
        let mut scores = Vec::with_capacity(remaining.len());
        for &j in remaining.indices() {
            scores.push((j, atoms.mutual_information(j)?));
        }
        let (best_var, best_mi) = scores
            .iter()
            .copied()
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, (j, mi)| {
                if mi > acc.1 {
                    (j, mi)
                } else {
                    acc
                }
            });
        let candidate = mask.with(best_var);
        if best_mi < corr.tau_correl {
            trace.push(candidate, scores, false, None);
            trace.terminal = TerminalReason::MiBelowThreshold;
            break;
        }
        let score = match estimator.score(&candidate, lambda) {
            Ok(s) => s,
            Err(Error::StateSpaceTooLarge { .. }) => {
                trace.push(candidate, scores, false, None);
                trace.terminal = TerminalReason::Budget;
                break;
            }
            Err(e) => return Err(e),
        };
        if score.j_hat < current.j_hat {
            trace.push(candidate, scores, false, Some(score));
            trace.terminal = TerminalReason::ObjectiveDecreased;
            break;
        }
        let increased = score.j_hat > current.j_hat;
        trace.push(candidate.clone(), scores, true, Some(score.clone()));
        mask = candidate;
        current = score;
        if !increased {
            trace.terminal = TerminalReason::ObjectiveDecreased;
            break;
        }
    }
    Ok((mask, trace))
}

/// Which sufficient conditions for exact reduction hold, with the largest
/// violation found for each.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Every reward component outside the mask is zero.
    pub cond1: bool,
    /// Endogenous transitions ignore the variables outside the mask.
    pub cond2: bool,
    /// Masked and unmasked variables transition independently.
    pub cond3: bool,
    pub reward_violation: f64,
    pub endo_violation: f64,
    pub exo_violation: f64,
}

impl TheoremReport {
    pub fn all(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3
    }
}

/// Checks the three conditions exhaustively against analytic tables.
pub fn check_theorem_conditions(
    mdp: &dyn GenerativeMdp,
    mask: &Mask,
    tol: f64,
) -> Result<TheoremReport> {
    let model = mdp.analytic().ok_or(Error::UnsupportedMdp)?;
    let vars = mdp.variables();
    let m = vars.len();
    mask.validate(m)?;
    let complement = mask.complement(m);
    let unbounded = StateBudget(u64::MAX);
    let kept = ReducedSpace::from_parts(1, vars, mask, unbounded)?;
    let rest = ReducedSpace::from_parts(1, vars, &complement, unbounded)?;
    let (e, a_n) = (mdp.endo_cardinality(), mdp.action_count());

    let mut reward_violation: f64 = 0.0;
    for &i in complement.indices() {
        for n in 0..e {
            for v in 0..vars[i].cardinality {
                for a in 0..a_n {
                    reward_violation = reward_violation.max(mdp.reward_component(i, n, v, a).abs());
                }
            }
        }
    }

    let assemble = |xt: usize, xb: usize| -> Vec<usize> {
        let mut exo = vec![0usize; m];
        for (&i, v) in mask.indices().iter().zip(kept.exo_values(xt)) {
            exo[i] = v;
        }
        for (&i, v) in complement.indices().iter().zip(rest.exo_values(xb)) {
            exo[i] = v;
        }
        exo
    };

    let mut endo_violation: f64 = 0.0;
    for xt in 0..kept.exo_len() {
        for n in 0..e {
            for a in 0..a_n {
                let rows: Vec<Categorical> = (0..rest.exo_len())
                    .map(|xb| model.endo_transition(n, a, &assemble(xt, xb)))
                    .collect();
                for (k, r1) in rows.iter().enumerate() {
                    for r2 in &rows[k + 1..] {
                        endo_violation = endo_violation.max(r1.total_variation(r2));
                    }
                }
            }
        }
    }

    // Joint rows keyed by (masked index, unmasked index) of the successor.
    let (kl, rl) = (kept.exo_len(), rest.exo_len());
    let mut joints: Vec<BTreeMap<(usize, usize), f64>> = Vec::with_capacity(kl * rl);
    let mut kept_marginal: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); kl];
    let mut rest_marginal: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); rl];
    for xt in 0..kl {
        for xb in 0..rl {
            let mut joint = BTreeMap::new();
            for (next, p) in model.exo_transition(&assemble(xt, xb)) {
                let key = (kept.exo_index_of_full(&next), rest.exo_index_of_full(&next));
                *joint.entry(key).or_insert(0.0) += p;
                *kept_marginal[xt].entry(key.0).or_insert(0.0) += p / rl as f64;
                *rest_marginal[xb].entry(key.1).or_insert(0.0) += p / kl as f64;
            }
            joints.push(joint);
        }
    }
    let mut exo_violation: f64 = 0.0;
    for xt in 0..kl {
        for xb in 0..rl {
            let joint = &joints[xt * rl + xb];
            let product = |a: usize, b: usize| {
                kept_marginal[xt].get(&a).copied().unwrap_or(0.0)
                    * rest_marginal[xb].get(&b).copied().unwrap_or(0.0)
            };
            let mut abs_on_support = 0.0;
            let mut product_on_support = 0.0;
            for (&(a, b), &p) in joint {
                let q = product(a, b);
                abs_on_support += (p - q).abs();
                product_on_support += q;
            }
            let product_total: f64 = kept_marginal[xt].values().sum::<f64>()
                * rest_marginal[xb].values().sum::<f64>();
            let tv = 0.5 * (abs_on_support + (product_total - product_on_support).max(0.0));
            exo_violation = exo_violation.max(tv);
        }
    }

    Ok(TheoremReport {
        cond1: reward_violation < tol,
        cond2: endo_violation < tol,
        cond3: exo_violation < tol,
        reward_violation,
        endo_violation,
        exo_violation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEquality {
    /// `max_s |Ṽ_π̃(s̃) − V_π̃(s)|`.
    pub reduced_vs_true: f64,
    /// `max_s |V_π̃(s) − V*(s)|`.
    pub true_vs_optimal: f64,
    pub holds: bool,
}

/// Solves the exactly constructed reduced model of `mask`, then compares the
/// value it believes its policy has, that policy's true value in the full
/// MDP, and the optimal full-MDP value, at every full state.
pub fn verify_value_equality(
    mdp: &dyn GenerativeMdp,
    mask: &Mask,
    tol: f64,
) -> Result<ValueEquality> {
    let budget = StateBudget::default();
    let reduced = TabularReducedMdp::exact(mdp, mask, budget)?;
    let gamma = reduced.discount();
    let plan = value_iteration(
        &reduced,
        &PlannerOptions {
            epsilon: (1e-11 * (1.0 - gamma)).max(f64::EPSILON),
            timeout_secs: f64::INFINITY,
        },
        &FrozenClock,
    )?;
    let believed = policy_evaluation(&reduced, &plan.policy, 1e-11)?;
    let actual = exact_policy_evaluation(mdp, &plan.policy, budget)?;
    let (_, optimal) = exact_optimal_values(mdp, 1e-11, budget)?;

    let full = actual.space().clone();
    let mut reduced_vs_true: f64 = 0.0;
    let mut true_vs_optimal: f64 = 0.0;
    let mut exo = vec![0usize; mdp.m()];
    for s in 0..full.len() {
        let (n, x) = full.split(s);
        exo.copy_from_slice(&full.exo_values(x));
        let r = believed.get(reduced.space().compose(n, reduced.space().exo_index_of_full(&exo)));
        reduced_vs_true = reduced_vs_true.max((r - actual.get(s)).abs());
        true_vs_optimal = true_vs_optimal.max((actual.get(s) - optimal.get(s)).abs());
    }
    Ok(ValueEquality {
        reduced_vs_true,
        true_vs_optimal,
        holds: reduced_vs_true < tol && true_vs_optimal < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn score(mask: &[usize], j: f64) -> MaskScore {
        MaskScore {
            mask: Mask::new(mask.iter().copied(), 10).unwrap(),
            j_hat: j,
            mean_return: j,
            cost: 0.0,
            lambda: 0.0,
            wall_time: 0.0,
        }
    }

    #[test]
    fn ties_prefer_smaller_then_lexicographic_masks() {
        assert!(better(&score(&[1], 2.0), &score(&[0], 1.0)));
        assert!(better(&score(&[1], 1.0), &score(&[0, 2], 1.0)));
        assert!(better(&score(&[0, 3], 1.0), &score(&[1, 2], 1.0)));
        assert!(!better(&score(&[1, 2], 1.0), &score(&[0, 3], 1.0)));
    }
}
