//! Self-checks run by `exomask verify`.

use exomask_core::domains::{BlockFactorized, DomainSpec, GridworldMdp, GridworldSpec, PRESETS};
use exomask_core::estimation::{
    collect_exo_rollouts, collect_full_rollouts, exo_row_visits, exo_table_from_exo,
    exo_table_from_full, transition_mutual_information, Behavior,
};
use exomask_core::mdp::{exo_action_independence, reward_additivity_gap};
use exomask_core::search::{check_theorem_conditions, verify_value_equality};
use exomask_core::seeding::derive_seed;
use exomask_core::{GenerativeMdp, Mask, ReducedSpace, StateBudget};
use serde::Serialize;

use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub instances: usize,
    pub max_states: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            instances: 20,
            max_states: 200,
            samples: 100_000,
            seed: 0,
        }
    }
}

/// Reduced value = true value = optimal value on random block-factorized
/// instances built to satisfy all three conditions.
pub fn theorem_suite(opts: &VerifyOptions) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut conditions_ok = true;
    for k in 0..opts.instances {
        let b = BlockFactorized::random(derive_seed(opts.seed, k as u64), opts.max_states)?;
        conditions_ok &= check_theorem_conditions(&b.mdp, &b.mask, 1e-9)?.all();
        let eq = verify_value_equality(&b.mdp, &b.mask, 1e-6)?;
        worst = worst.max(eq.reduced_vs_true).max(eq.true_vs_optimal);
    }
    Ok(Check::new(
        "value-equality",
        conditions_ok && worst < 1e-6,
        format!("{} instances, max error {worst:.3e}", opts.instances),
    ))
}

/// Breaking one condition flips exactly that flag.
pub fn perturbation_suite(opts: &VerifyOptions) -> Result<Check> {
    let mut failures = 0;
    for k in 0..opts.instances {
        let seed = derive_seed(opts.seed, k as u64);
        let b = BlockFactorized::random(seed, opts.max_states)?;
        let cases = [
            (b.break_reward(seed), [false, true, true]),
            (b.break_endo(seed), [true, false, true]),
            (b.break_exo(seed), [true, true, false]),
        ];
        for (mdp, want) in cases {
            let r = check_theorem_conditions(&mdp, &b.mask, 1e-9)?;
            if [r.cond1, r.cond2, r.cond3] != want {
                failures += 1;
            }
        }
    }
    Ok(Check::new(
        "condition-checker",
        failures == 0,
        format!("{} perturbations, {failures} wrong", 3 * opts.instances),
    ))
}

fn gridworld(coupled: bool) -> Result<GridworldMdp> {
    Ok(GridworldMdp::new(GridworldSpec {
        coupled,
        ..GridworldSpec::default()
    })?)
}

/// Independent chains carry almost no transition information; the coupled
/// driver and goal carry a lot.
pub fn mutual_information_check(opts: &VerifyOptions) -> Result<Check> {
    let rollouts = opts.samples.div_ceil(50).max(1);
    let independent = collect_exo_rollouts(&gridworld(false)?, rollouts, 50, opts.seed)?;
    let goal = Mask::new([0], 5)?;
    let worst = (1..5)
        .map(|j| transition_mutual_information(&independent, &goal, j))
        .collect::<exomask_core::Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let coupled = collect_exo_rollouts(&gridworld(true)?, rollouts, 50, opts.seed)?;
    let driver = transition_mutual_information(&coupled, &goal, 1)?;
    Ok(Check::new(
        "mutual-information",
        worst < 0.01 && driver > 0.05,
        format!("independent max {worst:.2e} nats, driver-goal {driver:.3} nats"),
    ))
}

/// Exogenous tables fitted from policy-free and from uniform-random full
/// rollouts agree row by row.
pub fn data_policy_invariance(opts: &VerifyOptions) -> Result<Check> {
    let g = gridworld(true)?;
    let rollouts = opts.samples.div_ceil(50).max(1);
    let exo = collect_exo_rollouts(&g, rollouts, 50, derive_seed(opts.seed, 1))?;
    let full = collect_full_rollouts(&g, Behavior::UniformRandom, rollouts, 50, derive_seed(opts.seed, 2))?;
    let mut worst: f64 = 0.0;
    for mask in [[0].as_slice(), &[1], &[2], &[3], &[4], &[0, 1]] {
        let mask = Mask::new(mask.iter().copied(), g.m())?;
        let space = ReducedSpace::new(&g, &mask, StateBudget::default())?;
        let a = exo_table_from_exo(&exo, &space, 0.0);
        let b = exo_table_from_full(&full, &space, 0.0);
        let visits = exo_row_visits(exo.transitions.iter().map(|t| t.from.clone()), &space);
        for &row in visits.keys() {
            worst = worst.max(a[row].total_variation(&b[row]));
        }
    }
    Ok(Check::new(
        "data-policy-invariance",
        worst < 0.02,
        format!("max row TV {worst:.4}"),
    ))
}

/// Reward additivity and action-independent exogenous dynamics on every
/// preset.
pub fn domain_checks(opts: &VerifyOptions) -> Result<Check> {
    let mut worst_gap: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (k, name) in PRESETS.iter().enumerate() {
        let mdp = DomainSpec::preset(name).expect("listed preset").build()?;
        let seed = derive_seed(opts.seed, k as u64);
        worst_gap = worst_gap.max(reward_additivity_gap(mdp.as_ref(), 1000, seed));
        let mut rng = exomask_core::seeding::rng(seed);
        let state = mdp.sample_initial(&mut rng);
        let chi = exo_action_independence(mdp.as_ref(), &state, 0, mdp.action_count() - 1, 5000, seed);
        // 5 standard deviations above the chi-square mean
        let limit = chi.dof as f64 + 5.0 * (2.0 * chi.dof as f64).sqrt() + 1.0;
        worst_ratio = worst_ratio.max(chi.statistic / limit);
    }
    Ok(Check::new(
        "domain-structure",
        worst_gap < 1e-12 && worst_ratio < 1.0,
        format!("additivity gap {worst_gap:.1e}, chi-square/limit {worst_ratio:.2}"),
    ))
}

pub fn run_all(opts: &VerifyOptions) -> Result<Vec<Check>> {
    Ok(vec![
        theorem_suite(opts)?,
        perturbation_suite(opts)?,
        mutual_information_check(opts)?,
        data_policy_invariance(opts)?,
        domain_checks(opts)?,
    ])
}
