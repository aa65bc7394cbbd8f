#![allow(clippy::needless_range_loop)]

use std::cell::Cell;

use exomask_core::dist::Categorical;
use exomask_core::domains::{BlockFactorized, TabularMdp};
use exomask_core::estimation::TabularReducedMdp;
use exomask_core::planner::{
    exact_policy_evaluation, hoeffding_confidence, hoeffding_radius, monte_carlo_value,
    policy_evaluation, truncation_horizon, value_iteration, Clock, FrozenClock, PlannerOptions,
    Policy,
};
use exomask_core::{Error, GenerativeMdp, Mask, ReducedSpace, StateBudget, VariableSpec};
use proptest::prelude::*;

fn tight() -> PlannerOptions {
    PlannerOptions {
        epsilon: 1e-12,
        timeout_secs: f64::INFINITY,
    }
}

/// One constant variable so that rewards have a component to live on.
fn single_variable_mdp(endo: usize, actions: usize, gamma: f64) -> TabularMdp {
    TabularMdp::new(endo, actions, vec![VariableSpec::new(0, 1, "const")], gamma).unwrap()
}

fn solve(mdp: &TabularMdp) -> Vec<f64> {
    let model = TabularReducedMdp::exact(mdp, &Mask::full(mdp.m()), StateBudget::default()).unwrap();
    value_iteration(&model, &tight(), &FrozenClock).unwrap().values.values().to_vec()
}

#[test]
fn two_state_chain_values() {
    let mut mdp = single_variable_mdp(2, 1, 0.9);
    mdp.set_endo_row(0, 0, 0, Categorical::point(2, 1));
    mdp.set_endo_row(1, 0, 0, Categorical::point(2, 1));
    mdp.set_reward(0, 1, 0, 0, 1.0);
    let v = solve(&mdp);
    assert!((v[1] - 10.0).abs() < 1e-9);
    assert!((v[0] - 9.0).abs() < 1e-9);
}

#[test]
fn single_state_value_is_the_geometric_sum() {
    for gamma in [0.0, 0.5, 0.9, 0.99] {
        let mut mdp = single_variable_mdp(1, 2, gamma);
        mdp.set_reward(0, 0, 0, 1, 1.0);
        let v = solve(&mdp);
        assert!((v[0] - 1.0 / (1.0 - gamma)).abs() < 1e-8, "gamma {gamma}");
    }
}

/// Dense Gaussian elimination with partial pivoting.
fn linear_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[test]
fn exact_evaluation_matches_a_linear_solve() {
    for seed in 0..5 {
        let toy = BlockFactorized::random(seed, 200).unwrap();
        let mdp = &toy.mdp;
        let full = TabularReducedMdp::exact(mdp, &Mask::full(mdp.m()), StateBudget::default()).unwrap();
        let space = full.space().clone();
        let mut rng = exomask_core::seeding::rng(seed + 100);
        let actions: Vec<usize> = (0..space.len())
            .map(|_| rand::Rng::gen_range(&mut rng, 0..mdp.action_count()))
            .collect();
        let policy = Policy::new(space.clone(), actions.clone()).unwrap();
        let table = exact_policy_evaluation(mdp, &policy, StateBudget::default()).unwrap();

        let n = space.len();
        let gamma = mdp.discount();
        let mut a = vec![vec![0.0; n]; n];
        let mut b = vec![0.0; n];
        for s in 0..n {
            a[s][s] += 1.0;
            b[s] = full.reward(s, actions[s]);
            for t in 0..n {
                a[s][t] -= gamma * full.transition_prob(s, actions[s], t);
            }
        }
        let oracle = linear_solve(a, b);
        for s in 0..n {
            assert!((table.get(s) - oracle[s]).abs() < 1e-8, "seed {seed} state {s}");
        }
    }
}

#[test]
fn residuals_contract_geometrically() {
    for seed in 0..5 {
        let toy = BlockFactorized::random(seed, 200).unwrap();
        let model = TabularReducedMdp::exact(&toy.mdp, &Mask::full(toy.mdp.m()), StateBudget::default()).unwrap();
        let out = value_iteration(&model, &tight(), &FrozenClock).unwrap();
        let gamma = model.discount();
        assert!(!out.timed_out);
        assert_eq!(out.sweeps, out.residuals.len());
        for w in out.residuals.windows(2) {
            assert!(w[1] <= gamma * w[0] + 1e-12, "{} > {gamma} * {}", w[1], w[0]);
        }
    }
}

#[test]
fn reduced_values_match_policy_evaluation_of_the_greedy_policy() {
    let toy = BlockFactorized::random(3, 200).unwrap();
    let model = TabularReducedMdp::exact(&toy.mdp, &toy.mask, StateBudget::default()).unwrap();
    let out = value_iteration(&model, &tight(), &FrozenClock).unwrap();
    let eval = policy_evaluation(&model, &out.policy, 1e-12).unwrap();
    assert!(eval.max_abs_diff(&out.values) < 1e-8);
}

/// Advances by one second on every reading.
struct Ticking(Cell<f64>);

impl Clock for Ticking {
    fn now(&self) -> f64 {
        let t = self.0.get();
        self.0.set(t + 1.0);
        t
    }
}

#[test]
fn timeouts_return_the_best_policy_so_far() {
    let toy = BlockFactorized::random(1, 200).unwrap();
    let model = TabularReducedMdp::exact(&toy.mdp, &Mask::full(toy.mdp.m()), StateBudget::default()).unwrap();
    let opts = PlannerOptions {
        epsilon: 1e-12,
        timeout_secs: 0.5,
    };
    match value_iteration(&model, &opts, &Ticking(Cell::new(0.0))) {
        Ok(out) => assert!(out.timed_out),
        Err(Error::PlannerTimeout { best_so_far }) => {
            assert_eq!(best_so_far.actions().len(), model.state_count());
        }
        Err(e) => panic!("unexpected error {e}"),
    }
    let opts = PlannerOptions {
        epsilon: 0.0,
        timeout_secs: 1.0,
    };
    assert!(value_iteration(&model, &opts, &FrozenClock).is_err());
}

#[test]
fn monte_carlo_is_reproducible_and_close_to_exact() {
    let toy = BlockFactorized::random(4, 200).unwrap();
    let mdp = &toy.mdp;
    let space = ReducedSpace::new(mdp, &Mask::empty(), StateBudget::default()).unwrap();
    let policy = Policy::constant(space, 0);
    let h = truncation_horizon(mdp.discount(), mdp.r_max(), 1e-6).unwrap();
    let a = monte_carlo_value(mdp, &policy, 4000, h, 5).unwrap();
    let b = monte_carlo_value(mdp, &policy, 4000, h, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.mean, monte_carlo_value(mdp, &policy, 4000, h, 6).unwrap().mean);

    let exact = exact_policy_evaluation(mdp, &policy, StateBudget::default()).unwrap();
    let v0 = exomask_core::planner::initial_state_value(mdp, &exact).unwrap();
    let radius = hoeffding_radius(4000, 0.999, mdp.discount(), 2.0 * mdp.r_max()).unwrap();
    assert!((a.mean - v0).abs() < radius, "{} vs {v0} (radius {radius})", a.mean);
}

#[test]
fn hoeffding_bound_reference_values() {
    // n λ² (1−γ)² / r² = 1
    let c = hoeffding_confidence(100, 1.0, 0.9, 1.0).unwrap();
    assert!((c - (1.0 - 2.0 * (-2.0f64).exp())).abs() < 1e-12);
    assert_eq!(hoeffding_confidence(1, 1e-3, 0.9, 1.0).unwrap(), 0.0);
    assert!(hoeffding_confidence(10, 1.0, 1.0, 1.0).is_err());
    let lam = hoeffding_radius(500, 0.9, 0.9, 2.0).unwrap();
    assert!((hoeffding_confidence(500, lam, 0.9, 2.0).unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn truncation_horizon_bounds_the_tail() {
    let h = truncation_horizon(0.9, 1.0, 1e-3).unwrap();
    assert!(0.9f64.powi(h as i32) * 10.0 < 1e-3);
    assert!(0.9f64.powi(h as i32 - 1) * 10.0 >= 1e-3);
    assert!(truncation_horizon(1.0, 1.0, 1e-3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn shifting_rewards_keeps_the_greedy_policy(seed in 0u64..1000, shift in -5.0f64..5.0) {
        let toy = BlockFactorized::random(seed, 120).unwrap();
        let model = TabularReducedMdp::exact(&toy.mdp, &toy.mask, StateBudget::default()).unwrap();
        let a = value_iteration(&model, &tight(), &FrozenClock).unwrap();
        let b = value_iteration(&model.clone().shift_rewards(shift), &tight(), &FrozenClock).unwrap();
        prop_assert_eq!(a.policy.actions(), b.policy.actions());
        let offset = shift / (1.0 - model.discount());
        for (x, y) in a.values.values().iter().zip(b.values.values()) {
            prop_assert!((y - x - offset).abs() < 1e-7);
        }
    }

    #[test]
    fn hoeffding_confidence_grows_with_n(n in 1usize..5000, lam in 0.01f64..5.0) {
        let lo = hoeffding_confidence(n, lam, 0.9, 1.0).unwrap();
        let hi = hoeffding_confidence(n + 1, lam, 0.9, 1.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo);
    }
}
