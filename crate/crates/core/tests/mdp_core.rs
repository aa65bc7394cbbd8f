use exomask_core::domains::{DomainSpec, TabularMdp, PRESETS};
use exomask_core::mdp::{
    exo_action_independence, reduce_state, reduced_reward, reward_additivity_gap,
};
use exomask_core::{FactoredState, GenerativeMdp, Mask, ReducedSpace, StateBudget, VariableSpec};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn presets() -> Vec<(&'static str, Box<dyn GenerativeMdp>)> {
    PRESETS
        .iter()
        .map(|&name| (name, DomainSpec::preset(name).unwrap().build().unwrap()))
        .collect()
}

fn constant_reward_toy() -> TabularMdp {
    let vars = (0..3).map(|i| VariableSpec::new(i, 2, format!("x{i}"))).collect();
    let mut mdp = TabularMdp::new(2, 2, vars, 0.9).unwrap();
    for (i, r) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        for n in 0..2 {
            for v in 0..2 {
                for a in 0..2 {
                    mdp.set_reward(i, n, v, a, r);
                }
            }
        }
    }
    mdp
}

#[test]
fn reduced_reward_sums_only_masked_components() {
    let mdp = constant_reward_toy();
    let state = FactoredState::new(1, vec![0, 1, 1]);
    for (mask, expected) in [
        (Mask::empty(), 0.0),
        (Mask::new([0, 2], 3).unwrap(), 5.0),
        (Mask::new([1], 3).unwrap(), 2.0),
        (Mask::full(3), 7.0),
    ] {
        let reduced = reduce_state(&state, &mask).unwrap();
        assert_eq!(reduced_reward(&mdp, &reduced, 0, &mask).unwrap(), expected);
    }
}

#[test]
fn built_in_domains_are_reward_additive() {
    for (name, mdp) in presets() {
        assert!(reward_additivity_gap(mdp.as_ref(), 5_000, 3) < 1e-12, "{name}");
    }
}

#[test]
fn built_in_exogenous_transitions_ignore_the_action() {
    for (name, mdp) in presets() {
        let mut rng = exomask_core::seeding::rng(11);
        for k in 0..3 {
            let state = mdp.sample_initial(&mut rng);
            let last = mdp.action_count() - 1;
            let chi = exo_action_independence(mdp.as_ref(), &state, 0, last, 10_000, 100 + k);
            if chi.dof == 0 {
                continue;
            }
            let p = ChiSquared::new(chi.dof as f64).unwrap().sf(chi.statistic);
            assert!(p > 1e-3, "{name}: statistic {} on {} dof, p = {p}", chi.statistic, chi.dof);
        }
    }
}

#[test]
fn reduced_space_sizes_follow_the_mask() {
    let mdp = constant_reward_toy();
    let budget = StateBudget::default();
    assert_eq!(ReducedSpace::new(&mdp, &Mask::empty(), budget).unwrap().len(), 2);
    assert_eq!(ReducedSpace::new(&mdp, &Mask::full(3), budget).unwrap().len(), 16);
    assert!(ReducedSpace::new(&mdp, &Mask::full(3), StateBudget(15)).is_err());
}

fn mask_strategy(m: usize) -> impl Strategy<Value = Mask> {
    proptest::collection::vec(0..m, 0..=m).prop_map(move |ix| Mask::new(ix, m).unwrap())
}

proptest! {
    #[test]
    fn mask_display_round_trips(mask in mask_strategy(12)) {
        let parsed: Mask = mask.to_string().parse().unwrap();
        prop_assert_eq!(parsed, mask);
    }

    #[test]
    fn masks_are_sorted_sets(ix in proptest::collection::vec(0usize..9, 0..20)) {
        let mask = Mask::new(ix.clone(), 9).unwrap();
        prop_assert!(mask.indices().windows(2).all(|w| w[0] < w[1]));
        for i in ix {
            prop_assert!(mask.contains(i));
        }
        prop_assert_eq!(mask.complement(9).len() + mask.len(), 9);
    }

    #[test]
    fn reduced_indexing_round_trips(mask in mask_strategy(5), endo in 0usize..3,
                                    exo in proptest::collection::vec(0usize..3, 5)) {
        let vars: Vec<VariableSpec> = (0..5).map(|i| VariableSpec::new(i, 3, "v")).collect();
        let space = ReducedSpace::from_parts(3, &vars, &mask, StateBudget::default()).unwrap();
        let state = FactoredState::new(endo, exo);
        let reduced = reduce_state(&state, &mask).unwrap();
        prop_assert_eq!(reduced.exo_masked.len(), mask.len());
        let index = space.index_of_full(&state);
        prop_assert_eq!(space.index(&reduced), index);
        prop_assert_eq!(space.state_at(index), reduced);
    }
}
