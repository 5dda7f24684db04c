//! Randomized property checks that cross different implementations
//! against each other on generated instances.

use std::collections::BTreeMap;

use adasub::core::{
    avg_value, concat, run_policy, ElementSet, Objective, PartialRealization, PolicyTree,
    TabularPrior,
};
use adasub::features::gen_random_finite;
use adasub::infmax::gen_random_triggering;
use adasub::policies::{adaptive_greedy_policy, optimal_policy_exhaustive};
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CAP: u64 = 2_000_000;

/// Random policy tree of height at most `depth` over unseen elements,
/// branching on every positive-posterior state.
fn random_tree(
    prior: &TabularPrior,
    psi: &PartialRealization,
    depth: usize,
    rng: &mut impl Rng,
) -> PolicyTree {
    let n = prior.n_elements();
    if depth == 0 || psi.len() == n || rng.gen_bool(0.25) {
        return PolicyTree::Leaf;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !psi.contains(v)).collect();
    let v = free[rng.gen_range(0..free.len())];
    let probs = prior.state_posterior(v, psi).unwrap();
    let mut children = BTreeMap::new();
    for (y, &q) in probs.iter().enumerate() {
        if q <= 1e-12 {
            continue;
        }
        let next = psi.extended(v, y as u32).unwrap();
        children.insert(y as u32, random_tree(prior, &next, depth - 1, rng));
    }
    PolicyTree::Node {
        element: v,
        children,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Appending a second policy never hurts a monotone objective, and the
    /// concatenation realizes exactly the union of both selections.
    #[test]
    fn concat_dominates_either_policy(seed in any::<u64>(), tree_seed in any::<u64>()) {
        let instance = gen_random_triggering(3, 2, seed).unwrap();
        let (prior, objective) = instance.to_tabular(CAP).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
        let first = random_tree(&prior, &PartialRealization::empty(), 2, &mut rng);
        let second = random_tree(&prior, &PartialRealization::empty(), 2, &mut rng);
        let combined = concat(&first, &second);
        let value_first = avg_value(&objective, &prior, &first).unwrap().value;
        let value_second = avg_value(&objective, &prior, &second).unwrap().value;
        let value_combined = avg_value(&objective, &prior, &combined).unwrap().value;
        prop_assert!(value_combined >= value_first.max(value_second) - 1e-9);
        for (phi, _) in prior.support() {
            let (sel_first, _) = run_policy(&first, phi).unwrap();
            let (sel_second, _) = run_policy(&second, phi).unwrap();
            let (sel_combined, _) = run_policy(&combined, phi).unwrap();
            prop_assert_eq!(sel_combined, sel_first.union(sel_second));
        }
    }

    /// Greedy never beats the exhaustive optimum at the same height.
    #[test]
    fn greedy_below_optimal(seed in any::<u64>(), k in 1usize..=3) {
        let instance = gen_random_finite(3, 4, 2, seed);
        let (prior, objective) = instance.to_tabular(CAP).unwrap();
        let tree = adaptive_greedy_policy(&objective, &prior, k).unwrap();
        let greedy = avg_value(&objective, &prior, &tree).unwrap().value;
        let (_, optimal) = optimal_policy_exhaustive(&objective, &prior, k, CAP).unwrap();
        prop_assert!(greedy <= optimal + 1e-9);
    }

    /// The closed-form expected spread agrees with averaging the objective
    /// over the tabulated prior.
    #[test]
    fn expected_spread_matches_tabular(seed in any::<u64>(), mask in 0u64..8) {
        let instance = gen_random_triggering(3, 2, seed).unwrap();
        let (prior, objective) = instance.to_tabular(CAP).unwrap();
        let sources: Vec<usize> = (0..3).filter(|v| mask >> v & 1 == 1).collect();
        let set = ElementSet::from_iter(sources.iter().copied());
        let tabular: f64 = prior
            .support()
            .iter()
            .map(|(phi, p)| p * objective.value(set, phi))
            .sum();
        assert_relative_eq!(
            instance.expected_spread_of(&sources),
            tabular,
            epsilon = 1e-9
        );
    }

    /// Optimal value is monotone in the height budget.
    #[test]
    fn optimal_monotone_in_budget(seed in any::<u64>()) {
        let instance = gen_random_triggering(3, 2, seed).unwrap();
        let (prior, objective) = instance.to_tabular(CAP).unwrap();
        let mut previous = 0.0;
        for k in 1..=3 {
            let (_, value) = optimal_policy_exhaustive(&objective, &prior, k, CAP).unwrap();
            prop_assert!(value >= previous - 1e-12);
            previous = value;
        }
    }
}
