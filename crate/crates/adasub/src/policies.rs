//! Greedy and baseline policies, plus exhaustive optimal-policy search.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{
    condition, gain_element, ElementSet, Objective, PartialRealization, PolicyTree, Realization,
    TabularPrior, PROB_TOL,
};
use crate::error::{Error, Result};

/// Trace of one adaptive greedy execution.
#[derive(Clone, Debug)]
pub struct GreedyRun {
    /// Elements in selection order.
    pub selected: Vec<usize>,
    /// Final observation history (selection order preserved).
    pub observations: PartialRealization,
    /// Expected marginal gain of each selection at the time it was made.
    pub gains: Vec<f64>,
}

/// Adaptive greedy driven by arbitrary gain and observation oracles.
///
/// Each round picks the element with the largest expected marginal gain
/// given the history so far, with ties broken by lowest index, then
/// observes its state. There is no early stop unless `stop_on_zero` is
/// set, in which case the run ends once the best gain is `<= 0`.
pub fn adaptive_greedy_with<G, O>(
    n: usize,
    ell: usize,
    stop_on_zero: bool,
    mut gain: G,
    mut observe: O,
) -> Result<GreedyRun>
where
    G: FnMut(&PartialRealization, usize) -> Result<f64>,
    O: FnMut(usize) -> Result<u32>,
{
    if ell > n {
        return Err(Error::InvalidParams(format!(
            "budget {ell} exceeds ground set size {n}"
        )));
    }
    let mut run = GreedyRun {
        selected: Vec::with_capacity(ell),
        observations: PartialRealization::empty(),
        gains: Vec::with_capacity(ell),
    };
    let mut taken = vec![false; n];
    for _ in 0..ell {
        let mut best: Option<(usize, f64)> = None;
        for v in 0..n {
            if taken[v] {
                continue;
            }
            let g = gain(&run.observations, v)?;
            if best.map_or(true, |(_, b)| g > b) {
                best = Some((v, g));
            }
        }
        let (v, g) = best.expect("budget <= n leaves a candidate");
        if stop_on_zero && g <= 0.0 {
            break;
        }
        let y = observe(v)?;
        run.observations.push(v, y)?;
        taken[v] = true;
        run.selected.push(v);
        run.gains.push(g);
    }
    Ok(run)
}

/// Adaptive greedy on a tabular instance with a fixed hidden realization.
/// Gains are exact posterior expectations under the prior.
pub fn adaptive_greedy(
    f: &dyn Objective,
    prior: &TabularPrior,
    ell: usize,
    phi_true: &Realization,
    stop_on_zero: bool,
) -> Result<GreedyRun> {
    adaptive_greedy_with(
        prior.n_elements(),
        ell,
        stop_on_zero,
        |psi, v| Ok(gain_element(f, prior, v, psi)?.value),
        |v| Ok(phi_true.state(v)),
    )
}

/// The full adaptive greedy decision tree of height `ell`, branching on
/// every positive-posterior state. Its `avg_value` is the expected
/// performance of greedy over the prior.
pub fn adaptive_greedy_policy(
    f: &dyn Objective,
    prior: &TabularPrior,
    ell: usize,
) -> Result<PolicyTree> {
    fn build(
        f: &dyn Objective,
        prior: &TabularPrior,
        psi: &PartialRealization,
        depth: usize,
    ) -> Result<PolicyTree> {
        let n = prior.n_elements();
        if depth == 0 || psi.len() == n {
            return Ok(PolicyTree::leaf());
        }
        let mut best: Option<(usize, f64)> = None;
        for v in 0..n {
            if psi.dom().contains(v) {
                continue;
            }
            let g = gain_element(f, prior, v, psi)?.value;
            if best.map_or(true, |(_, b)| g > b) {
                best = Some((v, g));
            }
        }
        let (v, _) = best.expect("non-full history leaves a candidate");
        let probs = prior.state_posterior(v, psi)?;
        let mut children = BTreeMap::new();
        for (y, &q) in probs.iter().enumerate() {
            if q <= PROB_TOL {
                continue;
            }
            let next = psi.extended(v, y as u32)?;
            children.insert(y as u32, build(f, prior, &next, depth - 1)?);
        }
        Ok(PolicyTree::node(v, children))
    }
    build(f, prior, &PartialRealization::empty(), ell)
}

/// Standard greedy on a deterministic set function (no observations).
pub fn non_adaptive_greedy<F>(g: F, n: usize, ell: usize) -> Vec<usize>
where
    F: Fn(ElementSet) -> f64,
{
    let mut selected = Vec::with_capacity(ell);
    let mut set = ElementSet::EMPTY;
    for _ in 0..ell.min(n) {
        let base = g(set);
        let mut best: Option<(usize, f64)> = None;
        for v in 0..n {
            if set.contains(v) {
                continue;
            }
            let mut with = set;
            with.insert(v);
            let marginal = g(with) - base;
            if best.map_or(true, |(_, b)| marginal > b) {
                best = Some((v, marginal));
            }
        }
        let (v, _) = best.expect("budget <= n leaves a candidate");
        set.insert(v);
        selected.push(v);
    }
    selected
}

/// Uniformly random subset of size `ell`, deterministic in the seed.
pub fn random_policy(n: usize, ell: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ell = ell.min(n);
    rand::seq::index::sample(&mut rng, n, ell).into_vec()
}

/// Exact maximizer of `f_avg` over deterministic policy trees of height
/// at most `k`, by memoized recursion over observation histories.
///
/// The memo key is the sorted observation set: posteriors, and hence
/// optimal continuations, depend on the history only through that set.
/// `cap` bounds the number of distinct subproblems evaluated.
pub fn optimal_policy_exhaustive(
    f: &dyn Objective,
    prior: &TabularPrior,
    k: usize,
    cap: u64,
) -> Result<(PolicyTree, f64)> {
    struct Search<'a> {
        f: &'a dyn Objective,
        prior: &'a TabularPrior,
        memo: BTreeMap<(Vec<(usize, u32)>, usize), (PolicyTree, f64)>,
        visited: u64,
        cap: u64,
    }

    impl Search<'_> {
        /// Best achievable expected gain over `dom(psi)` within `depth`
        /// further selections, conditioned on `psi`.
        fn best(&mut self, psi: &PartialRealization, depth: usize) -> Result<(PolicyTree, f64)> {
            let n = self.prior.n_elements();
            if depth == 0 || psi.len() == n {
                return Ok((PolicyTree::leaf(), 0.0));
            }
            let key = (psi.sorted_key(), depth);
            if let Some(hit) = self.memo.get(&key) {
                return Ok(hit.clone());
            }
            self.visited += 1;
            if self.visited > self.cap {
                return Err(Error::BudgetExceeded { cap: self.cap });
            }
            let mut best = (PolicyTree::leaf(), 0.0);
            for v in 0..n {
                if psi.dom().contains(v) {
                    continue;
                }
                let probs = self.prior.state_posterior(v, psi)?;
                let mut total = 0.0;
                let mut children = BTreeMap::new();
                for (y, &q) in probs.iter().enumerate() {
                    if q <= PROB_TOL {
                        continue;
                    }
                    let next = psi.extended(v, y as u32)?;
                    let immediate = self.observed_gain(v, &next)?;
                    let (child, cont) = self.best(&next, depth - 1)?;
                    total += q * (immediate + cont);
                    children.insert(y as u32, child);
                }
                if total > best.1 {
                    best = (PolicyTree::node(v, children), total);
                }
            }
            self.memo.insert(key, best.clone());
            Ok(best)
        }

        /// `E[f(dom(psi), Phi) - f(dom(psi) - v, Phi) | Phi ~ psi]` where
        /// `v` is the most recent observation in `psi`.
        fn observed_gain(&self, v: usize, psi: &PartialRealization) -> Result<f64> {
            let cond = condition(self.prior, psi)?;
            let with = psi.dom();
            let mut without = ElementSet::EMPTY;
            for u in with.iter() {
                if u != v {
                    without.insert(u);
                }
            }
            let mut acc = 0.0;
            for (phi, p) in cond.support() {
                acc += p * (self.f.value(with, phi) - self.f.value(without, phi));
            }
            Ok(acc)
        }
    }

    let mut search = Search {
        f,
        prior,
        memo: BTreeMap::new(),
        visited: 0,
        cap,
    };
    let (tree, gain) = search.best(&PartialRealization::empty(), k)?;
    let base: f64 = prior
        .support()
        .iter()
        .map(|(phi, p)| p * f.value(ElementSet::EMPTY, phi))
        .sum();
    Ok((tree, base + gain))
}
