//! Exact brute-force oracles for ratio and gap quantities on small
//! tabular instances.
//!
//! The adaptive submodularity ratio at a fixed history minimizes a
//! fractional objective over all decision trees of bounded height. Direct
//! enumeration of trees is hopeless beyond toy sizes, so the minimization
//! runs as a Dinkelbach parametric search: for a guess `lambda`, the
//! auxiliary problem min over trees of `numerator - lambda * denominator`
//! decomposes over tree nodes and is solved by memoized dynamic
//! programming over observation histories. The guess is then updated to
//! the exact ratio of the minimizing tree until no tree beats it. Per-
//! history posteriors and gains are cached across guesses since they do
//! not depend on `lambda`. A direct tree-enumeration oracle is kept for
//! cross-checking on tiny instances.

use std::collections::HashMap;

use crate::core::{
    condition, enumerate_histories, gain_element, gain_policy, run_policy, ElementSet, Objective,
    PartialRealization, PolicyTree, TabularPrior, PROB_TOL, VALUE_TOL,
};
use crate::error::{Error, Result};
use crate::policies::optimal_policy_exhaustive;

use std::collections::BTreeMap;

/// Default cap on subproblem evaluations per query.
pub const DEFAULT_CAP: u64 = 2_000_000;
/// Maximum Dinkelbach updates before declaring non-convergence.
const MAX_DINKELBACH: usize = 200;

/// Which quantity a report carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    GammaAdaptive,
    GammaLevel,
    GammaNonadaptive,
    Beta,
    ZetaStar,
    Gap,
}

/// Argument achieving the reported extremum.
#[derive(Clone, Debug)]
pub enum Witness {
    /// Minimizing `(history, tree)` for adaptive ratios.
    RatioPolicy {
        psi: PartialRealization,
        tree: PolicyTree,
        numerator: f64,
        denominator: f64,
    },
    /// Minimizing `(L, S)` for set-function ratios.
    SetPair {
        base: ElementSet,
        set: ElementSet,
        numerator: f64,
        denominator: f64,
    },
    /// Maximizing `(psi, psi', v)` for the weak-ratio constant.
    HistoryPair {
        inner: PartialRealization,
        outer: PartialRealization,
        element: usize,
        numerator: f64,
        denominator: f64,
    },
    /// Maximizing set against the optimal tree for the adaptivity gap.
    GapPair {
        set: ElementSet,
        tree: PolicyTree,
        numerator: f64,
        denominator: f64,
    },
    None,
}

#[derive(Clone, Debug)]
pub struct MetricReport {
    pub value: f64,
    pub kind: MetricKind,
    pub witness: Witness,
    /// Zero-probability sub-histories skipped during minimization.
    pub skipped_zero_prob: usize,
}

/// Budget and history for an adaptive ratio query.
#[derive(Clone, Debug)]
pub struct RatioQuery {
    pub psi: PartialRealization,
    pub k: usize,
}

struct Budget {
    visited: u64,
    cap: u64,
}

impl Budget {
    fn new(cap: u64) -> Self {
        Budget { visited: 0, cap }
    }

    fn charge(&mut self, amount: u64) -> Result<()> {
        self.visited += amount;
        if self.visited > self.cap {
            Err(Error::BudgetExceeded { cap: self.cap })
        } else {
            Ok(())
        }
    }
}

/// Numerator and denominator of the ratio for one concrete tree at one
/// history: `sum_v Pr(v selected) * Delta(v|psi)` over `Delta(tree|psi)`.
pub fn ratio_of_policy(
    f: &dyn Objective,
    prior: &TabularPrior,
    psi: &PartialRealization,
    tree: &PolicyTree,
) -> Result<(f64, f64)> {
    let den = gain_policy(f, prior, tree, psi)?.value;
    let cond = condition(prior, psi)?;
    let mut selection_mass: HashMap<usize, f64> = HashMap::new();
    for (phi, p) in cond.support() {
        let (selected, _) = run_policy(tree, phi)?;
        for v in selected.iter() {
            *selection_mass.entry(v).or_insert(0.0) += p;
        }
    }
    let mut num = 0.0;
    for (&v, &mass) in &selection_mass {
        num += mass * gain_element(f, prior, v, psi)?.value;
    }
    Ok((num, den))
}

type Key = Vec<(usize, u32)>;

/// Per-history data that does not depend on the Dinkelbach parameter:
/// for each selectable element, its expected gain at the history and the
/// positive-posterior states with their probabilities.
struct Context {
    options: Vec<(usize, f64, Vec<(u32, f64)>)>,
}

struct GammaSearch<'a> {
    f: &'a dyn Objective,
    prior: &'a TabularPrior,
    root_gains: Vec<f64>,
    contexts: HashMap<Key, Context>,
}

impl GammaSearch<'_> {
    fn ensure_context(&mut self, full: &PartialRealization, budget: &mut Budget) -> Result<Key> {
        let key = full.sorted_key();
        if self.contexts.contains_key(&key) {
            return Ok(key);
        }
        let n = self.prior.n_elements();
        let mut options = Vec::new();
        for v in 0..n {
            if full.dom().contains(v) {
                continue;
            }
            budget.charge(1)?;
            let gain = gain_element(self.f, self.prior, v, full)?.value;
            let probs = self.prior.state_posterior(v, full)?;
            let states: Vec<(u32, f64)> = probs
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > PROB_TOL)
                .map(|(y, &q)| (y as u32, q))
                .collect();
            options.push((v, gain, states));
        }
        self.contexts.insert(key.clone(), Context { options });
        Ok(key)
    }

    /// `min(0, min_v [Delta(v|base) - lambda Delta(v|full) + sum_y q_y ...])`
    /// over trees of height `depth` rooted at `full`.
    fn dp(
        &mut self,
        full: &PartialRealization,
        depth: usize,
        lambda: f64,
        memo: &mut HashMap<(Key, usize), (f64, Option<usize>)>,
        budget: &mut Budget,
    ) -> Result<f64> {
        if depth == 0 {
            return Ok(0.0);
        }
        let key = self.ensure_context(full, budget)?;
        if let Some(&(value, _)) = memo.get(&(key.clone(), depth)) {
            return Ok(value);
        }
        budget.charge(1)?;
        let options = {
            let ctx = &self.contexts[&key];
            ctx.options.clone()
        };
        let mut best = (0.0, None);
        for (v, gain, states) in options {
            let mut total = self.root_gains[v] - lambda * gain;
            for &(y, q) in &states {
                let next = full.extended(v, y)?;
                total += q * self.dp(&next, depth - 1, lambda, memo, budget)?;
            }
            if total < best.0 {
                best = (total, Some(v));
            }
        }
        memo.insert((key, depth), best);
        Ok(best.0)
    }

    fn rebuild(
        &self,
        full: &PartialRealization,
        depth: usize,
        memo: &HashMap<(Key, usize), (f64, Option<usize>)>,
    ) -> Result<PolicyTree> {
        if depth == 0 {
            return Ok(PolicyTree::leaf());
        }
        let key = full.sorted_key();
        let chosen = memo.get(&(key.clone(), depth)).and_then(|&(_, c)| c);
        let Some(v) = chosen else {
            return Ok(PolicyTree::leaf());
        };
        let ctx = &self.contexts[&key];
        let states = &ctx
            .options
            .iter()
            .find(|(u, _, _)| *u == v)
            .expect("chosen element is an option")
            .2;
        let mut children = BTreeMap::new();
        for &(y, _) in states {
            let next = full.extended(v, y)?;
            children.insert(y, self.rebuild(&next, depth - 1, memo)?);
        }
        Ok(PolicyTree::node(v, children))
    }
}

/// Minimum ratio over trees of height at most `k` rooted at `base`, with
/// the minimizing tree and its exact numerator and denominator.
fn gamma_at(
    f: &dyn Objective,
    prior: &TabularPrior,
    base: &PartialRealization,
    k: usize,
    budget: &mut Budget,
) -> Result<(f64, PolicyTree, f64, f64)> {
    let n = prior.n_elements();
    if k == 0 || base.len() == n {
        return Ok((1.0, PolicyTree::leaf(), 0.0, 0.0));
    }
    let root_gains: Vec<f64> = (0..n)
        .map(|v| {
            if base.dom().contains(v) {
                Ok(0.0)
            } else {
                Ok(gain_element(f, prior, v, base)?.value)
            }
        })
        .collect::<Result<_>>()?;
    let mut search = GammaSearch {
        f,
        prior,
        root_gains,
        contexts: HashMap::new(),
    };

    // Fallback witness: any singleton achieves ratio 1 exactly.
    let first_free = (0..n).find(|&v| !base.dom().contains(v)).unwrap();
    let states = prior.state_posterior(first_free, base)?;
    let mut fallback_children = BTreeMap::new();
    for (y, &q) in states.iter().enumerate() {
        if q > PROB_TOL {
            fallback_children.insert(y as u32, PolicyTree::leaf());
        }
    }
    let fallback_gain = search.root_gains[first_free];
    let mut result = (
        1.0,
        PolicyTree::node(first_free, fallback_children),
        fallback_gain,
        fallback_gain,
    );

    let mut lambda = 1.0;
    for _ in 0..MAX_DINKELBACH {
        let mut memo = HashMap::new();
        let g = search.dp(base, k, lambda, &mut memo, budget)?;
        if g >= -1e-12 * (1.0 + lambda.abs()) {
            result.0 = lambda;
            return Ok(result);
        }
        let tree = search.rebuild(base, k, &memo)?;
        let (num, den) = ratio_of_policy(f, prior, base, &tree)?;
        if den.abs() <= PROB_TOL {
            // Only reachable when the auxiliary value is negative with a
            // zero-gain tree, which exact arithmetic forbids; stop at the
            // current estimate.
            result.0 = lambda;
            return Ok(result);
        }
        lambda = num / den;
        result = (lambda, tree, num, den);
    }
    Err(Error::NoConvergence(MAX_DINKELBACH))
}

/// Adaptive submodularity ratio at a history: minimum over all
/// sub-histories of `query.psi` and all trees of height at most `query.k`.
pub fn gamma_adaptive(
    f: &dyn Objective,
    prior: &TabularPrior,
    query: &RatioQuery,
    cap: u64,
) -> Result<MetricReport> {
    let mut budget = Budget::new(cap);
    let mut skipped = 0;
    let mut best: Option<(f64, PartialRealization, PolicyTree, f64, f64)> = None;
    for sub in query.psi.subsets() {
        if !sub.is_empty() && prior.mass_of(&sub) <= PROB_TOL {
            skipped += 1;
            continue;
        }
        let (value, tree, num, den) = gamma_at(f, prior, &sub, query.k, &mut budget)?;
        if best.as_ref().map_or(true, |(b, ..)| value < *b) {
            best = Some((value, sub, tree, num, den));
        }
    }
    let (value, psi, tree, numerator, denominator) = best.expect("subset list is never empty");
    Ok(MetricReport {
        value,
        kind: MetricKind::GammaAdaptive,
        witness: Witness::RatioPolicy {
            psi,
            tree,
            numerator,
            denominator,
        },
        skipped_zero_prob: skipped,
    })
}

/// `gamma_{ell,k}`: minimum of the adaptive ratio over every positive-
/// probability history of size at most `ell`.
pub fn gamma_level(
    f: &dyn Objective,
    prior: &TabularPrior,
    ell: usize,
    k: usize,
    cap: u64,
) -> Result<MetricReport> {
    let mut budget = Budget::new(cap);
    let histories = enumerate_histories(prior, ell, cap)?;
    let mut best: Option<(f64, PartialRealization, PolicyTree, f64, f64)> = None;
    for psi in histories {
        let (value, tree, num, den) = gamma_at(f, prior, &psi, k, &mut budget)?;
        if best.as_ref().map_or(true, |(b, ..)| value < *b) {
            best = Some((value, psi, tree, num, den));
        }
    }
    let (value, psi, tree, numerator, denominator) = best.expect("empty history always present");
    Ok(MetricReport {
        value,
        kind: MetricKind::GammaLevel,
        witness: Witness::RatioPolicy {
            psi,
            tree,
            numerator,
            denominator,
        },
        skipped_zero_prob: 0,
    })
}

fn set_ratio_scan<F>(
    g: &F,
    n: usize,
    u: ElementSet,
    k: usize,
    cap: u64,
    invert: bool,
) -> Result<(f64, ElementSet, ElementSet, f64, f64)>
where
    F: Fn(ElementSet) -> f64,
{
    let mut budget = Budget::new(cap);
    let u_elements: Vec<usize> = u.iter().collect();
    let mut best: Option<(f64, ElementSet, ElementSet, f64, f64)> = None;
    for mask in 0u64..(1 << u_elements.len()) {
        let l = ElementSet::from_iter(
            u_elements
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &v)| v),
        );
        let base = g(l);
        for s_mask in 1u64..(1 << n) {
            let s = ElementSet(s_mask);
            if s.len() > k || s.iter().any(|v| l.contains(v)) {
                continue;
            }
            budget.charge(1)?;
            let joint = g(l.union(s)) - base;
            let sum: f64 = s.iter().map(|v| g(l.union(ElementSet::singleton(v))) - base).sum();
            let (num, den) = if invert { (joint, sum) } else { (sum, joint) };
            let ratio = if den.abs() <= PROB_TOL {
                if num.abs() <= PROB_TOL {
                    1.0
                } else {
                    continue;
                }
            } else {
                num / den
            };
            if best.as_ref().map_or(true, |(b, ..)| ratio < *b) {
                best = Some((ratio, l, s, num, den));
            }
        }
    }
    Ok(best.unwrap_or((1.0, ElementSet::EMPTY, ElementSet::EMPTY, 0.0, 0.0)))
}

/// Submodularity ratio of a set function:
/// `min over L in U, |S| <= k of sum_v g(v|L) / g(S|L)`.
pub fn gamma_nonadaptive<F>(g: F, n: usize, u: ElementSet, k: usize, cap: u64) -> Result<MetricReport>
where
    F: Fn(ElementSet) -> f64,
{
    let (value, base, set, numerator, denominator) = set_ratio_scan(&g, n, u, k, cap, false)?;
    Ok(MetricReport {
        value,
        kind: MetricKind::GammaNonadaptive,
        witness: Witness::SetPair {
            base,
            set,
            numerator,
            denominator,
        },
        skipped_zero_prob: 0,
    })
}

/// Supermodularity ratio: the same scan with the fraction inverted.
pub fn beta_nonadaptive<F>(g: F, n: usize, u: ElementSet, k: usize, cap: u64) -> Result<MetricReport>
where
    F: Fn(ElementSet) -> f64,
{
    let (value, base, set, numerator, denominator) = set_ratio_scan(&g, n, u, k, cap, true)?;
    Ok(MetricReport {
        value,
        kind: MetricKind::Beta,
        witness: Witness::SetPair {
            base,
            set,
            numerator,
            denominator,
        },
        skipped_zero_prob: 0,
    })
}

/// Weak adaptive submodularity constant: maximum of
/// `Delta(v|psi') / Delta(v|psi)` over nested histories `psi` in `psi'`
/// and elements outside `dom(psi')`; infinite when a gain appears out of
/// nothing.
pub fn zeta_star(f: &dyn Objective, prior: &TabularPrior, cap: u64) -> Result<MetricReport> {
    let mut budget = Budget::new(cap);
    let n = prior.n_elements();
    let histories = enumerate_histories(prior, n, cap)?;
    let mut gain_cache: HashMap<(Key, usize), f64> = HashMap::new();
    let mut cached_gain = |psi: &PartialRealization, v: usize,
                           budget: &mut Budget|
     -> Result<f64> {
        let key = (psi.sorted_key(), v);
        if let Some(&g) = gain_cache.get(&key) {
            return Ok(g);
        }
        budget.charge(1)?;
        let g = gain_element(f, prior, v, psi)?.value;
        gain_cache.insert(key, g);
        Ok(g)
    };

    let mut best: Option<(f64, PartialRealization, PartialRealization, usize, f64, f64)> = None;
    for outer in &histories {
        for v in 0..n {
            if outer.dom().contains(v) {
                continue;
            }
            let num = cached_gain(outer, v, &mut budget)?;
            for inner in outer.subsets() {
                let den = cached_gain(&inner, v, &mut budget)?;
                let ratio = if den.abs() <= PROB_TOL {
                    if num.abs() <= PROB_TOL {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    num / den
                };
                if best.as_ref().map_or(true, |(b, ..)| ratio > *b) {
                    best = Some((ratio, inner, outer.clone(), v, num, den));
                }
            }
        }
    }
    let (value, inner, outer, element, numerator, denominator) =
        best.ok_or_else(|| Error::InvalidInput("no element available for zeta".into()))?;
    Ok(MetricReport {
        value,
        kind: MetricKind::ZetaStar,
        witness: Witness::HistoryPair {
            inner,
            outer,
            element,
            numerator,
            denominator,
        },
        skipped_zero_prob: 0,
    })
}

/// Exact adaptivity gap: best non-adaptive set of size at most `k`
/// against the best adaptive tree of height at most `k`.
pub fn adaptivity_gap_exact(
    f: &dyn Objective,
    prior: &TabularPrior,
    k: usize,
    cap: u64,
) -> Result<MetricReport> {
    let mut budget = Budget::new(cap);
    let n = prior.n_elements();
    let expected = |set: ElementSet| -> f64 {
        prior
            .support()
            .iter()
            .map(|(phi, p)| p * f.value(set, phi))
            .sum()
    };
    let mut best_set = (ElementSet::EMPTY, expected(ElementSet::EMPTY));
    for mask in 1u64..(1 << n) {
        let set = ElementSet(mask);
        if set.len() > k {
            continue;
        }
        budget.charge(1)?;
        let value = expected(set);
        if value > best_set.1 {
            best_set = (set, value);
        }
    }
    let (tree, adaptive) = optimal_policy_exhaustive(f, prior, k, cap)?;
    let value = if adaptive.abs() <= PROB_TOL {
        1.0
    } else {
        best_set.1 / adaptive
    };
    Ok(MetricReport {
        value,
        kind: MetricKind::Gap,
        witness: Witness::GapPair {
            set: best_set.0,
            tree,
            numerator: best_set.1,
            denominator: adaptive,
        },
        skipped_zero_prob: 0,
    })
}

/// Both sides of the gap lower bound `GAP >= beta * gamma`.
#[derive(Clone, Debug)]
pub struct GapBoundReport {
    pub gap: MetricReport,
    pub beta: MetricReport,
    pub gamma: MetricReport,
    pub holds: bool,
}

pub fn verify_gap_bound(
    f: &dyn Objective,
    prior: &TabularPrior,
    k: usize,
    cap: u64,
) -> Result<GapBoundReport> {
    let n = prior.n_elements();
    let expected = |set: ElementSet| -> f64 {
        prior
            .support()
            .iter()
            .map(|(phi, p)| p * f.value(set, phi))
            .sum()
    };
    let gap = adaptivity_gap_exact(f, prior, k, cap)?;
    let beta = beta_nonadaptive(expected, n, ElementSet::EMPTY, k, cap)?;
    let gamma = gamma_adaptive(
        f,
        prior,
        &RatioQuery {
            psi: PartialRealization::empty(),
            k,
        },
        cap,
    )?;
    let holds = gap.value >= beta.value * gamma.value - VALUE_TOL;
    Ok(GapBoundReport {
        gap,
        beta,
        gamma,
        holds,
    })
}

/// Both sides of `1/zeta* <= min over histories of gamma_{psi,k}`.
#[derive(Clone, Debug)]
pub struct ZetaGammaReport {
    pub zeta: MetricReport,
    pub min_gamma: MetricReport,
    pub holds: bool,
}

pub fn verify_zeta_vs_gamma(
    f: &dyn Objective,
    prior: &TabularPrior,
    k: usize,
    cap: u64,
) -> Result<ZetaGammaReport> {
    let n = prior.n_elements();
    let zeta = zeta_star(f, prior, cap)?;
    let min_gamma = gamma_level(f, prior, n, k, cap)?;
    let inv = if zeta.value.is_infinite() {
        0.0
    } else {
        1.0 / zeta.value
    };
    let holds = inv <= min_gamma.value + VALUE_TOL;
    Ok(ZetaGammaReport {
        zeta,
        min_gamma,
        holds,
    })
}

/// Every deterministic tree of height at most `k` over the elements
/// outside `dom(base)`, branching only on positive-posterior states.
/// Exponential; intended for cross-checks on tiny instances.
pub fn enumerate_policies(
    prior: &TabularPrior,
    base: &PartialRealization,
    k: usize,
    cap: u64,
) -> Result<Vec<PolicyTree>> {
    fn rec(
        prior: &TabularPrior,
        full: &PartialRealization,
        depth: usize,
        budget: &mut Budget,
    ) -> Result<Vec<PolicyTree>> {
        budget.charge(1)?;
        let mut out = vec![PolicyTree::leaf()];
        if depth == 0 {
            return Ok(out);
        }
        let n = prior.n_elements();
        for v in 0..n {
            if full.dom().contains(v) {
                continue;
            }
            let probs = prior.state_posterior(v, full)?;
            let mut branch_options: Vec<(u32, Vec<PolicyTree>)> = Vec::new();
            for (y, &q) in probs.iter().enumerate() {
                if q <= PROB_TOL {
                    continue;
                }
                let next = full.extended(v, y as u32)?;
                branch_options.push((y as u32, rec(prior, &next, depth - 1, budget)?));
            }
            let mut combos: Vec<BTreeMap<u32, PolicyTree>> = vec![BTreeMap::new()];
            for (y, subtrees) in &branch_options {
                let mut extended = Vec::with_capacity(combos.len() * subtrees.len());
                for combo in &combos {
                    for subtree in subtrees {
                        budget.charge(1)?;
                        let mut next = combo.clone();
                        next.insert(*y, subtree.clone());
                        extended.push(next);
                    }
                }
                combos = extended;
            }
            for children in combos {
                out.push(PolicyTree::node(v, children));
            }
        }
        Ok(out)
    }
    let mut budget = Budget::new(cap);
    rec(prior, base, k, &mut budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::tests::{star_objective, star_prior};
    use crate::core::{check_adaptive_submodular, Realization, StateSpace};

    fn empty_query(k: usize) -> RatioQuery {
        RatioQuery {
            psi: PartialRealization::empty(),
            k,
        }
    }

    /// Independent fair coins with a modular objective: adaptive
    /// submodular, so every ratio is exactly 1.
    fn modular_instance(n: usize) -> (impl Objective, TabularPrior) {
        let space = StateSpace::uniform(n, 2).unwrap();
        let mut support = Vec::new();
        for mask in 0u32..(1 << n) {
            let states = (0..n).map(|v| mask >> v & 1).collect();
            support.push((Realization::new(states), 1.0 / (1 << n) as f64));
        }
        let prior = TabularPrior::new(space, support).unwrap();
        let f = |set: ElementSet, phi: &Realization| {
            set.iter().map(|v| phi.state(v) as f64).sum::<f64>()
        };
        (f, prior)
    }

    /// Two coins, value only for selecting both heads: zero singleton
    /// gains at the empty history but positive pair gain, so gamma = 0.
    fn synergy_instance() -> (impl Objective, TabularPrior) {
        let space = StateSpace::uniform(2, 2).unwrap();
        let support = (0u32..4)
            .map(|mask| (Realization::new(vec![mask & 1, mask >> 1]), 0.25))
            .collect();
        let prior = TabularPrior::new(space, support).unwrap();
        let f = |set: ElementSet, phi: &Realization| {
            if set.len() == 2 && (0..2).all(|v| phi.state(v) == 1) {
                1.0
            } else {
                0.0
            }
        };
        (f, prior)
    }

    fn min_ratio_by_enumeration(
        f: &dyn Objective,
        prior: &TabularPrior,
        base: &PartialRealization,
        k: usize,
    ) -> f64 {
        let trees = enumerate_policies(prior, base, k, 10_000_000).unwrap();
        let mut best = f64::INFINITY;
        for tree in trees {
            let (num, den) = ratio_of_policy(f, prior, base, &tree).unwrap();
            let ratio = if den.abs() <= PROB_TOL {
                if num.abs() <= PROB_TOL {
                    1.0
                } else {
                    continue;
                }
            } else {
                num / den
            };
            best = best.min(ratio);
        }
        best
    }

    #[test]
    fn star_gamma_closed_form() {
        for k in 2..=4usize {
            let prior = star_prior(k);
            let f = star_objective();
            let report = gamma_adaptive(&f, &prior, &empty_query(k), DEFAULT_CAP).unwrap();
            let expected = (k + 1) as f64 / (2 * k) as f64;
            assert!(
                (report.value - expected).abs() < 1e-9,
                "k={k}: {} vs {expected}",
                report.value
            );
        }
    }

    #[test]
    fn budget_one_is_always_one() {
        let prior = star_prior(3);
        let f = star_objective();
        let report = gamma_adaptive(&f, &prior, &empty_query(1), DEFAULT_CAP).unwrap();
        assert!((report.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_matches_enumeration_oracle() {
        let prior = star_prior(2);
        let f = star_objective();
        for k in 1..=2 {
            let report = gamma_adaptive(&f, &prior, &empty_query(k), DEFAULT_CAP).unwrap();
            let oracle = min_ratio_by_enumeration(&f, &prior, &PartialRealization::empty(), k);
            assert!(
                (report.value - oracle).abs() < 1e-9,
                "k={k}: {} vs {oracle}",
                report.value
            );
        }

        let (f, prior) = synergy_instance();
        let report = gamma_adaptive(&f, &prior, &empty_query(2), DEFAULT_CAP).unwrap();
        let oracle = min_ratio_by_enumeration(&f, &prior, &PartialRealization::empty(), 2);
        assert!((report.value - oracle).abs() < 1e-9);
        assert!(report.value.abs() < 1e-12);
    }

    #[test]
    fn gamma_monotone_in_budget() {
        let prior = star_prior(3);
        let f = star_objective();
        let mut last = f64::INFINITY;
        for k in 1..=3 {
            let report = gamma_adaptive(&f, &prior, &empty_query(k), DEFAULT_CAP).unwrap();
            assert!(report.value <= last + 1e-12);
            last = report.value;
        }
    }

    #[test]
    fn gamma_level_monotone_in_level() {
        let prior = star_prior(3);
        let f = star_objective();
        let mut last = f64::INFINITY;
        for ell in 0..=2 {
            let report = gamma_level(&f, &prior, ell, 2, DEFAULT_CAP).unwrap();
            assert!(report.value <= last + 1e-12);
            last = report.value;
        }
    }

    #[test]
    fn gamma_level_zero_matches_empty_history() {
        let prior = star_prior(3);
        let f = star_objective();
        let level = gamma_level(&f, &prior, 0, 2, DEFAULT_CAP).unwrap();
        let point = gamma_adaptive(&f, &prior, &empty_query(2), DEFAULT_CAP).unwrap();
        assert!((level.value - point.value).abs() < 1e-12);
    }

    #[test]
    fn prop_32_both_directions() {
        // Modular instance: adaptive submodular and gamma = 1 everywhere.
        let (f, prior) = modular_instance(3);
        assert!(check_adaptive_submodular(&f, &prior, DEFAULT_CAP)
            .unwrap()
            .holds);
        for k in 1..=3 {
            let report = gamma_level(&f, &prior, 3, k, DEFAULT_CAP).unwrap();
            assert!(
                (report.value - 1.0).abs() < 1e-9,
                "k={k}: {}",
                report.value
            );
        }

        // Star instance: not adaptive submodular and gamma < 1 somewhere.
        let prior = star_prior(3);
        let f = star_objective();
        assert!(!check_adaptive_submodular(&f, &prior, DEFAULT_CAP)
            .unwrap()
            .holds);
        let report = gamma_level(&f, &prior, 3, 2, DEFAULT_CAP).unwrap();
        assert!(report.value < 1.0 - 1e-9);
    }

    #[test]
    fn ratio_witness_reproduces_value() {
        let prior = star_prior(3);
        let f = star_objective();
        let report = gamma_adaptive(&f, &prior, &empty_query(3), DEFAULT_CAP).unwrap();
        let Witness::RatioPolicy {
            psi,
            tree,
            numerator,
            denominator,
        } = &report.witness
        else {
            panic!("wrong witness kind");
        };
        let (num, den) = ratio_of_policy(&f, &prior, psi, tree).unwrap();
        assert!((num - numerator).abs() < 1e-12);
        assert!((den - denominator).abs() < 1e-12);
        assert!((report.value - num / den).abs() < 1e-12);
    }

    #[test]
    fn policy_count_height_one() {
        let (_, prior) = modular_instance(3);
        let trees = enumerate_policies(&prior, &PartialRealization::empty(), 1, 100_000).unwrap();
        assert_eq!(trees.len(), 4);
    }

    #[test]
    fn nonadaptive_modular_ratios_are_one() {
        let weights = [0.5, 1.0, 2.0];
        let g = move |s: ElementSet| s.iter().map(|v| weights[v]).sum::<f64>();
        let gamma = gamma_nonadaptive(g, 3, ElementSet::from_iter(0..3), 2, DEFAULT_CAP).unwrap();
        assert!((gamma.value - 1.0).abs() < 1e-12);
        let beta = beta_nonadaptive(g, 3, ElementSet::from_iter(0..3), 2, DEFAULT_CAP).unwrap();
        assert!((beta.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nonadaptive_coverage_gamma_is_one() {
        // Coverage of {0,1}, {1,2}, {2}: submodular, so the ratio is 1.
        let sets = [0b011u32, 0b110, 0b100];
        let g = move |s: ElementSet| {
            let mut covered = 0u32;
            for v in s.iter() {
                covered |= sets[v];
            }
            covered.count_ones() as f64
        };
        let gamma = gamma_nonadaptive(g, 3, ElementSet::from_iter(0..3), 3, DEFAULT_CAP).unwrap();
        assert!((gamma.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_budget_one_is_one() {
        let sets = [0b011u32, 0b110, 0b100];
        let g = move |s: ElementSet| {
            let mut covered = 0u32;
            for v in s.iter() {
                covered |= sets[v];
            }
            covered.count_ones() as f64
        };
        let beta = beta_nonadaptive(g, 3, ElementSet::from_iter(0..3), 1, DEFAULT_CAP).unwrap();
        assert!((beta.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_star_star_instance() {
        for k in 2..=4usize {
            let prior = star_prior(k);
            let f = star_objective();
            let report = zeta_star(&f, &prior, DEFAULT_CAP).unwrap();
            assert!(
                (report.value - k as f64).abs() < 1e-9,
                "k={k}: {}",
                report.value
            );
        }
    }

    #[test]
    fn zeta_star_modular_is_one() {
        let (f, prior) = modular_instance(3);
        let report = zeta_star(&f, &prior, DEFAULT_CAP).unwrap();
        assert!((report.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeta_star_infinite_on_synergy() {
        let (f, prior) = synergy_instance();
        let report = zeta_star(&f, &prior, DEFAULT_CAP).unwrap();
        assert!(report.value.is_infinite());
    }

    #[test]
    fn gap_deterministic_prior_is_one() {
        let space = StateSpace::uniform(3, 2).unwrap();
        let support = vec![(Realization::new(vec![1, 0, 1]), 1.0)];
        let prior = TabularPrior::new(space, support).unwrap();
        let f = |set: ElementSet, phi: &Realization| {
            set.iter().map(|v| phi.state(v) as f64).sum::<f64>()
        };
        let report = adaptivity_gap_exact(&f, &prior, 2, DEFAULT_CAP).unwrap();
        assert!((report.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gap_star_bounds() {
        let prior = star_prior(2);
        let f = star_objective();
        let report = adaptivity_gap_exact(&f, &prior, 2, DEFAULT_CAP).unwrap();
        assert!(report.value >= 0.75 - 1e-9);
        assert!(report.value <= 1.0 + 1e-12);
    }

    #[test]
    fn gap_bound_holds_on_star() {
        let prior = star_prior(2);
        let f = star_objective();
        let report = verify_gap_bound(&f, &prior, 2, DEFAULT_CAP).unwrap();
        assert!(report.holds);
        assert!(report.gap.value >= report.beta.value * report.gamma.value - 1e-9);
    }

    #[test]
    fn zeta_vs_gamma_star_separation() {
        let prior = star_prior(3);
        let f = star_objective();
        let report = verify_zeta_vs_gamma(&f, &prior, 3, DEFAULT_CAP).unwrap();
        assert!(report.holds);
        assert!((1.0 / report.zeta.value - 1.0 / 3.0).abs() < 1e-9);
        assert!(report.min_gamma.value >= 2.0 / 3.0 - 1e-9);
    }

    #[test]
    fn budget_cap_fires() {
        let prior = star_prior(4);
        let f = star_objective();
        let err = gamma_adaptive(&f, &prior, &empty_query(4), 3).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { cap: 3 }));
    }

    #[test]
    fn theorem_41_greedy_bound() {
        use crate::core::avg_value;
        use crate::policies::adaptive_greedy_policy;
        for k in 2..=3usize {
            let prior = star_prior(k);
            let f = star_objective();
            for ell in 1..=k {
                let gamma = gamma_level(&f, &prior, ell, k, DEFAULT_CAP).unwrap().value;
                let greedy = adaptive_greedy_policy(&f, &prior, ell).unwrap();
                let greedy_value = avg_value(&f, &prior, &greedy).unwrap().value;
                let (_, opt) = optimal_policy_exhaustive(&f, &prior, k, DEFAULT_CAP).unwrap();
                let bound = (1.0 - (-gamma * ell as f64 / k as f64).exp()) * opt;
                assert!(
                    greedy_value >= bound - 1e-9,
                    "k={k} ell={ell}: {greedy_value} < {bound}"
                );
            }
        }
    }
}
