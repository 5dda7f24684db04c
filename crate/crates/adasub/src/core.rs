//! Ground-set/realization/policy kernel and exact expectation operators
//! over tabular priors.
//!
//! A ground set of `n` elements, each with a finite state space. A
//! `Realization` assigns every element a state; a `TabularPrior` is an
//! explicit distribution over realizations and is the substrate for all
//! exact oracles. Expected marginal gains of elements, sets and policy
//! trees are computed by direct summation over the conditioned support,
//! always accumulating left to right in the stored support order so that
//! results are reproducible.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance on probabilities.
pub const PROB_TOL: f64 = 1e-12;
/// Relative tolerance on objective values.
pub const VALUE_TOL: f64 = 1e-9;

/// A subset of the ground set, stored as a bitmask. The tabular path is
/// limited to ground sets of at most 64 elements, which is far beyond
/// what exhaustive enumeration can handle anyway.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ElementSet(pub u64);

impl ElementSet {
    pub const EMPTY: ElementSet = ElementSet(0);

    pub fn singleton(v: usize) -> Self {
        ElementSet(1u64 << v)
    }

    pub fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = 0u64;
        for v in iter {
            s |= 1 << v;
        }
        ElementSet(s)
    }

    pub fn contains(&self, v: usize) -> bool {
        v < 64 && self.0 >> v & 1 == 1
    }

    pub fn insert(&mut self, v: usize) {
        assert!(v < 64, "ElementSet is limited to 64 elements");
        self.0 |= 1 << v;
    }

    pub fn union(&self, other: ElementSet) -> ElementSet {
        ElementSet(self.0 | other.0)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.0;
        (0..64).filter(move |v| bits >> v & 1 == 1)
    }
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Per-element finite state spaces; state codes are dense `0..n_states`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    sizes: Vec<u32>,
}

impl StateSpace {
    pub fn new(sizes: Vec<u32>) -> Result<Self> {
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParams(
                "every element needs at least one state".into(),
            ));
        }
        if sizes.len() > 64 {
            return Err(Error::InvalidParams(
                "tabular ground sets are limited to 64 elements".into(),
            ));
        }
        Ok(StateSpace { sizes })
    }

    /// Uniform state count for all `n` elements.
    pub fn uniform(n: usize, states: u32) -> Result<Self> {
        Self::new(vec![states; n])
    }

    pub fn n_elements(&self) -> usize {
        self.sizes.len()
    }

    pub fn n_states(&self, v: usize) -> u32 {
        self.sizes[v]
    }
}

/// A total map from elements to state codes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Realization {
    pub states: Vec<u32>,
}

impl Realization {
    pub fn new(states: Vec<u32>) -> Self {
        Realization { states }
    }

    pub fn state(&self, v: usize) -> u32 {
        self.states[v]
    }
}

/// The ordered observation history of a policy: (element, state) pairs in
/// selection order. No element appears twice.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PartialRealization {
    entries: Vec<(usize, u32)>,
    dom: ElementSet,
}

impl PartialRealization {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<(usize, u32)>) -> Result<Self> {
        let mut psi = PartialRealization::empty();
        for (v, y) in entries {
            psi.push(v, y)?;
        }
        Ok(psi)
    }

    pub fn push(&mut self, v: usize, y: u32) -> Result<()> {
        if self.contains(v) {
            return Err(Error::ElementReuse(v));
        }
        self.entries.push((v, y));
        if v < 64 {
            self.dom.insert(v);
        }
        Ok(())
    }

    /// Whether `v` has been observed. Unlike `dom()`, valid for element
    /// indices of any size.
    pub fn contains(&self, v: usize) -> bool {
        if v < 64 {
            self.dom.contains(v)
        } else {
            self.entries.iter().any(|&(e, _)| e == v)
        }
    }

    /// Extended copy with one more observation.
    pub fn extended(&self, v: usize, y: u32) -> Result<Self> {
        let mut next = self.clone();
        next.push(v, y)?;
        Ok(next)
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Observed elements as a bitmask; covers element indices below 64
    /// only. Use `contains` when the ground set may be larger.
    pub fn dom(&self) -> ElementSet {
        self.dom
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Observed state of `v`, if present.
    pub fn state_of(&self, v: usize) -> Option<u32> {
        self.entries.iter().find(|&&(e, _)| e == v).map(|&(_, y)| y)
    }

    /// Is `phi` consistent with every observation in `self`?
    pub fn consistent_with(&self, phi: &Realization) -> bool {
        self.entries.iter().all(|&(v, y)| phi.state(v) == y)
    }

    /// Entries as a sorted set, usable as a memoization key. Valid because
    /// posteriors and gains depend on the history only through its set of
    /// (element, state) pairs.
    pub fn sorted_key(&self) -> Vec<(usize, u32)> {
        let mut key = self.entries.clone();
        key.sort_unstable();
        key
    }

    /// All sub-histories (subsets of the entry set, in subset-mask order).
    pub fn subsets(&self) -> Vec<PartialRealization> {
        let n = self.entries.len();
        (0..1u64 << n)
            .map(|mask| {
                let entries: Vec<_> = self
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &e)| e)
                    .collect();
                PartialRealization::from_entries(entries)
                    .expect("subset of a valid history is valid")
            })
            .collect()
    }
}

/// Explicit finite joint distribution over realizations.
#[derive(Clone, Debug)]
pub struct TabularPrior {
    space: StateSpace,
    support: Vec<(Realization, f64)>,
}

impl TabularPrior {
    pub fn new(space: StateSpace, support: Vec<(Realization, f64)>) -> Result<Self> {
        let mut total = 0.0;
        let mut seen = std::collections::HashSet::new();
        for (phi, p) in &support {
            if phi.states.len() != space.n_elements() {
                return Err(Error::InvalidParams(
                    "realization length does not match the ground set".into(),
                ));
            }
            for (v, &y) in phi.states.iter().enumerate() {
                if y >= space.n_states(v) {
                    return Err(Error::InvalidParams(format!(
                        "state {y} out of range for element {v}"
                    )));
                }
            }
            if *p < 0.0 {
                return Err(Error::InvalidParams("negative probability".into()));
            }
            if !seen.insert(phi.states.clone()) {
                return Err(Error::InvalidParams(
                    "duplicate realization in support".into(),
                ));
            }
            total += *p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidParams(format!(
                "support probabilities sum to {total}, expected 1"
            )));
        }
        Ok(TabularPrior { space, support })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_elements(&self) -> usize {
        self.space.n_elements()
    }

    pub fn support(&self) -> &[(Realization, f64)] {
        &self.support
    }

    /// Probability mass consistent with `psi`.
    pub fn mass_of(&self, psi: &PartialRealization) -> f64 {
        self.support
            .iter()
            .filter(|(phi, _)| psi.consistent_with(phi))
            .map(|(_, p)| *p)
            .sum()
    }

    /// Posterior probability of each state of `v` given `psi`.
    /// Errors when `psi` has zero mass.
    pub fn state_posterior(&self, v: usize, psi: &PartialRealization) -> Result<Vec<f64>> {
        let mut probs = vec![0.0; self.space.n_states(v) as usize];
        let mut mass = 0.0;
        for (phi, p) in &self.support {
            if psi.consistent_with(phi) {
                probs[phi.state(v) as usize] += *p;
                mass += *p;
            }
        }
        if mass <= PROB_TOL {
            return Err(Error::InconsistentObservation(format!(
                "observation history has zero probability: {:?}",
                psi.entries()
            )));
        }
        for q in &mut probs {
            *q /= mass;
        }
        Ok(probs)
    }
}

/// The objective contract: `f(S, phi)` for a set of selected elements and
/// a full realization. Guarantee-checking operations additionally require
/// normalization (`f(empty, .) = 0`) and nonnegativity; raw evaluation
/// accepts any finite `f`.
pub trait Objective: Sync {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64;
}

impl<F: Fn(ElementSet, &Realization) -> f64 + Sync> Objective for F {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        self(set, phi)
    }
}

/// An expectation computed by an oracle. `sample_count == 0` means the
/// value is exact (a full sum over a tabular or finite support).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedGain {
    pub value: f64,
    pub sample_count: u64,
}

impl ExpectedGain {
    pub fn exact(value: f64) -> Self {
        ExpectedGain {
            value,
            sample_count: 0,
        }
    }
}

/// A deterministic decision tree: each node names the element selected
/// next and branches on its observed state. Elements never repeat on a
/// root-to-node path.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyTree {
    Leaf,
    Node {
        element: usize,
        children: BTreeMap<u32, PolicyTree>,
    },
}

impl PolicyTree {
    pub fn leaf() -> Self {
        PolicyTree::Leaf
    }

    pub fn node(element: usize, children: BTreeMap<u32, PolicyTree>) -> Self {
        PolicyTree::Node { element, children }
    }

    /// Single selection of `v`, stopping afterwards whatever is observed.
    pub fn singleton(v: usize, n_states: u32) -> Self {
        let children = (0..n_states).map(|y| (y, PolicyTree::Leaf)).collect();
        PolicyTree::Node {
            element: v,
            children,
        }
    }

    /// A chain that selects `elements` in order regardless of observations.
    pub fn chain(elements: &[usize], space: &StateSpace) -> Self {
        match elements.split_first() {
            None => PolicyTree::Leaf,
            Some((&v, rest)) => {
                let children = (0..space.n_states(v))
                    .map(|y| (y, PolicyTree::chain(rest, space)))
                    .collect();
                PolicyTree::Node {
                    element: v,
                    children,
                }
            }
        }
    }

    pub fn height(&self) -> usize {
        match self {
            PolicyTree::Leaf => 0,
            PolicyTree::Node { children, .. } => {
                1 + children.values().map(|c| c.height()).max().unwrap_or(0)
            }
        }
    }

    /// Every element appearing anywhere in the tree.
    pub fn elements(&self) -> ElementSet {
        match self {
            PolicyTree::Leaf => ElementSet::EMPTY,
            PolicyTree::Node { element, children } => {
                let mut s = ElementSet::singleton(*element);
                for c in children.values() {
                    s = s.union(c.elements());
                }
                s
            }
        }
    }
}

/// Restricts the support to realizations consistent with `psi` and
/// renormalizes.
pub fn condition(prior: &TabularPrior, psi: &PartialRealization) -> Result<TabularPrior> {
    let mut support: Vec<_> = prior
        .support
        .iter()
        .filter(|(phi, _)| psi.consistent_with(phi))
        .cloned()
        .collect();
    let mass: f64 = support.iter().map(|(_, p)| *p).sum();
    if mass <= PROB_TOL {
        return Err(Error::InconsistentObservation(format!(
            "observation history has zero probability: {:?}",
            psi.entries()
        )));
    }
    for (_, p) in &mut support {
        *p /= mass;
    }
    Ok(TabularPrior {
        space: prior.space.clone(),
        support,
    })
}

/// Expected marginal gain of a single element:
/// `E[f(dom(psi) + v, Phi) - f(dom(psi), Phi) | Phi ~ psi]`.
pub fn gain_element(
    f: &dyn Objective,
    prior: &TabularPrior,
    v: usize,
    psi: &PartialRealization,
) -> Result<ExpectedGain> {
    gain_set(f, prior, ElementSet::singleton(v), psi)
}

/// Expected marginal gain of a set of elements.
pub fn gain_set(
    f: &dyn Objective,
    prior: &TabularPrior,
    set: ElementSet,
    psi: &PartialRealization,
) -> Result<ExpectedGain> {
    let cond = condition(prior, psi)?;
    let dom = psi.dom();
    let with = dom.union(set);
    let mut acc = 0.0;
    for (phi, p) in cond.support() {
        acc += p * (f.value(with, phi) - f.value(dom, phi));
    }
    Ok(ExpectedGain::exact(acc))
}

/// Runs a policy against a fixed realization. Returns the selected set and
/// the trace of observation histories: `trace[i]` is the history observed
/// just before the (i+1)-th selection, `trace.last()` the final history.
pub fn run_policy(
    pi: &PolicyTree,
    phi: &Realization,
) -> Result<(ElementSet, Vec<PartialRealization>)> {
    let mut trace = vec![PartialRealization::empty()];
    let mut selected = ElementSet::EMPTY;
    let mut node = pi;
    while let PolicyTree::Node { element, children } = node {
        let v = *element;
        if selected.contains(v) {
            return Err(Error::ElementReuse(v));
        }
        selected.insert(v);
        let y = phi.state(v);
        let next = trace
            .last()
            .expect("trace starts non-empty")
            .extended(v, y)?;
        trace.push(next);
        node = children.get(&y).ok_or(Error::MissingBranch {
            element: v,
            state: y,
        })?;
    }
    Ok((selected, trace))
}

/// Selected set only, treating a missing branch for a realized state as a
/// stop. Used by evaluators that tolerate partially specified trees.
pub fn run_policy_lenient(pi: &PolicyTree, phi: &Realization) -> ElementSet {
    let mut selected = ElementSet::EMPTY;
    let mut node = pi;
    while let PolicyTree::Node { element, children } = node {
        if selected.contains(*element) {
            break;
        }
        selected.insert(*element);
        match children.get(&phi.state(*element)) {
            Some(child) => node = child,
            None => break,
        }
    }
    selected
}

/// Expected marginal gain of a policy:
/// `E[f(dom(psi) + E(pi, Phi), Phi) - f(dom(psi), Phi) | Phi ~ psi]`.
pub fn gain_policy(
    f: &dyn Objective,
    prior: &TabularPrior,
    pi: &PolicyTree,
    psi: &PartialRealization,
) -> Result<ExpectedGain> {
    if let Some(v) = pi.elements().iter().find(|&v| psi.dom().contains(v)) {
        return Err(Error::ElementReuse(v));
    }
    let cond = condition(prior, psi)?;
    let dom = psi.dom();
    let mut acc = 0.0;
    for (phi, p) in cond.support() {
        let (selected, _) = run_policy(pi, phi)?;
        acc += p * (f.value(dom.union(selected), phi) - f.value(dom, phi));
    }
    Ok(ExpectedGain::exact(acc))
}

/// `f_avg(pi) = E_Phi[f(E(pi, Phi), Phi)]`.
pub fn avg_value(
    f: &dyn Objective,
    prior: &TabularPrior,
    pi: &PolicyTree,
) -> Result<ExpectedGain> {
    let mut acc = 0.0;
    for (phi, p) in prior.support() {
        let (selected, _) = run_policy(pi, phi)?;
        acc += p * f.value(selected, phi);
    }
    Ok(ExpectedGain::exact(acc))
}

/// Concatenation `pi_second @ pi_first`: run `pi_first`, then `pi_second`
/// as if from scratch. The selected set is the union; when `pi_second`
/// names an element already observed on the current path, the observation
/// is reused and no new selection happens.
pub fn concat(pi_first: &PolicyTree, pi_second: &PolicyTree) -> PolicyTree {
    fn attach(node: &PolicyTree, second: &PolicyTree, seen: &mut Vec<(usize, u32)>) -> PolicyTree {
        match node {
            PolicyTree::Leaf => resume(second, seen),
            PolicyTree::Node { element, children } => {
                let mut new_children = BTreeMap::new();
                for (&y, child) in children {
                    seen.push((*element, y));
                    new_children.insert(y, attach(child, second, seen));
                    seen.pop();
                }
                PolicyTree::Node {
                    element: *element,
                    children: new_children,
                }
            }
        }
    }

    // Replays `second` against the states already observed on the path:
    // known elements are skipped by descending into the matching branch.
    fn resume(second: &PolicyTree, seen: &mut Vec<(usize, u32)>) -> PolicyTree {
        match second {
            PolicyTree::Leaf => PolicyTree::Leaf,
            PolicyTree::Node { element, children } => {
                if let Some(&(_, y)) = seen.iter().find(|&&(v, _)| v == *element) {
                    match children.get(&y) {
                        Some(child) => resume(child, seen),
                        None => PolicyTree::Leaf,
                    }
                } else {
                    let mut new_children = BTreeMap::new();
                    for (&y, child) in children {
                        seen.push((*element, y));
                        new_children.insert(y, resume(child, seen));
                        seen.pop();
                    }
                    PolicyTree::Node {
                        element: *element,
                        children: new_children,
                    }
                }
            }
        }
    }

    attach(pi_first, pi_second, &mut Vec::new())
}

/// Outcome of an exhaustive monotonicity or submodularity check.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub holds: bool,
    /// For monotonicity: the violating `(psi, v, gain)`.
    /// For submodularity: `(psi_sub, v, shortfall)` with `psi` the superset
    /// stored in `witness_superset`.
    pub witness: Option<(PartialRealization, usize, f64)>,
    pub witness_superset: Option<PartialRealization>,
}

impl CheckReport {
    fn ok() -> Self {
        CheckReport {
            holds: true,
            witness: None,
            witness_superset: None,
        }
    }
}

/// Enumerates every positive-probability observation history (as a set;
/// order does not affect posteriors) up to size `max_len`, counting work
/// against `cap`.
pub fn enumerate_histories(
    prior: &TabularPrior,
    max_len: usize,
    cap: u64,
) -> Result<Vec<PartialRealization>> {
    let n = prior.n_elements();
    let mut out = vec![PartialRealization::empty()];
    let mut visited: u64 = 1;
    // Grow histories one element at a time, always appending an element
    // with a larger index than any already present so each set appears once.
    let mut frontier = vec![PartialRealization::empty()];
    for _ in 0..max_len {
        let mut next_frontier = Vec::new();
        for psi in &frontier {
            let start = psi
                .entries()
                .iter()
                .map(|&(v, _)| v + 1)
                .max()
                .unwrap_or(0);
            for v in start..n {
                let probs = prior.state_posterior(v, psi)?;
                for (y, &q) in probs.iter().enumerate() {
                    if q <= PROB_TOL {
                        continue;
                    }
                    visited += 1;
                    if visited > cap {
                        return Err(Error::BudgetExceeded { cap });
                    }
                    let ext = psi.extended(v, y as u32)?;
                    out.push(ext.clone());
                    next_frontier.push(ext);
                }
            }
        }
        frontier = next_frontier;
    }
    Ok(out)
}

/// Exhaustive adaptive monotonicity check: `Delta(v|psi) >= -PROB_TOL` for
/// every reachable history `psi` and `v` outside its domain.
pub fn check_adaptive_monotone(
    f: &dyn Objective,
    prior: &TabularPrior,
    cap: u64,
) -> Result<CheckReport> {
    let n = prior.n_elements();
    for psi in enumerate_histories(prior, n, cap)? {
        for v in 0..n {
            if psi.dom().contains(v) {
                continue;
            }
            let g = gain_element(f, prior, v, &psi)?.value;
            if g < -PROB_TOL {
                return Ok(CheckReport {
                    holds: false,
                    witness: Some((psi, v, g)),
                    witness_superset: None,
                });
            }
        }
    }
    Ok(CheckReport::ok())
}

/// Exhaustive adaptive submodularity check:
/// `Delta(v|psi) >= Delta(v|psi') - PROB_TOL` for all `psi <= psi'` and
/// `v` outside `dom(psi')`.
pub fn check_adaptive_submodular(
    f: &dyn Objective,
    prior: &TabularPrior,
    cap: u64,
) -> Result<CheckReport> {
    let n = prior.n_elements();
    for psi_sup in enumerate_histories(prior, n, cap)? {
        // Any sub-history of a positive-probability history is itself
        // positive-probability, so no extra mass check is needed.
        for psi_sub in psi_sup.subsets() {
            for v in 0..n {
                if psi_sup.dom().contains(v) {
                    continue;
                }
                let g_sub = gain_element(f, prior, v, &psi_sub)?.value;
                let g_sup = gain_element(f, prior, v, &psi_sup)?.value;
                if g_sub < g_sup - PROB_TOL {
                    return Ok(CheckReport {
                        holds: false,
                        witness: Some((psi_sub, v, g_sup - g_sub)),
                        witness_superset: Some(psi_sup),
                    });
                }
            }
        }
    }
    Ok(CheckReport::ok())
}
