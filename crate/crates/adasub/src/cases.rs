//! Closed-form constructions: instances with known ratios, gaps and
//! counterexamples, used as oracles by the verification drivers.

use std::collections::BTreeMap;

use crate::core::{
    ElementSet, Objective, PolicyTree, Realization, StateSpace, TabularPrior, PROB_TOL,
};
use crate::error::{Error, Result};
use crate::features::{ColumnPrior, FeatureInstance};

/// Parameters for the tight adaptivity-gap family: one pivot element whose
/// state picks a rewarded group of size `k` out of `m` groups.
#[derive(Clone, Copy, Debug)]
pub struct TightGapParams {
    pub k: usize,
    pub a: f64,
    pub m: usize,
    pub p: f64,
}

/// Objective of the tight-gap family. With the pivot selected, only the
/// group named by its state pays; without it, every extra element pays the
/// averaged rate `a * p`.
#[derive(Clone, Debug)]
pub struct TightGapObjective {
    k: usize,
    a: f64,
    p: f64,
}

impl Objective for TightGapObjective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        if set.contains(0) {
            let y = phi.state(0) as usize;
            let hits = if y == 0 {
                0
            } else {
                set.iter().filter(|&v| v != 0 && (v - 1) / self.k + 1 == y).count()
            };
            1.0 + self.a * hits as f64
        } else {
            1.0 + self.a * self.p * (set.len() - 1) as f64
        }
    }
}

#[derive(Clone, Debug)]
pub struct TightGapCase {
    pub prior: TabularPrior,
    pub objective: TightGapObjective,
    pub beta: f64,
    pub gamma: f64,
    pub gap: f64,
}

/// Ground set `{pivot} + m` groups of `k` elements; the pivot's state is
/// group `y` with probability `p = 1/m` each. The closed forms require the
/// uniform pivot: with `p < 1/m` a policy that stops on the zero state
/// achieves a strictly smaller ratio than `k / (1 + (k-1)apm)`, so such
/// parameters are rejected, as are `a < 1` (ratio above 1) and `a > m`
/// (supermodularity form above 1).
pub fn build_tight_gap(params: &TightGapParams) -> Result<TightGapCase> {
    let TightGapParams { k, a, m, p } = *params;
    if k < 1 || m < 1 || a < 0.0 || p < 0.0 {
        return Err(Error::InvalidParams("k, m >= 1 and a, p >= 0 required".into()));
    }
    if (p * m as f64 - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidParams(format!(
            "p = {p} must equal 1/m; a non-uniform pivot breaks the closed forms"
        )));
    }
    if a * p * (m as f64) < 1.0 - PROB_TOL {
        return Err(Error::InvalidParams(format!(
            "a*p*m = {} < 1 puts the ratio above 1",
            a * p * (m as f64)
        )));
    }
    if a * p > 1.0 + PROB_TOL {
        return Err(Error::InvalidParams(format!(
            "a*p = {} > 1 breaks the supermodularity closed form",
            a * p
        )));
    }
    let n = 1 + k * m;
    let mut sizes = vec![1u32; n];
    sizes[0] = m as u32 + 1;
    let space = StateSpace::new(sizes)?;
    let mut support = Vec::new();
    let rest = 1.0 - p * m as f64;
    if rest > PROB_TOL {
        support.push((Realization::new(vec![0; n]), rest));
    }
    for y in 1..=m {
        if p > PROB_TOL {
            let mut states = vec![0u32; n];
            states[0] = y as u32;
            support.push((Realization::new(states), p));
        }
    }
    let prior = TabularPrior::new(space, support)?;
    let km1 = (k - 1) as f64;
    Ok(TightGapCase {
        prior,
        objective: TightGapObjective { k, a, p },
        beta: (1.0 + km1 * a * p) / k as f64,
        gamma: k as f64 / (1.0 + km1 * a * p * m as f64),
        gap: (1.0 + km1 * a * p) / (1.0 + km1 * a * p * m as f64),
    })
}

/// Parameters for the approximate-adaptive-submodularity counterexample:
/// `k` safe elements worth `1 + epsilon`, one pivot with `m` states, and
/// `(k-1) * m` state-specific elements worth `m` when they match.
#[derive(Clone, Copy, Debug)]
pub struct KusnerParams {
    pub k: usize,
    pub m: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct KusnerObjective {
    n: usize,
    k: usize,
    m: usize,
    epsilon: f64,
}

impl Objective for KusnerObjective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        let mut acc = 0.0;
        if set.contains(0) {
            acc += 1.0;
        }
        for v in 1..=self.k {
            if set.contains(v) {
                acc += 1.0 + self.epsilon;
            }
        }
        for v in self.k + 1..self.n {
            if set.contains(v) && phi.state(v) == 1 {
                acc += self.m as f64;
            }
        }
        acc
    }
}

/// Element layout: `0` is the pivot, `1..=k` the safe elements, then the
/// state-specific element for pair `(i, y)` sits at `k + 1 + (i-1)*m + y`.
pub fn build_kusner(params: &KusnerParams) -> Result<(TabularPrior, KusnerObjective)> {
    let KusnerParams { k, m, epsilon } = *params;
    if k < 2 || m < 2 || epsilon <= 0.0 {
        return Err(Error::InvalidParams("k >= 2, m >= 2 and epsilon > 0 required".into()));
    }
    let n = 1 + k + (k - 1) * m;
    let mut sizes = vec![1u32; n];
    sizes[0] = m as u32;
    for v in k + 1..n {
        sizes[v] = 2;
    }
    let space = StateSpace::new(sizes)?;
    let mut support = Vec::with_capacity(m);
    for y in 0..m {
        let mut states = vec![0u32; n];
        states[0] = y as u32;
        for i in 1..k {
            states[k + (i - 1) * m + y + 1] = 1;
        }
        support.push((Realization::new(states), 1.0 / m as f64));
    }
    let prior = TabularPrior::new(space, support)?;
    Ok((prior, KusnerObjective { n, k, m, epsilon }))
}

/// Parameters for the non-bipartite chain: a head `u_0`, a path
/// `u_0 -> u_1 -> ... -> u_ell`, and a side element `v_i` into each `u_i`.
/// Exactly one in-edge of each `u_i` is alive: the side edge with
/// probability `epsilon`, the path edge otherwise.
#[derive(Clone, Copy, Debug)]
pub struct ChainParams {
    pub ell: usize,
    pub epsilon: f64,
}

/// Chain objective: activated path vertices plus selected side elements.
/// States encode full-adoption feedback: the head reveals how far the path
/// burns on its own, a side element reveals whether its edge is dead (`0`)
/// or how many path vertices it ignites (`e >= 1`).
#[derive(Clone, Debug)]
pub struct ChainObjective {
    ell: usize,
}

impl Objective for ChainObjective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        let mut count = 0usize;
        let mut active = set.contains(0);
        if active {
            count += 1;
        }
        for i in 1..=self.ell {
            let side_alive = phi.state(i) >= 1;
            if set.contains(i) {
                count += 1;
            }
            active = (active && !side_alive) || (set.contains(i) && side_alive);
            if active {
                count += 1;
            }
        }
        count as f64
    }
}

#[derive(Clone, Debug)]
pub struct ChainCase {
    pub prior: TabularPrior,
    pub objective: ChainObjective,
    /// Select the head, then repeatedly the side element just past the
    /// activated prefix until the whole path burns.
    pub policy: PolicyTree,
    /// `(1/epsilon + 2*epsilon*ell) / (ell + epsilon*ell + 1)`, an upper
    /// bound on the ratio certified by `policy`.
    pub bound: f64,
}

const CHAIN_MAX_ELL: usize = 20;

pub fn build_chain(params: &ChainParams) -> Result<ChainCase> {
    let ChainParams { ell, epsilon } = *params;
    if ell < 1 || !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams("ell >= 1 and epsilon in (0,1) required".into()));
    }
    if ell > CHAIN_MAX_ELL {
        return Err(Error::BudgetExceeded { cap: 1 << CHAIN_MAX_ELL });
    }
    let mut sizes = vec![ell as u32 + 1];
    for i in 1..=ell {
        sizes.push((ell - i + 2) as u32);
    }
    let space = StateSpace::new(sizes)?;
    let mut support = Vec::with_capacity(1 << ell);
    for mask in 0u64..1 << ell {
        let side_alive = |i: usize| mask >> (i - 1) & 1 == 1;
        let mut prob = 1.0;
        for i in 1..=ell {
            prob *= if side_alive(i) { epsilon } else { 1.0 - epsilon };
        }
        if prob <= PROB_TOL {
            continue;
        }
        let mut states = vec![0u32; ell + 1];
        let mut prefix = 0;
        while prefix < ell && !side_alive(prefix + 1) {
            prefix += 1;
        }
        states[0] = prefix as u32;
        for i in 1..=ell {
            if side_alive(i) {
                let mut reach = 1;
                while i + reach <= ell && !side_alive(i + reach) {
                    reach += 1;
                }
                states[i] = reach as u32;
            }
        }
        support.push((Realization::new(states), prob));
    }
    let prior = TabularPrior::new(space, support)?;
    let policy = chain_policy(ell);
    let bound = (1.0 / epsilon + 2.0 * epsilon * ell as f64)
        / (ell as f64 + epsilon * ell as f64 + 1.0);
    Ok(ChainCase {
        prior,
        objective: ChainObjective { ell },
        policy,
        bound,
    })
}

fn chain_policy(ell: usize) -> PolicyTree {
    fn from_prefix(pos: usize, ell: usize) -> PolicyTree {
        if pos == ell {
            return PolicyTree::leaf();
        }
        let mut children = BTreeMap::new();
        children.insert(0, PolicyTree::leaf());
        for reach in 1..=ell - pos {
            children.insert(reach as u32, from_prefix(pos + reach, ell));
        }
        PolicyTree::node(pos + 1, children)
    }
    let mut children = BTreeMap::new();
    for prefix in 0..=ell {
        children.insert(prefix as u32, from_prefix(prefix, ell));
    }
    PolicyTree::node(0, children)
}

/// Two hidden states, three modes, two binary tests: the diagnosis table
/// whose version-space objective admits no finite multiplicative
/// smoothness between nested histories.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosisInstance {
    /// `outcomes[x][q][v]`: `+1` or `-1` outcome of test `v` under state
    /// `x` and mode `q`.
    pub outcomes: [[[i8; 2]; 3]; 2],
}

impl DiagnosisInstance {
    pub fn standard() -> Self {
        DiagnosisInstance {
            outcomes: [
                [[1, 1], [1, -1], [-1, 1]],
                [[1, 1], [1, -1], [-1, -1]],
            ],
        }
    }
}

/// Version-space mass objective: one minus the prior mass of states that
/// some mode reconciles with every observed outcome.
#[derive(Clone, Copy, Debug)]
pub struct DiagnosisObjective {
    instance: DiagnosisInstance,
}

impl Objective for DiagnosisObjective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        let observed = |v: usize| if phi.state(v) == 0 { 1i8 } else { -1 };
        let mut consistent_mass = 0.0;
        for row in &self.instance.outcomes {
            let feasible = row
                .iter()
                .any(|mode| set.iter().all(|v| mode[v] == observed(v)));
            if feasible {
                consistent_mass += 0.5;
            }
        }
        1.0 - consistent_mass
    }
}

/// State `0` encodes outcome `+1`, state `1` outcome `-1`. The six
/// equiprobable `(x, q)` pairs collapse to four outcome realizations.
pub fn build_diagnosis() -> (TabularPrior, DiagnosisObjective) {
    let instance = DiagnosisInstance::standard();
    let space = StateSpace::uniform(2, 2).expect("fixed state space");
    let mut mass: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    for row in &instance.outcomes {
        for mode in row {
            let states: Vec<u32> = mode.iter().map(|&y| if y == 1 { 0 } else { 1 }).collect();
            *mass.entry(states).or_insert(0.0) += 1.0 / 6.0;
        }
    }
    let support = mass
        .into_iter()
        .map(|(states, p)| (Realization::new(states), p))
        .collect();
    let prior = TabularPrior::new(space, support).expect("fixed table is a valid prior");
    (prior, DiagnosisObjective { instance })
}

/// `1^T p - (m/(m-1)) * p^T (1 1^T - I) p` for a sub-probability vector.
/// Nonnegative for every feasible `p`; zero at `p = 1/m * 1`.
pub fn lemma_b2_lhs(p: &[f64]) -> Result<f64> {
    let m = p.len();
    if m < 2 {
        return Err(Error::InvalidInput("need at least two entries".into()));
    }
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InvalidInput("entries must lie in [0, 1]".into()));
    }
    let sum: f64 = p.iter().sum();
    if sum > 1.0 + PROB_TOL {
        return Err(Error::InvalidInput(format!("entries sum to {sum} > 1")));
    }
    let sq: f64 = p.iter().map(|x| x * x).sum();
    Ok(sum - m as f64 / (m as f64 - 1.0) * (sum * sum - sq))
}

/// Deterministic feature instance with columns `e_1`, `(e_1 + e_2)/sqrt(2)`,
/// `e_3, ..., e_n` and response `(0, a, a, ..., a)`: the first element is
/// worthless after `{3..n}` but worth `a^2/2` after `{2..n}`.
pub fn build_f4_instance(n: usize, a: f64) -> Result<FeatureInstance> {
    if n < 3 || a <= 0.0 {
        return Err(Error::InvalidParams("n >= 3 and a > 0 required".into()));
    }
    let basis = |i: usize| {
        let mut column = vec![0.0; n];
        column[i] = 1.0;
        column
    };
    let mut columns = vec![basis(0)];
    let mut mixed = vec![0.0; n];
    mixed[0] = 1.0 / 2f64.sqrt();
    mixed[1] = 1.0 / 2f64.sqrt();
    columns.push(mixed);
    for i in 2..n {
        columns.push(basis(i));
    }
    let mut response = vec![a; n];
    response[0] = 0.0;
    let per_feature = columns.iter().map(|c| vec![(c.clone(), 1.0)]).collect();
    Ok(FeatureInstance {
        n,
        m: n,
        response,
        prior: ColumnPrior::FiniteSupport { per_feature },
        true_support: None,
        true_coeffs: None,
        hidden: Some(columns),
    })
}
