//! Bipartite influence maximization under the triggering model.
//!
//! Sources point at sinks; each sink draws a live subset of its incoming
//! edges from a per-sink distribution, independently across sinks.
//! Selecting a source reveals the states of all its outgoing edges. The
//! objective is the total weight of sinks reachable through a live edge.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{
    ElementSet, ExpectedGain, Objective, PartialRealization, Realization, StateSpace,
    TabularPrior, PROB_TOL,
};
use crate::error::{Error, Result};
use crate::seed::mix;

/// Directed bipartite graph from sources to weighted sinks.
#[derive(Clone, Debug)]
pub struct BipartiteGraph {
    pub n_src: usize,
    pub n_sink: usize,
    edges: Vec<(usize, usize)>,
    pub sink_weights: Vec<f64>,
    out: Vec<Vec<usize>>,
    incoming: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(
        n_src: usize,
        n_sink: usize,
        edges: Vec<(usize, usize)>,
        sink_weights: Vec<f64>,
    ) -> Result<Self> {
        if sink_weights.len() != n_sink {
            return Err(Error::DimensionMismatch(format!(
                "{n_sink} sinks but {} weights",
                sink_weights.len()
            )));
        }
        if sink_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams("sink weights must be finite and >= 0".into()));
        }
        let mut out = vec![Vec::new(); n_src];
        let mut incoming = vec![Vec::new(); n_sink];
        let mut seen = std::collections::HashSet::new();
        for (e, &(v, u)) in edges.iter().enumerate() {
            if v >= n_src || u >= n_sink {
                return Err(Error::InvalidParams(format!(
                    "edge ({v}, {u}) out of range"
                )));
            }
            if !seen.insert((v, u)) {
                return Err(Error::DuplicateEdge { src: v, sink: u });
            }
            out[v].push(e);
            incoming[u].push(e);
        }
        Ok(BipartiteGraph {
            n_src,
            n_sink,
            edges,
            sink_weights,
            out,
            incoming,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Edge ids leaving source `v`, in declaration order. The position of
    /// an edge in this list is its bit in the source's state code.
    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn in_edges(&self, u: usize) -> &[usize] {
        &self.incoming[u]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.out[v].len()
    }

    pub fn in_degree(&self, u: usize) -> usize {
        self.incoming[u].len()
    }
}

/// Per-sink distribution of live incoming-edge subsets.
#[derive(Clone, Debug)]
pub enum EdgeStateModel {
    /// Independent per-edge aliveness.
    IC { q: Vec<f64> },
    /// At most one live in-edge per sink, with exclusive probabilities.
    LT { b: Vec<f64> },
    /// `t` in-edges sampled uniformly with replacement become live.
    ExtendedLT { t: u32 },
    /// Explicit distribution per sink over bitmasks of in-edge positions.
    Triggering { per_sink: Vec<Vec<(u64, f64)>> },
}

#[derive(Clone, Debug)]
pub struct InfluenceInstance {
    pub graph: BipartiteGraph,
    pub model: EdgeStateModel,
}

/// Total weight of sinks reachable from `set` through live edges.
pub fn spread(graph: &BipartiteGraph, set: ElementSet, alive: &[bool]) -> f64 {
    let sources: Vec<usize> = set.iter().collect();
    spread_of(graph, &sources, alive)
}

/// `spread` for an explicit source list; not limited to 64 sources.
pub fn spread_of(graph: &BipartiteGraph, sources: &[usize], alive: &[bool]) -> f64 {
    let mut covered = vec![false; graph.n_sink];
    for &v in sources {
        for &e in graph.out_edges(v) {
            if alive[e] {
                covered[graph.edge(e).1] = true;
            }
        }
    }
    covered
        .iter()
        .zip(&graph.sink_weights)
        .filter(|(c, _)| **c)
        .map(|(_, w)| w)
        .sum()
}

impl InfluenceInstance {
    pub fn new(graph: BipartiteGraph, model: EdgeStateModel) -> Result<Self> {
        match &model {
            EdgeStateModel::IC { q } => {
                if q.len() != graph.n_edges() {
                    return Err(Error::DimensionMismatch("one q per edge required".into()));
                }
                if q.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::InvalidParams("IC probabilities must lie in [0,1]".into()));
                }
            }
            EdgeStateModel::LT { b } => {
                if b.len() != graph.n_edges() {
                    return Err(Error::DimensionMismatch("one b per edge required".into()));
                }
                if b.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(Error::InvalidParams("LT weights must be >= 0".into()));
                }
                for u in 0..graph.n_sink {
                    let total: f64 = graph.in_edges(u).iter().map(|&e| b[e]).sum();
                    if total > 1.0 + PROB_TOL {
                        return Err(Error::InvalidParams(format!(
                            "LT weights at sink {u} sum to {total} > 1"
                        )));
                    }
                }
            }
            EdgeStateModel::ExtendedLT { t } => {
                if *t < 1 {
                    return Err(Error::InvalidParams("extended LT needs t >= 1".into()));
                }
            }
            EdgeStateModel::Triggering { per_sink } => {
                if per_sink.len() != graph.n_sink {
                    return Err(Error::DimensionMismatch(
                        "one distribution per sink required".into(),
                    ));
                }
                for (u, dist) in per_sink.iter().enumerate() {
                    let deg = graph.in_degree(u);
                    let total: f64 = dist.iter().map(|(_, p)| p).sum();
                    if (total - 1.0).abs() > 1e-9 {
                        return Err(Error::InvalidParams(format!(
                            "triggering distribution at sink {u} sums to {total}"
                        )));
                    }
                    if dist
                        .iter()
                        .any(|&(mask, p)| p < 0.0 || (deg < 64 && mask >> deg != 0))
                    {
                        return Err(Error::InvalidParams(format!(
                            "bad triggering entry at sink {u}"
                        )));
                    }
                }
            }
        }
        Ok(InfluenceInstance { graph, model })
    }

    /// Expands a history over sources into per-edge observations.
    pub fn decode_observations(&self, psi: &PartialRealization) -> Result<Vec<Option<bool>>> {
        let mut obs = vec![None; self.graph.n_edges()];
        for &(v, state) in psi.entries() {
            if v >= self.graph.n_src {
                return Err(Error::InvalidInput(format!("source {v} out of range")));
            }
            for (pos, &e) in self.graph.out_edges(v).iter().enumerate() {
                obs[e] = Some(state >> pos & 1 == 1);
            }
        }
        Ok(obs)
    }

    /// Posterior alive probability of each unobserved edge into sink `u`,
    /// given the per-edge observations. Returns `(edge id, probability)`.
    pub fn sink_posterior(&self, u: usize, obs: &[Option<bool>]) -> Result<Vec<(usize, f64)>> {
        let in_edges = self.graph.in_edges(u);
        let unobserved: Vec<usize> = in_edges
            .iter()
            .copied()
            .filter(|&e| obs[e].is_none())
            .collect();
        match &self.model {
            EdgeStateModel::IC { q } => Ok(unobserved.iter().map(|&e| (e, q[e])).collect()),
            EdgeStateModel::LT { b } => {
                let alive: Vec<usize> = in_edges
                    .iter()
                    .copied()
                    .filter(|&e| obs[e] == Some(true))
                    .collect();
                if alive.len() > 1 {
                    return Err(Error::InconsistentObservation(format!(
                        "two live in-edges at LT sink {u}"
                    )));
                }
                if alive.len() == 1 {
                    return Ok(unobserved.iter().map(|&e| (e, 0.0)).collect());
                }
                let dead_mass: f64 = in_edges
                    .iter()
                    .filter(|&&e| obs[e] == Some(false))
                    .map(|&e| b[e])
                    .sum();
                let denom = 1.0 - dead_mass;
                if denom <= PROB_TOL {
                    return Err(Error::InconsistentObservation(format!(
                        "all probability mass observed dead at LT sink {u}"
                    )));
                }
                Ok(unobserved.iter().map(|&e| (e, b[e] / denom)).collect())
            }
            EdgeStateModel::ExtendedLT { t } => {
                let deg = in_edges.len();
                let dead = in_edges.iter().filter(|&&e| obs[e] == Some(false)).count();
                let alive: Vec<usize> = in_edges
                    .iter()
                    .copied()
                    .filter(|&e| obs[e] == Some(true))
                    .collect();
                if deg == dead {
                    if unobserved.is_empty() && alive.is_empty() {
                        return Ok(Vec::new());
                    }
                    return Err(Error::InconsistentObservation(format!(
                        "every in-edge of extended-LT sink {u} observed dead"
                    )));
                }
                if alive.is_empty() {
                    let remaining = (deg - dead) as f64;
                    let p = 1.0 - ((remaining - 1.0) / remaining).powi(*t as i32);
                    return Ok(unobserved.iter().map(|&e| (e, p)).collect());
                }
                // Exact conditioning on "avoid the dead set, hit every
                // observed-alive edge", by inclusion-exclusion over the
                // alive set.
                let hit_prob = |extra_dead: usize| -> f64 {
                    let mut acc = 0.0;
                    for mask in 0u64..(1 << alive.len()) {
                        let miss = mask.count_ones() as usize;
                        let left = deg - dead - extra_dead - miss;
                        let sign = if miss % 2 == 0 { 1.0 } else { -1.0 };
                        acc += sign * (left as f64 / deg as f64).powi(*t as i32);
                    }
                    acc
                };
                let base = hit_prob(0);
                if base <= PROB_TOL {
                    return Err(Error::InconsistentObservation(format!(
                        "observation at extended-LT sink {u} has zero probability"
                    )));
                }
                let p = 1.0 - hit_prob(1) / base;
                Ok(unobserved.iter().map(|&e| (e, p)).collect())
            }
            EdgeStateModel::Triggering { per_sink } => {
                let mut mass = 0.0;
                let mut marginal: HashMap<usize, f64> = HashMap::new();
                for &(live_mask, p) in &per_sink[u] {
                    let consistent = in_edges.iter().enumerate().all(|(pos, &e)| match obs[e] {
                        Some(alive) => (live_mask >> pos & 1 == 1) == alive,
                        None => true,
                    });
                    if !consistent {
                        continue;
                    }
                    mass += p;
                    for (pos, &e) in in_edges.iter().enumerate() {
                        if obs[e].is_none() && live_mask >> pos & 1 == 1 {
                            *marginal.entry(e).or_insert(0.0) += p;
                        }
                    }
                }
                if mass <= PROB_TOL {
                    return Err(Error::InconsistentObservation(format!(
                        "observation at triggering sink {u} has zero probability"
                    )));
                }
                Ok(unobserved
                    .iter()
                    .map(|&e| (e, marginal.get(&e).copied().unwrap_or(0.0) / mass))
                    .collect())
            }
        }
    }

    /// Whether some observed edge into `u` is live.
    fn sink_activated(&self, u: usize, obs: &[Option<bool>]) -> bool {
        self.graph.in_edges(u).iter().any(|&e| obs[e] == Some(true))
    }

    /// Exact expected marginal spread of selecting source `v` after
    /// observing `psi`: already-activated sinks contribute nothing, the
    /// rest contribute their weight times the posterior aliveness of the
    /// connecting edge.
    pub fn adaptive_gain(&self, v: usize, psi: &PartialRealization) -> Result<ExpectedGain> {
        if psi.dom().contains(v) {
            return Err(Error::ElementReuse(v));
        }
        let obs = self.decode_observations(psi)?;
        let mut total = 0.0;
        for &e in self.graph.out_edges(v) {
            let u = self.graph.edge(e).1;
            if self.sink_activated(u, &obs) {
                continue;
            }
            let posterior = self.sink_posterior(u, &obs)?;
            let p = posterior
                .iter()
                .find(|(id, _)| *id == e)
                .map(|&(_, p)| p)
                .unwrap_or(0.0);
            total += self.graph.sink_weights[u] * p;
        }
        Ok(ExpectedGain::exact(total))
    }

    /// `E[spread(S, Phi)]` in closed form per model.
    pub fn expected_spread_nonadaptive(&self, set: ElementSet) -> f64 {
        let sources: Vec<usize> = set.iter().collect();
        self.expected_spread_of(&sources)
    }

    /// `expected_spread_nonadaptive` for an explicit source list; not
    /// limited to 64 sources.
    pub fn expected_spread_of(&self, sources: &[usize]) -> f64 {
        let mut member = vec![false; self.graph.n_src];
        for &v in sources {
            member[v] = true;
        }
        let mut total = 0.0;
        for u in 0..self.graph.n_sink {
            let from_set: Vec<usize> = self
                .graph
                .in_edges(u)
                .iter()
                .enumerate()
                .filter(|(_, &e)| member[self.graph.edge(e).0])
                .map(|(pos, _)| pos)
                .collect();
            if from_set.is_empty() {
                continue;
            }
            let p_hit = match &self.model {
                EdgeStateModel::IC { q } => {
                    let in_edges = self.graph.in_edges(u);
                    1.0 - from_set
                        .iter()
                        .map(|&pos| 1.0 - q[in_edges[pos]])
                        .product::<f64>()
                }
                EdgeStateModel::LT { b } => {
                    let in_edges = self.graph.in_edges(u);
                    from_set.iter().map(|&pos| b[in_edges[pos]]).sum()
                }
                EdgeStateModel::ExtendedLT { t } => {
                    let deg = self.graph.in_degree(u) as f64;
                    1.0 - ((deg - from_set.len() as f64) / deg).powi(*t as i32)
                }
                EdgeStateModel::Triggering { per_sink } => per_sink[u]
                    .iter()
                    .filter(|&&(mask, _)| from_set.iter().any(|&pos| mask >> pos & 1 == 1))
                    .map(|(_, p)| p)
                    .sum(),
            };
            total += self.graph.sink_weights[u] * p_hit;
        }
        total
    }

    /// Per-sink distribution over live-subset masks of the in-edge list.
    fn sink_support(&self, u: usize) -> Result<Vec<(u64, f64)>> {
        let deg = self.graph.in_degree(u);
        if deg >= 63 {
            return Err(Error::InvalidParams(format!(
                "sink {u} in-degree {deg} too large to tabulate"
            )));
        }
        let support = match &self.model {
            EdgeStateModel::IC { q } => {
                let in_edges = self.graph.in_edges(u);
                let mut out = Vec::with_capacity(1 << deg);
                for mask in 0u64..(1 << deg) {
                    let mut p = 1.0;
                    for (pos, &e) in in_edges.iter().enumerate() {
                        p *= if mask >> pos & 1 == 1 {
                            q[e]
                        } else {
                            1.0 - q[e]
                        };
                    }
                    out.push((mask, p));
                }
                out
            }
            EdgeStateModel::LT { b } => {
                let in_edges = self.graph.in_edges(u);
                let mut out = Vec::new();
                let mut live_total = 0.0;
                for (pos, &e) in in_edges.iter().enumerate() {
                    live_total += b[e];
                    out.push((1u64 << pos, b[e]));
                }
                out.push((0, 1.0 - live_total));
                out
            }
            EdgeStateModel::ExtendedLT { t } => {
                // Probability of the live set being exactly T: count the
                // sample sequences hitting exactly T, by inclusion-
                // exclusion over subsets of T.
                let mut out = Vec::new();
                for mask in 0u64..(1 << deg) {
                    let size = mask.count_ones() as i64;
                    if size > *t as i64 {
                        continue;
                    }
                    let mut p = 0.0;
                    for sub in 0..(size + 1) {
                        let ways = binomial(size as u64, sub as u64);
                        let sign = if (size - sub) % 2 == 0 { 1.0 } else { -1.0 };
                        p += sign * ways * (sub as f64 / deg as f64).powi(*t as i32);
                    }
                    out.push((mask, p));
                }
                out
            }
            EdgeStateModel::Triggering { per_sink } => per_sink[u].clone(),
        };
        let mut merged: HashMap<u64, f64> = HashMap::new();
        for (mask, p) in support {
            *merged.entry(mask).or_insert(0.0) += p;
        }
        let mut out: Vec<(u64, f64)> = merged
            .into_iter()
            .filter(|&(_, p)| p > 1e-15)
            .collect();
        out.sort_by_key(|&(mask, _)| mask);
        let total: f64 = out.iter().map(|(_, p)| p).sum();
        for (_, p) in &mut out {
            *p /= total;
        }
        Ok(out)
    }

    /// Exact tabular form: joint support is the product of per-sink
    /// supports, source states are alive-bitmasks over their out-edges.
    pub fn to_tabular(&self, cap: u64) -> Result<(TabularPrior, SpreadObjective)> {
        let n_src = self.graph.n_src;
        if n_src > 64 {
            return Err(Error::InvalidParams("at most 64 sources can be tabulated".into()));
        }
        for v in 0..n_src {
            if self.graph.out_degree(v) >= 31 {
                return Err(Error::InvalidParams(format!(
                    "source {v} out-degree too large to encode as a state"
                )));
            }
        }
        let mut joint: Vec<(Vec<bool>, f64)> = vec![(vec![false; self.graph.n_edges()], 1.0)];
        for u in 0..self.graph.n_sink {
            let support = self.sink_support(u)?;
            let in_edges = self.graph.in_edges(u);
            let mut next = Vec::with_capacity(joint.len() * support.len());
            for (alive, p) in &joint {
                for &(mask, q) in &support {
                    if next.len() as u64 >= cap {
                        return Err(Error::BudgetExceeded { cap });
                    }
                    let mut extended = alive.clone();
                    for (pos, &e) in in_edges.iter().enumerate() {
                        extended[e] = mask >> pos & 1 == 1;
                    }
                    next.push((extended, p * q));
                }
            }
            joint = next;
        }
        let sizes: Vec<u32> = (0..n_src)
            .map(|v| 1u32 << self.graph.out_degree(v))
            .collect();
        let space = StateSpace::new(sizes)?;
        let support = joint
            .into_iter()
            .map(|(alive, p)| (self.realization_from_edges(&alive), p))
            .collect();
        let prior = TabularPrior::new(space, support)?;
        Ok((prior, SpreadObjective::new(&self.graph)))
    }

    /// Source-state encoding of a full edge assignment.
    pub fn realization_from_edges(&self, alive: &[bool]) -> Realization {
        let states = (0..self.graph.n_src)
            .map(|v| {
                self.graph
                    .out_edges(v)
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| alive[e])
                    .map(|(pos, _)| 1u32 << pos)
                    .sum()
            })
            .collect();
        Realization::new(states)
    }

    /// Draws a full edge assignment from the model.
    pub fn sample_edges(&self, rng: &mut impl Rng) -> Vec<bool> {
        let mut alive = vec![false; self.graph.n_edges()];
        for u in 0..self.graph.n_sink {
            let in_edges = self.graph.in_edges(u);
            match &self.model {
                EdgeStateModel::IC { q } => {
                    for &e in in_edges {
                        alive[e] = rng.gen_bool(q[e]);
                    }
                }
                EdgeStateModel::LT { b } => {
                    let mut x: f64 = rng.gen();
                    for &e in in_edges {
                        if x < b[e] {
                            alive[e] = true;
                            break;
                        }
                        x -= b[e];
                    }
                }
                EdgeStateModel::ExtendedLT { t } => {
                    if !in_edges.is_empty() {
                        for _ in 0..*t {
                            let pick = rng.gen_range(0..in_edges.len());
                            alive[in_edges[pick]] = true;
                        }
                    }
                }
                EdgeStateModel::Triggering { per_sink } => {
                    let dist = &per_sink[u];
                    if dist.is_empty() {
                        continue;
                    }
                    let mut x: f64 = rng.gen();
                    let mut chosen = dist[dist.len() - 1].0;
                    for &(mask, p) in dist {
                        if x < p {
                            chosen = mask;
                            break;
                        }
                        x -= p;
                    }
                    for (pos, &e) in in_edges.iter().enumerate() {
                        alive[e] = chosen >> pos & 1 == 1;
                    }
                }
            }
        }
        alive
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Spread as a core objective over source-state realizations.
#[derive(Clone, Debug)]
pub struct SpreadObjective {
    weights: Vec<f64>,
    out: Vec<Vec<(usize, usize)>>,
}

impl SpreadObjective {
    fn new(graph: &BipartiteGraph) -> Self {
        let out = (0..graph.n_src)
            .map(|v| {
                graph
                    .out_edges(v)
                    .iter()
                    .enumerate()
                    .map(|(pos, &e)| (graph.edge(e).1, pos))
                    .collect()
            })
            .collect();
        SpreadObjective {
            weights: graph.sink_weights.clone(),
            out,
        }
    }
}

impl Objective for SpreadObjective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        let mut covered = 0u64;
        for v in set.iter() {
            for &(u, pos) in &self.out[v] {
                if phi.state(v) >> pos & 1 == 1 {
                    covered |= 1 << u;
                }
            }
        }
        self.weights
            .iter()
            .enumerate()
            .filter(|(u, _)| covered >> u & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }
}

/// Model family for generated graphs.
#[derive(Clone, Copy, Debug)]
pub enum ModelKind {
    Ic { q: f64 },
    /// Per-edge alive probability drawn uniformly from (0,1).
    IcRandom,
    Lt,
    ExtendedLt { t: u32 },
}

/// Erdos-Renyi bipartite instance: each source-sink pair carries an edge
/// with probability `p_edge`, sink weights are uniform on [0,1), and LT
/// edge weights are the reciprocal of the sink's in-degree.
pub fn gen_erdos_renyi(
    n_src: usize,
    n_sink: usize,
    p_edge: f64,
    kind: ModelKind,
    seed: u64,
) -> Result<InfluenceInstance> {
    if !(0.0..=1.0).contains(&p_edge) {
        return Err(Error::InvalidParams(format!("edge probability {p_edge}")));
    }
    let mut edge_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let mut edges = Vec::new();
    for v in 0..n_src {
        for u in 0..n_sink {
            if edge_rng.gen_bool(p_edge) {
                edges.push((v, u));
            }
        }
    }
    let mut weight_rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let sink_weights = (0..n_sink).map(|_| weight_rng.gen::<f64>()).collect();
    let graph = BipartiteGraph::new(n_src, n_sink, edges, sink_weights)?;
    let model = match kind {
        ModelKind::Ic { q } => EdgeStateModel::IC {
            q: vec![q; graph.n_edges()],
        },
        ModelKind::IcRandom => {
            let mut q_rng = ChaCha8Rng::seed_from_u64(mix(seed, 2));
            EdgeStateModel::IC {
                q: (0..graph.n_edges()).map(|_| q_rng.gen::<f64>()).collect(),
            }
        }
        ModelKind::Lt => {
            let b = (0..graph.n_edges())
                .map(|e| 1.0 / graph.in_degree(graph.edge(e).1) as f64)
                .collect();
            EdgeStateModel::LT { b }
        }
        ModelKind::ExtendedLt { t } => EdgeStateModel::ExtendedLT { t },
    };
    InfluenceInstance::new(graph, model)
}

/// The tight LT example: `k` sources, one unit-weight sink, exactly one
/// uniformly chosen live edge.
pub fn gen_star(k: usize) -> Result<InfluenceInstance> {
    if k < 1 {
        return Err(Error::InvalidParams("star needs at least one source".into()));
    }
    let edges = (0..k).map(|v| (v, 0)).collect();
    let graph = BipartiteGraph::new(k, 1, edges, vec![1.0])?;
    let model = EdgeStateModel::LT {
        b: vec![1.0 / k as f64; k],
    };
    InfluenceInstance::new(graph, model)
}

/// Random dense-ish triggering instance for oracle checks: every pair
/// carries an edge with probability 0.7, and each sink distributes its
/// mass over at most four random live subsets.
pub fn gen_random_triggering(n_src: usize, n_sink: usize, seed: u64) -> Result<InfluenceInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let mut edges = Vec::new();
    for v in 0..n_src {
        for u in 0..n_sink {
            if rng.gen_bool(0.7) {
                edges.push((v, u));
            }
        }
    }
    let sink_weights = (0..n_sink).map(|_| 0.25 + rng.gen::<f64>()).collect();
    let graph = BipartiteGraph::new(n_src, n_sink, edges, sink_weights)?;
    let mut per_sink = Vec::with_capacity(n_sink);
    for u in 0..n_sink {
        let deg = graph.in_degree(u);
        let n_subsets = rng.gen_range(1..=4usize);
        let mut entries: HashMap<u64, f64> = HashMap::new();
        for _ in 0..n_subsets {
            let mask = if deg == 0 { 0 } else { rng.gen_range(0..(1u64 << deg)) };
            *entries.entry(mask).or_insert(0.0) += 0.05 + rng.gen::<f64>();
        }
        let total: f64 = entries.values().sum();
        let mut dist: Vec<(u64, f64)> = entries
            .into_iter()
            .map(|(mask, p)| (mask, p / total))
            .collect();
        dist.sort_by_key(|&(mask, _)| mask);
        per_sink.push(dist);
    }
    InfluenceInstance::new(graph, EdgeStateModel::Triggering { per_sink })
}

/// Parses the edge-list text format: `#` comments, `u <sink> <weight>`
/// sink declarations, `e <src> <sink> <param>` edges. Returns the graph
/// and the per-edge parameter column.
pub fn load_edge_list(path: &std::path::Path) -> Result<(BipartiteGraph, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    parse_edge_list(&text)
}

pub fn parse_edge_list(text: &str) -> Result<(BipartiteGraph, Vec<f64>)> {
    let mut declared_weights: HashMap<usize, f64> = HashMap::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut params: Vec<f64> = Vec::new();
    let mut max_src: Option<usize> = None;
    let mut max_sink: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let fail = |msg: &str| Error::ParseError {
            line,
            msg: msg.to_string(),
        };
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        match fields[0] {
            "u" => {
                if fields.len() != 3 {
                    return Err(fail("expected `u <sink-id> <weight>`"));
                }
                let sink: usize = fields[1].parse().map_err(|_| fail("bad sink id"))?;
                let weight: f64 = fields[2].parse().map_err(|_| fail("bad weight"))?;
                declared_weights.insert(sink, weight);
                max_sink = Some(max_sink.map_or(sink, |m: usize| m.max(sink)));
            }
            "e" => {
                if fields.len() != 4 {
                    return Err(fail("expected `e <src-id> <sink-id> <param>`"));
                }
                let src: usize = fields[1].parse().map_err(|_| fail("bad source id"))?;
                let sink: usize = fields[2].parse().map_err(|_| fail("bad sink id"))?;
                let param: f64 = fields[3].parse().map_err(|_| fail("bad edge parameter"))?;
                if edges.contains(&(src, sink)) {
                    return Err(Error::DuplicateEdge { src, sink });
                }
                edges.push((src, sink));
                params.push(param);
                max_src = Some(max_src.map_or(src, |m: usize| m.max(src)));
                max_sink = Some(max_sink.map_or(sink, |m: usize| m.max(sink)));
            }
            other => {
                return Err(fail(&format!("unknown record type `{other}`")));
            }
        }
    }
    let n_src = max_src.map_or(0, |m| m + 1);
    let n_sink = max_sink.map_or(0, |m| m + 1);
    let sink_weights = (0..n_sink)
        .map(|u| declared_weights.get(&u).copied().unwrap_or(1.0))
        .collect();
    let graph = BipartiteGraph::new(n_src, n_sink, edges, sink_weights)?;
    Ok((graph, params))
}

/// Sources by descending out-degree, ties by index.
pub fn degree_baseline(graph: &BipartiteGraph, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..graph.n_src).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(graph.out_degree(v)), v));
    order.truncate(k);
    order
}

/// Independent-cascade adaptivity gap lower bound
/// `(1 - q_max)^(min(k, d) - 1)`.
pub fn ic_gap_lower_bound(q_max: f64, d: usize, k: usize) -> f64 {
    let exponent = k.min(d).saturating_sub(1) as i32;
    (1.0 - q_max).powi(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute::{gamma_adaptive, RatioQuery, DEFAULT_CAP};
    use crate::core::{
        check_adaptive_submodular, enumerate_histories, gain_element, PartialRealization,
    };

    fn star_realization(instance: &InfluenceInstance, alive_src: usize) -> Vec<bool> {
        (0..instance.graph.n_edges()).map(|e| e == alive_src).collect()
    }

    #[test]
    fn spread_star_cases() {
        let instance = gen_star(2).unwrap();
        let alive = star_realization(&instance, 1);
        assert_eq!(spread(&instance.graph, ElementSet::EMPTY, &alive), 0.0);
        assert_eq!(
            spread(&instance.graph, ElementSet::singleton(0), &alive),
            0.0
        );
        assert_eq!(
            spread(&instance.graph, ElementSet::from_iter(0..2), &alive),
            1.0
        );
    }

    #[test]
    fn lt_posterior_renormalizes() {
        let instance = gen_star(3).unwrap();
        let mut obs = vec![None; 3];
        obs[0] = Some(false);
        let posterior = instance.sink_posterior(0, &obs).unwrap();
        assert_eq!(posterior.len(), 2);
        for (_, p) in posterior {
            assert!((p - 0.5).abs() < 1e-12);
        }
        obs[1] = Some(false);
        let posterior = instance.sink_posterior(0, &obs).unwrap();
        assert_eq!(posterior.len(), 1);
        assert!((posterior[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lt_two_alive_is_inconsistent() {
        let instance = gen_star(3).unwrap();
        let obs = vec![Some(true), Some(true), None];
        assert!(matches!(
            instance.sink_posterior(0, &obs),
            Err(Error::InconsistentObservation(_))
        ));
    }

    #[test]
    fn adaptive_gain_star() {
        for k in 2..=4usize {
            let instance = gen_star(k).unwrap();
            let gain = instance
                .adaptive_gain(0, &PartialRealization::empty())
                .unwrap();
            assert!((gain.value - 1.0 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_gain_isolated_source_is_zero() {
        let graph = BipartiteGraph::new(2, 1, vec![(0, 0)], vec![1.0]).unwrap();
        let instance = InfluenceInstance::new(graph, EdgeStateModel::LT { b: vec![0.8] }).unwrap();
        let gain = instance
            .adaptive_gain(1, &PartialRealization::empty())
            .unwrap();
        assert_eq!(gain.value, 0.0);
    }

    #[test]
    fn adaptive_gain_matches_tabular_oracle() {
        let instances = vec![
            gen_star(3).unwrap(),
            gen_erdos_renyi(3, 2, 0.8, ModelKind::IcRandom, 11).unwrap(),
            gen_erdos_renyi(3, 2, 0.8, ModelKind::ExtendedLt { t: 2 }, 13).unwrap(),
            gen_random_triggering(3, 2, 17).unwrap(),
        ];
        for instance in instances {
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            let histories = enumerate_histories(&prior, 2, DEFAULT_CAP).unwrap();
            for psi in histories {
                for v in 0..instance.graph.n_src {
                    if psi.dom().contains(v) {
                        continue;
                    }
                    let closed = instance.adaptive_gain(v, &psi).unwrap().value;
                    let exact = gain_element(&f, &prior, v, &psi).unwrap().value;
                    assert!(
                        (closed - exact).abs() < 1e-9,
                        "v={v}, psi={:?}: {closed} vs {exact}",
                        psi.entries()
                    );
                }
            }
        }
    }

    #[test]
    fn expected_spread_matches_tabular() {
        let instances = vec![
            gen_star(3).unwrap(),
            gen_erdos_renyi(3, 2, 0.8, ModelKind::Ic { q: 0.4 }, 5).unwrap(),
            gen_erdos_renyi(3, 2, 0.9, ModelKind::ExtendedLt { t: 3 }, 7).unwrap(),
            gen_random_triggering(3, 2, 23).unwrap(),
        ];
        for instance in instances {
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            for mask in 0u64..(1 << instance.graph.n_src) {
                let set = ElementSet(mask);
                let closed = instance.expected_spread_nonadaptive(set);
                let exact: f64 = prior
                    .support()
                    .iter()
                    .map(|(phi, p)| p * f.value(set, phi))
                    .sum();
                assert!(
                    (closed - exact).abs() < 1e-9,
                    "mask={mask}: {closed} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn expected_spread_parallel_ic() {
        let graph = BipartiteGraph::new(2, 1, vec![(0, 0), (1, 0)], vec![1.0]).unwrap();
        let instance =
            InfluenceInstance::new(graph, EdgeStateModel::IC { q: vec![0.5, 0.5] }).unwrap();
        let value = instance.expected_spread_nonadaptive(ElementSet::from_iter(0..2));
        assert!((value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn star_tabular_support() {
        let instance = gen_star(3).unwrap();
        let (prior, _) = instance.to_tabular(DEFAULT_CAP).unwrap();
        assert_eq!(prior.support().len(), 3);
        for (_, p) in prior.support() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extended_lt_posterior_matches_triggering_enumeration() {
        let instance = gen_erdos_renyi(4, 1, 1.0, ModelKind::ExtendedLt { t: 3 }, 3).unwrap();
        let support = instance.sink_support(0).unwrap();
        let graph = instance.graph.clone();
        let trig = InfluenceInstance::new(
            graph,
            EdgeStateModel::Triggering {
                per_sink: vec![support],
            },
        )
        .unwrap();
        for dead_mask in 0u64..(1 << 3) {
            let mut obs = vec![None; instance.graph.n_edges()];
            for pos in 0..3 {
                if dead_mask >> pos & 1 == 1 {
                    obs[instance.graph.in_edges(0)[pos]] = Some(false);
                }
            }
            let a = instance.sink_posterior(0, &obs).unwrap();
            let b = trig.sink_posterior(0, &obs).unwrap();
            assert_eq!(a.len(), b.len());
            for ((ea, pa), (eb, pb)) in a.iter().zip(&b) {
                assert_eq!(ea, eb);
                assert!((pa - pb).abs() < 1e-9, "mask={dead_mask}: {pa} vs {pb}");
            }
        }
    }

    #[test]
    fn er_generator_contracts() {
        let empty = gen_erdos_renyi(5, 5, 0.0, ModelKind::Lt, 1).unwrap();
        assert_eq!(empty.graph.n_edges(), 0);

        let full = gen_erdos_renyi(3, 3, 1.0, ModelKind::Lt, 1).unwrap();
        assert_eq!(full.graph.n_edges(), 9);
        if let EdgeStateModel::LT { b } = &full.model {
            for &x in b {
                assert!((x - 1.0 / 3.0).abs() < 1e-12);
            }
        } else {
            panic!("expected LT");
        }

        let big = gen_erdos_renyi(100, 100, 0.01, ModelKind::Lt, 42).unwrap();
        let count = big.graph.n_edges() as i64;
        assert!((60..=140).contains(&count), "edge count {count}");

        let again = gen_erdos_renyi(100, 100, 0.01, ModelKind::Lt, 42).unwrap();
        assert_eq!(big.graph.n_edges(), again.graph.n_edges());
    }

    #[test]
    fn star_gamma_tightness() {
        let instance = gen_star(2).unwrap();
        let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
        let report = gamma_adaptive(
            &f,
            &prior,
            &RatioQuery {
                psi: PartialRealization::empty(),
                k: 2,
            },
            DEFAULT_CAP,
        )
        .unwrap();
        assert!((report.value - 0.75).abs() < 1e-9);
    }

    #[test]
    fn ic_is_adaptive_submodular_lt_star_is_not() {
        let ic = gen_erdos_renyi(3, 2, 0.8, ModelKind::IcRandom, 9).unwrap();
        let (prior, f) = ic.to_tabular(DEFAULT_CAP).unwrap();
        assert!(check_adaptive_submodular(&f, &prior, DEFAULT_CAP)
            .unwrap()
            .holds);

        let star = gen_star(3).unwrap();
        let (prior, f) = star.to_tabular(DEFAULT_CAP).unwrap();
        assert!(!check_adaptive_submodular(&f, &prior, DEFAULT_CAP)
            .unwrap()
            .holds);
    }

    #[test]
    fn random_triggering_respects_theorem_bound() {
        for seed in 0..20u64 {
            let instance = gen_random_triggering(3, 2, seed).unwrap();
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            for k in 2..=3usize {
                let report = gamma_adaptive(
                    &f,
                    &prior,
                    &RatioQuery {
                        psi: PartialRealization::empty(),
                        k,
                    },
                    DEFAULT_CAP,
                )
                .unwrap();
                let bound = (k + 1) as f64 / (2 * k) as f64;
                assert!(
                    report.value >= bound - 1e-9,
                    "seed={seed} k={k}: {} < {bound}",
                    report.value
                );
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# fixture\nu 0 2.5\ne 0 0 0.3\ne 1 0 0.6\n";
        let (graph, params) = parse_edge_list(text).unwrap();
        assert_eq!(graph.n_src, 2);
        assert_eq!(graph.n_sink, 1);
        assert_eq!(graph.n_edges(), 2);
        assert_eq!(graph.sink_weights, vec![2.5]);
        assert_eq!(params, vec![0.3, 0.6]);

        let (empty, _) = parse_edge_list("# nothing\n").unwrap();
        assert_eq!(empty.n_src, 0);
        assert_eq!(empty.n_sink, 0);

        let err = parse_edge_list("e 0 zero 0.5\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, .. }));

        let err = parse_edge_list("e 0 0 0.5\ne 0 0 0.5\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateEdge { src: 0, sink: 0 }));

        let err = parse_edge_list("x 1 2\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { line: 1, .. }));
    }

    #[test]
    fn degree_baseline_ordering() {
        let edges = vec![(0, 0), (0, 1), (0, 2), (1, 0), (2, 1), (2, 2)];
        let graph = BipartiteGraph::new(3, 3, edges, vec![1.0; 3]).unwrap();
        assert_eq!(degree_baseline(&graph, 3), vec![0, 2, 1]);
        assert_eq!(degree_baseline(&graph, 1), vec![0]);

        let star = gen_star(3).unwrap();
        assert_eq!(degree_baseline(&star.graph, 2), vec![0, 1]);
    }

    #[test]
    fn ic_gap_bound_cases() {
        assert_eq!(ic_gap_lower_bound(0.7, 5, 1), 1.0);
        assert_eq!(ic_gap_lower_bound(0.0, 5, 3), 1.0);
        assert!((ic_gap_lower_bound(0.5, 2, 3) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ic_gap_bound_holds_on_small_instances() {
        use crate::brute::adaptivity_gap_exact;
        for seed in 0..5u64 {
            let instance = gen_erdos_renyi(3, 2, 0.8, ModelKind::Ic { q: 0.4 }, seed).unwrap();
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            let d = (0..instance.graph.n_src)
                .map(|v| instance.graph.out_degree(v))
                .max()
                .unwrap_or(0);
            for k in 1..=2usize {
                let gap = adaptivity_gap_exact(&f, &prior, k, DEFAULT_CAP).unwrap();
                let bound = ic_gap_lower_bound(0.4, d, k);
                assert!(
                    gap.value >= bound - 1e-9,
                    "seed={seed} k={k}: {} < {bound}",
                    gap.value
                );
            }
        }
    }

    #[test]
    fn sample_edges_deterministic_and_consistent() {
        let instance = gen_star(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let alive = instance.sample_edges(&mut rng);
            assert_eq!(alive.iter().filter(|&&a| a).count(), 1);
        }
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        assert_eq!(instance.sample_edges(&mut a), instance.sample_edges(&mut b));
    }
}
