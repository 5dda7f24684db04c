//! Adaptive feature selection for sparse regression.
//!
//! Each feature's column is random with a factorized prior; selecting a
//! feature reveals its column. The objective is the reduction of the
//! squared residual, `||b||^2 - min_w ||b - A_S w||^2`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::core::{ElementSet, ExpectedGain, Objective, Realization, StateSpace, TabularPrior};
use crate::error::{Error, Result};
use crate::linalg::{gram, least_squares, sym_eigen_extremes, DenseMatrix};
use crate::seed::mix;

/// Factorized prior over feature columns.
#[derive(Clone, Debug)]
pub enum ColumnPrior {
    /// Per feature, an explicit list of `(column, probability)`.
    FiniteSupport { per_feature: Vec<Vec<(Vec<f64>, f64)>> },
    /// Per feature, a mean column perturbed entrywise by uniform noise on
    /// `[-sigma, sigma]`. Draw `s` of feature `v` is seeded with
    /// `mix(mix(seed, v), s)` so parallel and serial runs agree.
    Sampler {
        mean: Vec<Vec<f64>>,
        sigma: f64,
        seed: u64,
    },
}

#[derive(Clone, Debug)]
pub struct FeatureInstance {
    pub n: usize,
    pub m: usize,
    pub response: Vec<f64>,
    pub prior: ColumnPrior,
    /// Ground-truth support and coefficients, when generated.
    pub true_support: Option<Vec<usize>>,
    pub true_coeffs: Option<Vec<f64>>,
    /// The hidden realized columns that produced the response.
    pub hidden: Option<Vec<Vec<f64>>>,
}

/// Extreme Gram eigenvalues over realizations and subsets of bounded size.
#[derive(Clone, Copy, Debug)]
pub struct EigenBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub ell: usize,
    /// Whether every encountered column already had unit norm (1e-6).
    pub columns_normalized: bool,
}

/// Observation history over feature columns, in selection order.
#[derive(Clone, Debug, Default)]
pub struct ObservedColumns {
    entries: Vec<(usize, Vec<f64>)>,
}

impl ObservedColumns {
    pub fn empty() -> Self {
        ObservedColumns::default()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.entries.iter().any(|(u, _)| *u == v)
    }

    pub fn push(&mut self, v: usize, column: Vec<f64>) -> Result<()> {
        if self.contains(v) {
            return Err(Error::ElementReuse(v));
        }
        self.entries.push((v, column));
        Ok(())
    }

    pub fn entries(&self) -> &[(usize, Vec<f64>)] {
        &self.entries
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|(_, c)| c.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `||b||^2 - min_w ||b - A_S w||^2`, clamped to be nonnegative.
pub fn r2_value(columns: &[Vec<f64>], response: &[f64]) -> Result<f64> {
    if columns.is_empty() {
        return Ok(0.0);
    }
    let a = DenseMatrix::from_columns(columns)?;
    let (_, residual_sq) = least_squares(&a, response)?;
    let norm_sq: f64 = response.iter().map(|x| x * x).sum();
    Ok((norm_sq - residual_sq).max(0.0))
}

/// Incremental evaluator for greedy runs: keeps an orthonormal basis of
/// the selected columns so each candidate gain is a single projection
/// instead of a fresh least-squares solve. Exact for nested selections.
#[derive(Clone, Debug)]
pub struct IncrementalR2 {
    basis: Vec<Vec<f64>>,
    response: Vec<f64>,
    value: f64,
}

impl IncrementalR2 {
    pub fn new(response: Vec<f64>) -> Self {
        IncrementalR2 {
            basis: Vec::new(),
            response,
            value: 0.0,
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    fn residual_direction(&self, column: &[f64]) -> Option<Vec<f64>> {
        let mut residual = column.to_vec();
        for q in &self.basis {
            let dot: f64 = q.iter().zip(column).map(|(a, b)| a * b).sum();
            for (r, qi) in residual.iter_mut().zip(q) {
                *r -= dot * qi;
            }
        }
        // Re-orthogonalize once for numerical stability.
        for q in &self.basis {
            let dot: f64 = q.iter().zip(&residual).map(|(a, b)| a * b).sum();
            for (r, qi) in residual.iter_mut().zip(q) {
                *r -= dot * qi;
            }
        }
        let norm: f64 = residual.iter().map(|x| x * x).sum::<f64>().sqrt();
        let col_norm: f64 = column.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-10 * col_norm.max(1.0) {
            return None;
        }
        for r in &mut residual {
            *r /= norm;
        }
        Some(residual)
    }

    /// Marginal increase of the objective if `column` were appended.
    pub fn gain(&self, column: &[f64]) -> f64 {
        match self.residual_direction(column) {
            Some(direction) => {
                let dot: f64 = direction
                    .iter()
                    .zip(&self.response)
                    .map(|(a, b)| a * b)
                    .sum();
                dot * dot
            }
            None => 0.0,
        }
    }

    pub fn push(&mut self, column: &[f64]) {
        if let Some(direction) = self.residual_direction(column) {
            let dot: f64 = direction
                .iter()
                .zip(&self.response)
                .map(|(a, b)| a * b)
                .sum();
            self.value += dot * dot;
            self.basis.push(direction);
        }
    }
}

impl FeatureInstance {
    /// Draws the `s`-th sampled column of feature `v` for a sampler prior.
    pub fn sample_column(&self, v: usize, s: u64, seed: u64) -> Vec<f64> {
        match &self.prior {
            ColumnPrior::Sampler { mean, sigma, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, v as u64), s));
                mean[v]
                    .iter()
                    .map(|&x| x + rng.gen_range(-*sigma..=*sigma))
                    .collect()
            }
            ColumnPrior::FiniteSupport { .. } => {
                panic!("sample_column requires a sampler prior")
            }
        }
    }

    /// Expected marginal gain of feature `v` given the observed columns.
    ///
    /// The objective depends only on the columns of the evaluated set and
    /// the prior factorizes, so only `v`'s column is random: the gain is
    /// an exact support sum for finite-support priors and a seeded Monte
    /// Carlo average otherwise.
    pub fn adaptive_gain_mc(
        &self,
        v: usize,
        observed: &ObservedColumns,
        n_samples: u64,
        seed: u64,
    ) -> Result<ExpectedGain> {
        if observed.contains(v) {
            return Err(Error::ElementReuse(v));
        }
        let mut evaluator = IncrementalR2::new(self.response.clone());
        for (_, column) in observed.entries() {
            evaluator.push(column);
        }
        match &self.prior {
            ColumnPrior::FiniteSupport { per_feature } => {
                let mut acc = 0.0;
                for (column, p) in &per_feature[v] {
                    acc += p * evaluator.gain(column);
                }
                Ok(ExpectedGain::exact(acc))
            }
            ColumnPrior::Sampler { .. } => {
                let mut acc = 0.0;
                for s in 0..n_samples {
                    acc += evaluator.gain(&self.sample_column(v, s, seed));
                }
                Ok(ExpectedGain {
                    value: acc / n_samples as f64,
                    sample_count: n_samples,
                })
            }
        }
    }

    /// Mean columns: the per-feature expectation of the prior.
    pub fn mean_columns(&self) -> Vec<Vec<f64>> {
        match &self.prior {
            ColumnPrior::Sampler { mean, .. } => mean.clone(),
            ColumnPrior::FiniteSupport { per_feature } => per_feature
                .iter()
                .map(|support| {
                    let mut acc = vec![0.0; self.m];
                    for (column, p) in support {
                        for (a, x) in acc.iter_mut().zip(column) {
                            *a += p * x;
                        }
                    }
                    acc
                })
                .collect(),
        }
    }

    /// Tabular form of a finite-support instance: feature states index
    /// their support points.
    pub fn to_tabular(&self, cap: u64) -> Result<(TabularPrior, R2Objective)> {
        let ColumnPrior::FiniteSupport { per_feature } = &self.prior else {
            return Err(Error::InvalidInput(
                "only finite-support priors can be tabulated".into(),
            ));
        };
        let sizes: Vec<u32> = per_feature.iter().map(|s| s.len() as u32).collect();
        let space = StateSpace::new(sizes)?;
        let mut support: Vec<(Realization, f64)> = vec![(Realization::new(vec![]), 1.0)];
        for feature_support in per_feature {
            let mut next = Vec::with_capacity(support.len() * feature_support.len());
            for (phi, p) in &support {
                for (state, (_, q)) in feature_support.iter().enumerate() {
                    if next.len() as u64 >= cap {
                        return Err(Error::BudgetExceeded { cap });
                    }
                    let mut states = phi.states.clone();
                    states.push(state as u32);
                    next.push((Realization::new(states), p * q));
                }
            }
            support = next;
        }
        let prior = TabularPrior::new(space, support)?;
        let objective = R2Objective {
            support: per_feature
                .iter()
                .map(|s| s.iter().map(|(c, _)| c.clone()).collect())
                .collect(),
            response: self.response.clone(),
        };
        Ok((prior, objective))
    }

    /// Extreme Gram eigenvalues over every support realization and every
    /// nonempty subset of at most `ell` features, with columns normalized
    /// to unit length first.
    pub fn eigen_bounds_bruteforce(&self, ell: usize, cap: u64) -> Result<EigenBounds> {
        let ColumnPrior::FiniteSupport { per_feature } = &self.prior else {
            return Err(Error::InvalidInput(
                "eigen bounds require a finite-support prior".into(),
            ));
        };
        let mut combos: Vec<Vec<usize>> = vec![vec![]];
        for support in per_feature {
            let mut next = Vec::with_capacity(combos.len() * support.len());
            for combo in &combos {
                for state in 0..support.len() {
                    let mut extended = combo.clone();
                    extended.push(state);
                    next.push(extended);
                }
            }
            combos = next;
        }
        let mut visited: u64 = 0;
        let mut lambda_min = f64::INFINITY;
        let mut lambda_max = f64::NEG_INFINITY;
        let mut normalized = true;
        for combo in &combos {
            let columns: Vec<Vec<f64>> = combo
                .iter()
                .enumerate()
                .map(|(v, &state)| {
                    let column = &per_feature[v][state].0;
                    let norm: f64 = column.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if (norm - 1.0).abs() > 1e-6 {
                        normalized = false;
                    }
                    if norm > 1e-12 {
                        column.iter().map(|x| x / norm).collect()
                    } else {
                        column.clone()
                    }
                })
                .collect();
            for mask in 1u64..(1 << self.n) {
                let set = ElementSet(mask);
                if set.len() > ell {
                    continue;
                }
                visited += 1;
                if visited > cap {
                    return Err(Error::BudgetExceeded { cap });
                }
                let chosen: Vec<Vec<f64>> = set.iter().map(|v| columns[v].clone()).collect();
                let g = gram(&DenseMatrix::from_columns(&chosen)?);
                let (lo, hi) = sym_eigen_extremes(&g)?;
                lambda_min = lambda_min.min(lo);
                lambda_max = lambda_max.max(hi);
            }
        }
        if !lambda_min.is_finite() {
            return Err(Error::InvalidInput("no nonempty subset within the bound".into()));
        }
        Ok(EigenBounds {
            lambda_min,
            lambda_max,
            ell,
            columns_normalized: normalized,
        })
    }

    /// `lambda_min(k+ell)`: a certified lower bound on `gamma_{ell,k}`.
    pub fn ratio_lower_bound(&self, ell: usize, k: usize, cap: u64) -> Result<f64> {
        Ok(self.eigen_bounds_bruteforce(k + ell, cap)?.lambda_min)
    }

    /// `lambda_min(k) / lambda_max(k)`: a lower bound on the adaptivity gap.
    pub fn gap_lower_bound(&self, k: usize, cap: u64) -> Result<f64> {
        let bounds = self.eigen_bounds_bruteforce(k, cap)?;
        Ok(bounds.lambda_min / bounds.lambda_max)
    }
}

/// The residual-reduction objective over support-index realizations.
#[derive(Clone, Debug)]
pub struct R2Objective {
    support: Vec<Vec<Vec<f64>>>,
    response: Vec<f64>,
}

impl Objective for R2Objective {
    fn value(&self, set: ElementSet, phi: &Realization) -> f64 {
        let columns: Vec<Vec<f64>> = set
            .iter()
            .map(|v| self.support[v][phi.state(v) as usize].clone())
            .collect();
        r2_value(&columns, &self.response).expect("consistent dimensions")
    }
}

fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Standardizes columns in place to population mean 0 and standard
/// deviation 1 (divide by m statistics).
fn standardize(columns: &mut [Vec<f64>]) {
    for column in columns {
        let m = column.len() as f64;
        let mean: f64 = column.iter().sum::<f64>() / m;
        for x in column.iter_mut() {
            *x -= mean;
        }
        let variance: f64 = column.iter().map(|x| x * x).sum::<f64>() / m;
        let std = variance.sqrt();
        if std > 1e-12 {
            for x in column.iter_mut() {
                *x /= std;
            }
        }
    }
}

/// Synthetic sparse-regression instance: standardized uniform mean
/// matrix, uniform noise of half-width `sigma`, response generated from
/// one hidden noisy draw on a random support with Gaussian coefficients.
pub fn gen_synthetic(n: usize, m: usize, sparsity: usize, sigma: f64, seed: u64) -> Result<FeatureInstance> {
    if sparsity > n {
        return Err(Error::InvalidParams(format!(
            "sparsity {sparsity} exceeds feature count {n}"
        )));
    }
    let mut mean_rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let mut mean: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| mean_rng.gen::<f64>()).collect())
        .collect();
    standardize(&mut mean);

    let mut support_rng = ChaCha8Rng::seed_from_u64(mix(seed, 1));
    let true_support = rand::seq::index::sample(&mut support_rng, n, sparsity).into_vec();

    let mut coeff_rng = ChaCha8Rng::seed_from_u64(mix(seed, 2));
    let true_coeffs: Vec<f64> = (0..sparsity).map(|_| standard_normal(&mut coeff_rng)).collect();

    let sampler_seed = mix(seed, 3);
    let instance_stub = FeatureInstance {
        n,
        m,
        response: vec![0.0; m],
        prior: ColumnPrior::Sampler {
            mean: mean.clone(),
            sigma,
            seed: sampler_seed,
        },
        true_support: None,
        true_coeffs: None,
        hidden: None,
    };
    let hidden_stream = mix(seed, 4);
    let hidden: Vec<Vec<f64>> = (0..n)
        .map(|v| instance_stub.sample_column(v, 0, hidden_stream))
        .collect();

    let mut response = vec![0.0; m];
    for (idx, &v) in true_support.iter().enumerate() {
        for (r, x) in response.iter_mut().zip(&hidden[v]) {
            *r += true_coeffs[idx] * x;
        }
    }

    Ok(FeatureInstance {
        n,
        m,
        response,
        prior: ColumnPrior::Sampler {
            mean,
            sigma,
            seed: sampler_seed,
        },
        true_support: Some(true_support),
        true_coeffs: Some(true_coeffs),
        hidden: Some(hidden),
    })
}

/// Random finite-support instance with unit-norm columns, for oracle
/// cross-checks.
pub fn gen_random_finite(n: usize, m: usize, support: usize, seed: u64) -> FeatureInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0));
    let per_feature: Vec<Vec<(Vec<f64>, f64)>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..support).map(|_| 0.2 + rng.gen::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter()
                .map(|p| {
                    let mut column: Vec<f64> =
                        (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let norm: f64 = column.iter().map(|x| x * x).sum::<f64>().sqrt();
                    for x in &mut column {
                        *x /= norm;
                    }
                    (column, p / total)
                })
                .collect()
        })
        .collect();
    let response: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FeatureInstance {
        n,
        m,
        response,
        prior: ColumnPrior::FiniteSupport { per_feature },
        true_support: None,
        true_coeffs: None,
        hidden: None,
    }
}

/// Non-adaptive greedy on the mean matrix (ignores column noise).
pub fn noise_oblivious_greedy(instance: &FeatureInstance, ell: usize) -> Vec<usize> {
    let mean = instance.mean_columns();
    let mut evaluator = IncrementalR2::new(instance.response.clone());
    let mut selected = Vec::with_capacity(ell);
    let mut chosen = vec![false; instance.n];
    for _ in 0..ell.min(instance.n) {
        let mut best: Option<(usize, f64)> = None;
        for v in 0..instance.n {
            if chosen[v] {
                continue;
            }
            let gain = evaluator.gain(&mean[v]);
            if best.map_or(true, |(_, b)| gain > b) {
                best = Some((v, gain));
            }
        }
        let (v, _) = best.expect("budget <= n leaves a candidate");
        chosen[v] = true;
        evaluator.push(&mean[v]);
        selected.push(v);
    }
    selected
}

fn write_vector(out: &mut String, values: &[f64]) {
    for (i, x) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{x:?}"));
    }
    out.push('\n');
}

/// Serializes an instance to the text format: a header, the response,
/// then either the row-major mean matrix (sampler) or per-feature support
/// lists (finite support).
pub fn save_instance(instance: &FeatureInstance, path: &std::path::Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("adasub-feature-v1\n");
    out.push_str(&format!("n {}\n", instance.n));
    out.push_str(&format!("m {}\n", instance.m));
    match &instance.prior {
        ColumnPrior::Sampler { mean, sigma, seed } => {
            out.push_str(&format!("prior sampler {sigma:?} {seed}\n"));
            out.push_str("response ");
            write_vector(&mut out, &instance.response);
            for row in 0..instance.m {
                let row_values: Vec<f64> = mean.iter().map(|c| c[row]).collect();
                write_vector(&mut out, &row_values);
            }
        }
        ColumnPrior::FiniteSupport { per_feature } => {
            out.push_str("prior finite\n");
            out.push_str("response ");
            write_vector(&mut out, &instance.response);
            for support in per_feature {
                out.push_str(&format!("support {}\n", support.len()));
                for (column, p) in support {
                    out.push_str(&format!("{p:?} "));
                    write_vector(&mut out, column);
                }
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn load_instance(path: &std::path::Path) -> Result<FeatureInstance> {
    let text = std::fs::read_to_string(path)?;
    parse_instance(&text)
}

pub fn parse_instance(text: &str) -> Result<FeatureInstance> {
    let mut lines = text.lines().enumerate();
    let mut next_line = |expect: &str| -> Result<(usize, String)> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l.to_string()))
            .ok_or_else(|| Error::ParseError {
                line: 0,
                msg: format!("unexpected end of file, expected {expect}"),
            })
    };
    let parse_fail = |line: usize, msg: &str| Error::ParseError {
        line,
        msg: msg.to_string(),
    };

    let (line, header) = next_line("header")?;
    if header.trim() != "adasub-feature-v1" {
        return Err(parse_fail(line, "bad header"));
    }
    let parse_count = |line: usize, text: &str, key: &str| -> Result<usize> {
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 2 || fields[0] != key {
            return Err(parse_fail(line, &format!("expected `{key} <count>`")));
        }
        fields[1]
            .parse()
            .map_err(|_| parse_fail(line, &format!("bad {key}")))
    };
    let (line_n, text_n) = next_line("n")?;
    let n = parse_count(line_n, &text_n, "n")?;
    let (line_m, text_m) = next_line("m")?;
    let m = parse_count(line_m, &text_m, "m")?;

    let (prior_line, prior_text) = next_line("prior")?;
    let prior_fields: Vec<String> = prior_text.split_whitespace().map(String::from).collect();

    let parse_floats = |line: usize, text: &str, skip: usize, expect: usize| -> Result<Vec<f64>> {
        let values: Vec<f64> = text
            .split_whitespace()
            .skip(skip)
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_fail(line, "bad number"))?;
        if values.len() != expect {
            return Err(parse_fail(
                line,
                &format!("expected {expect} values, got {}", values.len()),
            ));
        }
        Ok(values)
    };

    let (resp_line, resp_text) = next_line("response")?;
    if !resp_text.starts_with("response") {
        return Err(parse_fail(resp_line, "expected response line"));
    }
    let response = parse_floats(resp_line, &resp_text, 1, m)?;

    let prior = match prior_fields.get(1).map(String::as_str) {
        Some("sampler") => {
            if prior_fields.len() != 4 {
                return Err(parse_fail(prior_line, "expected `prior sampler <sigma> <seed>`"));
            }
            let sigma: f64 = prior_fields[2]
                .parse()
                .map_err(|_| parse_fail(prior_line, "bad sigma"))?;
            let seed: u64 = prior_fields[3]
                .parse()
                .map_err(|_| parse_fail(prior_line, "bad seed"))?;
            let mut mean = vec![vec![0.0; m]; n];
            for row in 0..m {
                let (line, text) = next_line("mean matrix row")?;
                let values = parse_floats(line, &text, 0, n)?;
                for (v, x) in values.into_iter().enumerate() {
                    mean[v][row] = x;
                }
            }
            ColumnPrior::Sampler { mean, sigma, seed }
        }
        Some("finite") => {
            let mut per_feature = Vec::with_capacity(n);
            for _ in 0..n {
                let (line, text) = next_line("support header")?;
                let count = parse_count(line, &text, "support")?;
                let mut support = Vec::with_capacity(count);
                for _ in 0..count {
                    let (line, text) = next_line("support point")?;
                    let values = parse_floats(line, &text, 0, m + 1)?;
                    support.push((values[1..].to_vec(), values[0]));
                }
                per_feature.push(support);
            }
            ColumnPrior::FiniteSupport { per_feature }
        }
        _ => return Err(parse_fail(prior_line, "unknown prior kind")),
    };

    Ok(FeatureInstance {
        n,
        m,
        response,
        prior,
        true_support: None,
        true_coeffs: None,
        hidden: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brute::{adaptivity_gap_exact, gamma_level, DEFAULT_CAP};
    use crate::core::{gain_element, PartialRealization};

    #[test]
    fn r2_basics() {
        assert_eq!(r2_value(&[], &[1.0, 2.0]).unwrap(), 0.0);
        // Response in the span of the columns: full reduction.
        let columns = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let b = vec![2.0, -1.0, 0.0];
        assert!((r2_value(&columns, &b).unwrap() - 5.0).abs() < 1e-12);
        // Orthogonal response: no reduction.
        let b = vec![0.0, 0.0, 3.0];
        assert!(r2_value(&columns, &b).unwrap().abs() < 1e-12);
    }

    #[test]
    fn incremental_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = 6;
            let columns: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let response: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut inc = IncrementalR2::new(response.clone());
            for count in 1..=columns.len() {
                let gain = inc.gain(&columns[count - 1]);
                inc.push(&columns[count - 1]);
                let batch = r2_value(&columns[..count], &response).unwrap();
                assert!(
                    (inc.value() - batch).abs() < 1e-9,
                    "{} vs {batch}",
                    inc.value()
                );
                assert!((gain - (inc.value() - r2_value(&columns[..count - 1], &response).unwrap())).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_point_prior_gain_is_exact() {
        let instance = gen_random_finite(3, 4, 1, 5);
        let gain = instance
            .adaptive_gain_mc(0, &ObservedColumns::empty(), 0, 0)
            .unwrap();
        assert_eq!(gain.sample_count, 0);
        let ColumnPrior::FiniteSupport { per_feature } = &instance.prior else {
            unreachable!()
        };
        let direct = r2_value(&[per_feature[0][0].0.clone()], &instance.response).unwrap();
        assert!((gain.value - direct).abs() < 1e-9);
    }

    #[test]
    fn finite_gain_matches_tabular_oracle() {
        for seed in 0..5u64 {
            let instance = gen_random_finite(3, 4, 2, seed);
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            let ColumnPrior::FiniteSupport { per_feature } = &instance.prior else {
                unreachable!()
            };
            // Empty history.
            for v in 0..3 {
                let mc = instance
                    .adaptive_gain_mc(v, &ObservedColumns::empty(), 0, 0)
                    .unwrap()
                    .value;
                let exact = gain_element(&f, &prior, v, &PartialRealization::empty())
                    .unwrap()
                    .value;
                assert!((mc - exact).abs() < 1e-9, "seed={seed} v={v}: {mc} vs {exact}");
            }
            // One observation.
            for v in 0..3 {
                for state in 0..2u32 {
                    let mut observed = ObservedColumns::empty();
                    observed
                        .push(v, per_feature[v][state as usize].0.clone())
                        .unwrap();
                    let psi = PartialRealization::from_entries(vec![(v, state)]).unwrap();
                    for w in 0..3 {
                        if w == v {
                            continue;
                        }
                        let mc = instance.adaptive_gain_mc(w, &observed, 0, 0).unwrap().value;
                        let exact = gain_element(&f, &prior, w, &psi).unwrap().value;
                        assert!((mc - exact).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn orthonormal_bounds_are_unit() {
        let per_feature = vec![
            vec![(vec![1.0, 0.0, 0.0], 1.0)],
            vec![(vec![0.0, 1.0, 0.0], 1.0)],
            vec![(vec![0.0, 0.0, 1.0], 1.0)],
        ];
        let instance = FeatureInstance {
            n: 3,
            m: 3,
            response: vec![1.0, 1.0, 1.0],
            prior: ColumnPrior::FiniteSupport { per_feature },
            true_support: None,
            true_coeffs: None,
            hidden: None,
        };
        let bounds = instance.eigen_bounds_bruteforce(3, DEFAULT_CAP).unwrap();
        assert!((bounds.lambda_min - 1.0).abs() < 1e-9);
        assert!((bounds.lambda_max - 1.0).abs() < 1e-9);
        assert!(bounds.columns_normalized);
        assert!((instance.ratio_lower_bound(1, 2, DEFAULT_CAP).unwrap() - 1.0).abs() < 1e-9);
        assert!((instance.gap_lower_bound(2, DEFAULT_CAP).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn r2_is_monotone_in_set() {
        for seed in 0..5u64 {
            let instance = gen_random_finite(4, 5, 2, seed);
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            for (phi, _) in prior.support() {
                for mask in 0u64..(1 << 4) {
                    let set = ElementSet(mask);
                    for v in 0..4 {
                        if set.contains(v) {
                            continue;
                        }
                        let mut with = set;
                        with.insert(v);
                        assert!(f.value(with, phi) + 1e-9 >= f.value(set, phi));
                    }
                }
            }
        }
    }

    #[test]
    fn eigen_bound_certifies_gamma_and_gap() {
        for seed in 0..5u64 {
            let instance = gen_random_finite(3, 4, 2, seed);
            let (prior, f) = instance.to_tabular(DEFAULT_CAP).unwrap();
            let (ell, k) = (1, 2);
            let gamma = gamma_level(&f, &prior, ell, k, DEFAULT_CAP).unwrap().value;
            let bound = instance.ratio_lower_bound(ell, k, DEFAULT_CAP).unwrap();
            assert!(gamma >= bound - 1e-9, "seed={seed}: {gamma} < {bound}");

            let gap = adaptivity_gap_exact(&f, &prior, k, DEFAULT_CAP).unwrap().value;
            let gap_bound = instance.gap_lower_bound(k, DEFAULT_CAP).unwrap();
            assert!(gap >= gap_bound - 1e-9, "seed={seed}: {gap} < {gap_bound}");
        }
    }

    #[test]
    fn synthetic_generator_contracts() {
        let a = gen_synthetic(10, 8, 3, 0.1, 7).unwrap();
        let b = gen_synthetic(10, 8, 3, 0.1, 7).unwrap();
        assert_eq!(a.response, b.response);
        assert_eq!(a.mean_columns(), b.mean_columns());
        assert_eq!(a.true_support, b.true_support);

        // Standardization: population mean 0, standard deviation 1.
        for column in a.mean_columns() {
            let m = column.len() as f64;
            let mean: f64 = column.iter().sum::<f64>() / m;
            let var: f64 = column.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-9);
        }

        // Zero noise: sampled columns equal the mean columns.
        let det = gen_synthetic(6, 5, 2, 0.0, 11).unwrap();
        let mean = det.mean_columns();
        for v in 0..det.n {
            let sample = det.sample_column(v, 3, 42);
            for (a, b) in sample.iter().zip(&mean[v]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_oblivious_matches_adaptive_when_deterministic() {
        let instance = gen_synthetic(8, 6, 3, 0.0, 13).unwrap();
        let oblivious = noise_oblivious_greedy(&instance, 4);
        // Adaptive greedy with zero noise observes exactly the mean.
        let mut observed = ObservedColumns::empty();
        let mut adaptive = Vec::new();
        for _ in 0..4 {
            let mut best: Option<(usize, f64)> = None;
            for v in 0..instance.n {
                if observed.contains(v) {
                    continue;
                }
                let gain = instance.adaptive_gain_mc(v, &observed, 1, 99).unwrap().value;
                if best.map_or(true, |(_, b)| gain > b) {
                    best = Some((v, gain));
                }
            }
            let (v, _) = best.unwrap();
            observed.push(v, instance.sample_column(v, 0, 1)).unwrap();
            adaptive.push(v);
        }
        assert_eq!(oblivious, adaptive);
    }

    #[test]
    fn serialization_round_trip() {
        let dir = std::env::temp_dir();

        let sampler = gen_synthetic(5, 4, 2, 0.2, 3).unwrap();
        let path = dir.join("adasub_test_sampler.txt");
        save_instance(&sampler, &path).unwrap();
        let loaded = load_instance(&path).unwrap();
        assert_eq!(loaded.n, sampler.n);
        assert_eq!(loaded.m, sampler.m);
        assert_eq!(loaded.response, sampler.response);
        assert_eq!(loaded.mean_columns(), sampler.mean_columns());

        let finite = gen_random_finite(3, 4, 2, 9);
        let path = dir.join("adasub_test_finite.txt");
        save_instance(&finite, &path).unwrap();
        let loaded = load_instance(&path).unwrap();
        let (ColumnPrior::FiniteSupport { per_feature: a }, ColumnPrior::FiniteSupport { per_feature: b }) =
            (&finite.prior, &loaded.prior)
        else {
            panic!("prior kind changed in round trip");
        };
        assert_eq!(a, b);

        let err = parse_instance("wrong-header\n").unwrap_err();
        assert!(matches!(err, Error::ParseError { .. }));
    }

    #[test]
    fn mc_estimator_stabilizes_with_samples() {
        let instance = gen_synthetic(4, 10, 2, 0.3, 17).unwrap();
        let mut within = 0;
        let trials = 100u64;
        let n_coarse = 1usize << 10;
        let n_fine = 1u64 << 14;
        for trial in 0..trials {
            let seed = mix(1234, trial);
            let evaluator = IncrementalR2::new(instance.response.clone());
            let draws: Vec<f64> = (0..n_fine)
                .map(|s| evaluator.gain(&instance.sample_column(0, s, seed)))
                .collect();
            let fine: f64 = draws.iter().sum::<f64>() / n_fine as f64;
            let coarse: f64 = draws[..n_coarse].iter().sum::<f64>() / n_coarse as f64;
            let var: f64 = draws[..n_coarse]
                .iter()
                .map(|x| (x - coarse) * (x - coarse))
                .sum::<f64>()
                / (n_coarse - 1) as f64;
            let se_coarse = (var / n_coarse as f64).sqrt();
            let reported = instance
                .adaptive_gain_mc(0, &ObservedColumns::empty(), n_coarse as u64, seed)
                .unwrap();
            assert!((reported.value - coarse).abs() < 1e-12);
            assert_eq!(reported.sample_count, n_coarse as u64);
            if (coarse - fine).abs() < 3.0 * se_coarse {
                within += 1;
            }
        }
        assert!(within >= 95, "only {within}/{trials} within tolerance");
    }
}
