//! Experiment harness and verification driver.
//!
//! Subcommands: `infmax` and `feature` run seeded benchmark experiments and
//! emit CSV; `ratio` brute-forces the approximation diagnostics of a named
//! instance; `verify` replays the built-in constructions against their
//! closed forms. All randomness flows from one root seed through
//! `seed::mix`, so identical invocations produce byte-identical output.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adasub::brute::{
    adaptivity_gap_exact, beta_nonadaptive, gamma_adaptive, gamma_level, ratio_of_policy,
    verify_gap_bound, verify_zeta_vs_gamma, zeta_star, MetricReport, RatioQuery, Witness,
    DEFAULT_CAP,
};
use adasub::cases::{
    build_chain, build_diagnosis, build_f4_instance, build_kusner, build_tight_gap, lemma_b2_lhs,
    ChainParams, KusnerParams, TightGapParams,
};
use adasub::core::{
    avg_value, gain_element, gain_policy, ElementSet, Objective, PartialRealization, PolicyTree,
    TabularPrior,
};
use adasub::features::{
    gen_random_finite, gen_synthetic, noise_oblivious_greedy, r2_value, FeatureInstance,
    IncrementalR2, ObservedColumns,
};
use adasub::infmax::{
    degree_baseline, gen_erdos_renyi, gen_random_triggering, gen_star, load_edge_list, spread_of,
    BipartiteGraph, EdgeStateModel, InfluenceInstance, ModelKind,
};
use adasub::policies::{
    adaptive_greedy_policy, adaptive_greedy_with, optimal_policy_exhaustive, random_policy,
};
use adasub::seed::mix;
use adasub::{Error, Result};

#[derive(Parser)]
#[command(name = "adasub", version, about = "Adaptive stochastic optimization workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Influence maximization benchmark on bipartite graphs.
    Infmax(InfmaxArgs),
    /// Feature selection benchmark on synthetic regression instances.
    Feature(FeatureArgs),
    /// Brute-force ratio report (gamma, beta, zeta*, gap) for an instance.
    Ratio(RatioArgs),
    /// Replay a built-in construction against its known values.
    Verify(VerifyArgs),
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::ParseError { .. }
                | Error::InvalidParams(_)
                | Error::InvalidInput(_)
                | Error::UnknownCase(_) => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Infmax(args) => run_infmax(args).map(|_| true),
        Command::Feature(args) => run_feature(args).map(|_| true),
        Command::Ratio(args) => run_ratio(args).map(|_| true),
        Command::Verify(args) => run_verify(args),
    }
}

/// Key-value config file: one `key = value` per line, `#` comments.
/// Keys match the long flag names; flags override file entries.
struct Config(HashMap<String, String>);

impl Config {
    fn load(path: Option<&Path>) -> Result<Config> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (idx, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or(Error::ParseError {
                    line: idx + 1,
                    msg: "expected `key = value`".into(),
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(Config(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(value) = flag {
            return Ok(value);
        }
        match self.0.get(key) {
            Some(raw) => raw.parse().map_err(|_| {
                Error::InvalidInput(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
            None => Ok(default),
        }
    }
}

/// Enumeration cap: flag, then config `cap`, then `ADASUB_CAP`, then the
/// library default.
fn resolve_cap(flag: Option<u64>, cfg: &Config) -> Result<u64> {
    if let Some(cap) = flag {
        return Ok(cap);
    }
    if let Some(raw) = cfg.raw("cap") {
        return raw
            .parse()
            .map_err(|_| Error::InvalidInput(format!("config key `cap`: cannot parse `{raw}`")));
    }
    if let Ok(raw) = std::env::var("ADASUB_CAP") {
        return raw
            .parse()
            .map_err(|_| Error::InvalidInput(format!("ADASUB_CAP: cannot parse `{raw}`")));
    }
    Ok(DEFAULT_CAP)
}

struct Row {
    trial: usize,
    algorithm: &'static str,
    budget: usize,
    value: f64,
    seed: u64,
    runtime_ms: u64,
}

fn write_csv(mut rows: Vec<Row>, root_seed: u64, out: Option<&Path>) -> Result<()> {
    rows.sort_by(|a, b| (a.trial, a.algorithm, a.budget).cmp(&(b.trial, b.algorithm, b.budget)));
    let mut text = String::from("trial,algorithm,budget,value,seed,runtime_ms\n");
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{:.9},{},{}",
            r.trial, r.algorithm, r.budget, r.value, r.seed, r.runtime_ms
        )
        .expect("writing to a string");
    }
    let mut groups: BTreeMap<(&str, usize), (f64, usize)> = BTreeMap::new();
    for r in &rows {
        let slot = groups.entry((r.algorithm, r.budget)).or_insert((0.0, 0));
        slot.0 += r.value;
        slot.1 += 1;
    }
    for ((algorithm, budget), (sum, count)) in groups {
        writeln!(
            text,
            "mean,{},{},{:.9},{},0",
            algorithm,
            budget,
            sum / count as f64,
            root_seed
        )
        .expect("writing to a string");
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn elapsed_ms(timings: bool, started: Instant) -> u64 {
    if timings {
        started.elapsed().as_millis() as u64
    } else {
        0
    }
}

#[derive(Args)]
struct InfmaxArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph source: er, star, or file.
    #[arg(long)]
    graph: Option<String>,
    /// Edge-list file for `--graph file`.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Diffusion model: ic, ic-random, lt, or elt.
    #[arg(long)]
    model: Option<String>,
    /// IC per-edge alive probability.
    #[arg(long)]
    q: Option<f64>,
    /// Extended LT with-replacement sample count.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    n_src: Option<usize>,
    #[arg(long)]
    n_sink: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    /// Budget; values are reported for every budget 1..=k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock runtimes (off by default so output stays
    /// byte-deterministic).
    #[arg(long)]
    timings: bool,
}

fn parse_model_kind(model: &str, q: f64, t: u32) -> Result<ModelKind> {
    match model {
        "ic" => Ok(ModelKind::Ic { q }),
        "ic-random" => Ok(ModelKind::IcRandom),
        "lt" => Ok(ModelKind::Lt),
        "elt" => Ok(ModelKind::ExtendedLt { t }),
        other => Err(Error::InvalidInput(format!("unknown model `{other}`"))),
    }
}

fn instance_from_file(
    graph: BipartiteGraph,
    params: Vec<f64>,
    model: &str,
    t: u32,
) -> Result<InfluenceInstance> {
    let model = match model {
        "ic" => EdgeStateModel::IC { q: params },
        "lt" => EdgeStateModel::LT { b: params },
        "elt" => EdgeStateModel::ExtendedLT { t },
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown model `{other}` for an edge-list graph"
            )))
        }
    };
    InfluenceInstance::new(graph, model)
}

fn run_infmax(args: InfmaxArgs) -> Result<()> {
    let cfg = Config::load(args.config.as_deref())?;
    let graph_kind = cfg.get(args.graph, "graph", "er".to_string())?;
    let model = cfg.get(args.model, "model", "lt".to_string())?;
    let q = cfg.get(args.q, "q", 0.1)?;
    let t = cfg.get(args.t, "t", 3)?;
    let n_src = cfg.get(args.n_src, "n-src", 100)?;
    let n_sink = cfg.get(args.n_sink, "n-sink", 100)?;
    let edge_prob = cfg.get(args.edge_prob, "edge-prob", 0.01)?;
    let k = cfg.get(args.k, "k", 25)?;
    let trials = cfg.get(args.trials, "trials", 20)?;
    let seed = cfg.get(args.seed, "seed", 0)?;
    let out = args
        .out
        .or_else(|| cfg.raw("out").map(PathBuf::from));
    if trials < 1 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let kind = parse_model_kind(&model, q, t)?;
    let loaded = if graph_kind == "file" {
        let path = args
            .graph_file
            .or_else(|| cfg.raw("graph-file").map(PathBuf::from))
            .ok_or_else(|| Error::InvalidInput("`--graph file` requires --graph-file".into()))?;
        Some(load_edge_list(&path)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for trial in 0..trials {
        let tseed = mix(seed, trial as u64);
        let instance = match graph_kind.as_str() {
            "er" => gen_erdos_renyi(n_src, n_sink, edge_prob, kind, mix(tseed, 0))?,
            "star" => gen_star(k)?,
            "file" => {
                let (graph, params) = loaded.clone().expect("loaded above");
                instance_from_file(graph, params, &model, t)?
            }
            other => return Err(Error::InvalidInput(format!("unknown graph kind `{other}`"))),
        };
        let n = instance.graph.n_src;
        if k > n {
            return Err(Error::InvalidParams(format!(
                "budget {k} exceeds the {n} sources"
            )));
        }
        let mut edge_rng = ChaCha8Rng::seed_from_u64(mix(tseed, 1));
        let alive = instance.sample_edges(&mut edge_rng);
        let phi = instance.realization_from_edges(&alive);
        let record = |rows: &mut Vec<Row>, algorithm, order: &[usize], runtime_ms| {
            for budget in 1..=k {
                let prefix = &order[..budget.min(order.len())];
                rows.push(Row {
                    trial,
                    algorithm,
                    budget,
                    value: spread_of(&instance.graph, prefix, &alive),
                    seed: tseed,
                    runtime_ms,
                });
            }
        };

        let started = Instant::now();
        let greedy = adaptive_greedy_with(
            n,
            k,
            false,
            |psi, v| Ok(instance.adaptive_gain(v, psi)?.value),
            |v| Ok(phi.state(v)),
        )?;
        record(&mut rows, "adaptive-greedy", &greedy.selected, elapsed_ms(args.timings, started));

        let started = Instant::now();
        let mut selected = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for v in 0..n {
                if selected.contains(&v) {
                    continue;
                }
                selected.push(v);
                let value = instance.expected_spread_of(&selected);
                selected.pop();
                if best.map_or(true, |(_, b)| value > b) {
                    best = Some((v, value));
                }
            }
            selected.push(best.expect("budget <= n leaves a candidate").0);
        }
        record(&mut rows, "nonadaptive-greedy", &selected, elapsed_ms(args.timings, started));

        let started = Instant::now();
        let degree = degree_baseline(&instance.graph, k);
        record(&mut rows, "degree", &degree, elapsed_ms(args.timings, started));

        let started = Instant::now();
        let random = random_policy(n, k, mix(tseed, 2));
        record(&mut rows, "random", &random, elapsed_ms(args.timings, started));
    }
    write_csv(rows, seed, out.as_deref())
}

#[derive(Args)]
struct FeatureArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of candidate features.
    #[arg(long)]
    n: Option<usize>,
    /// Number of observations (rows).
    #[arg(long)]
    m: Option<usize>,
    /// Ground-truth support size of the response.
    #[arg(long)]
    sparsity: Option<usize>,
    /// Column noise half-width.
    #[arg(long)]
    sigma: Option<f64>,
    /// Budget; values are reported for every budget 1..=k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples per expected-gain estimate.
    #[arg(long)]
    samples: Option<u64>,
    /// CSV output path (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock runtimes (off by default so output stays
    /// byte-deterministic).
    #[arg(long)]
    timings: bool,
}

fn run_feature(args: FeatureArgs) -> Result<()> {
    let cfg = Config::load(args.config.as_deref())?;
    let n = cfg.get(args.n, "n", 200)?;
    let m = cfg.get(args.m, "m", 50)?;
    let sparsity = cfg.get(args.sparsity, "sparsity", 10)?;
    let sigma = cfg.get(args.sigma, "sigma", 0.2)?;
    let k = cfg.get(args.k, "k", 30)?;
    let trials = cfg.get(args.trials, "trials", 20)?;
    let seed = cfg.get(args.seed, "seed", 0)?;
    let samples = cfg.get(args.samples, "samples", 64)?;
    let out = args
        .out
        .or_else(|| cfg.raw("out").map(PathBuf::from));
    if trials < 1 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParams(format!(
            "budget {k} exceeds the {n} features"
        )));
    }
    if samples < 1 {
        return Err(Error::InvalidParams("samples must be at least 1".into()));
    }

    let mut rows = Vec::new();
    for trial in 0..trials {
        let tseed = mix(seed, trial as u64);
        let instance = gen_synthetic(n, m, sparsity, sigma, mix(tseed, 0))?;
        let hidden = instance
            .hidden
            .clone()
            .expect("generator records the hidden realization");
        let mc_seed = mix(tseed, 1);
        let record = |rows: &mut Vec<Row>, algorithm, order: &[usize], runtime_ms| -> Result<()> {
            for budget in 1..=k {
                let columns: Vec<Vec<f64>> = order[..budget]
                    .iter()
                    .map(|&v| hidden[v].clone())
                    .collect();
                rows.push(Row {
                    trial,
                    algorithm,
                    budget,
                    value: r2_value(&columns, &instance.response)?,
                    seed: tseed,
                    runtime_ms,
                });
            }
            Ok(())
        };

        // Adaptive greedy sees the realized column of everything selected.
        let started = Instant::now();
        let mut observed = ObservedColumns::empty();
        let mut adaptive = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for v in 0..n {
                if observed.contains(v) {
                    continue;
                }
                let g = instance.adaptive_gain_mc(v, &observed, samples, mc_seed)?.value;
                if best.map_or(true, |(_, b)| g > b) {
                    best = Some((v, g));
                }
            }
            let (v, _) = best.expect("budget <= n leaves a candidate");
            observed.push(v, hidden[v].clone())?;
            adaptive.push(v);
        }
        record(&mut rows, "adaptive-greedy", &adaptive, elapsed_ms(args.timings, started))?;

        // Non-adaptive greedy never observes columns: expected gains over
        // shared per-sample draws, with per-sample projection state.
        let started = Instant::now();
        let mut states: Vec<IncrementalR2> = (0..samples)
            .map(|_| IncrementalR2::new(instance.response.clone()))
            .collect();
        let mut taken = vec![false; n];
        let mut nonadaptive = Vec::with_capacity(k);
        for _ in 0..k {
            let mut best: Option<(usize, f64)> = None;
            for v in 0..n {
                if taken[v] {
                    continue;
                }
                let mut acc = 0.0;
                for (s, state) in states.iter().enumerate() {
                    acc += state.gain(&instance.sample_column(v, s as u64, mc_seed));
                }
                let g = acc / samples as f64;
                if best.map_or(true, |(_, b)| g > b) {
                    best = Some((v, g));
                }
            }
            let (v, _) = best.expect("budget <= n leaves a candidate");
            for (s, state) in states.iter_mut().enumerate() {
                state.push(&instance.sample_column(v, s as u64, mc_seed));
            }
            taken[v] = true;
            nonadaptive.push(v);
        }
        record(&mut rows, "nonadaptive-greedy", &nonadaptive, elapsed_ms(args.timings, started))?;

        let started = Instant::now();
        let oblivious = noise_oblivious_greedy(&instance, k);
        record(&mut rows, "noise-oblivious", &oblivious, elapsed_ms(args.timings, started))?;
    }
    write_csv(rows, seed, out.as_deref())
}

#[derive(Args)]
struct RatioArgs {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named instance: star, chain, tightgap, ic-random, or file.
    #[arg(long)]
    instance: Option<String>,
    /// Policy height / set size the ratios are computed at.
    #[arg(long)]
    k: Option<usize>,
    /// Chain length.
    #[arg(long)]
    ell: Option<usize>,
    /// Chain side-edge probability.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tight-gap group payoff.
    #[arg(long)]
    a: Option<f64>,
    /// Tight-gap pivot state probability (must equal 1/M).
    #[arg(long)]
    p: Option<f64>,
    /// Tight-gap group count.
    #[arg(long = "M")]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Enumeration cap (also settable via ADASUB_CAP).
    #[arg(long)]
    cap: Option<u64>,
    /// Edge-list file for `--instance file`.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Model for `--instance file`: ic, lt, or elt.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    t: Option<u32>,
    /// Optional CSV dump of the four metrics.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn fmt_value(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.9}")
    }
}

fn fmt_set(set: ElementSet) -> String {
    let inner: Vec<String> = set.iter().map(|v| format!("v{v}")).collect();
    format!("{{{}}}", inner.join(", "))
}

fn fmt_psi(psi: &PartialRealization) -> String {
    let inner: Vec<String> = psi
        .entries()
        .iter()
        .map(|&(v, y)| format!("(v{v}, {y})"))
        .collect();
    format!("[{}]", inner.join(", "))
}

fn fmt_tree(tree: &PolicyTree) -> String {
    match tree {
        PolicyTree::Leaf => "stop".to_string(),
        PolicyTree::Node { element, children } => {
            let inner: Vec<String> = children
                .iter()
                .map(|(y, child)| format!("{y}: {}", fmt_tree(child)))
                .collect();
            format!("v{element}{{{}}}", inner.join(", "))
        }
    }
}

fn print_metric(label: &str, report: &MetricReport) {
    println!("{label} = {}", fmt_value(report.value));
    match &report.witness {
        Witness::RatioPolicy { psi, tree, numerator, denominator } => {
            println!("  witness history: {}", fmt_psi(psi));
            println!("  witness tree: {}", fmt_tree(tree));
            println!(
                "  ratio: {} / {}",
                fmt_value(*numerator),
                fmt_value(*denominator)
            );
        }
        Witness::SetPair { base, set, numerator, denominator } => {
            println!("  witness base: {}", fmt_set(*base));
            println!("  witness set: {}", fmt_set(*set));
            println!(
                "  ratio: {} / {}",
                fmt_value(*numerator),
                fmt_value(*denominator)
            );
        }
        Witness::HistoryPair { inner, outer, element, numerator, denominator } => {
            println!("  witness histories: {} in {}", fmt_psi(inner), fmt_psi(outer));
            println!("  witness element: v{element}");
            println!(
                "  ratio: {} / {}",
                fmt_value(*numerator),
                fmt_value(*denominator)
            );
        }
        Witness::GapPair { set, tree, numerator, denominator } => {
            println!("  witness set: {}", fmt_set(*set));
            println!("  witness tree: {}", fmt_tree(tree));
            println!(
                "  ratio: {} / {}",
                fmt_value(*numerator),
                fmt_value(*denominator)
            );
        }
        Witness::None => {}
    }
    if report.skipped_zero_prob > 0 {
        println!(
            "  skipped zero-probability histories: {}",
            report.skipped_zero_prob
        );
    }
}

fn run_ratio(args: RatioArgs) -> Result<()> {
    let cfg = Config::load(args.config.as_deref())?;
    let cap = resolve_cap(args.cap, &cfg)?;
    let name = cfg.get(args.instance, "instance", "star".to_string())?;
    let seed = cfg.get(args.seed, "seed", 0)?;
    let mut notes: Vec<String> = Vec::new();

    let (prior, objective, k): (TabularPrior, Box<dyn Objective>, usize) = match name.as_str() {
        "star" => {
            let k = cfg.get(args.k, "k", 2)?;
            let (prior, objective) = gen_star(k)?.to_tabular(cap)?;
            (prior, Box::new(objective), k)
        }
        "chain" => {
            let ell = cfg.get(args.ell, "ell", 2)?;
            let epsilon = cfg.get(args.epsilon, "epsilon", 0.5)?;
            let case = build_chain(&ChainParams { ell, epsilon })?;
            let k = cfg.get(args.k, "k", ell)?;
            let (num, den) = ratio_of_policy(
                &case.objective,
                &case.prior,
                &PartialRealization::empty(),
                &case.policy,
            )?;
            notes.push(format!("certified bound = {}", fmt_value(case.bound)));
            notes.push(format!(
                "explicit policy ratio = {} / {} = {}",
                fmt_value(num),
                fmt_value(den),
                fmt_value(num / den)
            ));
            (case.prior, Box::new(case.objective), k)
        }
        "tightgap" => {
            let k = cfg.get(args.k, "k", 2)?;
            let a = cfg.get(args.a, "a", 5.0)?;
            let m = cfg.get(args.m, "M", 5)?;
            let p = cfg.get(args.p, "p", 1.0 / m as f64)?;
            let case = build_tight_gap(&TightGapParams { k, a, m, p })?;
            notes.push(format!(
                "closed forms: beta = {}, gamma = {}, gap = {}",
                fmt_value(case.beta),
                fmt_value(case.gamma),
                fmt_value(case.gap)
            ));
            (case.prior, Box::new(case.objective), k)
        }
        "ic-random" => {
            let k = cfg.get(args.k, "k", 2)?;
            let instance = gen_erdos_renyi(4, 3, 0.5, ModelKind::IcRandom, seed)?;
            let (prior, objective) = instance.to_tabular(cap)?;
            (prior, Box::new(objective), k)
        }
        "file" => {
            let k = cfg.get(args.k, "k", 2)?;
            let model = cfg.get(args.model, "model", "ic".to_string())?;
            let t = cfg.get(args.t, "t", 3)?;
            let path = args
                .graph_file
                .or_else(|| cfg.raw("graph-file").map(PathBuf::from))
                .ok_or_else(|| {
                    Error::InvalidInput("`--instance file` requires --graph-file".into())
                })?;
            let (graph, params) = load_edge_list(&path)?;
            let instance = instance_from_file(graph, params, &model, t)?;
            let (prior, objective) = instance.to_tabular(cap)?;
            (prior, Box::new(objective), k)
        }
        other => return Err(Error::InvalidInput(format!("unknown instance `{other}`"))),
    };

    let n = prior.n_elements();
    println!("instance: {name} (n = {n}, k = {k})");
    for note in &notes {
        println!("{note}");
    }
    let f: &dyn Objective = &*objective;
    let gamma = gamma_adaptive(
        f,
        &prior,
        &RatioQuery { psi: PartialRealization::empty(), k },
        cap,
    )?;
    print_metric("gamma", &gamma);
    let expected = |set: ElementSet| -> f64 {
        prior
            .support()
            .iter()
            .map(|(phi, p)| p * f.value(set, phi))
            .sum()
    };
    let beta = beta_nonadaptive(expected, n, ElementSet::EMPTY, k, cap)?;
    print_metric("beta", &beta);
    let zeta = zeta_star(f, &prior, cap)?;
    print_metric("zeta_star", &zeta);
    let gap = adaptivity_gap_exact(f, &prior, k, cap)?;
    print_metric("gap", &gap);

    if let Some(path) = args.out.or_else(|| cfg.raw("out").map(PathBuf::from)) {
        let mut text = String::from("metric,value\n");
        for (label, report) in [
            ("gamma", &gamma),
            ("beta", &beta),
            ("zeta_star", &zeta),
            ("gap", &gap),
        ] {
            writeln!(text, "{label},{}", fmt_value(report.value)).expect("writing to a string");
        }
        std::fs::write(path, text)?;
    }
    Ok(())
}

#[derive(Args)]
struct VerifyArgs {
    /// Case: tightgap, kusner, ygo, chain, f4, lemma-b2, greedy-bound,
    /// gap-bound, zeta-vs-gamma, or all.
    case: String,
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enumeration cap (also settable via ADASUB_CAP).
    #[arg(long)]
    cap: Option<u64>,
}

const ALL_CASES: [&str; 9] = [
    "tightgap",
    "kusner",
    "ygo",
    "chain",
    "f4",
    "lemma-b2",
    "greedy-bound",
    "gap-bound",
    "zeta-vs-gamma",
];

fn run_verify(args: VerifyArgs) -> Result<bool> {
    let cfg = Config::load(args.config.as_deref())?;
    let cap = resolve_cap(args.cap, &cfg)?;
    let cases: Vec<&str> = if args.case == "all" {
        ALL_CASES.to_vec()
    } else {
        vec![args.case.as_str()]
    };
    let mut all_pass = true;
    for case in cases {
        let passed = match case {
            "tightgap" => verify_tightgap(cap)?,
            "kusner" => verify_kusner(cap)?,
            "ygo" => verify_ygo(cap)?,
            "chain" => verify_chain(cap)?,
            "f4" => verify_f4(cap)?,
            "lemma-b2" => verify_lemma_b2()?,
            "greedy-bound" => verify_greedy_bound(cap)?,
            "gap-bound" => verify_gap_bound_suite(cap)?,
            "zeta-vs-gamma" => verify_zeta_suite(cap)?,
            other => return Err(Error::UnknownCase(other.to_string())),
        };
        println!("{case}: {}", if passed { "PASS" } else { "FAIL" });
        all_pass &= passed;
    }
    Ok(all_pass)
}

const TOL: f64 = 1e-9;

fn expected_closure<'a>(
    f: &'a dyn Objective,
    prior: &'a TabularPrior,
) -> impl Fn(ElementSet) -> f64 + 'a {
    move |set| {
        prior
            .support()
            .iter()
            .map(|(phi, p)| p * f.value(set, phi))
            .sum()
    }
}

fn empty_query(k: usize) -> RatioQuery {
    RatioQuery {
        psi: PartialRealization::empty(),
        k,
    }
}

/// Tight-gap grid: brute gamma, beta and gap against the closed forms,
/// and the gap attains beta * gamma exactly.
fn verify_tightgap(cap: u64) -> Result<bool> {
    let k = 2;
    let mut ok = true;
    for &a in &[1.0, 2.0, 5.0] {
        for &m in &[5usize, 6, 7] {
            let p = 1.0 / m as f64;
            let case = build_tight_gap(&TightGapParams { k, a, m, p })?;
            let f: &dyn Objective = &case.objective;
            let n = case.prior.n_elements();
            let gamma = gamma_adaptive(f, &case.prior, &empty_query(k), cap)?.value;
            let beta =
                beta_nonadaptive(expected_closure(f, &case.prior), n, ElementSet::EMPTY, k, cap)?
                    .value;
            let gap = adaptivity_gap_exact(f, &case.prior, k, cap)?.value;
            let here = (gamma - case.gamma).abs() <= TOL
                && (beta - case.beta).abs() <= TOL
                && (gap - case.gap).abs() <= TOL
                && (gap - beta * gamma).abs() <= TOL;
            println!(
                "a={a} M={m}: gamma {} (closed {}), beta {} (closed {}), gap {} (closed {}){}",
                fmt_value(gamma),
                fmt_value(case.gamma),
                fmt_value(beta),
                fmt_value(case.beta),
                fmt_value(gap),
                fmt_value(case.gap),
                if here { "" } else { "  <- mismatch" }
            );
            ok &= here;
        }
    }
    Ok(ok)
}

/// Greedy earns k(1+eps) while the optimal policy earns 1+(k-1)M.
fn verify_kusner(cap: u64) -> Result<bool> {
    let epsilon = 0.1;
    let mut ok = true;
    for &k in &[2usize, 3] {
        for &m in &[3usize, 5] {
            let (prior, objective) = build_kusner(&KusnerParams { k, m, epsilon })?;
            let f: &dyn Objective = &objective;
            let tree = adaptive_greedy_policy(f, &prior, k)?;
            let greedy = avg_value(f, &prior, &tree)?.value;
            let (_, optimal) = optimal_policy_exhaustive(f, &prior, k, cap)?;
            let want_greedy = k as f64 * (1.0 + epsilon);
            let want_optimal = 1.0 + (k - 1) as f64 * m as f64;
            let here = (greedy - want_greedy).abs() <= 1e-12
                && (optimal - want_optimal).abs() <= 1e-12;
            println!(
                "k={k} M={m}: greedy {} (want {}), optimal {} (want {}){}",
                fmt_value(greedy),
                fmt_value(want_greedy),
                fmt_value(optimal),
                fmt_value(want_optimal),
                if here { "" } else { "  <- mismatch" }
            );
            ok &= here;
        }
    }
    Ok(ok)
}

/// Two-test diagnosis: the second test is worthless up front, valuable
/// after a negative first test, so no finite smoothness constant exists.
fn verify_ygo(cap: u64) -> Result<bool> {
    let (prior, objective) = build_diagnosis();
    let f: &dyn Objective = &objective;
    let empty = PartialRealization::empty();
    let up_front = gain_element(f, &prior, 1, &empty)?.value;
    let after_negative =
        gain_element(f, &prior, 1, &empty.extended(0, 1)?)?.value;
    let zeta = zeta_star(f, &prior, cap)?.value;
    let ok = up_front.abs() <= 1e-12
        && (after_negative - 0.5).abs() <= 1e-12
        && zeta.is_infinite();
    println!("Delta(v2|empty) = {}", fmt_value(up_front));
    println!("Delta(v2|v1 negative) = {}", fmt_value(after_negative));
    println!("zeta_star = {}", fmt_value(zeta));
    Ok(ok)
}

/// Chain gains match the worked closed forms and the explicit policy
/// certifies the ratio upper bound.
fn verify_chain(cap: u64) -> Result<bool> {
    let epsilon = 0.5;
    let mut ok = true;
    for ell in 1usize..=3 {
        let case = build_chain(&ChainParams { ell, epsilon })?;
        let f: &dyn Objective = &case.objective;
        let empty = PartialRealization::empty();
        let head = gain_element(f, &case.prior, 0, &empty)?.value;
        let want_head = (1.0 - (1.0 - epsilon).powi(ell as i32 + 1)) / epsilon;
        let policy_gain = gain_policy(f, &case.prior, &case.policy, &empty)?.value;
        let want_policy = ell as f64 + 1.0 + epsilon * ell as f64;
        let gamma = gamma_adaptive(f, &case.prior, &empty_query(ell), cap)?.value;
        let here = (head - want_head).abs() <= TOL
            && (policy_gain - want_policy).abs() <= TOL
            && gamma <= case.bound + TOL;
        println!(
            "ell={ell}: Delta(u0|empty) {} (want {}), Delta(pi|empty) {} (want {}), gamma {} <= bound {}{}",
            fmt_value(head),
            fmt_value(want_head),
            fmt_value(policy_gain),
            fmt_value(want_policy),
            fmt_value(gamma),
            fmt_value(case.bound),
            if here { "" } else { "  <- mismatch" }
        );
        ok &= here;
    }
    Ok(ok)
}

/// Correlated-design regression: eigen extremes of the 2-column block,
/// infinite zeta*, and the spectral gap bound.
fn verify_f4(cap: u64) -> Result<bool> {
    let instance = build_f4_instance(5, 2.0)?;
    let eigen = instance.eigen_bounds_bruteforce(2, cap)?;
    let want_min = 1.0 - 1.0 / 2f64.sqrt();
    let want_max = 1.0 + 1.0 / 2f64.sqrt();
    let gap_bound = instance.gap_lower_bound(2, cap)?;
    let want_gap = 1.0 / (3.0 + 2.0 * 2f64.sqrt());
    let (prior, objective) = instance.to_tabular(cap)?;
    let zeta = zeta_star(&objective, &prior, cap)?.value;
    let ok = (eigen.lambda_min - want_min).abs() <= TOL
        && (eigen.lambda_max - want_max).abs() <= TOL
        && gap_bound >= want_gap - TOL
        && zeta.is_infinite();
    println!(
        "lambda_min {} (want {}), lambda_max {} (want {})",
        fmt_value(eigen.lambda_min),
        fmt_value(want_min),
        fmt_value(eigen.lambda_max),
        fmt_value(want_max)
    );
    println!(
        "gap lower bound {} (want >= {})",
        fmt_value(gap_bound),
        fmt_value(want_gap)
    );
    println!("zeta_star = {}", fmt_value(zeta));
    Ok(ok)
}

/// The quadratic form is nonnegative over sub-probability vectors and
/// vanishes at the uniform boundary point.
fn verify_lemma_b2() -> Result<bool> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0xb2);
    let mut min_lhs = f64::INFINITY;
    for _ in 0..100_000 {
        let m = rng.gen_range(2usize..=8);
        let raw: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let scale = rng.gen::<f64>() / total;
        let p: Vec<f64> = raw.iter().map(|x| x * scale).collect();
        min_lhs = min_lhs.min(lemma_b2_lhs(&p)?);
    }
    let mut boundary_max: f64 = 0.0;
    for m in 2usize..=8 {
        boundary_max = boundary_max.max(lemma_b2_lhs(&vec![1.0 / m as f64; m])?.abs());
    }
    let ok = min_lhs >= -1e-12 && boundary_max <= 1e-12;
    println!("min LHS over 100000 samples = {:e}", min_lhs);
    println!("max |LHS| at p = 1/m over m in 2..=8 = {:e}", boundary_max);
    Ok(ok)
}

/// Mixed pool of small tabular instances for the bound suites.
fn random_tabular_pool(count: usize, cap: u64) -> Result<Vec<(TabularPrior, Box<dyn Objective>)>> {
    let mut pool: Vec<(TabularPrior, Box<dyn Objective>)> = Vec::with_capacity(count);
    for i in 0..count as u64 {
        if i % 2 == 0 {
            let instance = gen_random_triggering(3, 2, mix(0xada5, i))?;
            let (prior, objective) = instance.to_tabular(cap)?;
            pool.push((prior, Box::new(objective)));
        } else {
            let instance: FeatureInstance = gen_random_finite(3, 4, 2, mix(0xada5, i));
            let (prior, objective) = instance.to_tabular(cap)?;
            pool.push((prior, Box::new(objective)));
        }
    }
    Ok(pool)
}

/// Greedy beats (1 - exp(-gamma_{l,k} l/k)) times the optimum on random
/// adaptive-monotone instances.
fn verify_greedy_bound(cap: u64) -> Result<bool> {
    let pool = random_tabular_pool(50, cap)?;
    let mut ok = true;
    let mut min_slack = f64::INFINITY;
    for (prior, objective) in &pool {
        let f: &dyn Objective = &**objective;
        for (ell, k) in [(1usize, 1usize), (2, 2), (3, 3)] {
            let tree = adaptive_greedy_policy(f, prior, ell)?;
            let greedy = avg_value(f, prior, &tree)?.value;
            let (_, optimal) = optimal_policy_exhaustive(f, prior, k, cap)?;
            let gamma = gamma_level(f, prior, ell, k, cap)?.value;
            let bound = (1.0 - (-gamma * ell as f64 / k as f64).exp()) * optimal;
            min_slack = min_slack.min(greedy - bound);
            if greedy < bound - TOL {
                println!(
                    "violation at (ell, k) = ({ell}, {k}): greedy {} < bound {}",
                    fmt_value(greedy),
                    fmt_value(bound)
                );
                ok = false;
            }
        }
    }
    println!(
        "{} instances x 3 budgets, min(greedy - bound) = {:e}",
        pool.len(),
        min_slack
    );
    Ok(ok)
}

/// GAP >= beta * gamma on fixed and random instances.
fn verify_gap_bound_suite(cap: u64) -> Result<bool> {
    let k = 2;
    let mut suite: Vec<(String, TabularPrior, Box<dyn Objective>)> = Vec::new();
    let (prior, objective) = gen_star(3)?.to_tabular(cap)?;
    suite.push(("star(3)".into(), prior, Box::new(objective)));
    let case = build_tight_gap(&TightGapParams { k, a: 2.0, m: 2, p: 0.5 })?;
    suite.push(("tightgap(a=2, M=2)".into(), case.prior, Box::new(case.objective)));
    for (i, (prior, objective)) in random_tabular_pool(20, cap)?.into_iter().enumerate() {
        suite.push((format!("random-{i}"), prior, objective));
    }
    let mut ok = true;
    for (name, prior, objective) in &suite {
        let report = verify_gap_bound(&**objective, prior, k, cap)?;
        println!(
            "{name}: gap {} >= beta {} * gamma {} = {}{}",
            fmt_value(report.gap.value),
            fmt_value(report.beta.value),
            fmt_value(report.gamma.value),
            fmt_value(report.beta.value * report.gamma.value),
            if report.holds { "" } else { "  <- violated" }
        );
        ok &= report.holds;
    }
    Ok(ok)
}

/// 1/zeta* lower-bounds the worst-history gamma on fixed and random
/// instances.
fn verify_zeta_suite(cap: u64) -> Result<bool> {
    let k = 2;
    let mut suite: Vec<(String, TabularPrior, Box<dyn Objective>)> = Vec::new();
    let (prior, objective) = gen_star(3)?.to_tabular(cap)?;
    suite.push(("star(3)".into(), prior, Box::new(objective)));
    for (i, (prior, objective)) in random_tabular_pool(20, cap)?.into_iter().enumerate() {
        suite.push((format!("random-{i}"), prior, objective));
    }
    let mut ok = true;
    for (name, prior, objective) in &suite {
        let report = verify_zeta_vs_gamma(&**objective, prior, k, cap)?;
        let inverse = if report.zeta.value.is_infinite() {
            0.0
        } else {
            1.0 / report.zeta.value
        };
        println!(
            "{name}: 1/zeta* {} <= min gamma {}{}",
            fmt_value(inverse),
            fmt_value(report.min_gamma.value),
            if report.holds { "" } else { "  <- violated" }
        );
        ok &= report.holds;
    }
    Ok(ok)
}
