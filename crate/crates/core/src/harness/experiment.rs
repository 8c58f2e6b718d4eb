//! Multi-strategy benchmark runs and their reports.
//!
//! Every (strategy, case, repetition) cell is an independent chain seeded by
//! [`cell_seed`]. Cells run in parallel; results are assembled in index order,
//! so a report depends only on its configuration.

use super::generate::{generate_cases, generate_network, GeneratorParams, TestCase};
use super::metric::{model_error_count, DEFAULT_EPSILON_FLOOR};
use crate::error::{Error, Result};
use crate::evidence::Evidence;
use crate::io::{parse_evidence, parse_network};
use crate::network::Network;
use crate::oracle::{exact_marginals_auto, ExactMethod, DEFAULT_EXACT_CAP};
use crate::sampler::{estimates_with_evidence, Engine, MarginalAccumulator, Sampler, StrategySpec, PRESET_NAMES};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

pub const BASELINE: &str = "gibbs";

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of one stream derived from a master seed: SplitMix64 applied after
/// xoring in each stream coordinate in turn.
pub fn split_seed(master: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(master), |x, &s| splitmix64(x ^ s))
}

/// Seed of the chain for one (strategy, case, repetition) cell.
pub fn cell_seed(master: u64, strategy: &str, case: usize, repetition: usize) -> u64 {
    split_seed(master, &[fnv1a(strategy), case as u64, repetition as u64])
}

/// Merged Markov-blanket estimates of `chains` independent chains. Chain `c`
/// is seeded with `split_seed(seed, [c])`.
pub fn sample_marginals(
    net: &Network,
    ev: &Evidence,
    strategy: &StrategySpec,
    sweeps: u64,
    burn_in: u64,
    seed: u64,
    chains: usize,
) -> Result<Vec<f64>> {
    let engine = Engine::new(net, ev, strategy.clone())?;
    let accs: Vec<MarginalAccumulator> = (0..chains.max(1))
        .into_par_iter()
        .map(|c| {
            let mut s = Sampler::from_engine(engine.clone(), split_seed(seed, &[c as u64]))?;
            s.burn_in(burn_in)?;
            s.run(sweeps)?;
            Ok(s.accumulator().clone())
        })
        .collect::<Result<_>>()?;
    let mut total = MarginalAccumulator::new(net.len());
    for a in &accs {
        total.merge(a);
    }
    Ok(estimates_with_evidence(&total, ev))
}

/// Marginals as written by the `sample` and `exact` commands and read back
/// as truth files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginalsFile {
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunInfo>,
    pub marginals: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub strategy: String,
    pub sweeps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub chains: usize,
}

impl MarginalsFile {
    pub fn new(net: &Network, values: &[f64], exact: bool) -> Self {
        let marginals = net.node_ids().map(|n| (net.id(n).to_string(), values[n.0])).collect();
        Self { exact, method: None, run: None, marginals }
    }

    pub fn to_vec(&self, net: &Network) -> Result<Vec<f64>> {
        let mut out = vec![f64::NAN; net.len()];
        for (id, &p) in &self.marginals {
            out[net.node_id(id)?.0] = p;
        }
        if let Some(n) = net.node_ids().find(|n| out[n.0].is_nan()) {
            return Err(Error::NodeMismatch(net.id(n).to_string()));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthSource {
    Enumeration,
    Bipartite,
    /// Long sampling run; not exact.
    Reference,
}

impl From<ExactMethod> for TruthSource {
    fn from(m: ExactMethod) -> Self {
        match m {
            ExactMethod::Enumeration => TruthSource::Enumeration,
            ExactMethod::Bipartite => TruthSource::Bipartite,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum NetworkSource {
    Path(String),
    Generate(GeneratorParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseParams {
    pub n_cases: usize,
    pub evidence_range: (usize, usize),
    pub positive_range: (usize, usize),
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CaseSource {
    Paths(Vec<String>),
    Generate(CaseParams),
}

/// A preset name or a full strategy definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StrategyRef {
    Name(String),
    Spec(StrategySpec),
}

impl StrategyRef {
    pub fn resolve(&self) -> Result<StrategySpec> {
        match self {
            StrategyRef::Name(n) => StrategySpec::preset(n),
            StrategyRef::Spec(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

fn default_strategies() -> Vec<StrategyRef> {
    PRESET_NAMES.iter().map(|n| StrategyRef::Name(n.to_string())).collect()
}
fn default_repetitions() -> usize {
    20
}
fn default_floor() -> f64 {
    DEFAULT_EPSILON_FLOOR
}
fn default_cap() -> usize {
    DEFAULT_EXACT_CAP
}

/// Benchmark configuration file. Relative paths resolve against the
/// directory of the configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub network: NetworkSource,
    pub cases: CaseSource,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyRef>,
    pub checkpoints: Vec<u64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_floor")]
    pub epsilon_floor: f64,
    #[serde(default)]
    pub burn_in: u64,
    /// One marginals file per case, for networks beyond the exact methods.
    #[serde(default)]
    pub truth: Option<Vec<String>>,
    /// Measure wall time. Off by default because timings make reports
    /// differ between otherwise identical runs.
    #[serde(default)]
    pub wall_time: bool,
    #[serde(default = "default_cap")]
    pub exact_cap: usize,
    #[serde(default)]
    pub dump_estimates: bool,
}

fn read(base: &Path, rel: &str) -> Result<String> {
    let path = base.join(rel);
    std::fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(&self, base: &Path) -> Result<Experiment> {
        let network: Network = match &self.network {
            NetworkSource::Path(p) => parse_network(&read(base, p)?)?,
            NetworkSource::Generate(params) => generate_network(params)?,
        };
        let cases = match &self.cases {
            CaseSource::Paths(paths) => paths
                .iter()
                .map(|p| {
                    let evidence = parse_evidence(&network, &read(base, p)?)?;
                    Ok(TestCase { n_positive: evidence.positive_count(), evidence })
                })
                .collect::<Result<Vec<_>>>()?,
            CaseSource::Generate(c) => generate_cases(&network, c.n_cases, c.evidence_range, c.positive_range, c.seed)?,
        };
        let truths = match &self.truth {
            None => None,
            Some(paths) => {
                if paths.len() != cases.len() {
                    return Err(Error::Config(format!("{} truth files for {} cases", paths.len(), cases.len())));
                }
                Some(
                    paths
                        .iter()
                        .map(|p| {
                            let file: MarginalsFile = serde_json::from_str(&read(base, p)?)?;
                            let source = if file.exact { TruthSource::Enumeration } else { TruthSource::Reference };
                            Ok((file.to_vec(&network)?, source))
                        })
                        .collect::<Result<Vec<_>>>()?,
                )
            }
        };
        let strategies = self.strategies.iter().map(StrategyRef::resolve).collect::<Result<Vec<_>>>()?;
        Ok(Experiment {
            network,
            cases,
            truths,
            strategies,
            checkpoints: self.checkpoints.clone(),
            repetitions: self.repetitions,
            seed: self.seed,
            epsilon_floor: self.epsilon_floor,
            burn_in: self.burn_in,
            wall_time: self.wall_time,
            exact_cap: self.exact_cap,
            dump_estimates: self.dump_estimates,
        })
    }
}

/// A fully resolved experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub network: Network,
    pub cases: Vec<TestCase>,
    /// Given truths; computed exactly when absent.
    pub truths: Option<Vec<(Vec<f64>, TruthSource)>>,
    pub strategies: Vec<StrategySpec>,
    pub checkpoints: Vec<u64>,
    pub repetitions: usize,
    pub seed: u64,
    pub epsilon_floor: f64,
    pub burn_in: u64,
    pub wall_time: bool,
    pub exact_cap: usize,
    pub dump_estimates: bool,
}

impl Experiment {
    pub fn new(network: Network, cases: Vec<TestCase>, strategies: Vec<StrategySpec>, checkpoints: Vec<u64>) -> Self {
        Self {
            network,
            cases,
            truths: None,
            strategies,
            checkpoints,
            repetitions: default_repetitions(),
            seed: 0,
            epsilon_floor: DEFAULT_EPSILON_FLOOR,
            burn_in: 0,
            wall_time: false,
            exact_cap: DEFAULT_EXACT_CAP,
            dump_estimates: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    /// Mean error count over cases and repetitions, per checkpoint.
    pub mean_errors: Vec<f64>,
    /// Per case, mean error count over repetitions, per checkpoint.
    pub case_errors: Vec<Vec<f64>>,
    /// Factor evaluations relative to the baseline strategy.
    pub cost_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_ratio: Option<f64>,
    /// Cell seeds, case-major then repetition.
    pub seeds: Vec<u64>,
    /// Final per-node estimates of each cell, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<BTreeMap<String, f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub checkpoints: Vec<u64>,
    pub cases: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub epsilon_floor: f64,
    pub baseline: String,
    pub truth: Vec<TruthSource>,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn row(&self, strategy: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table: strategy, cost and time ratios, then the mean error
    /// at each checkpoint.
    pub fn render_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.strategy.len()).max().unwrap_or(8).max(8);
        let mut out = String::new();
        let _ = write!(out, "{:width$}  {:>6}  {:>6}", "strategy", "cost", "time");
        for c in &self.checkpoints {
            let _ = write!(out, "  {:>8}", c);
        }
        out.push('\n');
        for r in &self.rows {
            let time = r.time_ratio.map_or("-".to_string(), |t| format!("{t:.2}"));
            let _ = write!(out, "{:width$}  {:>6.2}  {:>6}", r.strategy, r.cost_ratio, time);
            for e in &r.mean_errors {
                let _ = write!(out, "  {:>8.2}", e);
            }
            out.push('\n');
        }
        out
    }
}

struct CellResult {
    errors: Vec<usize>,
    work: u64,
    seconds: f64,
    estimates: Vec<f64>,
}

fn run_cell(exp: &Experiment, strategy: &StrategySpec, case: usize, truth: &[f64], seed: u64) -> Result<CellResult> {
    let start = Instant::now();
    let ev = &exp.cases[case].evidence;
    let mut s = Sampler::new(&exp.network, ev, strategy.clone(), seed)?;
    s.burn_in(exp.burn_in)?;
    let mut errors = Vec::with_capacity(exp.checkpoints.len());
    let mut done = 0;
    for &c in &exp.checkpoints {
        s.run(c - done)?;
        done = c;
        errors.push(model_error_count(&exp.network, ev, &s.estimates(), truth, exp.epsilon_floor)?);
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(CellResult { errors, work: s.state().work, seconds, estimates: s.estimates() })
}

/// Truth marginals per case: given, or exact when the network allows it.
pub fn case_truths(exp: &Experiment) -> Result<Vec<(Vec<f64>, TruthSource)>> {
    if let Some(t) = &exp.truths {
        return Ok(t.clone());
    }
    exp.cases
        .par_iter()
        .map(|c| match exact_marginals_auto(&exp.network, &c.evidence, exp.exact_cap) {
            Ok((m, method)) => Ok((m, method.into())),
            Err(Error::CapExceeded { count, cap }) => Err(Error::TruthUnavailable(format!(
                "network too large for exact inference ({count} > {cap}); supply truth files"
            ))),
            Err(e) => Err(e),
        })
        .collect()
}

pub fn run_experiment(exp: &Experiment) -> Result<Report> {
    if exp.checkpoints.is_empty() || exp.checkpoints[0] == 0 || exp.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be positive and strictly increasing".into()));
    }
    if exp.repetitions == 0 || exp.cases.is_empty() || exp.strategies.is_empty() {
        return Err(Error::Config("need at least one strategy, case and repetition".into()));
    }
    for s in &exp.strategies {
        s.validate()?;
    }
    let truths = case_truths(exp)?;

    let cells: Vec<(usize, usize, usize)> = (0..exp.strategies.len())
        .flat_map(|s| (0..exp.cases.len()).flat_map(move |c| (0..exp.repetitions).map(move |r| (s, c, r))))
        .collect();
    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(s, c, r)| {
            let strategy = &exp.strategies[s];
            run_cell(exp, strategy, c, &truths[c].0, cell_seed(exp.seed, &strategy.name, c, r))
        })
        .collect::<Result<_>>()?;

    let per_strategy = exp.cases.len() * exp.repetitions;
    let k = exp.checkpoints.len();
    let mut rows: Vec<ReportRow> = Vec::with_capacity(exp.strategies.len());
    let mut totals: Vec<(u64, f64)> = Vec::new();
    for (s, strategy) in exp.strategies.iter().enumerate() {
        let block = &results[s * per_strategy..(s + 1) * per_strategy];
        let mut case_errors = vec![vec![0.0; k]; exp.cases.len()];
        for (i, cell) in block.iter().enumerate() {
            for (j, &e) in cell.errors.iter().enumerate() {
                case_errors[i / exp.repetitions][j] += e as f64 / exp.repetitions as f64;
            }
        }
        let mean_errors =
            (0..k).map(|j| case_errors.iter().map(|c| c[j]).sum::<f64>() / exp.cases.len() as f64).collect();
        let seeds = (0..per_strategy)
            .map(|i| cell_seed(exp.seed, &strategy.name, i / exp.repetitions, i % exp.repetitions))
            .collect();
        let estimates = exp.dump_estimates.then(|| {
            block.iter().map(|cell| MarginalsFile::new(&exp.network, &cell.estimates, false).marginals).collect()
        });
        totals.push((block.iter().map(|c| c.work).sum(), block.iter().map(|c| c.seconds).sum()));
        rows.push(ReportRow {
            strategy: strategy.name.clone(),
            mean_errors,
            case_errors,
            cost_ratio: 0.0,
            time_ratio: None,
            seeds,
            estimates,
        });
    }
    let base = exp.strategies.iter().position(|s| s.name == BASELINE).unwrap_or(0);
    let (base_work, base_time) = totals[base];
    for (row, (work, time)) in rows.iter_mut().zip(&totals) {
        row.cost_ratio = *work as f64 / base_work.max(1) as f64;
        if exp.wall_time {
            row.time_ratio = Some(time / base_time.max(f64::MIN_POSITIVE));
        }
    }
    Ok(Report {
        checkpoints: exp.checkpoints.clone(),
        cases: exp.cases.len(),
        repetitions: exp.repetitions,
        seed: exp.seed,
        epsilon_floor: exp.epsilon_floor,
        baseline: exp.strategies[base].name.clone(),
        truth: truths.into_iter().map(|t| t.1).collect(),
        rows,
    })
}
