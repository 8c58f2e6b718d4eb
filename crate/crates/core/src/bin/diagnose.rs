use clap::{Parser, Subcommand};
use noisyor::analysis::{clamp_pass, classify_flow, FlowStatus};
use noisyor::harness::{
    generate_network, run_experiment, sample_marginals, BenchConfig, GeneratorParams, Layering, MarginalsFile, RunInfo,
};
use noisyor::io::{network_to_json, parse_evidence, parse_network};
use noisyor::oracle::{exact_marginals_auto, DEFAULT_EXACT_CAP};
use noisyor::sampler::{CoverMode, StrategySpec};
use noisyor::{Error, Evidence, Net, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "diagnose", about = "Diagnostic sampling on noisy-or networks", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate posterior marginals with a sampling strategy.
    Sample {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long, default_value = "gibbs")]
        strategy: String,
        #[arg(long)]
        sweeps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        burn_in: u64,
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Read "within cover" as sharing a true observed child only.
        #[arg(long)]
        narrow_cover: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact posterior marginals.
    Exact {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clamp sets and evidence-flow classification.
    Analyze {
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic diagnostic network.
    Gen {
        #[arg(long)]
        models: usize,
        #[arg(long)]
        sensors: usize,
        #[arg(long)]
        links: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Model layers; 1 gives a two-layer network.
        #[arg(long, default_value_t = 1)]
        layers: usize,
        #[arg(long, default_value_t = 0.5)]
        multi_parent_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare strategies on a benchmark configuration.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the plain-text table here.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Override the accuracy-band floor; 0 gives the unfloored metric.
        #[arg(long)]
        epsilon_floor: Option<f64>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(out: Option<&Path>, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load(network: &Path, evidence: &Path) -> Result<(Net, Evidence)> {
    let net: Net = parse_network(&read(network)?)?;
    let ev = parse_evidence(&net, &read(evidence)?)?;
    Ok((net, ev))
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

#[derive(Serialize)]
struct FlowEntry {
    status: FlowStatus,
    evidential_children: Vec<String>,
    conditioning_set: Vec<String>,
}

#[derive(Serialize)]
struct Analysis {
    clamped_false: Vec<String>,
    unclamped: Vec<String>,
    signal_trace: Vec<(String, String)>,
    flow: BTreeMap<String, FlowEntry>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample { network, evidence, strategy, sweeps, seed, burn_in, chains, narrow_cover, out } => {
            let (net, ev) = load(&network, &evidence)?;
            let mut spec = StrategySpec::preset(&strategy)?;
            if narrow_cover {
                spec = spec.with_cover_mode(CoverMode::EvidenceChild);
            }
            let values = sample_marginals(&net, &ev, &spec, sweeps, burn_in, seed, chains)?;
            let mut file = MarginalsFile::new(&net, &values, false);
            file.run = Some(RunInfo { strategy, sweeps, burn_in, seed, chains });
            write(out.as_deref(), &json(&file))
        }
        Command::Exact { network, evidence, cap, out } => {
            let (net, ev) = load(&network, &evidence)?;
            let (values, method) = exact_marginals_auto(&net, &ev, cap).map_err(|e| match e {
                Error::CapExceeded { count, cap } => Error::Config(format!(
                    "problem size {count} exceeds the exact-inference cap of {cap}; raise --cap or sample instead"
                )),
                e => e,
            })?;
            let mut file = MarginalsFile::new(&net, &values, true);
            file.method = Some(method.name().to_string());
            write(out.as_deref(), &json(&file))
        }
        Command::Analyze { network, evidence, out } => {
            let (net, ev) = load(&network, &evidence)?;
            let clamp = clamp_pass(&net, &ev)?;
            let flow = classify_flow(&net, &ev, &clamp)?;
            let ids = |set: &std::collections::BTreeSet<noisyor::NodeId>| -> Vec<String> {
                let mut v: Vec<String> = set.iter().map(|&n| net.id(n).to_string()).collect();
                v.sort();
                v
            };
            let analysis = Analysis {
                clamped_false: ids(&clamp.clamped_false),
                unclamped: ids(&clamp.unclamped),
                signal_trace: clamp
                    .signal_trace
                    .iter()
                    .map(|r| (format!("{:?}", r.phase).to_lowercase(), net.id(r.node).to_string()))
                    .collect(),
                flow: flow
                    .iter()
                    .map(|(n, f)| {
                        (
                            net.id(n).to_string(),
                            FlowEntry {
                                status: f.status,
                                evidential_children: ids(&f.evidential_children),
                                conditioning_set: ids(&f.conditioning_set),
                            },
                        )
                    })
                    .collect(),
            };
            write(out.as_deref(), &json(&analysis))
        }
        Command::Gen { models, sensors, links, seed, layers, multi_parent_fraction, out } => {
            let mut params = GeneratorParams::new(models, sensors, links, seed);
            params.multi_parent_fraction = multi_parent_fraction;
            if layers > 1 {
                params.layering = Layering::LayeredCausal(layers);
            }
            let net: Net = generate_network(&params)?;
            write(out.as_deref(), &network_to_json(&net))
        }
        Command::Bench { config, out, table, epsilon_floor } => {
            let mut cfg = BenchConfig::parse(&read(&config)?)?;
            if let Some(floor) = epsilon_floor {
                cfg.epsilon_floor = floor;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let report = run_experiment(&cfg.load(base)?)?;
            if let Some(t) = table {
                write(Some(&t), &report.render_table())?;
            }
            write(out.as_deref(), &report.to_json())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diagnose: {e}");
            ExitCode::FAILURE
        }
    }
}
