mod experiment;
mod generate;
mod metric;

pub use experiment::{
    case_truths, cell_seed, run_experiment, sample_marginals, split_seed, BenchConfig, CaseParams, CaseSource,
    Experiment, MarginalsFile, NetworkSource, Report, ReportRow, RunInfo, StrategyRef, TruthSource, BASELINE,
};
pub use generate::{generate_cases, generate_network, GeneratorParams, Layering, TestCase};
pub use metric::{accuracy_bound, error_count, model_error_count, scored_nodes, DEFAULT_EPSILON_FLOOR};
