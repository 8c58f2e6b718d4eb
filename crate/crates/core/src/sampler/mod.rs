mod accumulator;
mod engine;
mod schedule;
mod strategy;

pub use accumulator::{estimate_marginals, MarginalAccumulator};
pub use engine::{
    conditional_prob, initialize_state, metropolis_accept, transition_distribution, Engine, MoveProposal, SamplerRng,
    SamplerState,
};
pub use schedule::{estimates_with_evidence, pair_nodes, MoveUnit, PairKind, Pairing, Sampler};
pub use strategy::{CoverMode, Eligibility, MovePolicy, MoveRule, PairStyle, StrategySpec, VisitOrder, PRESET_NAMES};
