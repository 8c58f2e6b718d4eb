//! Diagnostic inference on noisy-or Bayesian networks.
//!
//! Networks of binary noisy-or nodes are sampled by Markov chain Monte Carlo
//! with optional node clamping, evidence-flow-aware conditioning and paired
//! moves (blocking or swapping competing causes). Exact enumeration, explicit
//! transition matrices and a benchmark harness sit alongside for checking.
//!
//! The core is generic over the probability scalar; [`Net`] and the other
//! aliases below fix it to `f64`.

// `!(x > 0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod analysis;
pub mod error;
pub mod evidence;
pub mod harness;
pub mod io;
pub mod network;
pub mod oracle;
pub mod sampler;
pub mod scalar;

pub use analysis::{clamp_pass, classify_flow, evidential_children, ClampResult, FlowInfo, FlowMap, FlowStatus};
pub use error::{Error, Result};
pub use evidence::Evidence;
pub use network::{vase, Network, NetworkBuilder, NodeId, NodeKind, ValidationProfile, Violation};
pub use sampler::{MarginalAccumulator, MoveRule, Sampler, StrategySpec};
pub use scalar::Prob;

pub type Net = Network<f64>;
pub type Net32 = Network<f32>;
pub type Chain<'a> = Sampler<'a, f64>;
