mod dsep;
mod enumerate;
mod forward;
mod transition;

pub use dsep::{d_separated, reachable};
pub use enumerate::{
    exact_marginals_auto, exact_posteriors, exact_posteriors_bipartite, exact_posteriors_capped, is_bipartite,
    ExactMethod, DEFAULT_EXACT_CAP,
};
pub use forward::{forward_sample, prior_marginals_forward};
pub use transition::{explicit_transition_matrix, lumped_balance_error, StateSpace, TransitionMatrix, TRANSITION_CAP};
