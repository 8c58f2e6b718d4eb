use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MoveRule {
    /// Sample the next state from P(θ | Θ_m, Y).
    Gibbs,
    /// Propose a different state of Θ_m, accept with min(1, ratio).
    Metropolis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MovePolicy {
    SingleSite,
    BlockSpousesCover,
    BlockSpousesParentTrue,
    SwapSpousesCover,
    SwapSpousesChildTrue,
    OptimizedRandom,
    OptimizedFwdBwd,
}

/// Which shared children make two spouses eligible under the cover policies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverMode {
    /// Shared child is a true observation or an ancestor of one.
    #[default]
    Ancestral,
    /// Shared child is itself a true observation.
    EvidenceChild,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Eligibility {
    /// Static: spouses sharing a child inside the positive-evidence cover.
    Cover(CoverMode),
    /// Dynamic: spouses sharing a child that is currently true.
    ChildTrue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairStyle {
    Block,
    Swap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VisitOrder {
    Random,
    ForwardBackward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub name: String,
    pub clamp: bool,
    pub flow_aware: bool,
    pub move_policy: MovePolicy,
    pub rule: MoveRule,
    #[serde(default = "default_swap_fraction")]
    pub swap_fraction: f64,
    #[serde(default)]
    pub cover_mode: CoverMode,
}

fn default_swap_fraction() -> f64 {
    0.8
}

/// Preset names, one per row of the comparison table.
pub const PRESET_NAMES: [&str; 10] = [
    "gibbs",
    "gibbs-clamp",
    "gibbs-flow",
    "block-spouses-cover",
    "block-spouses-parent-true",
    "swap-spouses-cover",
    "swap-spouses-child-true",
    "metropolis",
    "optimized-random",
    "optimized-fwd-bwd",
];

impl StrategySpec {
    fn base(name: &str, policy: MovePolicy, rule: MoveRule) -> Self {
        Self {
            name: name.to_string(),
            clamp: false,
            flow_aware: false,
            move_policy: policy,
            rule,
            swap_fraction: default_swap_fraction(),
            cover_mode: CoverMode::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        use MovePolicy::*;
        use MoveRule::*;
        let s = match name {
            "gibbs" => Self::base(name, SingleSite, Gibbs),
            "gibbs-clamp" => Self { clamp: true, ..Self::base(name, SingleSite, Gibbs) },
            "gibbs-flow" => Self { flow_aware: true, ..Self::base(name, SingleSite, Gibbs) },
            "block-spouses-cover" => Self::base(name, BlockSpousesCover, Gibbs),
            "block-spouses-parent-true" => Self::base(name, BlockSpousesParentTrue, Gibbs),
            "swap-spouses-cover" => Self::base(name, SwapSpousesCover, Gibbs),
            "swap-spouses-child-true" => Self::base(name, SwapSpousesChildTrue, Gibbs),
            "metropolis" => Self::base(name, SingleSite, Metropolis),
            "optimized-random" => {
                Self { clamp: true, flow_aware: true, ..Self::base(name, OptimizedRandom, Metropolis) }
            }
            "optimized-fwd-bwd" => {
                Self { clamp: true, flow_aware: true, ..Self::base(name, OptimizedFwdBwd, Metropolis) }
            }
            _ => return Err(Error::UnknownStrategy(name.to_string())),
        };
        Ok(s)
    }

    pub fn presets() -> Vec<Self> {
        PRESET_NAMES.iter().map(|n| Self::preset(n).expect("preset exists")).collect()
    }

    pub fn with_cover_mode(mut self, mode: CoverMode) -> Self {
        self.cover_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.swap_fraction) {
            return Err(Error::Config(format!("swap_fraction {} outside [0,1]", self.swap_fraction)));
        }
        Ok(())
    }

    /// Pair structure used by this policy, if any.
    pub fn pairing(&self) -> Option<(PairStyle, Eligibility)> {
        use MovePolicy::*;
        match self.move_policy {
            SingleSite => None,
            BlockSpousesCover => Some((PairStyle::Block, Eligibility::Cover(self.cover_mode))),
            BlockSpousesParentTrue => Some((PairStyle::Block, Eligibility::ChildTrue)),
            SwapSpousesCover => Some((PairStyle::Swap, Eligibility::Cover(self.cover_mode))),
            SwapSpousesChildTrue | OptimizedRandom | OptimizedFwdBwd => Some((PairStyle::Swap, Eligibility::ChildTrue)),
        }
    }

    pub fn order(&self) -> VisitOrder {
        if self.move_policy == MovePolicy::OptimizedFwdBwd {
            VisitOrder::ForwardBackward
        } else {
            VisitOrder::Random
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
