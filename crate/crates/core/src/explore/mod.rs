//! Neighboring-state exploration.
//!
//! Two strategies pick exploratory actions by looking at states near the
//! current one instead of acting uniformly at random:
//!
//! * **rho-explore** perturbs the current observation inside a norm ball of
//!   radius `rho`, scores each perturbed state with a short greedy rollout
//!   (summed rewards plus a max-Q bootstrap), and acts with the greedy policy
//!   at the best neighbor (`max`) or takes the most common greedy action among
//!   the top-scoring neighbors (`mode`).
//! * **change-based** exploration computes, per action, the mean l2 state change
//!   over replay tuples (`kappa`), picks an action group by `kappa`, and acts
//!   greedily at a state drawn from that group.
//!
//! [`Explorer`] combines either strategy with epsilon-greedy.

mod change;
mod rho;
mod schedule;
mod select;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::envsim::EnvError;
use crate::nnet::NnetError;
use crate::replay::ReplayError;

pub use change::{change_based_action, kappa_table, ChangeBasedChoice, KappaEntry, KappaTable};
pub use rho::{
    pick_candidate, rho_explore_action, sample_perturbation, score_rollout, RhoOutcome,
    RolloutScore,
};
pub use schedule::{should_rho_explore, EpsilonSchedule, RhoGateState};
pub use select::{Branch, Decision, Explorer, Strategy};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("no tuples to build a kappa table from")]
    EmptyInput,
    #[error("invalid exploration config: {0}")]
    InvalidConfig(String),
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($(#[$vmeta:meta])* $variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name {
            $($(#[$vmeta])* $variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "expected one of [{}], got `{other}`",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

keyword_enum!(
    /// Norm bounding the perturbation `delta`.
    PerturbNorm { L2 => "l2", Linf => "linf" }
);

keyword_enum!(
    /// How a rho-explore action is chosen from scored neighbors.
    RhoHeuristic { Max => "max", Mode => "mode" }
);

keyword_enum!(
    /// When rho-explore fires.
    RhoGate {
        /// Triggered with probability `phi * eps`, then held for `period` consecutive steps.
        Intermittent => "intermittent",
        /// Fires each step with probability `min(0.5, 1 - eps)`, rising as epsilon decays.
        Inverse => "inverse",
    }
);

keyword_enum!(
    /// How change-based exploration picks an action group from the kappa table.
    ChangeMode { Weighted => "weighted", Max => "max" }
);

#[derive(Debug, Clone, PartialEq)]
pub struct RhoConfig {
    pub rho: f64,
    pub norm: PerturbNorm,
    /// Perturbed states per invocation.
    pub n: usize,
    /// Mini-rollout length.
    pub lambda: usize,
    pub heuristic: RhoHeuristic,
    /// Share of the best-scoring neighbors voted over by `mode`, in percent.
    pub top_k_percent: f64,
    /// Length of a consecutive rho-explore interval.
    pub period: usize,
    /// Fraction of epsilon given to rho-explore.
    pub phi: f64,
    pub gate: RhoGate,
}

impl Default for RhoConfig {
    fn default() -> Self {
        RhoConfig {
            rho: 0.05,
            norm: PerturbNorm::L2,
            n: 10,
            lambda: 1,
            heuristic: RhoHeuristic::Max,
            top_k_percent: 20.0,
            period: 10,
            phi: 0.5,
            gate: RhoGate::Intermittent,
        }
    }
}

impl RhoConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        let fail = |msg: &str| Err(ExploreError::InvalidConfig(msg.to_string()));
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return fail("rho must be positive and finite");
        }
        if self.n == 0 {
            return fail("n must be at least 1");
        }
        if self.lambda == 0 {
            return fail("lambda must be at least 1");
        }
        if !(self.top_k_percent > 0.0 && self.top_k_percent <= 100.0) {
            return fail("top_k_percent must be in (0, 100]");
        }
        if self.period == 0 {
            return fail("period must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return fail("phi must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeBasedConfig {
    /// Replay tuples per invocation.
    pub n: usize,
    pub mode: ChangeMode,
    /// Use the latest `n` tuples instead of a uniform sample.
    pub temporal: bool,
    /// Plain epsilon-greedy runs before this step.
    pub switch_step: u64,
}

impl Default for ChangeBasedConfig {
    fn default() -> Self {
        ChangeBasedConfig {
            n: 20,
            mode: ChangeMode::Weighted,
            temporal: false,
            switch_step: 50_000,
        }
    }
}

impl ChangeBasedConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if self.n == 0 {
            return Err(ExploreError::InvalidConfig("n must be at least 1".into()));
        }
        Ok(())
    }
}
