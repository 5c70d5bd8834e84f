//! Deterministic, snapshot-capable discrete-action environments.
//!
//! Every environment exposes its full physical state as the observation, so a
//! perturbed observation can be written back into the simulator with
//! [`Environment::inject_state`]. Mini-rollouts rely on that together with
//! [`Environment::snapshot`] / [`Environment::restore`].

pub mod cartpole;
pub mod chain;
pub mod lander;
pub mod mountain_car;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use cartpole::CartPoleLite;
pub use chain::ChainEnv;
pub use lander::LanderLite;
pub use mountain_car::MountainCarLite;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvError {
    #[error("step called on a terminated episode; reset or restore first")]
    StepAfterDone,
    #[error("action {action} out of range for {actions} actions")]
    InvalidAction { action: usize, actions: usize },
    #[error("snapshot taken from {found} cannot be restored into {expected}")]
    SnapshotMismatch { expected: EnvKind, found: EnvKind },
    #[error("observation has {found} components, environment expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown environment id `{0}`")]
    UnknownEnv(String),
}

/// A real-valued observation vector. For every environment here it is the full state.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(Vec<f64>);

impl Observation {
    pub fn new(values: Vec<f64>) -> Self {
        Observation(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance to `other`.
    pub fn l2_distance(&self, other: &Observation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for Observation {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Observation {
    fn from(values: Vec<f64>) -> Self {
        Observation(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    /// The episode is over, either by termination or by hitting the step cap.
    pub done: bool,
    /// `done` was caused only by the step cap; the state itself is not terminal.
    pub truncated: bool,
}

impl StepResult {
    pub fn terminated(&self) -> bool {
        self.done && !self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    CartPole,
    MountainCar,
    Lander,
    Chain,
}

impl EnvKind {
    pub fn id(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole-lite",
            EnvKind::MountainCar => "mountaincar-lite",
            EnvKind::Lander => "lander-lite",
            EnvKind::Chain => "chain",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cartpole-lite" => Ok(EnvKind::CartPole),
            "mountaincar-lite" => Ok(EnvKind::MountainCar),
            "lander-lite" => Ok(EnvKind::Lander),
            other => Err(EnvError::UnknownEnv(other.to_string())),
        }
    }
}

/// Frozen copy of an environment's complete internal state.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSnapshot {
    kind: EnvKind,
    state: Vec<f64>,
    steps: u32,
    done: bool,
}

impl EnvSnapshot {
    pub fn kind(&self) -> EnvKind {
        self.kind
    }
}

pub trait Environment: Send {
    fn kind(&self) -> EnvKind;
    fn obs_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Inclusive per-dimension `(low, high)` bounds of the observation.
    fn bounds(&self) -> &'static [(f64, f64)];
    fn max_steps(&self) -> u32;

    fn reset(&mut self, seed: u64) -> Observation;
    fn step(&mut self, action: ActionId) -> Result<StepResult, EnvError>;
    fn observation(&self) -> Observation;
    fn is_done(&self) -> bool;
    fn steps(&self) -> u32;

    fn snapshot(&self) -> EnvSnapshot;
    fn restore(&mut self, snap: &EnvSnapshot) -> Result<(), EnvError>;
    /// Overwrite the physical state so the next observation is `obs` clipped to bounds.
    /// The step counter is preserved.
    fn inject_state(&mut self, obs: &Observation) -> Result<(), EnvError>;
}

/// Closed-form dynamics shared by the [`Sim`] wrapper.
pub trait Dynamics: Send {
    const KIND: EnvKind;
    const ACTIONS: usize;
    const MAX_STEPS: u32;

    fn bounds(&self) -> &'static [(f64, f64)];
    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Advance `state` in place by one tick; returns `(reward, terminated)`.
    /// The wrapper clips the state to bounds afterwards.
    fn advance(&self, state: &mut [f64], action: usize) -> (f64, bool);
    /// Map an arbitrary in-bounds vector onto a representable state.
    fn canonicalize(&self, _state: &mut [f64]) {}
}

pub(crate) fn clip_to_bounds(values: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, &(lo, hi)) in values.iter_mut().zip(bounds) {
        *v = v.clamp(lo, hi);
    }
}

/// Step counter, done flag and snapshot plumbing around a [`Dynamics`].
#[derive(Debug, Clone)]
pub struct Sim<D> {
    dynamics: D,
    state: Vec<f64>,
    steps: u32,
    done: bool,
}

impl<D: Dynamics> Sim<D> {
    pub(crate) fn with_dynamics(dynamics: D) -> Self {
        let mut state = dynamics.initial_state(&mut ChaCha8Rng::seed_from_u64(0));
        clip_to_bounds(&mut state, dynamics.bounds());
        Sim {
            dynamics,
            state,
            steps: 0,
            done: false,
        }
    }

    pub(crate) fn dynamics(&self) -> &D {
        &self.dynamics
    }

    /// Raw state access for tests and fixtures.
    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl<D: Dynamics> Environment for Sim<D> {
    fn kind(&self) -> EnvKind {
        D::KIND
    }

    fn obs_dim(&self) -> usize {
        self.dynamics.bounds().len()
    }

    fn action_count(&self) -> usize {
        D::ACTIONS
    }

    fn bounds(&self) -> &'static [(f64, f64)] {
        self.dynamics.bounds()
    }

    fn max_steps(&self) -> u32 {
        D::MAX_STEPS
    }

    fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = self.dynamics.initial_state(&mut rng);
        clip_to_bounds(&mut self.state, self.dynamics.bounds());
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: ActionId) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        if action.0 >= D::ACTIONS {
            return Err(EnvError::InvalidAction {
                action: action.0,
                actions: D::ACTIONS,
            });
        }
        let (reward, terminated) = self.dynamics.advance(&mut self.state, action.0);
        clip_to_bounds(&mut self.state, self.dynamics.bounds());
        self.steps += 1;
        let truncated = !terminated && self.steps >= D::MAX_STEPS;
        self.done = terminated || truncated;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: self.done,
            truncated,
        })
    }

    fn observation(&self) -> Observation {
        Observation(self.state.clone())
    }

    fn is_done(&self) -> bool {
        self.done
    }

    fn steps(&self) -> u32 {
        self.steps
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            kind: D::KIND,
            state: self.state.clone(),
            steps: self.steps,
            done: self.done,
        }
    }

    fn restore(&mut self, snap: &EnvSnapshot) -> Result<(), EnvError> {
        if snap.kind != D::KIND || snap.state.len() != self.state.len() {
            return Err(EnvError::SnapshotMismatch {
                expected: D::KIND,
                found: snap.kind,
            });
        }
        self.state.copy_from_slice(&snap.state);
        self.steps = snap.steps;
        self.done = snap.done;
        Ok(())
    }

    fn inject_state(&mut self, obs: &Observation) -> Result<(), EnvError> {
        if obs.dim() != self.state.len() {
            return Err(EnvError::DimensionMismatch {
                expected: self.state.len(),
                found: obs.dim(),
            });
        }
        self.state.copy_from_slice(obs);
        clip_to_bounds(&mut self.state, self.dynamics.bounds());
        self.dynamics.canonicalize(&mut self.state);
        self.done = false;
        Ok(())
    }
}

/// Build one of the named environments.
pub fn make_env(id: &str) -> Result<Box<dyn Environment>, EnvError> {
    Ok(match id.parse::<EnvKind>()? {
        EnvKind::CartPole => Box::new(CartPoleLite::new()),
        EnvKind::MountainCar => Box::new(MountainCarLite::new()),
        EnvKind::Lander => Box::new(LanderLite::new()),
        EnvKind::Chain => unreachable!("chain is not constructible by id"),
    })
}
