//! A five-state deterministic chain used as a hand-checkable fixture.
//!
//! States `0..5` are one-hot encoded. Action 0 moves left (saturating at 0),
//! action 1 moves right; entering state 4 ends the episode. The reward for
//! taking action `a` in state `s` is read from a caller-supplied table.

use rand_chacha::ChaCha8Rng;

use super::{Dynamics, EnvKind, Sim};

pub const CHAIN_STATES: usize = 5;
pub const TERMINAL_STATE: usize = CHAIN_STATES - 1;

static BOUNDS: [(f64, f64); CHAIN_STATES] = [(0.0, 1.0); CHAIN_STATES];

#[derive(Debug, Clone)]
pub struct ChainDynamics {
    rewards: [[f64; 2]; CHAIN_STATES],
}

pub type ChainEnv = Sim<ChainDynamics>;

impl ChainEnv {
    pub fn new(rewards: [[f64; 2]; CHAIN_STATES]) -> Self {
        Sim::with_dynamics(ChainDynamics { rewards })
    }

    pub fn one_hot(position: usize) -> Vec<f64> {
        let mut v = vec![0.0; CHAIN_STATES];
        v[position] = 1.0;
        v
    }

    pub fn position(&self) -> usize {
        argmax(self.state())
    }

    pub fn reward(&self, position: usize, action: usize) -> f64 {
        self.dynamics().rewards[position][action]
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

impl Dynamics for ChainDynamics {
    const KIND: EnvKind = EnvKind::Chain;
    const ACTIONS: usize = 2;
    const MAX_STEPS: u32 = 1000;

    fn bounds(&self) -> &'static [(f64, f64)] {
        &BOUNDS
    }

    fn initial_state(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        ChainEnv::one_hot(0)
    }

    fn advance(&self, state: &mut [f64], action: usize) -> (f64, bool) {
        let position = argmax(state);
        let reward = self.rewards[position][action];
        let next = if action == 0 {
            position.saturating_sub(1)
        } else {
            (position + 1).min(TERMINAL_STATE)
        };
        state.copy_from_slice(&ChainEnv::one_hot(next));
        (reward, next == TERMINAL_STATE)
    }

    fn canonicalize(&self, state: &mut [f64]) {
        let position = argmax(state);
        state.copy_from_slice(&ChainEnv::one_hot(position));
    }
}
