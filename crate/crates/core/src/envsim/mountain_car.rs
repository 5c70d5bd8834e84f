//! Under-powered car in a valley; must build momentum to reach the flag.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dynamics, EnvKind, Sim};

pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;

static BOUNDS: [(f64, f64); 2] = [(MIN_POSITION, MAX_POSITION), (-MAX_SPEED, MAX_SPEED)];

#[derive(Debug, Clone, Copy, Default)]
pub struct MountainCarDynamics;

/// Observation `(position, velocity)`; actions push left (0), coast (1), push right (2).
/// Reward is −1 per step, episodes cap at 200 steps.
pub type MountainCarLite = Sim<MountainCarDynamics>;

impl MountainCarLite {
    pub fn new() -> Self {
        Sim::with_dynamics(MountainCarDynamics)
    }
}

impl Default for MountainCarLite {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for MountainCarDynamics {
    const KIND: EnvKind = EnvKind::MountainCar;
    const ACTIONS: usize = 3;
    const MAX_STEPS: u32 = 200;

    fn bounds(&self) -> &'static [(f64, f64)] {
        &BOUNDS
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-0.6..=-0.4), 0.0]
    }

    fn advance(&self, state: &mut [f64], action: usize) -> (f64, bool) {
        let mut position = state[0];
        let mut velocity = state[1];
        velocity += (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * position).cos();
        velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
        position = (position + velocity).clamp(MIN_POSITION, MAX_POSITION);
        if position == MIN_POSITION && velocity < 0.0 {
            velocity = 0.0;
        }
        state[0] = position;
        state[1] = velocity;
        (-1.0, position >= GOAL_POSITION)
    }
}
