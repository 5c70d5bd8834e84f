//! Cart-pole balancing with explicit Euler integration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Dynamics, EnvKind, Sim};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
/// Half the pole length.
pub const POLE_LENGTH: f64 = 0.5;
pub const FORCE_MAG: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const X_THRESHOLD: f64 = 2.4;
pub const THETA_THRESHOLD: f64 = 12.0 * std::f64::consts::PI / 180.0;
pub const VELOCITY_LIMIT: f64 = 10.0;

static BOUNDS: [(f64, f64); 4] = [
    (-X_THRESHOLD, X_THRESHOLD),
    (-VELOCITY_LIMIT, VELOCITY_LIMIT),
    (-THETA_THRESHOLD, THETA_THRESHOLD),
    (-VELOCITY_LIMIT, VELOCITY_LIMIT),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct CartPoleDynamics;

/// Observation `(x, x_dot, theta, theta_dot)`; actions push left (0) or right (1).
/// Reward is +1 per step, episodes cap at 500 steps.
pub type CartPoleLite = Sim<CartPoleDynamics>;

impl CartPoleLite {
    pub fn new() -> Self {
        Sim::with_dynamics(CartPoleDynamics)
    }
}

impl Default for CartPoleLite {
    fn default() -> Self {
        Self::new()
    }
}

impl Dynamics for CartPoleDynamics {
    const KIND: EnvKind = EnvKind::CartPole;
    const ACTIONS: usize = 2;
    const MAX_STEPS: u32 = 500;

    fn bounds(&self) -> &'static [(f64, f64)] {
        &BOUNDS
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..4).map(|_| rng.random_range(-0.05..0.05)).collect()
    }

    fn advance(&self, state: &mut [f64], action: usize) -> (f64, bool) {
        let [x, x_dot, theta, theta_dot] = [state[0], state[1], state[2], state[3]];
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let total_mass = CART_MASS + POLE_MASS;
        let pole_mass_length = POLE_MASS * POLE_LENGTH;
        let (sin, cos) = theta.sin_cos();

        let temp = (force + pole_mass_length * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (POLE_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
        let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;

        state[0] = x + DT * x_dot;
        state[1] = x_dot + DT * x_acc;
        state[2] = theta + DT * theta_dot;
        state[3] = theta_dot + DT * theta_acc;

        // The clipped bound itself counts as failure, so injected states at the limit are terminal.
        let failed = state[0].abs() >= X_THRESHOLD || state[2].abs() >= THETA_THRESHOLD;
        (1.0, failed)
    }
}
