//! Point-mass lunar lander with a main engine and two attitude thrusters.
//!
//! State `(x, y, vx, vy, theta, omega)`, landing pad at the origin. The main
//! engine pushes along the body axis; the side thrusters only apply torque.
//! Per-step reward is the change of the potential
//! `-(distance to pad + speed + |theta|)`, plus +100 for a soft touchdown or
//! −100 for a crash or leaving the arena.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{clip_to_bounds, Dynamics, EnvKind, Sim};

pub const GRAVITY: f64 = 1.0;
pub const MAIN_THRUST: f64 = 2.0;
pub const SIDE_TORQUE: f64 = 0.1;
pub const DT: f64 = 0.05;

pub const X_LIMIT: f64 = 1.5;
pub const Y_CEILING: f64 = 3.0;
pub const THETA_LIMIT: f64 = std::f64::consts::FRAC_PI_2;
pub const VELOCITY_LIMIT: f64 = 10.0;

/// Touchdown is soft when all of these hold.
pub const SAFE_VX: f64 = 0.5;
pub const SAFE_VY: f64 = 0.5;
pub const SAFE_THETA: f64 = 0.3;

pub const LANDED_BONUS: f64 = 100.0;
pub const CRASH_PENALTY: f64 = -100.0;

pub const NOOP: usize = 0;
/// Counter-clockwise torque.
pub const LEFT: usize = 1;
pub const MAIN: usize = 2;
/// Clockwise torque.
pub const RIGHT: usize = 3;

static BOUNDS: [(f64, f64); 6] = [
    (-X_LIMIT, X_LIMIT),
    (0.0, Y_CEILING),
    (-VELOCITY_LIMIT, VELOCITY_LIMIT),
    (-VELOCITY_LIMIT, VELOCITY_LIMIT),
    (-THETA_LIMIT, THETA_LIMIT),
    (-VELOCITY_LIMIT, VELOCITY_LIMIT),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct LanderDynamics;

/// Episodes cap at 400 steps.
pub type LanderLite = Sim<LanderDynamics>;

impl LanderLite {
    pub fn new() -> Self {
        Sim::with_dynamics(LanderDynamics)
    }
}

impl Default for LanderLite {
    fn default() -> Self {
        Self::new()
    }
}

pub fn potential(state: &[f64]) -> f64 {
    let distance = state[0].hypot(state[1]);
    let speed = state[2].hypot(state[3]);
    -(distance + speed + state[4].abs())
}

impl Dynamics for LanderDynamics {
    const KIND: EnvKind = EnvKind::Lander;
    const ACTIONS: usize = 4;
    const MAX_STEPS: u32 = 400;

    fn bounds(&self) -> &'static [(f64, f64)] {
        &BOUNDS
    }

    fn initial_state(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![
            rng.random_range(-0.5..=0.5),
            rng.random_range(1.0..=1.5),
            rng.random_range(-0.1..=0.1),
            rng.random_range(-0.1..=0.0),
            rng.random_range(-0.1..=0.1),
            0.0,
        ]
    }

    fn advance(&self, state: &mut [f64], action: usize) -> (f64, bool) {
        let before = potential(state);
        let [x, y, vx, vy, theta, omega] =
            [state[0], state[1], state[2], state[3], state[4], state[5]];

        let thrust = if action == MAIN { MAIN_THRUST } else { 0.0 };
        let ax = -thrust * theta.sin();
        let ay = thrust * theta.cos() - GRAVITY;
        let alpha = match action {
            LEFT => SIDE_TORQUE,
            RIGHT => -SIDE_TORQUE,
            _ => 0.0,
        };

        state[0] = x + DT * vx;
        state[1] = y + DT * vy;
        state[2] = vx + DT * ax;
        state[3] = vy + DT * ay;
        state[4] = theta + DT * omega;
        state[5] = omega + DT * alpha;

        let touched_down = state[1] <= 0.0;
        let soft =
            state[2].abs() <= SAFE_VX && state[3].abs() <= SAFE_VY && state[4].abs() <= SAFE_THETA;
        let out_of_arena =
            state[0].abs() >= X_LIMIT || state[1] >= Y_CEILING || state[4].abs() >= THETA_LIMIT;

        clip_to_bounds(state, &BOUNDS);
        let shaped = potential(state) - before;
        if touched_down {
            let bonus = if soft { LANDED_BONUS } else { CRASH_PENALTY };
            (shaped + bonus, true)
        } else if out_of_arena {
            (shaped + CRASH_PENALTY, true)
        } else {
            (shaped, false)
        }
    }
}
