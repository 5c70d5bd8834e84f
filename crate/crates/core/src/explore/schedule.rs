use rand::Rng;

use super::{RhoConfig, RhoGate};

/// Linear decay from `eps_start` to `eps_floor` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_floor: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            eps_start: 1.0,
            eps_floor: 0.05,
            decay_steps: 10_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn is_valid(&self) -> bool {
        self.eps_start >= self.eps_floor && self.eps_floor >= 0.0
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.eps_floor;
        }
        let frac = step as f64 / self.decay_steps as f64;
        (self.eps_start - (self.eps_start - self.eps_floor) * frac).max(self.eps_floor)
    }
}

/// Steps left in the current consecutive rho-explore interval.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RhoGateState {
    pub remaining: usize,
}

/// Decide whether this step uses rho-explore, advancing the interval state.
pub fn should_rho_explore<R: Rng + ?Sized>(
    gate: RhoGateState,
    cfg: &RhoConfig,
    eps: f64,
    rng: &mut R,
) -> (bool, RhoGateState) {
    match cfg.gate {
        RhoGate::Intermittent => {
            if gate.remaining > 0 {
                return (
                    true,
                    RhoGateState {
                        remaining: gate.remaining - 1,
                    },
                );
            }
            if rng.random::<f64>() < cfg.phi * eps {
                (
                    true,
                    RhoGateState {
                        remaining: cfg.period - 1,
                    },
                )
            } else {
                (false, gate)
            }
        }
        RhoGate::Inverse => {
            let p = (1.0 - eps).clamp(0.0, 0.5);
            (rng.random::<f64>() < p, gate)
        }
    }
}
