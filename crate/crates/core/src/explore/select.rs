use rand::Rng;

use super::{
    change_based_action, rho_explore_action, should_rho_explore, ChangeBasedConfig,
    EpsilonSchedule, ExploreError, RhoConfig, RhoGate, RhoGateState,
};
use crate::envsim::{ActionId, Environment, Observation};
use crate::qlearn::QFunction;
use crate::replay::ReplayBuffer;

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Plain epsilon-greedy.
    Baseline,
    Rho(RhoConfig),
    ChangeBased(ChangeBasedConfig),
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Baseline => "baseline",
            Strategy::Rho(_) => "rho",
            Strategy::ChangeBased(_) => "change_based",
        }
    }
}

/// Which rule produced an action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Greedy,
    Random,
    Rho,
    ChangeBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: ActionId,
    pub branch: Branch,
    /// Simulator steps spent on mini-rollouts for this decision.
    pub sim_queries: usize,
}

/// Epsilon-greedy combined with one neighboring-state strategy.
#[derive(Debug, Clone)]
pub struct Explorer {
    strategy: Strategy,
    schedule: EpsilonSchedule,
    gate: RhoGateState,
}

impl Explorer {
    pub fn new(strategy: Strategy, schedule: EpsilonSchedule) -> Result<Self, ExploreError> {
        match &strategy {
            Strategy::Baseline => {}
            Strategy::Rho(cfg) => cfg.validate()?,
            Strategy::ChangeBased(cfg) => cfg.validate()?,
        }
        if !schedule.is_valid() {
            return Err(ExploreError::InvalidConfig(
                "epsilon schedule needs eps_start >= eps_floor >= 0".into(),
            ));
        }
        Ok(Explorer {
            strategy,
            schedule,
            gate: RhoGateState::default(),
        })
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn schedule(&self) -> &EpsilonSchedule {
        &self.schedule
    }

    pub fn gate(&self) -> RhoGateState {
        self.gate
    }

    /// Choose the action for training step `step` at observation `s`.
    ///
    /// `env` must be the live environment, currently at `s`; rho-explore
    /// restores it before returning.
    pub fn select_action<E, Q, R>(
        &mut self,
        step: u64,
        s: &Observation,
        env: &mut E,
        q: &Q,
        buffer: &ReplayBuffer,
        rng: &mut R,
    ) -> Result<Decision, ExploreError>
    where
        E: Environment + ?Sized,
        Q: QFunction + ?Sized,
        R: Rng + ?Sized,
    {
        let eps = self.schedule.epsilon_at(step);
        let actions = env.action_count();
        let greedy = |q: &Q| -> Result<Decision, ExploreError> {
            Ok(Decision {
                action: q.greedy_action(s)?,
                branch: Branch::Greedy,
                sim_queries: 0,
            })
        };
        let random = |rng: &mut R| Decision {
            action: ActionId(rng.random_range(0..actions)),
            branch: Branch::Random,
            sim_queries: 0,
        };

        match &self.strategy {
            Strategy::Baseline => {
                if rng.random::<f64>() < eps {
                    Ok(random(rng))
                } else {
                    greedy(q)
                }
            }
            Strategy::Rho(cfg) => {
                let (fire, gate) = should_rho_explore(self.gate, cfg, eps, rng);
                self.gate = gate;
                if fire {
                    let out = rho_explore_action(env, s, q, cfg, rng)?;
                    return Ok(Decision {
                        action: out.action,
                        branch: Branch::Rho,
                        sim_queries: out.sim_queries,
                    });
                }
                let random_share = match cfg.gate {
                    RhoGate::Intermittent => eps * (1.0 - cfg.phi),
                    RhoGate::Inverse => eps,
                };
                if rng.random::<f64>() < random_share {
                    Ok(random(rng))
                } else {
                    greedy(q)
                }
            }
            Strategy::ChangeBased(cfg) => {
                if rng.random::<f64>() >= eps {
                    return greedy(q);
                }
                if step < cfg.switch_step || buffer.is_empty() {
                    return Ok(random(rng));
                }
                let choice = change_based_action(buffer, q, cfg, rng)?;
                Ok(Decision {
                    action: choice.action,
                    branch: Branch::ChangeBased,
                    sim_queries: 0,
                })
            }
        }
    }
}
