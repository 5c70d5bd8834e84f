//! DQN and Double-DQN agents.

use std::borrow::Borrow;
use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::envsim::ActionId;
use crate::nnet::{
    self, adam_step, huber_loss_grad, AdamConfig, AdamState, GradientSet, MlpParams, NnetError,
};
use crate::replay::Transition;

#[derive(Debug, Error)]
pub enum QlearnError {
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("action {action} out of range for a network with {actions} outputs")]
    InvalidAction { action: usize, actions: usize },
    #[error("online and target networks have different shapes")]
    ShapeMismatch,
}

/// Anything that maps an observation to one value per action.
pub trait QFunction {
    fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, NnetError>;

    /// Argmax of [`QFunction::q_values`]; ties go to the lowest index.
    fn greedy_action(&self, obs: &[f64]) -> Result<ActionId, NnetError> {
        Ok(argmax(&self.q_values(obs)?))
    }

    fn max_q(&self, obs: &[f64]) -> Result<f64, NnetError> {
        Ok(self
            .q_values(obs)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> ActionId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    ActionId(best)
}

impl QFunction for MlpParams {
    fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, NnetError> {
        self.forward(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Dqn,
    Ddqn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub adam: AdamConfig,
    pub hidden: Vec<usize>,
    /// Hard-copy online into target every this many train steps.
    pub target_sync: u64,
    pub grad_clip: Option<f64>,
    pub huber_delta: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            variant: Variant::Ddqn,
            gamma: 0.99,
            adam: AdamConfig::default(),
            hidden: vec![64, 64],
            target_sync: 500,
            grad_clip: Some(10.0),
            huber_delta: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentState {
    pub online: MlpParams,
    pub target: MlpParams,
    adam: AdamState,
    pub gamma: f64,
    pub variant: Variant,
    train_steps: u64,
    target_sync: u64,
    grad_clip: Option<f64>,
    huber_delta: f64,
}

impl AgentState {
    /// Fresh He-initialized agent; the target starts as a copy of the online net.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        actions: usize,
        cfg: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self, QlearnError> {
        let mut widths = vec![obs_dim];
        widths.extend(&cfg.hidden);
        widths.push(actions);
        let online = MlpParams::he_uniform(&widths, rng)?;
        Self::with_networks(online.clone(), online, cfg)
    }

    pub fn with_networks(
        online: MlpParams,
        target: MlpParams,
        cfg: &AgentConfig,
    ) -> Result<Self, QlearnError> {
        if online.widths() != target.widths() {
            return Err(QlearnError::ShapeMismatch);
        }
        Ok(AgentState {
            adam: AdamState::new(&online, cfg.adam),
            online,
            target,
            gamma: cfg.gamma,
            variant: cfg.variant,
            train_steps: 0,
            target_sync: cfg.target_sync.max(1),
            grad_clip: cfg.grad_clip,
            huber_delta: cfg.huber_delta,
        })
    }

    pub fn action_count(&self) -> usize {
        self.online.output_dim()
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    /// Bootstrapped regression targets, one per transition.
    pub fn td_targets<T: Borrow<Transition>>(&self, batch: &[T]) -> Result<Vec<f64>, QlearnError> {
        if batch.is_empty() {
            return Err(QlearnError::EmptyBatch);
        }
        let actions = self.action_count();
        let live: Vec<usize> = (0..batch.len())
            .filter(|&i| !batch[i].borrow().done)
            .collect();
        let mut targets: Vec<f64> = batch.iter().map(|t| t.borrow().r).collect();
        if live.is_empty() {
            return Ok(targets);
        }

        let next: Vec<f64> = live
            .iter()
            .flat_map(|&i| batch[i].borrow().s_next.iter().copied())
            .collect();
        let q_target = self.target.forward_batch(&next, live.len())?;
        let q_online = match self.variant {
            Variant::Ddqn => Some(self.online.forward_batch(&next, live.len())?),
            Variant::Dqn => None,
        };
        for (row, &i) in live.iter().enumerate() {
            let target_row = &q_target[row * actions..(row + 1) * actions];
            let bootstrap = match &q_online {
                Some(online) => target_row[argmax(&online[row * actions..(row + 1) * actions]).0],
                None => target_row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            targets[i] += self.gamma * bootstrap;
        }
        Ok(targets)
    }

    /// Mean Huber loss of `Q_online(s)[a]` against `targets`, and its parameter gradient.
    /// Only the taken action's output receives gradient.
    pub fn loss_and_gradient<T: Borrow<Transition>>(
        &self,
        batch: &[T],
        targets: &[f64],
    ) -> Result<(f64, GradientSet), QlearnError> {
        if batch.is_empty() {
            return Err(QlearnError::EmptyBatch);
        }
        let actions = self.action_count();
        let states: Vec<f64> = batch
            .iter()
            .flat_map(|t| t.borrow().s.iter().copied())
            .collect();
        let q = self.online.forward_batch(&states, batch.len())?;
        let taken = batch
            .iter()
            .map(|t| {
                let a = t.borrow().a.0;
                if a < actions {
                    Ok(a)
                } else {
                    Err(QlearnError::InvalidAction { action: a, actions })
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let pred: Vec<f64> = taken
            .iter()
            .enumerate()
            .map(|(i, &a)| q[i * actions + a])
            .collect();
        let (loss, dpred) = huber_loss_grad(&pred, targets, self.huber_delta)?;

        let mut upstream = vec![0.0; batch.len() * actions];
        for (i, (&a, d)) in taken.iter().zip(dpred).enumerate() {
            upstream[i * actions + a] = d;
        }
        let grads = self
            .online
            .backward_batch(&states, &upstream, batch.len())?;
        Ok((loss, grads))
    }

    /// One Adam step on the batch; returns the pre-update loss.
    pub fn train_step<T: Borrow<Transition>>(&mut self, batch: &[T]) -> Result<f64, QlearnError> {
        let targets = self.td_targets(batch)?;
        let (loss, mut grads) = self.loss_and_gradient(batch, &targets)?;
        if let Some(max_norm) = self.grad_clip {
            grads.clip_norm(max_norm);
        }
        adam_step(&mut self.online, &grads, &mut self.adam)?;
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.target_sync) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }

    /// Online then target network, each in the parameter file format.
    pub fn save<W: Write>(&self, out: &mut W) -> Result<(), QlearnError> {
        nnet::write_params(out, &self.online)?;
        nnet::write_params(out, &self.target)?;
        Ok(())
    }

    /// Restore networks from [`AgentState::save`] output; optimizer state starts fresh.
    pub fn load<R: Read>(input: &mut R, cfg: &AgentConfig) -> Result<Self, QlearnError> {
        let online = nnet::read_params(input)?;
        let target = nnet::read_params(input)?;
        Self::with_networks(online, target, cfg)
    }
}

impl QFunction for AgentState {
    fn q_values(&self, obs: &[f64]) -> Result<Vec<f64>, NnetError> {
        self.online.forward(obs)
    }
}
