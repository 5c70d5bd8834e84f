//! Neighboring-state exploration for value-based reinforcement learning.
//!
//! - [`envsim`]: seedable environments with snapshot/restore and state injection
//! - [`nnet`]: dense ReLU network, backprop, Adam, Huber loss, checkpoints
//! - [`replay`]: FIFO replay buffer with uniform and latest-n sampling
//! - [`qlearn`]: DQN / Double-DQN agents
//! - [`explore`]: rho-explore, change-based exploration and epsilon scheduling
//! - [`harness`]: seeded experiment runner, grids, CSV logs

pub mod envsim;
pub mod explore;
pub mod harness;
pub mod nnet;
pub mod qlearn;
pub mod replay;
