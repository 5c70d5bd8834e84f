//! Fixed-capacity FIFO transition store.

use rand::Rng;
use thiserror::Error;

use crate::envsim::{ActionId, Observation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("replay buffer is empty")]
    EmptyBuffer,
    #[error("transition dimension {found} does not match buffer dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Observation,
    pub a: ActionId,
    pub r: f64,
    pub s_next: Observation,
    /// True only when `s_next` is terminal; step-cap truncations are stored as `false`.
    pub done: bool,
}

/// Ring buffer of transitions. Oldest entries are evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    storage: Vec<Transition>,
    capacity: usize,
    /// Slot the next push writes to once the buffer is full.
    head: usize,
    inserted: u64,
    dim: Option<usize>,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 100_000;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            storage: Vec::with_capacity(capacity.min(4096)),
            capacity,
            head: 0,
            inserted: 0,
            dim: None,
        }
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes over the buffer's lifetime.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<(), ReplayError> {
        let dim = *self.dim.get_or_insert(t.s.dim());
        for found in [t.s.dim(), t.s_next.dim()] {
            if found != dim {
                return Err(ReplayError::DimensionMismatch {
                    expected: dim,
                    found,
                });
            }
        }
        if self.storage.len() < self.capacity {
            self.storage.push(t);
        } else {
            self.storage[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        self.inserted += 1;
        Ok(())
    }

    /// Element `i` in insertion order, `0` being the oldest retained.
    fn ordered(&self, i: usize) -> &Transition {
        &self.storage[(self.head + i) % self.storage.len()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        (0..self.storage.len()).map(move |i| self.ordered(i))
    }

    /// `n` draws, uniform with replacement.
    pub fn sample_uniform<R: Rng + ?Sized>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<&Transition>, ReplayError> {
        if self.is_empty() {
            return Err(ReplayError::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| &self.storage[rng.random_range(0..self.storage.len())])
            .collect())
    }

    /// The `min(n, len)` most recent transitions, oldest first.
    pub fn latest(&self, n: usize) -> Result<Vec<&Transition>, ReplayError> {
        if self.is_empty() {
            return Err(ReplayError::EmptyBuffer);
        }
        let len = self.storage.len();
        let take = n.min(len);
        Ok((len - take..len).map(|i| self.ordered(i)).collect())
    }
}
