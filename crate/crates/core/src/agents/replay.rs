use std::collections::VecDeque;

use rand::Rng;

use super::Transition;
use crate::error::{Error, Result};

/// Fixed-capacity FIFO store of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("replay_capacity", "must be positive"));
        }
        Ok(ReplayBuffer {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Appends `t`, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
        if self.storage.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..batch_size)
            .map(|_| self.storage[rng.random_range(0..self.storage.len())])
            .collect())
    }
}

pub fn replay_push(buffer: &mut ReplayBuffer, t: Transition) {
    buffer.push(t);
}

pub fn replay_sample<R: Rng + ?Sized>(buffer: &ReplayBuffer, batch_size: usize, rng: &mut R) -> Result<Vec<Transition>> {
    buffer.sample(batch_size, rng)
}
