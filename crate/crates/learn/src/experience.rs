//! Successful, failed and synthetic experience buffers and their mini-batch rule.

use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LearnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    PhysicalSuccess,
    PhysicalFail,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub terminal: bool,
    pub origin: Origin,
}

/// FIFO buffer that evicts its oldest entry once full.
#[derive(Debug, Clone, PartialEq)]
pub struct RingBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl RingBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity) }
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// `k` uniform draws: without replacement when the buffer holds at least
    /// `k` items, with replacement otherwise.
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Vec<Experience> {
        if self.items.is_empty() || k == 0 {
            return Vec::new();
        }
        if self.items.len() >= k {
            index::sample(rng, self.items.len(), k).into_iter().map(|i| self.items[i].clone()).collect()
        } else {
            (0..k).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Buffers {
    pub success: RingBuffer,
    pub fail: RingBuffer,
    pub dt: RingBuffer,
}

impl Buffers {
    pub fn new(success: usize, fail: usize, dt: usize) -> Self {
        Self { success: RingBuffer::new(success), fail: RingBuffer::new(fail), dt: RingBuffer::new(dt) }
    }

    pub fn push(&mut self, e: Experience) {
        match e.origin {
            Origin::PhysicalSuccess => self.success.push(e),
            Origin::PhysicalFail => self.fail.push(e),
            Origin::Synthetic => self.dt.push(e),
        }
    }

    pub fn physical_len(&self) -> usize {
        self.success.len() + self.fail.len()
    }

    /// `floor(kappa * j)` draws from the success buffer and the rest from the
    /// fail buffer, shuffled. If one buffer is empty the whole batch comes
    /// from the other.
    pub fn sample_physical(&self, j: usize, kappa: f64, rng: &mut impl Rng) -> Result<Vec<Experience>> {
        if self.success.is_empty() && self.fail.is_empty() {
            return Err(LearnError::EmptyBuffer("both physical buffers are empty"));
        }
        let n_suc = if self.fail.is_empty() {
            j
        } else if self.success.is_empty() {
            0
        } else {
            ((kappa.clamp(0.0, 1.0) * j as f64) + 1e-9).floor() as usize
        };
        let mut batch = self.success.sample(n_suc, rng);
        batch.extend(self.fail.sample(j - n_suc, rng));
        batch.shuffle(rng);
        Ok(batch)
    }

    /// Uniform draws from the synthetic buffer; empty if it has no content.
    pub fn sample_dt(&self, j: usize, rng: &mut impl Rng) -> Vec<Experience> {
        self.dt.sample(j, rng)
    }
}
