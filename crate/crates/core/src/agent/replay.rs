use rand::Rng;

use super::{Action, ACTION_DIM};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    pub done: bool,
}

/// Column-stacked minibatch.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Tensor,
    pub actions: Tensor,
    pub rewards: Vec<f64>,
    pub next_obs: Tensor,
    /// 1.0 for terminal transitions.
    pub dones: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[&Transition]) -> Self {
        let obs_dim = items.first().map_or(0, |t| t.obs.len());
        let b = items.len();
        let mut obs = Vec::with_capacity(b * obs_dim);
        let mut next = Vec::with_capacity(b * obs_dim);
        let mut actions = Vec::with_capacity(b * ACTION_DIM);
        for t in items {
            obs.extend_from_slice(&t.obs);
            next.extend_from_slice(&t.next_obs);
            actions.extend_from_slice(&t.action);
        }
        Self {
            obs: Tensor::new(vec![b, obs_dim], obs).expect("finite observations"),
            actions: Tensor::new(vec![b, ACTION_DIM], actions).expect("finite actions"),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_obs: Tensor::new(vec![b, obs_dim], next).expect("finite observations"),
            dones: items.iter().map(|t| if t.done { 1.0 } else { 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), cursor: 0 }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
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

    /// `batch_size` transitions drawn uniformly with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Option<Batch> {
        if self.items.is_empty() || batch_size == 0 {
            return None;
        }
        let picks: Vec<&Transition> =
            (0..batch_size).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect();
        Some(Batch::from_transitions(&picks))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(r: f64) -> Transition {
        Transition { obs: vec![r], action: [0.0, 0.0], reward: r, next_obs: vec![r], done: false }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(t(f64::from(i)));
        }
        assert_eq!(buf.len(), 3);
        let mut rewards: Vec<f64> = buf.items.iter().map(|t| t.reward).collect();
        rewards.sort_by(f64::total_cmp);
        assert_eq!(rewards, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..4 {
            buf.push(t(f64::from(i)));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; 4];
        let draws = 40_000;
        for r in buf.sample(draws, &mut rng).unwrap().rewards {
            counts[r as usize] += 1;
        }
        // Binomial sd is about 87 per cell.
        for c in counts {
            assert!((c as f64 - 10_000.0).abs() < 400.0, "{counts:?}");
        }
        assert!(ReplayBuffer::new(2).sample(4, &mut rng).is_none());
    }
}
