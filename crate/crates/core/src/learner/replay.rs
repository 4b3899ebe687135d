use rand::seq::index;
use rand::Rng;

/// One executed step as stored in replay.
///
/// `a` is the executed action in the policy's `[-1, 1]²` parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: [f64; 4],
    pub a: [f64; 2],
    pub s_next: [f64; 4],
    pub r_eff: f64,
    /// Terminal for bootstrapping purposes.
    pub done: bool,
    pub queried: bool,
}

/// Fixed-capacity ring buffer; the oldest transition is overwritten first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be > 0");
        Self {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Distinct indices, uniformly at random. Returns fewer than `batch_size`
    /// only when the buffer holds fewer items.
    pub fn sample_indices<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<usize> {
        let amount = batch_size.min(self.items.len());
        index::sample(rng, self.items.len(), amount).into_vec()
    }

    pub fn gather(&self, indices: &[usize]) -> Vec<Transition> {
        indices.iter().map(|&i| self.items[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn tr(i: usize) -> Transition {
        let x = i as f64;
        Transition {
            s: [x, 0.0, 0.0, 0.0],
            a: [0.1, -0.1],
            s_next: [x + 1.0, 0.0, 0.0, 0.0],
            r_eff: x * 0.5,
            done: i % 3 == 0,
            queried: i % 2 == 0,
        }
    }

    #[test]
    fn evicts_oldest_first() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(i));
        }
        let held: HashSet<u64> = (0..3).map(|i| buf.get(i).unwrap().s[0] as u64).collect();
        assert_eq!(held, HashSet::from([2, 3, 4]));
    }

    proptest! {
        #[test]
        fn replay_integrity(n in 0usize..300, cap in 1usize..100, batch in 1usize..64, seed in any::<u64>()) {
            let mut buf = ReplayBuffer::new(cap);
            for i in 0..n {
                buf.push(tr(i));
            }
            prop_assert_eq!(buf.len(), n.min(cap));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = buf.sample_indices(batch, &mut rng);
            prop_assert_eq!(idx.len(), batch.min(buf.len()));
            let distinct: HashSet<_> = idx.iter().collect();
            prop_assert_eq!(distinct.len(), idx.len());
            let oldest_kept = n.saturating_sub(cap);
            for t in buf.gather(&idx) {
                let i = t.s[0] as usize;
                prop_assert!(i >= oldest_kept && i < n);
                prop_assert_eq!(t, tr(i));
            }
        }
    }
}
