//! Binary sum tree over nonnegative event rates.
//!
//! Leaf i holds rate w_i; internal nodes hold exact sums of their two
//! children, recomputed on every update, so the root differs from the flat
//! leaf sum only by pairwise-vs-sequential rounding (a few ulps). Sampling
//! and updates are O(log n).

#[derive(Debug, Clone)]
pub struct SumTree {
    cap: usize,
    tree: Vec<f64>,
    len: usize,
}

impl SumTree {
    pub fn new(len: usize) -> Self {
        assert!(len >= 1);
        let cap = len.next_power_of_two();
        SumTree {
            cap,
            tree: vec![0.0; 2 * cap],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> f64 {
        assert!(i < self.len);
        self.tree[self.cap + i]
    }

    pub fn set(&mut self, i: usize, w: f64) {
        assert!(i < self.len);
        debug_assert!(w >= 0.0 && w.is_finite());
        let mut node = self.cap + i;
        self.tree[node] = w;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    /// Recompute every internal node from the leaves; returns the root drift
    /// |new - old| relative to the new total.
    pub fn rebuild(&mut self) -> f64 {
        let old = self.tree[1];
        for node in (1..self.cap).rev() {
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
        let new = self.tree[1];
        if new > 0.0 {
            (new - old).abs() / new
        } else {
            (new - old).abs()
        }
    }

    /// Leaf index whose cumulative-rate interval contains r ∈ [0, total).
    pub fn sample(&self, mut r: f64) -> usize {
        assert!(self.total() > 0.0, "sample on empty table");
        let mut node = 1;
        while node < self.cap {
            let left = 2 * node;
            if r < self.tree[left] {
                node = left;
            } else {
                r -= self.tree[left];
                node = left + 1;
            }
        }
        let mut idx = node - self.cap;
        // Rounding at interval edges can land on a zero-rate or padding leaf;
        // walk to the nearest positive leaf.
        if idx >= self.len || self.tree[self.cap + idx] <= 0.0 {
            let down = (0..=idx.min(self.len - 1))
                .rev()
                .find(|&j| self.tree[self.cap + j] > 0.0);
            idx = down
                .or_else(|| (idx..self.len).find(|&j| self.tree[self.cap + j] > 0.0))
                .expect("positive total but no positive leaf");
        }
        idx
    }
}
