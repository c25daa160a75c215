/// Binary sum tree over nonnegative event weights.
///
/// `update` and `select` are O(log n); the root always holds the total rate.
/// Parents are recomputed from both children on every update, so the tree
/// never drifts from its leaves.
#[derive(Debug, Clone)]
pub struct EventTree {
    size: usize,
    tree: Vec<f64>,
}

impl EventTree {
    pub fn new(weights: &[f64]) -> Self {
        let size = weights.len().next_power_of_two().max(1);
        let mut tree = vec![0.0; 2 * size];
        tree[size..size + weights.len()].copy_from_slice(weights);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        Self { size, tree }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    #[inline]
    pub fn get(&self, leaf: usize) -> f64 {
        self.tree[self.size + leaf]
    }

    pub fn update(&mut self, leaf: usize, weight: f64) {
        debug_assert!(weight >= 0.0);
        let mut i = self.size + leaf;
        self.tree[i] = weight;
        while i > 1 {
            i /= 2;
            self.tree[i] = self.tree[2 * i] + self.tree[2 * i + 1];
        }
    }

    /// Leaf index whose cumulative weight interval contains `target`;
    /// `target` must lie in `[0, total())`. Zero-weight leaves reached by
    /// floating-point boundary landings are skipped forward.
    pub fn select(&self, mut target: f64) -> usize {
        debug_assert!(target >= 0.0 && target < self.total());
        let mut node = 1;
        while node < self.size {
            let left = self.tree[2 * node];
            if target < left {
                node = 2 * node;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        let mut leaf = node - self.size;
        while self.tree[self.size + leaf] == 0.0 {
            leaf = (leaf + 1) % self.size;
        }
        leaf
    }
}
