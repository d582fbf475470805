//! Complete binary tree of partial sums for weighted index sampling.

/// Leaves hold non-negative weights; internal nodes hold child sums.
///
/// Updates recompute every ancestor from its children, so rounding errors do
/// not accumulate over long runs.
#[derive(Clone, Debug)]
pub struct SumTree {
    len: usize,
    cap: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    pub fn new(len: usize) -> Self {
        let cap = len.max(1).next_power_of_two();
        Self { len, cap, nodes: vec![0.0; 2 * cap] }
    }

    pub fn from_weights(w: &[f64]) -> Self {
        let mut t = Self::new(w.len());
        t.nodes[t.cap..t.cap + w.len()].copy_from_slice(w);
        for i in (1..t.cap).rev() {
            t.nodes[i] = t.nodes[2 * i] + t.nodes[2 * i + 1];
        }
        t
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.nodes[self.cap + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, w: f64) {
        debug_assert!(w >= 0.0);
        let mut k = self.cap + i;
        self.nodes[k] = w;
        k >>= 1;
        while k >= 1 {
            self.nodes[k] = self.nodes[2 * k] + self.nodes[2 * k + 1];
            k >>= 1;
        }
    }

    /// Leaf `i` such that the prefix sum before `i` is `<= target` and the
    /// prefix through `i` exceeds it. `target` must lie in `[0, total)`.
    /// Zero-weight leaves are never returned.
    #[inline]
    pub fn find(&self, mut target: f64) -> usize {
        let mut k = 1;
        while k < self.cap {
            let left = self.nodes[2 * k];
            if target < left {
                k = 2 * k;
            } else {
                target -= left;
                // Guard against rounding leading into an empty right subtree.
                k = if self.nodes[2 * k + 1] > 0.0 { 2 * k + 1 } else { 2 * k };
            }
        }
        k - self.cap
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn find_respects_boundaries() {
        let t = SumTree::from_weights(&[1.0, 0.0, 2.0, 3.0]);
        assert_eq!(t.total(), 6.0);
        assert_eq!(t.find(0.0), 0);
        assert_eq!(t.find(0.999), 0);
        assert_eq!(t.find(1.0), 2);
        assert_eq!(t.find(2.999), 2);
        assert_eq!(t.find(3.0), 3);
        assert_eq!(t.find(5.999), 3);
    }

    proptest! {
        #[test]
        fn parents_match_children(w in proptest::collection::vec(0.0f64..5.0, 1..40),
                                  upd in proptest::collection::vec((0usize..40, 0.0f64..5.0), 0..60)) {
            let mut t = SumTree::from_weights(&w);
            let mut shadow = w.clone();
            for (i, v) in upd {
                let i = i % w.len();
                t.set(i, v);
                shadow[i] = v;
            }
            let s: f64 = shadow.iter().sum();
            prop_assert!((t.total() - s).abs() <= 1e-12 * (1.0 + s));
            let fresh = SumTree::from_weights(&shadow);
            prop_assert_eq!(t.total(), fresh.total());
        }

        #[test]
        fn find_never_returns_zero_weight(w in proptest::collection::vec(prop_oneof![Just(0.0), 0.1f64..3.0], 1..30), u in 0.0f64..1.0) {
            let t = SumTree::from_weights(&w);
            prop_assume!(t.total() > 0.0);
            let i = t.find(u * t.total());
            prop_assert!(i < w.len());
            prop_assert!(w[i] > 0.0);
        }
    }
}
