//! Order-statistics AVL tree with lazily propagated semigroup tags.
//!
//! The tree represents a dynamic array whose elements can be transformed on
//! contiguous ranges by semigroup elements; positions support insertion and
//! deletion. All operations touch O(log n) nodes. Pending tags are pushed
//! down before any rotation so rebalancing preserves element values.

/// Abelian semigroup with identity.
pub trait Semigroup: Clone {
    fn identity() -> Self;
    /// `compose(g2, g1)` applies `g1` first, then `g2`.
    fn compose(g2: &Self, g1: &Self) -> Self;
    fn is_identity(&self) -> bool;
}

/// Action of a semigroup element on stored values.
pub trait Applies<V>: Semigroup {
    fn apply_to(&self, v: &V) -> V;
}

const NIL: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node<G, V> {
    left: u32,
    right: u32,
    size: u32,
    height: u8,
    value: V,
    tag: G,
}

/// Sequence of `V` values under lazy range transforms from `G`.
#[derive(Debug, Clone)]
pub struct SegTree<G, V> {
    nodes: Vec<Node<G, V>>,
    free: Vec<u32>,
    root: u32,
}

impl<G: Applies<V>, V: Clone> Default for SegTree<G, V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<G: Applies<V>, V: Clone> SegTree<G, V> {
    pub fn new() -> Self {
        SegTree {
            nodes: Vec::new(),
            free: Vec::new(),
            root: NIL,
        }
    }

    pub fn with_capacity(cap: usize) -> Self {
        SegTree {
            nodes: Vec::with_capacity(cap),
            free: Vec::new(),
            root: NIL,
        }
    }

    pub fn len(&self) -> usize {
        self.subtree_size(self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root == NIL
    }

    /// Height of the tree; O(1).
    pub fn height(&self) -> usize {
        if self.root == NIL {
            0
        } else {
            self.nodes[self.root as usize].height as usize
        }
    }

    fn subtree_size(&self, idx: u32) -> usize {
        if idx == NIL {
            0
        } else {
            self.nodes[idx as usize].size as usize
        }
    }

    fn node_height(&self, idx: u32) -> i32 {
        if idx == NIL {
            0
        } else {
            self.nodes[idx as usize].height as i32
        }
    }

    fn alloc(&mut self, value: V) -> u32 {
        let node = Node {
            left: NIL,
            right: NIL,
            size: 1,
            height: 1,
            value,
            tag: G::identity(),
        };
        if let Some(idx) = self.free.pop() {
            self.nodes[idx as usize] = node;
            idx
        } else {
            self.nodes.push(node);
            (self.nodes.len() - 1) as u32
        }
    }

    fn release(&mut self, idx: u32) {
        self.free.push(idx);
    }

    fn refresh(&mut self, idx: u32) {
        let (l, r) = {
            let n = &self.nodes[idx as usize];
            (n.left, n.right)
        };
        let size = 1 + self.subtree_size(l) as u32 + self.subtree_size(r) as u32;
        let height = 1 + self.node_height(l).max(self.node_height(r));
        let n = &mut self.nodes[idx as usize];
        n.size = size;
        n.height = height as u8;
    }

    /// Applies the node's pending tag to its own value and defers it to the
    /// children.
    fn push_down(&mut self, idx: u32) {
        let tag = self.nodes[idx as usize].tag.clone();
        if tag.is_identity() {
            return;
        }
        {
            let n = &mut self.nodes[idx as usize];
            n.value = tag.apply_to(&n.value);
            n.tag = G::identity();
        }
        let (l, r) = {
            let n = &self.nodes[idx as usize];
            (n.left, n.right)
        };
        for child in [l, r] {
            if child != NIL {
                let c = &mut self.nodes[child as usize];
                c.tag = G::compose(&tag, &c.tag);
            }
        }
    }

    fn balance_factor(&self, idx: u32) -> i32 {
        let n = &self.nodes[idx as usize];
        self.node_height(n.left) - self.node_height(n.right)
    }

    /// Right rotation around `x`; `x`'s tag must already be pushed.
    fn rotate_right(&mut self, x: u32) -> u32 {
        let y = self.nodes[x as usize].left;
        self.push_down(y);
        let t = self.nodes[y as usize].right;
        self.nodes[x as usize].left = t;
        self.nodes[y as usize].right = x;
        self.refresh(x);
        self.refresh(y);
        y
    }

    fn rotate_left(&mut self, x: u32) -> u32 {
        let y = self.nodes[x as usize].right;
        self.push_down(y);
        let t = self.nodes[y as usize].left;
        self.nodes[x as usize].right = t;
        self.nodes[y as usize].left = x;
        self.refresh(x);
        self.refresh(y);
        y
    }

    /// Rebalances `idx` (tag already pushed) and returns the new subroot.
    fn rebalance(&mut self, idx: u32) -> u32 {
        self.refresh(idx);
        let bf = self.balance_factor(idx);
        if bf > 1 {
            let l = self.nodes[idx as usize].left;
            self.push_down(l);
            if self.balance_factor(l) < 0 {
                let nl = self.rotate_left(l);
                self.nodes[idx as usize].left = nl;
            }
            self.rotate_right(idx)
        } else if bf < -1 {
            let r = self.nodes[idx as usize].right;
            self.push_down(r);
            if self.balance_factor(r) > 0 {
                let nr = self.rotate_right(r);
                self.nodes[idx as usize].right = nr;
            }
            self.rotate_left(idx)
        } else {
            idx
        }
    }

    /// Value at position `j` (0-based), with all pending tags applied.
    pub fn get(&self, mut j: usize) -> V {
        assert!(j < self.len(), "index {j} out of bounds");
        let mut acc = G::identity();
        let mut cur = self.root;
        loop {
            let n = &self.nodes[cur as usize];
            // deeper tags are newer; they apply after what we have so far
            acc = G::compose(&n.tag, &acc);
            let ls = self.subtree_size(n.left);
            if j < ls {
                cur = n.left;
            } else if j == ls {
                return acc.apply_to(&n.value);
            } else {
                j -= ls + 1;
                cur = n.right;
            }
        }
    }

    /// Inserts `value` so that it ends up at position `j` (0 <= j <= len).
    pub fn insert(&mut self, j: usize, value: V) {
        assert!(j <= self.len(), "insert position {j} out of bounds");
        let root = self.root;
        self.root = self.insert_rec(root, j, value);
    }

    fn insert_rec(&mut self, idx: u32, j: usize, value: V) -> u32 {
        if idx == NIL {
            return self.alloc(value);
        }
        self.push_down(idx);
        let ls = self.subtree_size(self.nodes[idx as usize].left);
        if j <= ls {
            let l = self.nodes[idx as usize].left;
            let nl = self.insert_rec(l, j, value);
            self.nodes[idx as usize].left = nl;
        } else {
            let r = self.nodes[idx as usize].right;
            let nr = self.insert_rec(r, j - ls - 1, value);
            self.nodes[idx as usize].right = nr;
        }
        self.rebalance(idx)
    }

    /// Removes the value at position `j`.
    pub fn delete(&mut self, j: usize) {
        assert!(j < self.len(), "delete position {j} out of bounds");
        let root = self.root;
        self.root = self.delete_rec(root, j);
    }

    fn delete_rec(&mut self, idx: u32, j: usize) -> u32 {
        self.push_down(idx);
        let ls = self.subtree_size(self.nodes[idx as usize].left);
        if j < ls {
            let l = self.nodes[idx as usize].left;
            let nl = self.delete_rec(l, j);
            self.nodes[idx as usize].left = nl;
        } else if j > ls {
            let r = self.nodes[idx as usize].right;
            let nr = self.delete_rec(r, j - ls - 1);
            self.nodes[idx as usize].right = nr;
        } else {
            let (l, r) = {
                let n = &self.nodes[idx as usize];
                (n.left, n.right)
            };
            if l == NIL {
                self.release(idx);
                return r;
            }
            if r == NIL {
                self.release(idx);
                return l;
            }
            // replace with the in-order successor; idx's tag is already pushed
            let (nr, succ) = self.extract_min(r);
            let n = &mut self.nodes[idx as usize];
            n.right = nr;
            n.value = succ;
        }
        self.rebalance(idx)
    }

    /// Removes and returns the leftmost value of the subtree at `idx`.
    fn extract_min(&mut self, idx: u32) -> (u32, V) {
        self.push_down(idx);
        let l = self.nodes[idx as usize].left;
        if l == NIL {
            let r = self.nodes[idx as usize].right;
            let v = self.nodes[idx as usize].value.clone();
            self.release(idx);
            return (r, v);
        }
        let (nl, v) = self.extract_min(l);
        self.nodes[idx as usize].left = nl;
        (self.rebalance(idx), v)
    }

    /// Applies `g` to every value in positions `[l, r]` (0-based, inclusive).
    pub fn apply_range(&mut self, g: &G, l: usize, r: usize) {
        let len = self.len();
        assert!(
            l <= r && r < len,
            "range [{l}, {r}] out of bounds for {len}"
        );
        if g.is_identity() {
            return;
        }
        let root = self.root;
        self.apply_rec(root, l as i64, r as i64, g);
    }

    fn apply_rec(&mut self, idx: u32, l: i64, r: i64, g: &G) {
        let size = self.subtree_size(idx) as i64;
        if idx == NIL || r < 0 || l >= size {
            return;
        }
        if l <= 0 && r >= size - 1 {
            let n = &mut self.nodes[idx as usize];
            n.tag = G::compose(g, &n.tag);
            return;
        }
        self.push_down(idx);
        let (left, right) = {
            let n = &self.nodes[idx as usize];
            (n.left, n.right)
        };
        let ls = self.subtree_size(left) as i64;
        self.apply_rec(left, l, r.min(ls - 1), g);
        if l <= ls && ls <= r {
            let n = &mut self.nodes[idx as usize];
            n.value = g.apply_to(&n.value);
        }
        self.apply_rec(right, l - ls - 1, r - ls - 1, g);
    }

    /// In-order dump of all values with pending tags applied; O(n).
    pub fn collect(&self) -> Vec<V> {
        let mut out = Vec::with_capacity(self.len());
        self.collect_rec(self.root, &G::identity(), &mut out);
        out
    }

    fn collect_rec(&self, idx: u32, acc: &G, out: &mut Vec<V>) {
        if idx == NIL {
            return;
        }
        let n = &self.nodes[idx as usize];
        let acc = G::compose(&n.tag, acc);
        self.collect_rec(n.left, &acc, out);
        out.push(acc.apply_to(&n.value));
        self.collect_rec(n.right, &acc, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Toy abelian action for structural tests: add a constant to a range.
    #[derive(Debug, Clone, PartialEq)]
    struct Shift(i64);

    impl Semigroup for Shift {
        fn identity() -> Self {
            Shift(0)
        }
        fn compose(g2: &Self, g1: &Self) -> Self {
            Shift(g2.0 + g1.0)
        }
        fn is_identity(&self) -> bool {
            self.0 == 0
        }
    }

    impl Applies<i64> for Shift {
        fn apply_to(&self, v: &i64) -> i64 {
            v + self.0
        }
    }

    #[test]
    fn insert_then_get() {
        let mut t: SegTree<Shift, i64> = SegTree::new();
        t.insert(0, 10);
        t.insert(1, 30);
        t.insert(1, 20);
        assert_eq!(t.len(), 3);
        assert_eq!((t.get(0), t.get(1), t.get(2)), (10, 20, 30));
    }

    #[test]
    fn identity_apply_is_noop() {
        let mut t: SegTree<Shift, i64> = SegTree::new();
        for i in 0..8 {
            t.insert(i, i as i64);
        }
        t.apply_range(&Shift(0), 0, 7);
        for i in 0..8 {
            assert_eq!(t.get(i), i as i64);
        }
    }

    #[test]
    fn random_ops_match_naive_vec() {
        use crate::rng::Rng;
        let mut rng = Rng::new(99);
        let mut tree: SegTree<Shift, i64> = SegTree::new();
        let mut naive: Vec<i64> = Vec::new();
        for step in 0..10_000 {
            let op = rng.below(5);
            match op {
                0 | 1 if naive.len() < 256 => {
                    let j = rng.below(naive.len() + 1);
                    let v = rng.next_u64() as i64 % 1000;
                    tree.insert(j, v);
                    naive.insert(j, v);
                }
                2 if !naive.is_empty() => {
                    let j = rng.below(naive.len());
                    tree.delete(j);
                    naive.remove(j);
                }
                3 if !naive.is_empty() => {
                    let a = rng.below(naive.len());
                    let b = rng.below(naive.len());
                    let (l, r) = (a.min(b), a.max(b));
                    let d = (rng.next_u64() % 21) as i64 - 10;
                    tree.apply_range(&Shift(d), l, r);
                    for item in naive[l..=r].iter_mut() {
                        *item += d;
                    }
                }
                _ if !naive.is_empty() => {
                    let j = rng.below(naive.len());
                    assert_eq!(tree.get(j), naive[j], "mismatch at step {step}");
                }
                _ => {}
            }
            if step % 1000 == 0 && !naive.is_empty() {
                let dumped = tree.collect();
                assert_eq!(dumped, naive, "dump mismatch at step {step}");
            }
        }
        assert_eq!(tree.collect(), naive);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        #[derive(Debug, Clone)]
        enum Op {
            Insert(usize, i64),
            Delete(usize),
            Apply(usize, usize, i64),
        }

        fn arb_ops() -> impl Strategy<Value = Vec<Op>> {
            prop::collection::vec((0u8..3, 0usize..64, 0usize..64, -9i64..10), 1..120).prop_map(
                |raw| {
                    raw.into_iter()
                        .map(|(kind, a, b, d)| match kind {
                            0 => Op::Insert(a, d),
                            1 => Op::Delete(a),
                            _ => Op::Apply(a, b, d),
                        })
                        .collect()
                },
            )
        }

        proptest! {
            #[test]
            fn matches_naive_vec(ops in arb_ops()) {
                let mut tree: SegTree<Shift, i64> = SegTree::new();
                let mut naive: Vec<i64> = Vec::new();
                for op in ops {
                    match op {
                        Op::Insert(j, v) => {
                            let j = j % (naive.len() + 1);
                            tree.insert(j, v);
                            naive.insert(j, v);
                        }
                        Op::Delete(j) if !naive.is_empty() => {
                            let j = j % naive.len();
                            tree.delete(j);
                            naive.remove(j);
                        }
                        Op::Apply(a, b, d) if !naive.is_empty() => {
                            let a = a % naive.len();
                            let b = b % naive.len();
                            let (l, r) = (a.min(b), a.max(b));
                            tree.apply_range(&Shift(d), l, r);
                            for item in naive[l..=r].iter_mut() {
                                *item += d;
                            }
                        }
                        _ => {}
                    }
                    prop_assert_eq!(tree.len(), naive.len());
                }
                prop_assert_eq!(tree.collect(), naive);
            }
        }
    }

    #[test]
    fn height_stays_logarithmic() {
        let mut t: SegTree<Shift, i64> = SegTree::new();
        for i in 0..4096 {
            t.insert(i, i as i64); // adversarial: always append
        }
        let bound = 2.0 * (4096f64).log2() + 2.0;
        assert!(
            (t.height() as f64) <= bound,
            "height {} above {bound}",
            t.height()
        );
        // deleting from the front keeps balance too
        for _ in 0..3000 {
            t.delete(0);
        }
        let bound = 2.0 * (1096f64).log2() + 2.0;
        assert!((t.height() as f64) <= bound);
    }
}
