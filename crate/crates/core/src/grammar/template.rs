use super::GrammarError;

/// Largest template depth accepted by [`TreeTemplate::new`].
pub const DEFAULT_MAX_DEPTH: usize = 4;

/// A full binary tree of fixed depth, nodes numbered breadth-first from the
/// root (node 0). Node `n` has successors `2n+1` (left) and `2n+2` (right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeTemplate {
    depth: usize,
}

impl TreeTemplate {
    pub fn new(depth: usize) -> Result<Self, GrammarError> {
        Self::with_max_depth(depth, DEFAULT_MAX_DEPTH)
    }

    pub fn with_max_depth(depth: usize, max: usize) -> Result<Self, GrammarError> {
        // 2^(depth+1) must fit comfortably in a usize.
        if depth > max || depth > 24 {
            return Err(GrammarError::DepthTooLarge { depth, max });
        }
        Ok(TreeTemplate { depth })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// |N| = 2^(depth+1) - 1.
    pub fn len(&self) -> usize {
        (1usize << (self.depth + 1)) - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn first_leaf(&self) -> usize {
        (1usize << self.depth) - 1
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        n >= self.first_leaf()
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        self.first_leaf()..self.len()
    }

    /// `(left, right)` successors of a non-leaf node.
    pub fn children(&self, n: usize) -> Option<(usize, usize)> {
        (!self.is_leaf(n)).then(|| (2 * n + 1, 2 * n + 2))
    }

    pub fn parent(&self, n: usize) -> Option<usize> {
        (n > 0).then(|| (n - 1) / 2)
    }

    pub fn is_left_child(&self, n: usize) -> bool {
        n > 0 && n % 2 == 1
    }

    /// Distance from the root.
    pub fn level(&self, n: usize) -> usize {
        (usize::BITS - (n + 1).leading_zeros() - 1) as usize
    }

    /// Levels below `n` (0 for leaves).
    pub fn height(&self, n: usize) -> usize {
        self.depth - self.level(n)
    }

    /// Highest breadth-first index inside the subtree rooted at `n`.
    pub fn last_descendant(&self, n: usize) -> usize {
        let mut r = n;
        while let Some((_, right)) = self.children(r) {
            r = right;
        }
        r
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.first_leaf())
            .flat_map(|n| [(n, 2 * n + 1), (n, 2 * n + 2)])
            .collect()
    }
}
