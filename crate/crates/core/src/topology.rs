//! Complete binary tree of height `h` with heap indexing.
//!
//! Vertices are numbered `1..=n` with root `1`; the children of `v` are
//! `2v` and `2v + 1`. Branch vertices are `1..2^h`, leaves `2^h..=n`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("invalid height {0}: must be at least 1 and small enough to index")]
    InvalidHeight(u32),
    #[error("invalid vertex {vertex} for a tree with {n} vertices")]
    InvalidVertex { vertex: usize, n: usize },
}

/// Largest height whose vertex count still fits comfortably in `usize`.
pub const MAX_HEIGHT: u32 = usize::BITS - 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeTopology {
    height: u32,
}

impl TreeTopology {
    pub fn new(height: u32) -> Result<Self, TopologyError> {
        if height == 0 || height > MAX_HEIGHT {
            return Err(TopologyError::InvalidHeight(height));
        }
        Ok(Self { height })
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn n_vertices(&self) -> usize {
        (1usize << (self.height + 1)) - 1
    }

    pub fn n_edges(&self) -> usize {
        self.n_vertices() - 1
    }

    pub fn n_branch(&self) -> usize {
        (1usize << self.height) - 1
    }

    pub fn n_leaves(&self) -> usize {
        1usize << self.height
    }

    pub fn vertices(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_vertices()
    }

    pub fn branch_vertices(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_branch()
    }

    pub fn leaf_vertices(&self) -> std::ops::RangeInclusive<usize> {
        (self.n_branch() + 1)..=self.n_vertices()
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= 1 && v <= self.n_vertices()
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v > self.n_branch() && v <= self.n_vertices()
    }

    pub fn is_branch(&self, v: usize) -> bool {
        v >= 1 && v <= self.n_branch()
    }

    fn check(&self, v: usize) -> Result<(), TopologyError> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(TopologyError::InvalidVertex { vertex: v, n: self.n_vertices() })
        }
    }

    pub fn left(v: usize) -> usize {
        2 * v
    }

    pub fn right(v: usize) -> usize {
        2 * v + 1
    }

    pub fn parent(v: usize) -> usize {
        v / 2
    }

    /// Depth of `v`, with the root at depth 0.
    pub fn depth(v: usize) -> u32 {
        usize::BITS - 1 - v.leading_zeros()
    }

    /// Vertices on the root-to-`v` path, root first, `v` last.
    pub fn path_vertices(&self, v: usize) -> Result<Vec<usize>, TopologyError> {
        self.check(v)?;
        let mut path = Vec::with_capacity(Self::depth(v) as usize + 1);
        let mut u = v;
        while u >= 1 {
            path.push(u);
            u = Self::parent(u);
        }
        path.reverse();
        Ok(path)
    }

    /// Path to `v` with the root removed.
    pub fn non_root_path(&self, v: usize) -> Result<Vec<usize>, TopologyError> {
        let mut path = self.path_vertices(v)?;
        path.remove(0);
        Ok(path)
    }

    /// All proper descendants of `v`, in increasing index order.
    pub fn child_set(&self, v: usize) -> Result<Vec<usize>, TopologyError> {
        self.check(v)?;
        let n = self.n_vertices();
        let mut out = Vec::new();
        let (mut lo, mut hi) = (2 * v, 2 * v + 1);
        while lo <= n {
            out.extend(lo..=hi);
            lo *= 2;
            hi = 2 * hi + 1;
        }
        Ok(out)
    }

    /// True when `a` is a proper ancestor of `v`.
    pub fn is_ancestor(a: usize, v: usize) -> bool {
        let (da, dv) = (Self::depth(a), Self::depth(v));
        dv > da && (v >> (dv - da)) == a
    }

    /// Tree edges `(parent, child)` ordered by child index.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> {
        (2..=self.n_vertices()).map(|v| (Self::parent(v), v))
    }
}
