//! Greedy Gini trees used as baselines.
//!
//! `restricted` grows the tree level by level and never reuses a feature
//! anywhere in the tree. Both variants stop at a pure node, at depth
//! `max_depth`, or when no feature leaves both sides nonempty. Splits that do
//! not lower the impurity are still taken, otherwise XOR-like data could
//! never be separated below the root.

use std::collections::VecDeque;

use thiserror::Error;

use crate::dataset::BinaryDataset;
use crate::topology::TreeTopology;
use crate::tree::{Role, TrainedTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CartConfig {
    pub max_depth: u32,
    pub restricted: bool,
    /// Kept for interface stability; ties are broken by feature index so
    /// the fit does not depend on it.
    pub seed: u64,
}

impl CartConfig {
    pub fn new(max_depth: u32, restricted: bool) -> Self {
        Self { max_depth, restricted, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CartError {
    #[error("max depth must be at least 1")]
    ZeroDepth,
    #[error("training set is empty")]
    Empty,
}

pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn class_counts(d: &BinaryDataset, idx: &[usize]) -> Vec<usize> {
    let mut c = vec![0; d.n_classes()];
    for &i in idx {
        c[d.label(i)] += 1;
    }
    c
}

/// Majority class, ties going to the smallest class id.
pub fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best
}

/// Best split among `allowed` features: the lowest weighted Gini, then the
/// lowest feature index. `None` when every feature leaves a side empty.
pub fn best_split(d: &BinaryDataset, idx: &[usize], allowed: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let n = idx.len() as f64;
    for f in 0..d.n_features() {
        if !allowed[f] {
            continue;
        }
        let mut left = vec![0; d.n_classes()];
        let mut right = vec![0; d.n_classes()];
        for &i in idx {
            if d.x(i, f) == 0 {
                left[d.label(i)] += 1;
            } else {
                right[d.label(i)] += 1;
            }
        }
        let nl: usize = left.iter().sum();
        let nr: usize = right.iter().sum();
        if nl == 0 || nr == 0 {
            continue;
        }
        let g = (nl as f64 * gini(&left) + nr as f64 * gini(&right)) / n;
        if best.map_or(true, |(_, bg)| g < bg - 1e-12) {
            best = Some((f, g));
        }
    }
    best
}

pub fn fit_cart(d: &BinaryDataset, cfg: &CartConfig) -> Result<TrainedTree, CartError> {
    if cfg.max_depth == 0 {
        return Err(CartError::ZeroDepth);
    }
    if d.n_rows() == 0 {
        return Err(CartError::Empty);
    }
    let topo = TreeTopology::new(cfg.max_depth).map_err(|_| CartError::ZeroDepth)?;
    let mut roles = vec![Role::Pruned; topo.n_vertices()];
    let mut allowed = vec![true; d.n_features()];
    let mut queue = VecDeque::from([(1usize, (0..d.n_rows()).collect::<Vec<_>>())]);
    while let Some((v, idx)) = queue.pop_front() {
        let counts = class_counts(d, &idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || topo.is_leaf(v) { None } else { best_split(d, &idx, &allowed) };
        match split {
            Some((f, _)) => {
                roles[v - 1] = Role::Branch(f);
                if cfg.restricted {
                    allowed[f] = false;
                }
                let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| d.x(i, f) == 0);
                queue.push_back((TreeTopology::left(v), l));
                queue.push_back((TreeTopology::right(v), r));
            }
            None => roles[v - 1] = Role::Classify(majority(&counts)),
        }
    }
    Ok(TrainedTree::new(topo, d.n_features(), roles).expect("greedy growth yields a valid layout"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> BinaryDataset {
        BinaryDataset::from_rows(vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], vec![0, 1, 1, 0], 2).unwrap()
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(&[2, 2]), 0.5);
        assert_eq!(gini(&[4, 0]), 0.0);
        assert_eq!(gini(&[]), 0.0);
    }

    #[test]
    fn pure_data_is_one_leaf() {
        let d = BinaryDataset::from_rows(vec![vec![0], vec![1]], vec![0, 0], 1).unwrap();
        let t = fit_cart(&d, &CartConfig::new(3, false)).unwrap();
        assert_eq!(t.n_branching(), 0);
        assert_eq!(t.accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn separable_feature_at_root() {
        let d = BinaryDataset::from_rows(vec![vec![0, 1], vec![1, 1], vec![1, 0]], vec![0, 1, 1], 2).unwrap();
        let t = fit_cart(&d, &CartConfig::new(1, false)).unwrap();
        assert_eq!(t.branch_feature(1), Some(0));
        assert_eq!(t.accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let d = xor();
        assert_eq!(fit_cart(&d, &CartConfig::new(1, false)).unwrap().accuracy(&d).unwrap(), 0.5);
        assert_eq!(fit_cart(&d, &CartConfig::new(2, false)).unwrap().accuracy(&d).unwrap(), 1.0);
    }

    #[test]
    fn restricted_uses_each_feature_once() {
        let d = xor();
        let t = fit_cart(&d, &CartConfig::new(2, true)).unwrap();
        // Feature 0 at the root leaves only feature 1 for one child.
        assert_eq!(t.branch_feature(1), Some(0));
        assert_eq!(t.branch_feature(2), Some(1));
        assert_eq!(t.branch_feature(3), None);
        assert_eq!(t.accuracy(&d).unwrap(), 0.75);
    }

    #[test]
    fn zero_depth_rejected() {
        assert_eq!(fit_cart(&xor(), &CartConfig::new(0, false)), Err(CartError::ZeroDepth));
    }
}
