//! Exhaustive search over tree structures on tiny instances.
//!
//! Every branch vertex either starts classification or picks one of the
//! features. Classification vertices take the majority class of the points
//! that reach them, which is optimal once the branching is fixed.

use thiserror::Error;

use crate::cart::majority;
use crate::dataset::BinaryDataset;
use crate::topology::TreeTopology;
use crate::tree::{Role, TrainedTree};

pub const MAX_FEATURES: usize = 5;
pub const MAX_HEIGHT: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for enumeration: {features} features, height {height}")]
    InstanceTooLarge { features: usize, height: u32 },
    #[error("dataset is empty")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub best_correct: usize,
    pub witness: TrainedTree,
    /// Number of structures evaluated, budget-violating ones included.
    pub enumerated: usize,
}

/// All role vectors for the subtree rooted at `v`, written into `roles`.
fn visit(
    topo: &TreeTopology,
    n_features: usize,
    v: usize,
    roles: &mut Vec<Role>,
    rest: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[Role]),
) {
    // `rest` holds the vertices still to be decided, in pre-order.
    roles[v - 1] = Role::Classify(0);
    advance(topo, n_features, roles, rest, emit);
    if topo.is_branch(v) {
        for f in 0..n_features {
            roles[v - 1] = Role::Branch(f);
            rest.push(TreeTopology::right(v));
            rest.push(TreeTopology::left(v));
            advance(topo, n_features, roles, rest, emit);
            rest.pop();
            rest.pop();
        }
    }
    roles[v - 1] = Role::Pruned;
}

fn advance(
    topo: &TreeTopology,
    n_features: usize,
    roles: &mut Vec<Role>,
    rest: &mut Vec<usize>,
    emit: &mut dyn FnMut(&[Role]),
) {
    match rest.pop() {
        None => emit(roles),
        Some(u) => {
            visit(topo, n_features, u, roles, rest, emit);
            rest.push(u);
        }
    }
}

/// Score a structure: majority classes at its classification vertices.
fn score(topo: &TreeTopology, roles: &[Role], d: &BinaryDataset) -> (usize, Vec<Role>) {
    let mut counts = vec![vec![0usize; d.n_classes()]; topo.n_vertices() + 1];
    for i in 0..d.n_rows() {
        let mut v = 1;
        while let Role::Branch(f) = roles[v - 1] {
            v = if d.x(i, f) == 0 { TreeTopology::left(v) } else { TreeTopology::right(v) };
        }
        counts[v][d.label(i)] += 1;
    }
    let mut out = roles.to_vec();
    let mut correct = 0;
    for v in topo.vertices() {
        if let Role::Classify(_) = roles[v - 1] {
            let k = majority(&counts[v]);
            correct += counts[v][k];
            out[v - 1] = Role::Classify(k);
        }
    }
    (correct, out)
}

/// Best correct count over all trees of height `h` with at most `budget`
/// branch vertices.
pub fn enumerate_optimal(d: &BinaryDataset, h: u32, budget: Option<usize>) -> Result<OracleResult, OracleError> {
    if d.n_features() > MAX_FEATURES || h > MAX_HEIGHT {
        return Err(OracleError::InstanceTooLarge { features: d.n_features(), height: h });
    }
    if d.n_rows() == 0 {
        return Err(OracleError::Empty);
    }
    let topo = TreeTopology::new(h).map_err(|_| OracleError::InstanceTooLarge { features: d.n_features(), height: h })?;
    let mut best: Option<(usize, Vec<Role>)> = None;
    let mut enumerated = 0;
    let mut roles = vec![Role::Pruned; topo.n_vertices()];
    let mut rest = Vec::new();
    let mut emit = |r: &[Role]| {
        enumerated += 1;
        let branching = r.iter().filter(|x| matches!(x, Role::Branch(_))).count();
        if budget.is_some_and(|b| branching > b) {
            return;
        }
        let (c, scored) = score(&topo, r, d);
        if best.as_ref().map_or(true, |(bc, _)| c > *bc) {
            best = Some((c, scored));
        }
    };
    visit(&topo, d.n_features(), 1, &mut roles, &mut rest, &mut emit);
    let (best_correct, roles) = best.expect("the single-leaf tree is always admissible");
    let witness = TrainedTree::new(topo, d.n_features(), roles).expect("enumerated layouts are valid");
    Ok(OracleResult { best_correct, witness, enumerated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> BinaryDataset {
        BinaryDataset::from_rows(vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]], vec![0, 1, 1, 0], 2).unwrap()
    }

    #[test]
    fn structure_counts() {
        // 1 + F * c^2 where c is the count one level down.
        let d = BinaryDataset::from_rows(vec![vec![0; 5]], vec![0], 1).unwrap();
        assert_eq!(enumerate_optimal(&d, 1, None).unwrap().enumerated, 6);
        assert_eq!(enumerate_optimal(&d, 2, None).unwrap().enumerated, 181);
    }

    #[test]
    fn single_point() {
        let d = BinaryDataset::from_rows(vec![vec![1, 0]], vec![0], 1).unwrap();
        for h in 1..=2 {
            assert_eq!(enumerate_optimal(&d, h, None).unwrap().best_correct, 1);
        }
    }

    #[test]
    fn xor_optimum() {
        let r = enumerate_optimal(&xor(), 2, None).unwrap();
        assert_eq!(r.best_correct, 4);
        assert_eq!(r.witness.correct_count(&xor()).unwrap(), 4);
        assert_eq!(enumerate_optimal(&xor(), 1, None).unwrap().best_correct, 2);
    }

    #[test]
    fn zero_budget_is_majority() {
        let d = BinaryDataset::from_rows(vec![vec![0], vec![1], vec![1]], vec![1, 0, 1], 2).unwrap();
        let r = enumerate_optimal(&d, 2, Some(0)).unwrap();
        assert_eq!(r.best_correct, d.majority_count());
        assert_eq!(r.witness.n_branching(), 0);
    }

    #[test]
    fn guard() {
        let d = BinaryDataset::from_rows(vec![vec![0; 6]], vec![0], 1).unwrap();
        assert!(matches!(enumerate_optimal(&d, 2, None), Err(OracleError::InstanceTooLarge { .. })));
        assert!(matches!(enumerate_optimal(&xor(), 3, None), Err(OracleError::InstanceTooLarge { .. })));
    }
}
