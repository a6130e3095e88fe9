//! Trained classification trees: decoding, prediction and validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::BinaryDataset;
use crate::formulations::VariableIndex;
use crate::milp::INT_TOL;
use crate::topology::TreeTopology;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("invalid assignment at vertex {vertex}: {reason}")]
    InvalidAssignment { vertex: usize, reason: String },
    #[error("corrupt tree: {0}")]
    Corrupt(String),
    #[error("feature vector has length {found}, tree expects {expected}")]
    Dimension { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Branch(usize),
    Classify(usize),
    Pruned,
}

/// A complete-layout tree: each vertex branches, classifies or is pruned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainedTree {
    topo: TreeTopology,
    n_features: usize,
    roles: Vec<Role>,
}

impl TrainedTree {
    /// Validates the structure before returning it.
    pub fn new(topo: TreeTopology, n_features: usize, roles: Vec<Role>) -> Result<Self, TreeError> {
        let t = Self { topo, n_features, roles };
        t.validate()?;
        Ok(t)
    }

    /// Tree that classifies everything at the root.
    pub fn single_leaf(topo: TreeTopology, n_features: usize, class: usize) -> Self {
        let mut roles = vec![Role::Pruned; topo.n_vertices()];
        roles[0] = Role::Classify(class);
        Self { topo, n_features, roles }
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topo
    }

    pub fn height(&self) -> u32 {
        self.topo.height()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn role(&self, v: usize) -> Role {
        self.roles[v - 1]
    }

    pub fn branch_feature(&self, v: usize) -> Option<usize> {
        match self.role(v) {
            Role::Branch(f) => Some(f),
            _ => None,
        }
    }

    pub fn class_label(&self, v: usize) -> Option<usize> {
        match self.role(v) {
            Role::Classify(k) => Some(k),
            _ => None,
        }
    }

    pub fn pruned(&self) -> Vec<usize> {
        self.topo.vertices().filter(|&v| self.role(v) == Role::Pruned).collect()
    }

    pub fn n_branching(&self) -> usize {
        self.roles.iter().filter(|r| matches!(r, Role::Branch(_))).count()
    }

    pub fn validate(&self) -> Result<(), TreeError> {
        let topo = &self.topo;
        if self.roles.len() != topo.n_vertices() {
            return Err(TreeError::Corrupt("role count differs from vertex count".into()));
        }
        for v in topo.vertices() {
            let parent_role = (v > 1).then(|| self.role(TreeTopology::parent(v)));
            match self.role(v) {
                Role::Branch(f) => {
                    if topo.is_leaf(v) {
                        return Err(TreeError::Corrupt(format!("leaf {v} carries a branch feature")));
                    }
                    if f >= self.n_features {
                        return Err(TreeError::Corrupt(format!("vertex {v} uses unknown feature {f}")));
                    }
                }
                Role::Classify(_) | Role::Pruned => {}
            }
            let reachable = matches!(self.role(v), Role::Branch(_) | Role::Classify(_));
            match parent_role {
                None if !reachable => {
                    return Err(TreeError::Corrupt("root is pruned".into()));
                }
                Some(Role::Branch(_)) if !reachable => {
                    return Err(TreeError::Corrupt(format!("child {v} of a branch vertex is pruned")));
                }
                Some(Role::Classify(_) | Role::Pruned) if reachable => {
                    return Err(TreeError::Corrupt(format!("vertex {v} lies below a classification vertex")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Read a tree from the `b`, `w`, `p` part of an integer assignment.
    pub fn decode(x: &[f64], index: &VariableIndex) -> Result<Self, TreeError> {
        let topo = *index.topology();
        let bin = |v: usize, val: f64, what: &str| -> Result<bool, TreeError> {
            if val.abs() <= INT_TOL {
                Ok(false)
            } else if (val - 1.0).abs() <= INT_TOL {
                Ok(true)
            } else {
                Err(TreeError::InvalidAssignment { vertex: v, reason: format!("{what} = {val} is fractional") })
            }
        };
        let mut roles = Vec::with_capacity(topo.n_vertices());
        for v in topo.vertices() {
            let mut feats = Vec::new();
            if topo.is_branch(v) {
                for f in 0..index.n_features() {
                    if bin(v, x[index.b(v, f).0], "b")? {
                        feats.push(f);
                    }
                }
            }
            let mut classes = Vec::new();
            for k in 0..index.n_classes() {
                if bin(v, x[index.w(v, k).0], "w")? {
                    classes.push(k);
                }
            }
            let p = bin(v, x[index.p(v).0], "p")?;
            if p != (classes.len() == 1) || classes.len() > 1 {
                return Err(TreeError::InvalidAssignment {
                    vertex: v,
                    reason: format!("p = {} with {} classes set", u8::from(p), classes.len()),
                });
            }
            let role = match (feats.as_slice(), classes.as_slice()) {
                ([], []) => Role::Pruned,
                ([f], []) => Role::Branch(*f),
                ([], [k]) => Role::Classify(*k),
                _ => {
                    return Err(TreeError::InvalidAssignment {
                        vertex: v,
                        reason: format!("{} features and {} classes set", feats.len(), classes.len()),
                    })
                }
            };
            roles.push(role);
        }
        let tree = Self { topo, n_features: index.n_features(), roles };
        if let Err(TreeError::Corrupt(reason)) = tree.validate() {
            let vertex = tree.first_path_violation().unwrap_or(1);
            return Err(TreeError::InvalidAssignment { vertex, reason });
        }
        Ok(tree)
    }

    fn first_path_violation(&self) -> Option<usize> {
        self.topo.vertices().find(|&v| {
            let reachable = !matches!(self.role(v), Role::Pruned);
            if v == 1 {
                return !reachable;
            }
            let parent_branch = matches!(self.role(TreeTopology::parent(v)), Role::Branch(_));
            reachable != parent_branch
        })
    }

    /// Vertex where `x` stops: the first classification vertex on its route.
    pub fn terminal(&self, x: &[u8]) -> Result<usize, TreeError> {
        if x.len() != self.n_features {
            return Err(TreeError::Dimension { expected: self.n_features, found: x.len() });
        }
        let mut v = 1;
        loop {
            match self.role(v) {
                Role::Classify(_) => return Ok(v),
                Role::Branch(f) => v = if x[f] == 0 { TreeTopology::left(v) } else { TreeTopology::right(v) },
                Role::Pruned => return Err(TreeError::Corrupt(format!("reached pruned vertex {v}"))),
            }
        }
    }

    pub fn predict(&self, x: &[u8]) -> Result<usize, TreeError> {
        let v = self.terminal(x)?;
        Ok(self.class_label(v).expect("terminal is a classification vertex"))
    }

    pub fn correct_count(&self, d: &BinaryDataset) -> Result<usize, TreeError> {
        let mut n = 0;
        for i in 0..d.n_rows() {
            if self.predict(d.row(i))? == d.label(i) {
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn accuracy(&self, d: &BinaryDataset) -> Result<f64, TreeError> {
        Ok(self.correct_count(d)? as f64 / d.n_rows() as f64)
    }

    pub fn to_json(&self) -> TreeJson {
        let vertices = self
            .topo
            .vertices()
            .map(|v| {
                let (role, feature, class) = match self.role(v) {
                    Role::Branch(f) => ("branch", Some(f), None),
                    Role::Classify(k) => ("leaf", None, Some(k)),
                    Role::Pruned => ("pruned", None, None),
                };
                let children = match self.role(v) {
                    Role::Branch(_) => Some([TreeTopology::left(v), TreeTopology::right(v)]),
                    _ => None,
                };
                VertexJson { id: v, role: role.into(), feature, class, children }
            })
            .collect();
        TreeJson { height: self.height(), n_features: self.n_features, vertices }
    }

    pub fn from_json(j: &TreeJson) -> Result<Self, TreeError> {
        let topo = TreeTopology::new(j.height).map_err(|e| TreeError::Corrupt(e.to_string()))?;
        let mut roles = vec![Role::Pruned; topo.n_vertices()];
        for vj in &j.vertices {
            if !topo.contains(vj.id) {
                return Err(TreeError::Corrupt(format!("vertex {} out of range", vj.id)));
            }
            roles[vj.id - 1] = match (vj.role.as_str(), vj.feature, vj.class) {
                ("branch", Some(f), _) => Role::Branch(f),
                ("leaf", _, Some(k)) => Role::Classify(k),
                ("pruned", _, _) => Role::Pruned,
                (r, _, _) => return Err(TreeError::Corrupt(format!("bad role `{r}` at vertex {}", vj.id))),
            };
        }
        Self::new(topo, j.n_features, roles)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("tree serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self, TreeError> {
        let j: TreeJson = serde_json::from_str(s).map_err(|e| TreeError::Corrupt(e.to_string()))?;
        Self::from_json(&j)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexJson {
    pub id: usize,
    pub role: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub height: u32,
    pub n_features: usize,
    pub vertices: Vec<VertexJson>,
}

/// Disagreement between an assignment's `s` values and re-simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub datapoint: usize,
    /// Vertex where re-simulation classifies the point correctly, if any.
    pub expected: Option<usize>,
    /// Vertices with `s` set in the assignment.
    pub assigned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub mismatches: Vec<Mismatch>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Check `s[i,v] = 1` exactly when point `i` ends at `v` with its own class.
pub fn validate_against_assignment(
    tree: &TrainedTree,
    x: &[f64],
    index: &VariableIndex,
    d: &BinaryDataset,
) -> Result<ValidationReport, TreeError> {
    let topo = tree.topology();
    let mut report = ValidationReport::default();
    for i in 0..d.n_rows() {
        let t = tree.terminal(d.row(i))?;
        let expected = (tree.class_label(t) == Some(d.label(i))).then_some(t);
        let assigned: Vec<usize> = topo.vertices().filter(|&v| x[index.s(i, v).0] > 0.5).collect();
        let ok = match expected {
            Some(t) => assigned == [t],
            None => assigned.is_empty(),
        };
        if !ok {
            report.mismatches.push(Mismatch { datapoint: i, expected, assigned });
        }
    }
    Ok(report)
}
