//! Model builders for the five tree formulations.
//!
//! All formulations share a base layer: branching variables `b[v,f]` on
//! branch vertices, class variables `w[v,k]`, classification indicators
//! `p[v]` and correct-classification indicators `s[i,v]`. They differ in
//! how they force a correctly classified datapoint to actually reach its
//! terminal vertex:
//!
//! * `FlowOCT`: one flow per datapoint on tree edges, capped by branching;
//! * `MCF1`: the same flow plus path indicators `q[i,v]` and a sink `q[i,t]`;
//! * `MCF2`: one flow per (datapoint, destination) pair;
//! * `CUT1`: `s[i,v] <= q[i,c]` for every non-root `c` on the path to `v`;
//! * `CUT2`: as `CUT1` with `s[i,v]` replaced by the sum over `v` and all
//!   of its descendants.
//!
//! Vertex indices are 1-based (heap order), datapoints, features and classes
//! 0-based.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataset::BinaryDataset;
use crate::milp::{LinearConstraint, ModelInstance, VarId};
use crate::separation::{CutKind, CutStrategy, StrategyKind};
use crate::topology::TreeTopology;
use crate::tree::TrainedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum FormulationKind {
    #[serde(rename = "FlowOCT")]
    FlowOct,
    #[serde(rename = "MCF1")]
    Mcf1,
    #[serde(rename = "MCF2")]
    Mcf2,
    #[serde(rename = "CUT1")]
    Cut1,
    #[serde(rename = "CUT2")]
    Cut2,
}

impl FormulationKind {
    pub const ALL: [FormulationKind; 5] = [
        FormulationKind::FlowOct,
        FormulationKind::Mcf1,
        FormulationKind::Mcf2,
        FormulationKind::Cut1,
        FormulationKind::Cut2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormulationKind::FlowOct => "FlowOCT",
            FormulationKind::Mcf1 => "MCF1",
            FormulationKind::Mcf2 => "MCF2",
            FormulationKind::Cut1 => "CUT1",
            FormulationKind::Cut2 => "CUT2",
        }
    }

    pub fn cut_kind(self) -> Option<CutKind> {
        match self {
            FormulationKind::Cut1 => Some(CutKind::Cut1),
            FormulationKind::Cut2 => Some(CutKind::Cut2),
            _ => None,
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormulationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown formulation `{s}`"))
    }
}

/// Optional side constraints.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ExtraConstraints {
    /// Upper limit on the number of branching vertices.
    pub branching_budget: Option<usize>,
    /// Upper limit on how many vertices may branch on any single feature.
    pub feature_cap: Option<usize>,
    /// Minimum number of correctly classified points at each classification vertex.
    pub min_leaf_support: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulationError {
    #[error("dataset has no rows")]
    EmptyDataset,
}

/// Dense lookup from model roles to variables.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableIndex {
    topo: TreeTopology,
    n_points: usize,
    n_features: usize,
    n_classes: usize,
    b: Vec<VarId>,
    w: Vec<VarId>,
    p: Vec<VarId>,
    s: Vec<VarId>,
    q: Vec<VarId>,
    q_sink: Vec<VarId>,
    z: Vec<VarId>,
    z_dest: Vec<VarId>,
}

impl VariableIndex {
    pub fn topology(&self) -> &TreeTopology {
        &self.topo
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn n(&self) -> usize {
        self.topo.n_vertices()
    }

    /// Branching variable; `v` must be a branch vertex.
    pub fn b(&self, v: usize, f: usize) -> VarId {
        debug_assert!(self.topo.is_branch(v));
        self.b[(v - 1) * self.n_features + f]
    }

    pub fn w(&self, v: usize, k: usize) -> VarId {
        self.w[(v - 1) * self.n_classes + k]
    }

    pub fn p(&self, v: usize) -> VarId {
        self.p[v - 1]
    }

    pub fn s(&self, i: usize, v: usize) -> VarId {
        self.s[i * self.n() + v - 1]
    }

    pub fn has_q(&self) -> bool {
        !self.q.is_empty()
    }

    pub fn q(&self, i: usize, v: usize) -> VarId {
        self.q[i * self.n() + v - 1]
    }

    pub fn has_q_sink(&self) -> bool {
        !self.q_sink.is_empty()
    }

    pub fn q_sink(&self, i: usize) -> VarId {
        self.q_sink[i]
    }

    pub fn has_z(&self) -> bool {
        !self.z.is_empty()
    }

    /// Flow of datapoint `i` on the edge entering `v` (`v >= 2`).
    pub fn z(&self, i: usize, v: usize) -> VarId {
        self.z[i * (self.n() - 1) + v - 2]
    }

    pub fn has_z_dest(&self) -> bool {
        !self.z_dest.is_empty()
    }

    /// Flow of datapoint `i` headed to `dest` on the edge entering `v`.
    pub fn z_dest(&self, i: usize, dest: usize, v: usize) -> VarId {
        let m = self.n() - 1;
        self.z_dest[(i * m + dest - 2) * m + v - 2]
    }

    /// Counts per role: (b, w, p, s, q, q_sink, z, z_dest).
    pub fn role_counts(&self) -> [usize; 8] {
        [
            self.b.len(),
            self.w.len(),
            self.p.len(),
            self.s.len(),
            self.q.len(),
            self.q_sink.len(),
            self.z.len(),
            self.z_dest.len(),
        ]
    }
}

/// Build-time options.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuildOptions {
    /// Only used by the cut formulations.
    pub strategy: CutStrategy,
    pub extra: ExtraConstraints,
}

/// A built model together with its variable index and inputs.
#[derive(Debug, Clone)]
pub struct Formulation {
    pub kind: FormulationKind,
    pub model: ModelInstance,
    pub index: VariableIndex,
    pub strategy: CutStrategy,
    pub extra: ExtraConstraints,
    data: BinaryDataset,
}

/// Features of datapoint `i` split by value: `(zeros, ones)`.
fn partitions(d: &BinaryDataset) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..d.n_rows())
        .map(|i| {
            let row = d.row(i);
            let zeros = (0..row.len()).filter(|&f| row[f] == 0).collect();
            let ones = (0..row.len()).filter(|&f| row[f] == 1).collect();
            (zeros, ones)
        })
        .collect()
}

/// Separator inequality for datapoint `i`, terminal `v` and separator `c`.
pub fn cut_constraint(index: &VariableIndex, kind: CutKind, i: usize, v: usize, c: usize) -> LinearConstraint {
    let topo = index.topology();
    let mut terms = vec![(1.0, index.s(i, v))];
    let name = match kind {
        CutKind::Cut1 => "sep1",
        CutKind::Cut2 => {
            for u in topo.child_set(v).expect("valid vertex") {
                terms.push((1.0, index.s(i, u)));
            }
            "sep2"
        }
    };
    terms.push((-1.0, index.q(i, c)));
    LinearConstraint::le(terms, 0.0, format!("{name}(i={i},v={v},c={c})"))
}

impl Formulation {
    pub fn build(
        kind: FormulationKind,
        topo: TreeTopology,
        data: &BinaryDataset,
        opts: &BuildOptions,
    ) -> Result<Self, FormulationError> {
        if data.n_rows() == 0 {
            return Err(FormulationError::EmptyDataset);
        }
        let mut f = Self::base(kind, topo, data, opts);
        match kind {
            FormulationKind::FlowOct => f.add_flowoct(),
            FormulationKind::Mcf1 => f.add_mcf1(),
            FormulationKind::Mcf2 => f.add_mcf2(),
            FormulationKind::Cut1 | FormulationKind::Cut2 => f.add_cut(),
        }
        f.apply_extra();
        Ok(f)
    }

    pub fn flowoct(topo: TreeTopology, data: &BinaryDataset) -> Result<Self, FormulationError> {
        Self::build(FormulationKind::FlowOct, topo, data, &BuildOptions::default())
    }

    pub fn mcf1(topo: TreeTopology, data: &BinaryDataset) -> Result<Self, FormulationError> {
        Self::build(FormulationKind::Mcf1, topo, data, &BuildOptions::default())
    }

    pub fn mcf2(topo: TreeTopology, data: &BinaryDataset) -> Result<Self, FormulationError> {
        Self::build(FormulationKind::Mcf2, topo, data, &BuildOptions::default())
    }

    pub fn cut1(topo: TreeTopology, data: &BinaryDataset, strategy: CutStrategy) -> Result<Self, FormulationError> {
        let opts = BuildOptions { strategy, ..BuildOptions::default() };
        Self::build(FormulationKind::Cut1, topo, data, &opts)
    }

    pub fn cut2(topo: TreeTopology, data: &BinaryDataset, strategy: CutStrategy) -> Result<Self, FormulationError> {
        let opts = BuildOptions { strategy, ..BuildOptions::default() };
        Self::build(FormulationKind::Cut2, topo, data, &opts)
    }

    pub fn data(&self) -> &BinaryDataset {
        &self.data
    }

    pub fn topology(&self) -> &TreeTopology {
        self.index.topology()
    }

    fn base(kind: FormulationKind, topo: TreeTopology, data: &BinaryDataset, opts: &BuildOptions) -> Self {
        let (ni, nf, nk) = (data.n_rows(), data.n_features(), data.n_classes());
        let n = topo.n_vertices();
        let mut m = ModelInstance::new();
        let mut b = Vec::with_capacity(topo.n_branch() * nf);
        for v in topo.branch_vertices() {
            for f in 0..nf {
                b.push(m.add_binary(format!("b_{v}_{f}")));
            }
        }
        let mut w = Vec::with_capacity(n * nk);
        for v in topo.vertices() {
            for k in 0..nk {
                w.push(m.add_binary(format!("w_{v}_{k}")));
            }
        }
        let p: Vec<VarId> = topo.vertices().map(|v| m.add_continuous(format!("p_{v}"), 0.0, 1.0)).collect();
        let mut s = Vec::with_capacity(ni * n);
        for i in 0..ni {
            for v in topo.vertices() {
                s.push(m.add_binary(format!("s_{i}_{v}")));
            }
        }
        let index = VariableIndex {
            topo,
            n_points: ni,
            n_features: nf,
            n_classes: nk,
            b,
            w,
            p,
            s,
            q: Vec::new(),
            q_sink: Vec::new(),
            z: Vec::new(),
            z_dest: Vec::new(),
        };

        for v in topo.vertices() {
            let mut terms = vec![(1.0, index.p(v))];
            terms.extend((0..nk).map(|k| (-1.0, index.w(v, k))));
            m.add_constraint(LinearConstraint::eq(terms, 0.0, format!("class_link(v={v})")));
        }
        for v in topo.vertices() {
            let mut terms = Vec::new();
            if topo.is_branch(v) {
                terms.extend((0..nf).map(|f| (1.0, index.b(v, f))));
            }
            for u in topo.path_vertices(v).expect("valid vertex") {
                terms.push((1.0, index.p(u)));
            }
            m.add_constraint(LinearConstraint::eq(terms, 1.0, format!("one_role(v={v})")));
        }
        for i in 0..ni {
            let k = data.label(i);
            for v in topo.vertices() {
                m.add_constraint(LinearConstraint::le(
                    [(1.0, index.s(i, v)), (-1.0, index.w(v, k))],
                    0.0,
                    format!("class_match(i={i},v={v})"),
                ));
            }
        }
        m.set_objective(index.s.iter().map(|&v| (1.0, v)));
        Self { kind, model: m, index, strategy: opts.strategy, extra: opts.extra, data: data.clone() }
    }

    fn add_q(&mut self) {
        let ni = self.index.n_points;
        let mut q = Vec::with_capacity(ni * self.index.n());
        for i in 0..ni {
            for v in self.index.topo.vertices() {
                q.push(self.model.add_binary(format!("q_{i}_{v}")));
            }
        }
        self.index.q = q;
    }

    fn add_edge_flows(&mut self) {
        let ni = self.index.n_points;
        let mut z = Vec::with_capacity(ni * self.index.n_edges());
        for i in 0..ni {
            for (_, v) in self.index.topo.edges() {
                z.push(self.model.add_continuous(format!("z_{i}_{v}"), 0.0, f64::INFINITY));
            }
        }
        self.index.z = z;
    }

    /// `lhs(child) <= sum of b[v,f] over features sending i to that child`.
    fn add_branch_caps(&mut self, name: &str, child_var: impl Fn(&VariableIndex, usize, usize) -> VarId) {
        let parts = partitions(&self.data);
        let idx = &self.index;
        for (i, (zeros, ones)) in parts.iter().enumerate() {
            for v in idx.topo.branch_vertices() {
                for (side, child, feats) in
                    [("left", TreeTopology::left(v), zeros), ("right", TreeTopology::right(v), ones)]
                {
                    let mut terms = vec![(1.0, child_var(idx, i, child))];
                    terms.extend(feats.iter().map(|&f| (-1.0, idx.b(v, f))));
                    self.model.add_constraint(LinearConstraint::le(
                        terms,
                        0.0,
                        format!("{name}_{side}(i={i},v={v})"),
                    ));
                }
            }
        }
    }

    /// Conservation `z(into v) = z(out of v) + s[i,v]` for non-root `v`.
    fn add_conservation(&mut self) {
        let idx = &self.index;
        for i in 0..idx.n_points {
            for v in 2..=idx.n() {
                let mut terms = vec![(1.0, idx.z(i, v)), (-1.0, idx.s(i, v))];
                if idx.topo.is_branch(v) {
                    terms.push((-1.0, idx.z(i, TreeTopology::left(v))));
                    terms.push((-1.0, idx.z(i, TreeTopology::right(v))));
                }
                self.model.add_constraint(LinearConstraint::eq(terms, 0.0, format!("flow(i={i},v={v})")));
            }
        }
    }

    fn add_one_class(&mut self) {
        let idx = &self.index;
        for i in 0..idx.n_points {
            let terms: Vec<_> = idx.topo.vertices().map(|v| (1.0, idx.s(i, v))).collect();
            self.model.add_constraint(LinearConstraint::le(terms, 1.0, format!("one_class(i={i})")));
        }
    }

    fn add_flowoct(&mut self) {
        self.add_edge_flows();
        let idx = &self.index;
        for i in 0..idx.n_points {
            self.model.add_constraint(LinearConstraint::le(
                [(1.0, idx.z(i, 2)), (1.0, idx.z(i, 3)), (1.0, idx.s(i, 1))],
                1.0,
                format!("root_flow(i={i})"),
            ));
        }
        self.add_conservation();
        self.add_branch_caps("flow_cap", |idx, i, child| idx.z(i, child));
    }

    fn add_mcf1(&mut self) {
        self.add_q();
        let ni = self.index.n_points;
        self.index.q_sink = (0..ni).map(|i| self.model.add_binary(format!("qt_{i}"))).collect();
        self.add_edge_flows();
        let idx = &self.index;
        for i in 0..ni {
            for v in 2..=idx.n() {
                self.model.add_constraint(LinearConstraint::le(
                    [(1.0, idx.z(i, v)), (-1.0, idx.q(i, v))],
                    0.0,
                    format!("enter(i={i},v={v})"),
                ));
            }
        }
        self.add_conservation();
        let idx = &self.index;
        for i in 0..ni {
            self.model.add_constraint(LinearConstraint::eq(
                [(1.0, idx.z(i, 2)), (1.0, idx.z(i, 3)), (1.0, idx.s(i, 1)), (-1.0, idx.q_sink(i))],
                0.0,
                format!("sink(i={i})"),
            ));
        }
        self.add_branch_caps("q_cap", |idx, i, child| idx.q(i, child));
    }

    fn add_mcf2(&mut self) {
        self.add_q();
        let ni = self.index.n_points;
        let n = self.index.n();
        let mut zd = Vec::with_capacity(ni * (n - 1) * (n - 1));
        for i in 0..ni {
            for dest in 2..=n {
                for v in 2..=n {
                    zd.push(self.model.add_continuous(format!("z_{i}_{dest}_{v}"), 0.0, f64::INFINITY));
                }
            }
        }
        self.index.z_dest = zd;
        let idx = &self.index;
        let topo = idx.topo;
        for i in 0..ni {
            for dest in 2..=n {
                self.model.add_constraint(LinearConstraint::eq(
                    [(1.0, idx.z_dest(i, dest, 2)), (1.0, idx.z_dest(i, dest, 3)), (-1.0, idx.s(i, dest))],
                    0.0,
                    format!("source(i={i},dest={dest})"),
                ));
                for u in 2..=n {
                    if u == dest {
                        continue;
                    }
                    let mut terms = vec![(-1.0, idx.z_dest(i, dest, u))];
                    if topo.is_branch(u) {
                        terms.push((1.0, idx.z_dest(i, dest, TreeTopology::left(u))));
                        terms.push((1.0, idx.z_dest(i, dest, TreeTopology::right(u))));
                    }
                    self.model.add_constraint(LinearConstraint::eq(
                        terms,
                        0.0,
                        format!("flow(i={i},dest={dest},u={u})"),
                    ));
                }
            }
            for v in 2..=n {
                let mut terms: Vec<_> = (2..=n).map(|dest| (1.0, idx.z_dest(i, dest, v))).collect();
                terms.push((-1.0, idx.q(i, v)));
                self.model.add_constraint(LinearConstraint::le(terms, 0.0, format!("enter(i={i},v={v})")));
            }
            for v in 2..=n {
                self.model.add_constraint(LinearConstraint::eq(
                    [(1.0, idx.z_dest(i, v, v)), (-1.0, idx.s(i, v))],
                    0.0,
                    format!("terminal(i={i},v={v})"),
                ));
            }
        }
        self.add_branch_caps("q_cap", |idx, i, child| idx.q(i, child));
        self.add_one_class();
    }

    fn add_cut(&mut self) {
        self.add_q();
        if self.strategy.kind == StrategyKind::All {
            let kind = self.kind.cut_kind().expect("cut formulation");
            let idx = &self.index;
            for i in 0..idx.n_points {
                for v in 2..=idx.n() {
                    for c in idx.topo.non_root_path(v).expect("valid vertex") {
                        self.model.add_constraint(cut_constraint(idx, kind, i, v, c));
                    }
                }
            }
        }
        self.add_branch_caps("q_cap", |idx, i, child| idx.q(i, child));
        self.add_one_class();
    }

    fn apply_extra(&mut self) {
        let x = self.extra;
        let idx = &self.index;
        let topo = idx.topo;
        if let Some(k) = x.branching_budget {
            let terms: Vec<_> = topo
                .branch_vertices()
                .flat_map(|v| (0..idx.n_features).map(move |f| (v, f)))
                .map(|(v, f)| (1.0, idx.b(v, f)))
                .collect();
            self.model.add_constraint(LinearConstraint::le(terms, k as f64, "budget"));
        }
        if let Some(cap) = x.feature_cap {
            for f in 0..idx.n_features {
                let terms: Vec<_> = topo.branch_vertices().map(|v| (1.0, idx.b(v, f))).collect();
                self.model.add_constraint(LinearConstraint::le(terms, cap as f64, format!("feature_cap(f={f})")));
            }
        }
        if let Some(kmin) = x.min_leaf_support {
            for v in topo.vertices() {
                let mut terms: Vec<_> = (0..idx.n_points).map(|i| (1.0, idx.s(i, v))).collect();
                terms.push((-(kmin as f64), idx.p(v)));
                self.model.add_constraint(LinearConstraint::ge(terms, 0.0, format!("min_support(v={v})")));
            }
        }
    }

    /// Full assignment representing `tree` on this formulation's data.
    ///
    /// Every datapoint is routed to its terminal vertex; path indicators are
    /// set along the route and flows carry one unit for correctly classified
    /// points. The result satisfies every structural constraint; side
    /// constraints hold whenever the tree respects them.
    pub fn encode_tree(&self, tree: &TrainedTree) -> Vec<f64> {
        let idx = &self.index;
        let topo = idx.topo;
        let mut x = vec![0.0; self.model.n_vars()];
        for v in topo.vertices() {
            if let Some(f) = tree.branch_feature(v) {
                x[idx.b(v, f).0] = 1.0;
            }
            if let Some(k) = tree.class_label(v) {
                x[idx.w(v, k).0] = 1.0;
                x[idx.p(v).0] = 1.0;
            }
        }
        for i in 0..idx.n_points {
            let t = tree.terminal(self.data.row(i)).expect("valid tree");
            let correct = tree.class_label(t) == Some(self.data.label(i));
            let path = topo.path_vertices(t).expect("valid vertex");
            if correct {
                x[idx.s(i, t).0] = 1.0;
            }
            if idx.has_q() {
                for &c in &path {
                    x[idx.q(i, c).0] = 1.0;
                }
            }
            if idx.has_q_sink() && correct {
                x[idx.q_sink(i).0] = 1.0;
            }
            if correct && idx.has_z() {
                for &c in &path[1..] {
                    x[idx.z(i, c).0] = 1.0;
                }
            }
            if correct && idx.has_z_dest() && t != 1 {
                for &c in &path[1..] {
                    x[idx.z_dest(i, t, c).0] = 1.0;
                }
            }
        }
        x
    }
}

impl VariableIndex {
    fn n_edges(&self) -> usize {
        self.n() - 1
    }
}
