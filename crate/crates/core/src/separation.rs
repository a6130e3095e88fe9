//! Separator-inequality generation for the cut formulations.
//!
//! For datapoint `i` and terminal `v != 1`, the left-hand side is `s[i,v]`
//! (`CUT1`) or the sum of `s[i,u]` over `v` and its descendants (`CUT2`);
//! every non-root vertex `c` on the path to `v` yields the inequality
//! `lhs <= q[i,c]`.

use std::collections::HashSet;
use std::io::Write;

use crate::formulations::{cut_constraint, Formulation, VariableIndex};
use crate::milp::{
    solve, solve_with_separation, Backend, LinearConstraint, Phase, SolveConfig, SolveError, SolveOutcome,
    Separator,
};
use crate::topology::TreeTopology;
use crate::tree::TrainedTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum CutKind {
    Cut1,
    Cut2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StrategyKind {
    All,
    Lazy,
    Frac1,
    Frac2,
    Frac3,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] =
        [StrategyKind::All, StrategyKind::Lazy, StrategyKind::Frac1, StrategyKind::Frac2, StrategyKind::Frac3];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::All => "ALL",
            StrategyKind::Lazy => "LAZY",
            StrategyKind::Frac1 => "FRAC1",
            StrategyKind::Frac2 => "FRAC2",
            StrategyKind::Frac3 => "FRAC3",
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| *c != '-' && *c != '_').collect();
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(&t))
            .ok_or_else(|| format!("unknown cut strategy `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutStrategy {
    pub kind: StrategyKind,
    pub frac_epsilon: f64,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;

impl Default for CutStrategy {
    fn default() -> Self {
        Self::all()
    }
}

impl CutStrategy {
    pub fn new(kind: StrategyKind) -> Self {
        Self { kind, frac_epsilon: DEFAULT_EPSILON }
    }

    pub fn all() -> Self {
        Self::new(StrategyKind::All)
    }

    pub fn lazy() -> Self {
        Self::new(StrategyKind::Lazy)
    }
}

/// Which cut to keep per (datapoint, terminal) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracRule {
    /// Every violated separator.
    Every,
    /// The first violated separator walking from the root.
    First,
    /// The most violated separator, the one closest to the root on ties.
    Most,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolatedCut {
    pub datapoint: usize,
    pub terminal: usize,
    pub separator: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub kind: CutKind,
}

impl ViolatedCut {
    pub fn violation(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Scan every (datapoint, terminal) pair of `x`.
pub fn scan(x: &[f64], kind: CutKind, index: &VariableIndex, rule: FracRule, eps: f64) -> Vec<ViolatedCut> {
    let topo = index.topology();
    let n = topo.n_vertices();
    let mut out = Vec::new();
    let mut sub = vec![0.0; n + 1];
    for i in 0..index.n_points() {
        for v in (1..=n).rev() {
            let own = x[index.s(i, v).0];
            sub[v] = match kind {
                CutKind::Cut1 => own,
                CutKind::Cut2 if topo.is_branch(v) => own + sub[2 * v] + sub[2 * v + 1],
                CutKind::Cut2 => own,
            };
        }
        for v in 2..=n {
            let lhs = sub[v];
            if lhs <= eps {
                continue;
            }
            let mut best: Option<ViolatedCut> = None;
            let mut c = v;
            let mut path = Vec::with_capacity(TreeTopology::depth(v) as usize);
            while c >= 2 {
                path.push(c);
                c = TreeTopology::parent(c);
            }
            for &c in path.iter().rev() {
                let q = x[index.q(i, c).0];
                if lhs - q <= eps {
                    continue;
                }
                let cut = ViolatedCut { datapoint: i, terminal: v, separator: c, lhs, rhs: q, kind };
                match rule {
                    FracRule::Every => out.push(cut),
                    FracRule::First => {
                        out.push(cut);
                        break;
                    }
                    FracRule::Most => {
                        if best.map_or(true, |b| cut.violation() > b.violation() + 1e-12) {
                            best = Some(cut);
                        }
                    }
                }
            }
            if let Some(b) = best {
                out.push(b);
            }
        }
    }
    out
}

/// Every violated separator at an integer point.
pub fn separate_integral(x: &[f64], kind: CutKind, index: &VariableIndex, eps: f64) -> Vec<ViolatedCut> {
    scan(x, kind, index, FracRule::Every, eps)
}

/// Fractional separation for one of the three root strategies.
pub fn separate_fractional(
    x: &[f64],
    kind: CutKind,
    index: &VariableIndex,
    variant: StrategyKind,
    eps: f64,
) -> Vec<ViolatedCut> {
    let rule = match variant {
        StrategyKind::Frac2 => FracRule::First,
        StrategyKind::Frac3 => FracRule::Most,
        _ => FracRule::Every,
    };
    scan(x, kind, index, rule, eps)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CutLogEntry {
    pub iter: usize,
    pub i: usize,
    pub v: usize,
    pub c: usize,
    pub violation: f64,
    pub phase: &'static str,
}

pub fn write_cut_log<W: Write>(log: &[CutLogEntry], w: W) -> std::io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iter", "i", "v", "c", "violation", "phase"])?;
    for e in log {
        wtr.write_record([
            e.iter.to_string(),
            e.i.to_string(),
            e.v.to_string(),
            e.c.to_string(),
            e.violation.to_string(),
            e.phase.to_string(),
        ])?;
    }
    wtr.flush()
}

/// Separator used by [`run_strategy`].
pub struct CutSeparator<'a> {
    formulation: &'a Formulation,
    kind: CutKind,
    strategy: CutStrategy,
    seen: HashSet<(usize, usize, usize)>,
    round: usize,
    pub log: Vec<CutLogEntry>,
}

impl<'a> CutSeparator<'a> {
    pub fn new(formulation: &'a Formulation) -> Self {
        Self {
            formulation,
            kind: formulation.kind.cut_kind().expect("cut formulation"),
            strategy: formulation.strategy,
            seen: HashSet::new(),
            round: 0,
            log: Vec::new(),
        }
    }
}

impl Separator for CutSeparator<'_> {
    fn wants_fractional(&self) -> bool {
        matches!(self.strategy.kind, StrategyKind::Frac1 | StrategyKind::Frac2 | StrategyKind::Frac3)
    }

    fn separate(&mut self, x: &[f64], phase: Phase) -> Vec<LinearConstraint> {
        let index = &self.formulation.index;
        let eps = self.strategy.frac_epsilon;
        let cuts = match phase {
            Phase::Fractional => separate_fractional(x, self.kind, index, self.strategy.kind, eps),
            Phase::Integral => separate_integral(x, self.kind, index, eps),
        };
        self.round += 1;
        let mut out = Vec::new();
        for c in cuts {
            if !self.seen.insert((c.datapoint, c.terminal, c.separator)) {
                continue;
            }
            self.log.push(CutLogEntry {
                iter: self.round,
                i: c.datapoint,
                v: c.terminal,
                c: c.separator,
                violation: c.violation(),
                phase: phase.as_str(),
            });
            out.push(cut_constraint(index, self.kind, c.datapoint, c.terminal, c.separator));
        }
        out
    }

    fn repair(&mut self, x: &[f64]) -> Option<Vec<f64>> {
        let tree = TrainedTree::decode(x, &self.formulation.index).ok()?;
        Some(self.formulation.encode_tree(&tree))
    }
}

/// Result of a strategy run: the solve outcome and the cut log.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub outcome: SolveOutcome,
    pub log: Vec<CutLogEntry>,
}

/// Solve a formulation with its configured strategy. Cuts found along the
/// way are appended to `formulation.model`.
pub fn run_strategy(
    backend: &dyn Backend,
    formulation: &mut Formulation,
    cfg: &SolveConfig,
) -> Result<StrategyRun, SolveError> {
    let lazy = formulation.kind.cut_kind().is_some() && formulation.strategy.kind != StrategyKind::All;
    if !lazy {
        return Ok(StrategyRun { outcome: solve(backend, &formulation.model, cfg), log: Vec::new() });
    }
    let snapshot = formulation.clone();
    let mut sep = CutSeparator::new(&snapshot);
    let outcome = solve_with_separation(backend, &mut formulation.model, cfg, &mut sep)?;
    Ok(StrategyRun { outcome, log: sep.log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BinaryDataset;
    use crate::formulations::FormulationKind;

    fn cut_index(h: u32) -> VariableIndex {
        let t = TreeTopology::new(h).unwrap();
        let d = BinaryDataset::from_rows(vec![vec![0]], vec![0], 1).unwrap();
        Formulation::cut1(t, &d, CutStrategy::lazy()).unwrap().index
    }

    fn point(index: &VariableIndex, s: &[(usize, f64)], q: &[(usize, f64)]) -> Vec<f64> {
        let n = index.role_counts().iter().sum();
        let mut x = vec![0.0; n];
        for &(v, val) in s {
            x[index.s(0, v).0] = val;
        }
        for &(v, val) in q {
            x[index.q(0, v).0] = val;
        }
        x
    }

    #[test]
    fn integral_single_cut() {
        let idx = cut_index(2);
        let x = point(&idx, &[(4, 1.0)], &[(2, 0.0), (4, 1.0)]);
        let cuts = separate_integral(&x, CutKind::Cut1, &idx, DEFAULT_EPSILON);
        assert_eq!(cuts.len(), 1);
        assert_eq!((cuts[0].datapoint, cuts[0].terminal, cuts[0].separator), (0, 4, 2));
    }

    #[test]
    fn integral_consistent_point() {
        let idx = cut_index(2);
        let x = point(&idx, &[(5, 1.0)], &[(2, 1.0), (5, 1.0)]);
        assert!(separate_integral(&x, CutKind::Cut1, &idx, DEFAULT_EPSILON).is_empty());
        assert!(separate_integral(&x, CutKind::Cut2, &idx, DEFAULT_EPSILON).is_empty());
    }

    #[test]
    fn integral_all_q_zero() {
        let idx = cut_index(2);
        let x = point(&idx, &[(7, 1.0)], &[]);
        let seps: Vec<usize> =
            separate_integral(&x, CutKind::Cut1, &idx, DEFAULT_EPSILON).iter().map(|c| c.separator).collect();
        assert_eq!(seps, vec![3, 7]);
    }

    #[test]
    fn uniform_zero_point() {
        let idx = cut_index(3);
        let x = point(&idx, &[], &[]);
        for v in [StrategyKind::Frac1, StrategyKind::Frac2, StrategyKind::Frac3] {
            assert!(separate_fractional(&x, CutKind::Cut2, &idx, v, DEFAULT_EPSILON).is_empty());
        }
    }

    #[test]
    fn frac3_tie_prefers_root_side() {
        let idx = cut_index(2);
        let x = point(&idx, &[(4, 0.5)], &[(2, 0.0), (4, 0.0)]);
        let c = separate_fractional(&x, CutKind::Cut1, &idx, StrategyKind::Frac3, DEFAULT_EPSILON);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].separator, 2);
    }

    #[test]
    fn cut2_aggregates_descendants() {
        let idx = cut_index(3);
        let x = point(&idx, &[(4, 0.1), (8, 0.1)], &[(2, 0.15), (4, 0.1), (8, 0.1)]);
        let c1 = separate_fractional(&x, CutKind::Cut1, &idx, StrategyKind::Frac1, 1e-9);
        assert!(c1.is_empty());
        let c2 = separate_fractional(&x, CutKind::Cut2, &idx, StrategyKind::Frac1, 1e-9);
        let found: Vec<(usize, usize)> = c2.iter().map(|c| (c.terminal, c.separator)).collect();
        assert_eq!(found, vec![(2, 2), (4, 2), (4, 4)]);
    }

    #[test]
    fn strategy_names() {
        assert_eq!("frac-2".parse::<StrategyKind>().unwrap(), StrategyKind::Frac2);
        assert_eq!("LAZY".parse::<StrategyKind>().unwrap(), StrategyKind::Lazy);
        assert_eq!(FormulationKind::Cut2.cut_kind(), Some(CutKind::Cut2));
    }
}
