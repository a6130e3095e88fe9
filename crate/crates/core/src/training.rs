//! One-call training: build a formulation, solve it, decode the tree.

use thiserror::Error;

use crate::dataset::BinaryDataset;
use crate::formulations::{BuildOptions, Formulation, FormulationError, FormulationKind};
use crate::milp::{Backend, SolveConfig, SolveError, SolveReport};
use crate::separation::{run_strategy, CutLogEntry};
use crate::topology::TreeTopology;
use crate::tree::{TrainedTree, TreeError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("solution does not decode to a tree: {0}")]
    Decode(#[from] TreeError),
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: SolveReport,
    /// Present whenever the solver returned an integer solution.
    pub tree: Option<TrainedTree>,
    pub values: Option<Vec<f64>>,
    pub cut_log: Vec<CutLogEntry>,
    pub n_vars: usize,
    pub n_constraints: usize,
}

pub fn train(
    backend: &dyn Backend,
    kind: FormulationKind,
    topo: TreeTopology,
    data: &BinaryDataset,
    opts: &BuildOptions,
    cfg: &SolveConfig,
) -> Result<TrainOutcome, TrainError> {
    let mut form = Formulation::build(kind, topo, data, opts)?;
    train_formulation(backend, &mut form, cfg)
}

pub fn train_formulation(
    backend: &dyn Backend,
    form: &mut Formulation,
    cfg: &SolveConfig,
) -> Result<TrainOutcome, TrainError> {
    let n_vars = form.model.n_vars();
    let n_constraints = form.model.n_constraints();
    let run = run_strategy(backend, form, cfg)?;
    let tree = match (&run.outcome.values, cfg.relax) {
        (Some(x), false) => Some(TrainedTree::decode(x, &form.index)?),
        _ => None,
    };
    Ok(TrainOutcome {
        report: run.outcome.report,
        tree,
        values: run.outcome.values,
        cut_log: run.log,
        n_vars,
        n_constraints,
    })
}

/// LP relaxation value. Cut formulations get their full separator family,
/// either materialized up front or separated to exhaustion.
pub fn lp_bound(
    backend: &dyn Backend,
    kind: FormulationKind,
    topo: TreeTopology,
    data: &BinaryDataset,
    opts: &BuildOptions,
) -> Result<(f64, Vec<f64>), TrainError> {
    let cfg = SolveConfig { relax: true, max_root_rounds: usize::MAX, ..SolveConfig::default() };
    let mut form = Formulation::build(kind, topo, data, opts)?;
    let run = run_strategy(backend, &mut form, &cfg)?;
    let values = run
        .outcome
        .values
        .ok_or_else(|| SolveError::Backend(format!("LP relaxation returned no point ({:?})", run.outcome.report.status)))?;
    Ok((run.outcome.report.objective, values))
}
