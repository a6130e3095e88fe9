//! Optimal binary classification trees trained with mixed-integer linear
//! optimization.

pub mod cart;
pub mod dataset;
pub mod experiments;
pub mod formulations;
pub mod milp;
pub mod oracle;
pub mod pareto;
pub mod separation;
pub mod topology;
pub mod training;
pub mod tree;

pub use dataset::{BinaryDataset, SplitSpec};
pub use formulations::{Formulation, FormulationKind};
pub use milp::{ModelInstance, SolveReport, SolveStatus};
pub use separation::{CutStrategy, StrategyKind};
pub use topology::TreeTopology;
pub use tree::TrainedTree;
