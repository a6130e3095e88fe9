//! Shared fixtures for the benchmarks.

use std::path::PathBuf;

use treemilo::experiments::load_dataset;
use treemilo::BinaryDataset;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// A bundled dataset, binarized with one threshold per numeric column.
pub fn dataset(name: &str) -> BinaryDataset {
    load_dataset(&data_dir(), name, 1).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}
