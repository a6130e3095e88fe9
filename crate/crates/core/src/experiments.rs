//! Configuration-driven benchmark runs and the invariant checks behind the
//! `bench`, `cuts`, `oracle-check` and `relax-check` commands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cart::{fit_cart, CartConfig};
use crate::dataset::{load_manifest, split, BinarizeOptions, BinaryDataset, DataError, SplitSpec};
use crate::formulations::{BuildOptions, Formulation, FormulationKind, VariableIndex};
use crate::milp::{Backend, SolveConfig, SolveStatus};
use crate::oracle::{enumerate_optimal, OracleError};
use crate::separation::{CutStrategy, StrategyKind};
use crate::topology::TreeTopology;
use crate::training::{lp_bound, train_formulation, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read config {path}: {source}")]
    ConfigIo { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn default_data_dir() -> PathBuf {
    PathBuf::from("data")
}
fn default_formulations() -> Vec<FormulationKind> {
    FormulationKind::ALL.to_vec()
}
fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::All]
}
fn default_one_u64() -> u64 {
    1
}
fn default_one() -> usize {
    1
}
fn default_fraction() -> f64 {
    0.75
}
fn default_time_limit() -> Option<f64> {
    Some(60.0)
}
fn default_gap() -> f64 {
    1e-4
}
fn default_true() -> bool {
    true
}
fn default_name() -> String {
    "experiment".into()
}

/// Declarative run description, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Directory holding `<dataset>.json` manifests.
    #[serde(default = "default_data_dir")]
    pub data_dir: PathBuf,
    pub datasets: Vec<String>,
    pub heights: Vec<u32>,
    #[serde(default = "default_formulations")]
    pub formulations: Vec<FormulationKind>,
    /// Strategies for the cut formulations; the others always run once.
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_one_u64")]
    pub replicates: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: Option<f64>,
    #[serde(default = "default_gap")]
    pub gap_tolerance: f64,
    /// Solver threads per cell.
    #[serde(default = "default_one")]
    pub threads: usize,
    /// Cells solved concurrently.
    #[serde(default = "default_one")]
    pub jobs: usize,
    #[serde(default = "default_one")]
    pub max_thresholds: usize,
    #[serde(default = "default_true")]
    pub include_cart: bool,
    /// Start every solve from the depth-h CART tree.
    #[serde(default)]
    pub warm_start_cart: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path)
            .map_err(|source| ExperimentError::ConfigIo { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml_str(&s)?;
        if cfg.data_dir.is_relative() {
            if let Some(parent) = path.parent() {
                let joined = parent.join(&cfg.data_dir);
                if joined.exists() {
                    cfg.data_dir = joined;
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.datasets.is_empty() {
            return bad("no datasets listed");
        }
        if self.heights.is_empty() || self.heights.contains(&0) {
            return bad("heights must be a nonempty list of positive integers");
        }
        if self.replicates == 0 {
            return bad("replicates must be positive");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad("train_fraction must lie in (0, 1)");
        }
        if self.jobs == 0 || self.threads == 0 {
            return bad("jobs and threads must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    fn solve_config(&self, replicate: u64) -> SolveConfig {
        SolveConfig {
            time_limit_s: self.time_limit_s,
            gap_tolerance: self.gap_tolerance,
            threads: self.threads,
            seed: self.seed.wrapping_add(replicate),
            ..SolveConfig::default()
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Written beside every set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub replicates: u64,
    pub backend: String,
    pub version: String,
    pub split_rng: String,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, backend: &dyn Backend) -> Self {
        Self {
            command: command.into(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            seed: cfg.seed,
            replicates: cfg.replicates,
            backend: backend.name(),
            version: env!("CARGO_PKG_VERSION").into(),
            split_rng: "ChaCha8 seeded from `seed`, stream = replicate".into(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ExperimentError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")
            .map_err(|source| ExperimentError::Output { path: path.to_path_buf(), source })
    }
}

pub fn load_dataset(data_dir: &Path, name: &str, max_thresholds: usize) -> Result<BinaryDataset, DataError> {
    let opts = BinarizeOptions { max_thresholds, ..BinarizeOptions::default() };
    let (_, bin) = load_manifest(data_dir.join(format!("{name}.json")), &opts)?;
    Ok(bin.dataset)
}

/// One row of the result matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRow {
    pub dataset: String,
    pub h: u32,
    pub model: String,
    pub strategy: String,
    pub replicate: u64,
    pub status: String,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub seconds: f64,
    pub nodes: u64,
    pub cuts: usize,
    pub solves: usize,
    pub train_acc: f64,
    pub test_acc: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub message: String,
}

impl CellRow {
    fn blank(dataset: &str, h: u32, model: &str, strategy: &str, replicate: u64) -> Self {
        Self {
            dataset: dataset.into(),
            h,
            model: model.into(),
            strategy: strategy.into(),
            replicate,
            status: SolveStatus::Error.as_str().into(),
            objective: f64::NAN,
            best_bound: f64::NAN,
            gap: f64::NAN,
            seconds: 0.0,
            nodes: 0,
            cuts: 0,
            solves: 0,
            train_acc: f64::NAN,
            test_acc: f64::NAN,
            n_train: 0,
            n_test: 0,
            message: String::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal.as_str()
    }
}

#[derive(Debug, Clone, Copy)]
enum CellModel {
    Milo(FormulationKind, StrategyKind),
    Cart { restricted: bool },
}

#[derive(Debug, Clone)]
struct Cell {
    dataset: usize,
    h: u32,
    replicate: u64,
    model: CellModel,
}

struct Prepared {
    name: String,
    train: BinaryDataset,
    test: BinaryDataset,
}

/// Solve one MILO cell. Failures end up in the row, never as an error.
pub fn run_milo_cell(
    backend: &dyn Backend,
    dataset: &str,
    train: &BinaryDataset,
    test: &BinaryDataset,
    h: u32,
    kind: FormulationKind,
    strategy: StrategyKind,
    replicate: u64,
    cfg: &SolveConfig,
    warm_start_cart: bool,
) -> CellRow {
    let strategy_name = if kind.cut_kind().is_some() { strategy.name() } else { "-" };
    let mut row = CellRow::blank(dataset, h, kind.name(), strategy_name, replicate);
    row.n_train = train.n_rows();
    row.n_test = test.n_rows();
    let topo = match TreeTopology::new(h) {
        Ok(t) => t,
        Err(e) => {
            row.message = e.to_string();
            return row;
        }
    };
    let opts = BuildOptions { strategy: CutStrategy::new(strategy), ..BuildOptions::default() };
    let mut form = match Formulation::build(kind, topo, train, &opts) {
        Ok(f) => f,
        Err(e) => {
            row.message = e.to_string();
            return row;
        }
    };
    let mut cfg = cfg.clone();
    if warm_start_cart {
        if let Ok(tree) = fit_cart(train, &CartConfig::new(h, false)) {
            cfg.warm_start = Some(form.encode_tree(&tree));
        }
    }
    match train_formulation(backend, &mut form, &cfg) {
        Ok(out) => {
            let r = &out.report;
            row.status = r.status.as_str().into();
            row.objective = r.objective;
            row.best_bound = r.best_bound;
            row.gap = r.gap;
            row.seconds = r.wall_seconds;
            row.nodes = r.nodes;
            row.cuts = r.cuts_added;
            row.solves = r.solves;
            row.message = r.message.clone().unwrap_or_default();
            if let Some(tree) = &out.tree {
                row.train_acc = tree.accuracy(train).unwrap_or(f64::NAN);
                row.test_acc = tree.accuracy(test).unwrap_or(f64::NAN);
            }
        }
        Err(e) => row.message = e.to_string(),
    }
    row
}

fn run_cart_cell(p: &Prepared, h: u32, restricted: bool, replicate: u64) -> CellRow {
    let name = if restricted { "CART_str" } else { "CART" };
    let mut row = CellRow::blank(&p.name, h, name, "-", replicate);
    row.n_train = p.train.n_rows();
    row.n_test = p.test.n_rows();
    let start = std::time::Instant::now();
    match fit_cart(&p.train, &CartConfig::new(h, restricted)) {
        Ok(tree) => {
            row.seconds = start.elapsed().as_secs_f64();
            row.status = "heuristic".into();
            row.objective = tree.correct_count(&p.train).map_or(f64::NAN, |c| c as f64);
            row.train_acc = tree.accuracy(&p.train).unwrap_or(f64::NAN);
            row.test_acc = tree.accuracy(&p.test).unwrap_or(f64::NAN);
        }
        Err(e) => row.message = e.to_string(),
    }
    row
}

fn prepare(cfg: &ExperimentConfig) -> Result<Vec<Vec<Prepared>>, ExperimentError> {
    let mut out = Vec::new();
    for name in &cfg.datasets {
        let d = load_dataset(&cfg.data_dir, name, cfg.max_thresholds)?;
        let mut reps = Vec::new();
        for r in 0..cfg.replicates {
            let sp = split(&d, &SplitSpec::new(cfg.seed, cfg.train_fraction, r))?;
            reps.push(Prepared { name: name.clone(), train: sp.train, test: sp.test });
        }
        out.push(reps);
    }
    Ok(out)
}

/// Run `cells` on `jobs` workers; the result order matches `cells`.
fn execute(
    backend: &(dyn Backend + Sync),
    cfg: &ExperimentConfig,
    data: &[Vec<Prepared>],
    cells: &[Cell],
) -> Vec<CellRow> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CellRow>>> = Mutex::new(vec![None; cells.len()]);
    let worker = || loop {
        let j = next.fetch_add(1, Ordering::SeqCst);
        let Some(cell) = cells.get(j) else { break };
        let p = &data[cell.dataset][cell.replicate as usize];
        let row = match cell.model {
            CellModel::Milo(kind, strategy) => run_milo_cell(
                backend,
                &p.name,
                &p.train,
                &p.test,
                cell.h,
                kind,
                strategy,
                cell.replicate,
                &cfg.solve_config(cell.replicate),
                cfg.warm_start_cart,
            ),
            CellModel::Cart { restricted } => run_cart_cell(p, cell.h, restricted, cell.replicate),
        };
        eprintln!(
            "[{}/{}] {} h={} {} {} rep={} {} {:.2}s",
            j + 1,
            cells.len(),
            row.dataset,
            row.h,
            row.model,
            row.strategy,
            row.replicate,
            row.status,
            row.seconds
        );
        results.lock().expect("no worker panics while holding the lock")[j] = Some(row);
    };
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.max(1) {
            s.spawn(worker);
        }
    });
    results.into_inner().expect("workers finished").into_iter().map(|r| r.expect("every cell ran")).collect()
}

/// Every (dataset, h, formulation, strategy, replicate) cell plus the CART
/// baselines.
pub fn run_matrix(backend: &(dyn Backend + Sync), cfg: &ExperimentConfig) -> Result<Vec<CellRow>, ExperimentError> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    let mut cells = Vec::new();
    for (di, _) in cfg.datasets.iter().enumerate() {
        for &h in &cfg.heights {
            for kind in &cfg.formulations {
                let strategies: Vec<StrategyKind> =
                    if kind.cut_kind().is_some() { cfg.strategies.clone() } else { vec![StrategyKind::All] };
                for s in strategies {
                    for r in 0..cfg.replicates {
                        cells.push(Cell { dataset: di, h, replicate: r, model: CellModel::Milo(*kind, s) });
                    }
                }
            }
            if cfg.include_cart {
                for restricted in [false, true] {
                    for r in 0..cfg.replicates {
                        cells.push(Cell { dataset: di, h, replicate: r, model: CellModel::Cart { restricted } });
                    }
                }
            }
        }
    }
    Ok(execute(backend, cfg, &data, &cells))
}

/// Like [`run_matrix`] restricted to the cut formulations under all five
/// strategies.
pub fn run_cut_comparison(
    backend: &(dyn Backend + Sync),
    cfg: &ExperimentConfig,
) -> Result<Vec<CellRow>, ExperimentError> {
    let mut c = cfg.clone();
    c.formulations.retain(|k| k.cut_kind().is_some());
    if c.formulations.is_empty() {
        c.formulations = vec![FormulationKind::Cut1, FormulationKind::Cut2];
    }
    c.strategies = StrategyKind::ALL.to_vec();
    c.include_cart = false;
    run_matrix(backend, &c)
}

pub fn write_rows<T: Serialize>(rows: &[T], path: &Path) -> Result<(), ExperimentError> {
    let mut wtr = csv::Writer::from_path(path)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| ExperimentError::Output { path: path.to_path_buf(), source })?;
    Ok(())
}

/// Means over replicates for one (dataset, h, model, strategy).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub h: u32,
    pub model: String,
    pub strategy: String,
    pub cells: usize,
    pub optimal: usize,
    pub mean_seconds: f64,
    pub mean_gap: f64,
    pub mean_train_acc: f64,
    pub mean_test_acc: f64,
}

impl SummaryRow {
    pub fn all_optimal(&self) -> bool {
        self.optimal == self.cells
    }

    /// Seconds when every cell was solved, the mean gap in parentheses
    /// otherwise.
    pub fn time_or_gap(&self) -> String {
        if self.model.starts_with("CART") {
            format!("{:.2}", self.mean_seconds)
        } else if self.all_optimal() {
            format!("{:.2}", self.mean_seconds)
        } else if self.mean_gap.is_nan() {
            "(-)".into()
        } else {
            format!("({:.2}%)", 100.0 * self.mean_gap)
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn summarize(rows: &[CellRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, u32, String, String), Vec<&CellRow>)> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.h, r.model.clone(), r.strategy.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((dataset, h, model, strategy), rs)| SummaryRow {
            dataset,
            h,
            model,
            strategy,
            cells: rs.len(),
            optimal: rs.iter().filter(|r| r.is_optimal()).count(),
            mean_seconds: mean(rs.iter().map(|r| r.seconds)),
            mean_gap: mean(rs.iter().filter(|r| !r.is_optimal()).map(|r| r.gap)),
            mean_train_acc: mean(rs.iter().map(|r| r.train_acc)),
            mean_test_acc: mean(rs.iter().map(|r| r.test_acc)),
        })
        .collect()
}

fn pct(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{:.2}", 100.0 * x)
    }
}

/// Fixed-width text table: time (or gap), train and test accuracy in
/// percent.
pub fn render_table(summary: &[SummaryRow]) -> String {
    let header = ["dataset", "h", "model", "strategy", "time(gap)", "train%", "test%"];
    let body: Vec<[String; 7]> = summary
        .iter()
        .map(|s| {
            [
                s.dataset.clone(),
                s.h.to_string(),
                s.model.clone(),
                s.strategy.clone(),
                s.time_or_gap(),
                pct(s.mean_train_acc),
                pct(s.mean_test_acc),
            ]
        })
        .collect();
    layout(&header, &body)
}

fn layout<const N: usize>(header: &[&str; N], body: &[[String; N]]) -> String {
    let mut width = header.map(str::len);
    for row in body {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    line(width.iter().map(|w| &"----------------------------------------"[..(*w).min(40)]).collect(), &mut out);
    for row in body {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

/// Cut-strategy comparison for one (dataset, h, formulation).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub dataset: String,
    pub h: u32,
    pub model: String,
    /// ALL: seconds, or the gap in parentheses.
    pub all: String,
    pub lazy: String,
    pub frac1: String,
    pub frac2: String,
    pub frac3: String,
}

/// Strategy times relative to ALL; a strategy that did not finish shows its
/// gap instead.
pub fn ratio_table(summary: &[SummaryRow]) -> Vec<RatioRow> {
    let mut out: Vec<RatioRow> = Vec::new();
    for s in summary.iter().filter(|s| s.strategy == "ALL") {
        let find = |k: StrategyKind| {
            summary.iter().find(|o| o.dataset == s.dataset && o.h == s.h && o.model == s.model && o.strategy == k.name())
        };
        let cell = |k: StrategyKind| match find(k) {
            None => "-".to_string(),
            Some(o) if !o.all_optimal() => o.time_or_gap(),
            Some(_) if !s.all_optimal() => "-".to_string(),
            Some(o) => format!("{:.2}", o.mean_seconds / s.mean_seconds.max(1e-9)),
        };
        out.push(RatioRow {
            dataset: s.dataset.clone(),
            h: s.h,
            model: s.model.clone(),
            all: s.time_or_gap(),
            lazy: cell(StrategyKind::Lazy),
            frac1: cell(StrategyKind::Frac1),
            frac2: cell(StrategyKind::Frac2),
            frac3: cell(StrategyKind::Frac3),
        });
    }
    out
}

pub fn render_ratio_table(rows: &[RatioRow]) -> String {
    let header = ["dataset", "h", "model", "ALL", "LAZY", "FRAC1", "FRAC2", "FRAC3"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.dataset.clone(),
                r.h.to_string(),
                r.model.clone(),
                r.all.clone(),
                r.lazy.clone(),
                r.frac1.clone(),
                r.frac2.clone(),
                r.frac3.clone(),
            ]
        })
        .collect();
    layout(&header, &body)
}

/// Groups of optimal MILO cells on the same split whose objectives differ.
pub fn objective_disagreements(rows: &[CellRow]) -> Vec<String> {
    let mut groups: BTreeMap<(String, u32, u64), Vec<&CellRow>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.is_optimal() && !r.model.starts_with("CART")) {
        groups.entry((r.dataset.clone(), r.h, r.replicate)).or_default().push(r);
    }
    let mut out = Vec::new();
    for ((d, h, rep), rs) in groups {
        let first = rs[0].objective.round();
        if rs.iter().any(|r| r.objective.round() != first) {
            let vals: Vec<String> =
                rs.iter().map(|r| format!("{}/{}={}", r.model, r.strategy, r.objective.round())).collect();
            out.push(format!("{d} h={h} rep={rep}: {}", vals.join(", ")));
        }
    }
    out
}

/// Optimal MILO cells whose training accuracy is below CART's.
pub fn dominance_violations(rows: &[CellRow]) -> Vec<String> {
    let mut out = Vec::new();
    for c in rows.iter().filter(|r| r.model == "CART") {
        for m in rows.iter().filter(|r| {
            r.is_optimal() && r.dataset == c.dataset && r.h == c.h && r.replicate == c.replicate
        }) {
            if m.train_acc + 1e-12 < c.train_acc {
                out.push(format!(
                    "{} h={} rep={}: {} {} train {} < CART {}",
                    m.dataset, m.h, m.replicate, m.model, m.strategy, m.train_acc, c.train_acc
                ));
            }
        }
    }
    out
}

/// Random instance with at most 10 rows, 4 features and 3 classes, every
/// class present.
pub fn random_instance(seed: u64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |n: usize| (rng.next_u64() % n as u64) as usize;
    let n_classes = 1 + pick(3);
    let n_features = 1 + pick(4);
    let n_rows = (n_classes + pick(10)).min(10);
    let rows = (0..n_rows).map(|_| (0..n_features).map(|_| pick(2) as u8).collect()).collect();
    let mut labels: Vec<usize> = (0..n_rows).map(|_| pick(n_classes)).collect();
    for (k, l) in labels.iter_mut().enumerate().take(n_classes) {
        *l = k;
    }
    BinaryDataset::from_rows(rows, labels, n_classes).expect("generator respects the dataset invariants")
}

/// Height 1 or 2, alternating with the seed.
pub fn random_height(seed: u64) -> u32 {
    1 + (seed % 2) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub instance: u64,
    pub h: u32,
    pub n_rows: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub model: String,
    pub strategy: String,
    pub status: String,
    pub objective: f64,
    pub tree_correct: f64,
    pub oracle: usize,
    pub agree: bool,
}

/// Solve instances `first..first + count` with every formulation and cut
/// strategy and compare against enumeration.
pub fn oracle_check(backend: &dyn Backend, first: u64, count: u64) -> Result<Vec<OracleRow>, ExperimentError> {
    let mut rows = Vec::new();
    for seed in first..first + count {
        let d = random_instance(seed);
        let h = random_height(seed);
        let topo = TreeTopology::new(h).expect("small height");
        let oracle = enumerate_optimal(&d, h, None)?.best_correct;
        for kind in FormulationKind::ALL {
            let strategies: &[StrategyKind] =
                if kind.cut_kind().is_some() { &StrategyKind::ALL } else { &[StrategyKind::All] };
            for &s in strategies {
                let opts = BuildOptions { strategy: CutStrategy::new(s), ..BuildOptions::default() };
                let mut form = Formulation::build(kind, topo, &d, &opts).map_err(TrainError::from)?;
                let out = train_formulation(backend, &mut form, &SolveConfig::default())?;
                let tree_correct =
                    out.tree.as_ref().and_then(|t| t.correct_count(&d).ok()).map_or(f64::NAN, |c| c as f64);
                let agree = out.report.status == SolveStatus::Optimal
                    && out.report.objective.round() == oracle as f64
                    && tree_correct == oracle as f64;
                rows.push(OracleRow {
                    instance: seed,
                    h,
                    n_rows: d.n_rows(),
                    n_features: d.n_features(),
                    n_classes: d.n_classes(),
                    model: kind.name().into(),
                    strategy: if kind.cut_kind().is_some() { s.name().into() } else { "-".into() },
                    status: out.report.status.as_str().into(),
                    objective: out.report.objective,
                    tree_correct,
                    oracle,
                    agree,
                });
            }
        }
    }
    Ok(rows)
}

/// Largest violation of the flow identities at an LP point: at most one
/// terminal per datapoint for FlowOCT, terminals matching the sink for MCF1,
/// and no flow leaving its own destination for MCF2. Zero for the cut
/// formulations.
pub fn flow_identity_residual(kind: FormulationKind, index: &VariableIndex, x: &[f64]) -> f64 {
    let topo = index.topology();
    let mut worst = 0.0f64;
    for i in 0..index.n_points() {
        let total: f64 = topo.vertices().map(|v| x[index.s(i, v).0]).sum();
        match kind {
            FormulationKind::FlowOct => worst = worst.max(total - 1.0),
            FormulationKind::Mcf1 => worst = worst.max((total - x[index.q_sink(i).0]).abs()),
            FormulationKind::Mcf2 => {
                for v in topo.branch_vertices().filter(|&v| v >= 2) {
                    let out = x[index.z_dest(i, v, TreeTopology::left(v)).0]
                        + x[index.z_dest(i, v, TreeTopology::right(v)).0];
                    worst = worst.max(out.abs());
                }
            }
            FormulationKind::Cut1 | FormulationKind::Cut2 => {}
        }
    }
    worst.max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxRow {
    pub instance: String,
    pub h: u32,
    pub flowoct: f64,
    pub mcf1: f64,
    pub mcf2: f64,
    pub cut1: f64,
    pub cut2: f64,
    /// Largest flow-identity residual over the three flow models.
    pub flow_identity_residual: f64,
    pub cut2_le_cut1: bool,
    pub cut1_eq_mcf1: bool,
    pub cut1_eq_mcf2: bool,
    pub mcf1_le_flowoct: bool,
}

pub const RELAX_TOL: f64 = 1e-6;

impl RelaxRow {
    pub fn all_hold(&self) -> bool {
        self.cut2_le_cut1 && self.cut1_eq_mcf1 && self.cut1_eq_mcf2 && self.mcf1_le_flowoct
    }
}

/// LP values of all five formulations on one instance.
pub fn relax_row(
    backend: &dyn Backend,
    name: &str,
    d: &BinaryDataset,
    h: u32,
) -> Result<RelaxRow, ExperimentError> {
    let topo = TreeTopology::new(h).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut z = [0.0; 5];
    let mut residual = 0.0f64;
    for (slot, kind) in z.iter_mut().zip(FormulationKind::ALL) {
        let opts = BuildOptions::default();
        let (val, x) = lp_bound(backend, kind, topo, d, &opts)?;
        let form = Formulation::build(kind, topo, d, &opts).map_err(TrainError::from)?;
        residual = residual.max(flow_identity_residual(kind, &form.index, &x));
        *slot = val;
    }
    let [flowoct, mcf1, mcf2, cut1, cut2] = z;
    Ok(RelaxRow {
        instance: name.into(),
        h,
        flowoct,
        mcf1,
        mcf2,
        cut1,
        cut2,
        flow_identity_residual: residual,
        cut2_le_cut1: cut2 <= cut1 + RELAX_TOL,
        cut1_eq_mcf1: (cut1 - mcf1).abs() <= RELAX_TOL,
        cut1_eq_mcf2: (cut1 - mcf2).abs() <= RELAX_TOL,
        mcf1_le_flowoct: mcf1 <= flowoct + RELAX_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_hash() {
        let c = ExperimentConfig::from_toml_str("datasets = [\"monk1\"]\nheights = [2]\n").unwrap();
        assert_eq!(c.formulations.len(), 5);
        assert_eq!(c.strategies, vec![StrategyKind::All]);
        assert_eq!(c.time_limit_s, Some(60.0));
        assert_eq!(c.hash().len(), 64);
        assert_eq!(c.hash(), c.clone().hash());
        let d = ExperimentConfig { seed: 1, ..c.clone() };
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_toml_str("datasets=[\"a\"]\nheights=[2]\nbogus=1\n").is_err());
        assert!(ExperimentConfig::from_toml_str("datasets=[\"a\"]\nheights=[0]\n").is_err());
        let c = ExperimentConfig::from_toml_str(
            "datasets=[\"a\"]\nheights=[2]\nformulations=[\"CUT2\",\"FlowOCT\"]\nstrategies=[\"FRAC3\"]\n",
        )
        .unwrap();
        assert_eq!(c.formulations, vec![FormulationKind::Cut2, FormulationKind::FlowOct]);
        assert_eq!(c.strategies, vec![StrategyKind::Frac3]);
    }

    fn summary(model: &str, strategy: &str, optimal: usize, secs: f64, gap: f64) -> SummaryRow {
        SummaryRow {
            dataset: "d".into(),
            h: 2,
            model: model.into(),
            strategy: strategy.into(),
            cells: 2,
            optimal,
            mean_seconds: secs,
            mean_gap: gap,
            mean_train_acc: 1.0,
            mean_test_acc: 0.5,
        }
    }

    #[test]
    fn mixed_time_gap_display() {
        assert_eq!(summary("CUT1", "ALL", 2, 1.234, f64::NAN).time_or_gap(), "1.23");
        assert_eq!(summary("CUT1", "ALL", 1, 60.0, 0.0512).time_or_gap(), "(5.12%)");
    }

    #[test]
    fn ratios_relative_to_all() {
        let s = vec![
            summary("CUT1", "ALL", 2, 2.0, f64::NAN),
            summary("CUT1", "LAZY", 2, 3.0, f64::NAN),
            summary("CUT1", "FRAC1", 2, 1.0, f64::NAN),
            summary("CUT1", "FRAC2", 1, 60.0, 0.1),
        ];
        let r = ratio_table(&s);
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].all.as_str(), r[0].lazy.as_str(), r[0].frac1.as_str()), ("2.00", "1.50", "0.50"));
        assert_eq!(r[0].frac2, "(10.00%)");
        assert_eq!(r[0].frac3, "-");
        let own = ratio_table(&[summary("CUT2", "ALL", 2, 2.0, f64::NAN)]);
        assert_eq!(own[0].lazy, "-");
        assert!(render_ratio_table(&r).contains("1.50"));
    }

    #[test]
    fn disagreement_detection() {
        let mk = |model: &str, obj: f64| CellRow {
            status: "optimal".into(),
            objective: obj,
            ..CellRow::blank("d", 2, model, "-", 0)
        };
        assert!(objective_disagreements(&[mk("MCF1", 5.0), mk("CUT1", 5.0000001)]).is_empty());
        assert_eq!(objective_disagreements(&[mk("MCF1", 5.0), mk("CUT1", 6.0)]).len(), 1);
    }

    #[test]
    fn random_instances_are_reproducible() {
        for s in 0..20 {
            let d = random_instance(s);
            assert_eq!(d, random_instance(s));
            assert!(d.n_rows() <= 10 && d.n_features() <= 4 && d.n_classes() <= 3);
        }
    }
}
