//! Loading, binarization and train/test splitting.
//!
//! A [`BinaryDataset`] holds a row-major 0/1 feature matrix with integer
//! class labels. Raw CSV tables are turned into one with [`binarize`]:
//!
//! * a column whose observed values are exactly `{0, 1}` is passed through;
//! * any other two-valued column becomes one indicator for its second value
//!   (values sorted, numerically when every value parses as a number);
//! * categorical columns with three or more values are one-hot encoded;
//! * numeric columns are thresholded (`x > t`) at up to `max_thresholds`
//!   distinct-value midpoints, by default only the one nearest the median;
//! * constant columns are dropped with a warning.
//!
//! Splits shuffle row indices with ChaCha8 (`rand_chacha`), seeded by
//! `seed` with stream `replicate`, using a Fisher-Yates pass that draws
//! `j = next_u64() % (i + 1)` for `i = n-1 .. 1`. The first
//! `ceil(train_fraction * n)` shuffled rows form the training set; both
//! sides are returned in ascending original order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot open {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("label column `{0}` not found")]
    MissingLabel(String),
    #[error("missing value in row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },
    #[error("column `{column}` declared {kind:?} but value `{value}` does not fit")]
    BadValue { column: String, kind: ColumnKind, value: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("degenerate split: train {train} rows, test {test} rows")]
    DegenerateSplit { train: usize, test: usize },
    #[error("manifest: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
    Binary,
}

/// Unprocessed table: string cells plus the label column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub labels: Vec<String>,
    pub label_column: String,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn column_values(&self, c: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[c].as_str())
    }
}

pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<RawTable, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    read_csv(file, label_column)
}

pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<RawTable, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| DataError::Parse { row: 0, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| DataError::MissingLabel(label_column.to_string()))?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row_no = k + 1;
        let rec = rec.map_err(|e| DataError::Parse { row: row_no, message: e.to_string() })?;
        if rec.len() != headers.len() {
            return Err(DataError::Parse {
                row: row_no,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (c, cell) in rec.iter().enumerate() {
            if cell.is_empty() || cell == "?" {
                return Err(DataError::MissingValue { row: row_no, column: headers[c].clone() });
            }
            if c == label_idx {
                labels.push(cell.to_string());
            } else {
                row.push(cell.to_string());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::Parse { row: 1, message: "no data rows".into() });
    }
    let mut columns = headers;
    let label_column = columns.remove(label_idx);
    Ok(RawTable { columns, rows, labels, label_column })
}

/// Per-dataset JSON manifest stored next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub file: String,
    pub label_column: String,
    #[serde(default)]
    pub columns: BTreeMap<String, ColumnKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl DatasetManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|e| DataError::Manifest(e.to_string()))
    }
}

/// Load a dataset through its manifest and binarize it with `opts`.
pub fn load_manifest(
    path: impl AsRef<Path>,
    opts: &BinarizeOptions,
) -> Result<(DatasetManifest, Binarized), DataError> {
    let path = path.as_ref();
    let manifest = DatasetManifest::read(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let raw = load_csv(dir.join(&manifest.file), &manifest.label_column)?;
    let mut opts = opts.clone();
    for (k, v) in &manifest.columns {
        opts.kinds.entry(k.clone()).or_insert(*v);
    }
    let bin = binarize(&raw, &opts)?;
    Ok((manifest, bin))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinarizeOptions {
    /// Maximum number of thresholds per numeric column.
    pub max_thresholds: usize,
    /// Declared column kinds; undeclared columns are inferred.
    pub kinds: BTreeMap<String, ColumnKind>,
}

impl Default for BinarizeOptions {
    fn default() -> Self {
        Self { max_thresholds: 1, kinds: BTreeMap::new() }
    }
}

#[derive(Debug, Clone)]
pub struct Binarized {
    pub dataset: BinaryDataset,
    pub warnings: Vec<String>,
}

fn sorted_values<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = values.collect();
    let mut out: Vec<String> = set.into_iter().map(str::to_string).collect();
    let nums: Option<Vec<f64>> = out.iter().map(|v| v.parse::<f64>().ok()).collect();
    if let Some(nums) = nums {
        let mut pairs: Vec<(f64, String)> = nums.into_iter().zip(out).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        out = pairs.into_iter().map(|p| p.1).collect();
    }
    out
}

fn numeric_thresholds(values: &[f64], cap: usize) -> Vec<f64> {
    let mut distinct = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mids: Vec<f64> = distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    if mids.len() <= cap {
        return mids;
    }
    let n = values.len() as f64;
    let below: Vec<f64> = mids
        .iter()
        .map(|&t| values.iter().filter(|&&x| x <= t).count() as f64 / n)
        .collect();
    let mut chosen = BTreeSet::new();
    for r in 1..=cap {
        let target = r as f64 / (cap + 1) as f64;
        let best = (0..mids.len())
            .min_by(|&a, &b| (below[a] - target).abs().total_cmp(&(below[b] - target).abs()))
            .expect("at least one midpoint");
        chosen.insert(best);
    }
    chosen.into_iter().map(|j| mids[j]).collect()
}

pub fn binarize(raw: &RawTable, opts: &BinarizeOptions) -> Result<Binarized, DataError> {
    let n = raw.n_rows();
    if n == 0 {
        return Err(DataError::Invalid("no rows".into()));
    }
    let mut columns: Vec<Vec<u8>> = Vec::new();
    let mut names = Vec::new();
    let mut warnings = Vec::new();

    for (c, col) in raw.columns.iter().enumerate() {
        let values = sorted_values(raw.column_values(c));
        if values.len() == 1 {
            warnings.push(format!("column `{col}` is constant and was dropped"));
            continue;
        }
        let declared = opts.kinds.get(col).copied();
        let all_numeric = values.iter().all(|v| v.parse::<f64>().is_ok());
        let kind = match declared {
            Some(k) => k,
            None if values == ["0", "1"] => ColumnKind::Binary,
            None if all_numeric && values.len() > 2 => ColumnKind::Numeric,
            None => ColumnKind::Categorical,
        };
        match kind {
            ColumnKind::Binary => {
                let mut out = Vec::with_capacity(n);
                for v in raw.column_values(c) {
                    match v {
                        "0" => out.push(0),
                        "1" => out.push(1),
                        other => {
                            return Err(DataError::BadValue {
                                column: col.clone(),
                                kind,
                                value: other.to_string(),
                            })
                        }
                    }
                }
                columns.push(out);
                names.push(col.clone());
            }
            ColumnKind::Categorical if values.len() == 2 => {
                let on = &values[1];
                if values[0] == "0" && values[1] == "1" {
                    names.push(col.clone());
                } else {
                    names.push(format!("{col}={on}"));
                }
                columns.push(raw.column_values(c).map(|v| u8::from(v == on)).collect());
            }
            ColumnKind::Categorical => {
                for cat in &values {
                    columns.push(raw.column_values(c).map(|v| u8::from(v == cat)).collect());
                    names.push(format!("{col}={cat}"));
                }
            }
            ColumnKind::Numeric => {
                let mut nums = Vec::with_capacity(n);
                for v in raw.column_values(c) {
                    nums.push(v.parse::<f64>().map_err(|_| DataError::BadValue {
                        column: col.clone(),
                        kind,
                        value: v.to_string(),
                    })?);
                }
                for t in numeric_thresholds(&nums, opts.max_thresholds.max(1)) {
                    columns.push(nums.iter().map(|&x| u8::from(x > t)).collect());
                    names.push(format!("{col}>{t}"));
                }
            }
        }
    }
    if columns.is_empty() {
        return Err(DataError::Invalid("no informative feature columns".into()));
    }

    let class_names = sorted_values(raw.labels.iter().map(String::as_str));
    let class_of: BTreeMap<&str, usize> =
        class_names.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
    let labels = raw.labels.iter().map(|l| class_of[l.as_str()]).collect();
    let nf = columns.len();
    let mut features = vec![0u8; n * nf];
    for (f, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            features[i * nf + f] = x;
        }
    }
    let dataset = BinaryDataset::from_flat(features, nf, labels, names, class_names)?;
    Ok(Binarized { dataset, warnings })
}

/// Binary feature matrix with class labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryDataset {
    n_features: usize,
    features: Vec<u8>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl BinaryDataset {
    /// Build from rows; checks every invariant including that each class occurs.
    pub fn new(
        rows: Vec<Vec<u8>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let nf = feature_names.len();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != nf) {
            return Err(DataError::Invalid(format!("row {i} has the wrong number of features")));
        }
        let features = rows.into_iter().flatten().collect();
        Self::from_flat(features, nf, labels, feature_names, class_names)
    }

    /// Unnamed dataset, with features `f_0..` and classes `0..n_classes`.
    pub fn from_rows(rows: Vec<Vec<u8>>, labels: Vec<usize>, n_classes: usize) -> Result<Self, DataError> {
        let nf = rows.first().map_or(0, Vec::len);
        let names = (0..nf).map(|f| format!("f_{f}")).collect();
        let classes = (0..n_classes).map(|k| k.to_string()).collect();
        Self::new(rows, labels, names, classes)
    }

    fn from_flat(
        features: Vec<u8>,
        n_features: usize,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let d = Self { n_features, features, labels, feature_names, class_names };
        d.validate(true)?;
        Ok(d)
    }

    fn validate(&self, require_all_classes: bool) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::Invalid(m.to_string()));
        if self.labels.is_empty() {
            return bad("dataset has no rows");
        }
        if self.n_features == 0 {
            return bad("dataset has no features");
        }
        if self.class_names.is_empty() {
            return bad("dataset has no classes");
        }
        if self.features.len() != self.labels.len() * self.n_features {
            return bad("feature matrix size does not match label count");
        }
        if self.features.iter().any(|&x| x > 1) {
            return bad("feature values must be 0 or 1");
        }
        if self.labels.iter().any(|&y| y >= self.class_names.len()) {
            return bad("label out of range");
        }
        if require_all_classes {
            let counts = self.class_counts();
            if let Some(k) = counts.iter().position(|&c| c == 0) {
                return Err(DataError::Invalid(format!("class {k} never occurs")));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn x(&self, i: usize, f: usize) -> u8 {
        self.features[i * self.n_features + f]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Size of the largest class.
    pub fn majority_count(&self) -> usize {
        self.class_counts().into_iter().max().unwrap_or(0)
    }

    /// Rows `idx` in the given order. Class ids and names are kept even if
    /// some class no longer occurs.
    pub fn subset(&self, idx: &[usize]) -> Result<Self, DataError> {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.n_rows() {
                return Err(DataError::Invalid(format!("row index {i} out of range")));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let d = Self {
            n_features: self.n_features,
            features,
            labels,
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        };
        d.validate(false)?;
        Ok(d)
    }

    /// Canonical CSV: header `f_0..f_{|F|-1},label`, label as class name.
    pub fn write_canonical_csv<W: Write>(&self, w: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| DataError::Parse { row: 0, message: e.to_string() };
        let mut header: Vec<String> = (0..self.n_features).map(|f| format!("f_{f}")).collect();
        header.push("label".into());
        wtr.write_record(&header).map_err(io)?;
        for i in 0..self.n_rows() {
            let mut rec: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            rec.push(self.class_names[self.labels[i]].clone());
            wtr.write_record(&rec).map_err(io)?;
        }
        wtr.flush().map_err(|e| DataError::Parse { row: 0, message: e.to_string() })?;
        Ok(())
    }

    pub fn to_raw(&self) -> RawTable {
        RawTable {
            columns: self.feature_names.clone(),
            rows: (0..self.n_rows())
                .map(|i| self.row(i).iter().map(|x| x.to_string()).collect())
                .collect(),
            labels: self.labels.iter().map(|&y| self.class_names[y].clone()).collect(),
            label_column: "label".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: f64,
    pub replicate: u64,
}

impl SplitSpec {
    pub fn new(seed: u64, train_fraction: f64, replicate: u64) -> Self {
        Self { seed, train_fraction, replicate }
    }

    /// Number of training rows for a dataset of `n` rows.
    pub fn train_size(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: BinaryDataset,
    pub test: BinaryDataset,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Deterministic permutation of `0..n` for the given seed and stream.
pub fn shuffled_indices(n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

pub fn split(d: &BinaryDataset, s: &SplitSpec) -> Result<Split, DataError> {
    if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
        return Err(DataError::Invalid(format!("train fraction {} not in (0,1)", s.train_fraction)));
    }
    let n = d.n_rows();
    let n_train = s.train_size(n);
    if n_train == 0 || n_train >= n {
        return Err(DataError::DegenerateSplit { train: n_train, test: n - n_train.min(n) });
    }
    let perm = shuffled_indices(n, s.seed, s.replicate);
    let mut train_idx = perm[..n_train].to_vec();
    let mut test_idx = perm[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train: d.subset(&train_idx)?,
        test: d.subset(&test_idx)?,
        train_idx,
        test_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(csv: &str) -> RawTable {
        read_csv(csv.as_bytes(), "y").unwrap()
    }

    #[test]
    fn header_only_is_an_error() {
        let err = read_csv("a,b,y\n".as_bytes(), "y").unwrap_err();
        assert!(matches!(err, DataError::Parse { .. }));
    }

    #[test]
    fn ragged_row_reports_row_number() {
        let err = read_csv("a,y\n1,x\n1,2,3\n".as_bytes(), "y").unwrap_err();
        match err {
            DataError::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_and_missing_value() {
        assert!(matches!(
            read_csv("a,b\n1,2\n".as_bytes(), "y"),
            Err(DataError::MissingLabel(_))
        ));
        assert!(matches!(
            read_csv("a,y\n?,1\n".as_bytes(), "y"),
            Err(DataError::MissingValue { row: 1, .. })
        ));
    }

    #[test]
    fn binary_column_passes_through() {
        let b = binarize(&raw("a,y\n0,p\n1,q\n1,p\n"), &BinarizeOptions::default()).unwrap();
        assert_eq!(b.dataset.feature_names(), ["a"]);
        assert_eq!((0..3).map(|i| b.dataset.x(i, 0)).collect::<Vec<_>>(), vec![0, 1, 1]);
    }

    #[test]
    fn three_categories_one_hot() {
        let b = binarize(&raw("c,y\nr,p\ng,q\nb,p\ng,p\n"), &BinarizeOptions::default()).unwrap();
        let d = &b.dataset;
        assert_eq!(d.n_features(), 3);
        assert_eq!(d.feature_names(), ["c=b", "c=g", "c=r"]);
        for i in 0..d.n_rows() {
            assert_eq!(d.row(i).iter().map(|&x| x as u32).sum::<u32>(), 1);
        }
    }

    #[test]
    fn two_valued_categorical_is_one_indicator() {
        let b = binarize(&raw("c,y\nyes,p\nno,q\n"), &BinarizeOptions::default()).unwrap();
        assert_eq!(b.dataset.feature_names(), ["c=yes"]);
        assert_eq!(b.dataset.row(0), [1]);
    }

    #[test]
    fn constant_column_dropped_with_warning() {
        let b = binarize(&raw("k,a,y\n5,0,p\n5,1,q\n"), &BinarizeOptions::default()).unwrap();
        assert_eq!(b.dataset.n_features(), 1);
        assert_eq!(b.warnings.len(), 1);
    }

    #[test]
    fn numeric_median_threshold() {
        let b = binarize(&raw("v,y\n1,p\n2,p\n3,q\n4,q\n10,q\n"), &BinarizeOptions::default()).unwrap();
        assert_eq!(b.dataset.feature_names(), ["v>2.5"]);
        let mut opts = BinarizeOptions::default();
        opts.max_thresholds = 10;
        let b = binarize(&raw("v,y\n1,p\n2,p\n3,q\n4,q\n10,q\n"), &opts).unwrap();
        assert_eq!(b.dataset.n_features(), 4);
    }

    #[test]
    fn class_ids_follow_sorted_names() {
        let b = binarize(&raw("a,y\n0,z\n1,a\n"), &BinarizeOptions::default()).unwrap();
        assert_eq!(b.dataset.class_names(), ["a", "z"]);
        assert_eq!(b.dataset.labels(), [1, 0]);
    }

    #[test]
    fn split_sizes_use_ceiling() {
        let s = SplitSpec::new(0, 0.75, 0);
        assert_eq!(s.train_size(47), 36);
        assert_eq!(s.train_size(124), 93);
        assert_eq!(s.train_size(4), 3);
    }

    #[test]
    fn minimal_split() {
        let d = BinaryDataset::from_rows(vec![vec![0], vec![1]], vec![0, 1], 2).unwrap();
        let sp = split(&d, &SplitSpec::new(3, 0.5, 0)).unwrap();
        assert_eq!(sp.train.n_rows(), 1);
        assert_eq!(sp.test.n_rows(), 1);
        assert_eq!(sp.train.n_classes(), 2);
        assert!(matches!(
            split(&d, &SplitSpec::new(3, 0.99, 0)),
            Err(DataError::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn shuffle_is_reproducible() {
        assert_eq!(shuffled_indices(50, 7, 1), shuffled_indices(50, 7, 1));
        assert_ne!(shuffled_indices(50, 7, 1), shuffled_indices(50, 7, 2));
    }

    #[test]
    fn canonical_csv_round_trip() {
        let d = BinaryDataset::from_rows(vec![vec![0, 1], vec![1, 0]], vec![1, 0], 2).unwrap();
        let mut buf = Vec::new();
        d.write_canonical_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("f_0,f_1,label\n"));
        let back = binarize(&read_csv(buf.as_slice(), "label").unwrap(), &BinarizeOptions::default())
            .unwrap()
            .dataset;
        assert_eq!(back.labels(), d.labels());
        assert_eq!(back.row(0), d.row(0));
    }
}
