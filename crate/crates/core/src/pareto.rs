//! Branching-budget sweeps and their Pareto frontier.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::dataset::BinaryDataset;
use crate::formulations::{BuildOptions, Formulation, FormulationKind};
use crate::milp::{Backend, SolveConfig, SolveStatus};
use crate::topology::TreeTopology;
use crate::training::train_formulation;
use crate::tree::TrainedTree;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierRow {
    pub dataset: String,
    pub formulation: String,
    pub h: u32,
    pub k: usize,
    pub train_obj: f64,
    pub test_acc: f64,
    pub status: String,
    pub seconds: f64,
    pub dominant: u8,
    /// `None` for the first step, which has nothing to start from.
    #[serde(skip)]
    pub warm_start_accepted: Option<bool>,
    #[serde(skip)]
    pub tree: Option<TrainedTree>,
}

#[derive(Debug, Clone)]
pub struct SweepSpec<'a> {
    pub dataset: &'a str,
    pub kind: FormulationKind,
    pub k_max: usize,
    pub build: BuildOptions,
    pub solve: SolveConfig,
}

/// Solve budgets `0..=k_max` in order, each warm-started from the previous
/// tree. A failed step is recorded and the sweep moves on.
pub fn sweep(
    backend: &dyn Backend,
    topo: TreeTopology,
    train: &BinaryDataset,
    test: &BinaryDataset,
    spec: &SweepSpec<'_>,
) -> Vec<FrontierRow> {
    let mut rows = Vec::with_capacity(spec.k_max + 1);
    let mut prev: Option<TrainedTree> = None;
    for k in 0..=spec.k_max.min(topo.n_branch()) {
        let mut build = spec.build;
        build.extra.branching_budget = Some(k);
        let mut row = FrontierRow {
            dataset: spec.dataset.to_string(),
            formulation: spec.kind.to_string(),
            h: topo.height(),
            k,
            train_obj: f64::NAN,
            test_acc: f64::NAN,
            status: SolveStatus::Error.as_str().to_string(),
            seconds: 0.0,
            dominant: 0,
            warm_start_accepted: None,
            tree: None,
        };
        let mut form = match Formulation::build(spec.kind, topo, train, &build) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("k={k}: {e}");
                rows.push(row);
                continue;
            }
        };
        let mut cfg = spec.solve.clone();
        cfg.warm_start = prev.as_ref().map(|t| form.encode_tree(t));
        match train_formulation(backend, &mut form, &cfg) {
            Ok(out) => {
                row.status = out.report.status.as_str().to_string();
                row.seconds = out.report.wall_seconds;
                row.warm_start_accepted = out.report.warm_start_accepted;
                if let Some(tree) = out.tree {
                    row.train_obj = tree.correct_count(train).map_or(f64::NAN, |c| c as f64);
                    row.test_acc = tree.accuracy(test).unwrap_or(f64::NAN);
                    prev = Some(tree.clone());
                    row.tree = Some(tree);
                }
            }
            Err(e) => eprintln!("k={k}: {e}"),
        }
        rows.push(row);
    }
    mark_dominant(&mut rows);
    rows
}

/// Nondominated flags for (size, accuracy) points, smaller size and higher
/// accuracy being better. NaN accuracies are never nondominated.
pub fn nondominated(points: &[(usize, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&(k, a)| {
            !a.is_nan()
                && !points.iter().any(|&(k2, a2)| k2 <= k && a2 >= a && (k2 < k || a2 > a))
        })
        .collect()
}

pub fn mark_dominant(rows: &mut [FrontierRow]) {
    let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.k, r.test_acc)).collect();
    for (r, nd) in rows.iter_mut().zip(nondominated(&pts)) {
        r.dominant = nd as u8;
    }
}

pub fn write_frontier_csv<W: Write>(rows: &[FrontierRow], w: W) -> Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Scatter of test accuracy against k; nondominated points are filled.
pub fn frontier_svg(rows: &[FrontierRow]) -> String {
    let (w, h, m) = (480.0, 320.0, 40.0);
    let k_max = rows.iter().map(|r| r.k).max().unwrap_or(1).max(1) as f64;
    let accs = rows.iter().map(|r| r.test_acc).filter(|a| !a.is_nan());
    let lo = accs.clone().fold(1.0f64, f64::min).min(0.5);
    let x = |k: usize| m + (w - 2.0 * m) * k as f64 / k_max;
    let y = |a: f64| h - m - (h - 2.0 * m) * (a - lo) / (1.0 - lo).max(1e-9);
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
    let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">branching vertices k</text>"#, w / 2.0, h - 8.0);
    let _ = writeln!(s, r#"<text x="12" y="{}" transform="rotate(-90 12 {})" text-anchor="middle">test accuracy</text>"#, h / 2.0, h / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{lo:.2}</text>"#, m - 4.0, h - m);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1.00</text>"#, m - 4.0, m + 4.0);
    for r in rows.iter().filter(|r| !r.test_acc.is_nan()) {
        let fill = if r.dominant == 1 { "black" } else { "white" };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="4" fill="{fill}" stroke="black"><title>k={} acc={:.4}</title></circle>"#,
            x(r.k),
            y(r.test_acc),
            r.k,
            r.test_acc
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_rule() {
        let nd = nondominated(&[(0, 0.5), (1, 0.7), (2, 0.7), (3, 0.9), (4, 0.8), (5, f64::NAN)]);
        assert_eq!(nd, vec![true, true, false, true, false, false]);
    }

    #[test]
    fn svg_has_one_marker_per_row() {
        let row = |k, a, d| FrontierRow {
            dataset: "x".into(),
            formulation: "CUT2".into(),
            h: 2,
            k,
            train_obj: 0.0,
            test_acc: a,
            status: "optimal".into(),
            seconds: 0.0,
            dominant: d,
            warm_start_accepted: None,
            tree: None,
        };
        let svg = frontier_svg(&[row(0, 0.5, 1), row(1, 0.6, 1), row(2, 0.6, 0)]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches(r#"fill="black""#).count(), 2);
    }
}
