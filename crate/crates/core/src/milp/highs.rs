use std::ops::Bound;

use highs::{HighsModelStatus, HighsSolutionStatus, RowProblem, Sense as HSense};

use super::{Backend, ModelInstance, RawOptions, RawSolution, RawStatus, Sense, SolveError, VarKind};

/// HiGHS through its C API.
#[derive(Debug, Clone, Copy, Default)]
pub struct HighsBackend;

fn opt_err(name: &str) -> SolveError {
    SolveError::Backend(format!("HiGHS rejected option {name}"))
}

impl Backend for HighsBackend {
    fn name(&self) -> String {
        let (major, minor, patch) =
            unsafe { (highs_sys::Highs_versionMajor(), highs_sys::Highs_versionMinor(), highs_sys::Highs_versionPatch()) };
        format!("highs-{major}.{minor}.{patch}")
    }

    fn solve_raw(
        &self,
        model: &ModelInstance,
        opts: &RawOptions,
        warm_start: Option<&[f64]>,
    ) -> Result<RawSolution, SolveError> {
        let mut cost = vec![0.0; model.n_vars()];
        for &(a, v) in model.objective() {
            cost[v.0] += a;
        }
        let mut pb = RowProblem::default();
        let cols: Vec<_> = model
            .vars()
            .iter()
            .zip(&cost)
            .map(|(var, &c)| {
                let integer = !opts.relax && var.kind == VarKind::Binary;
                pb.add_column_with_integrality(c, var.lo..=var.hi, integer)
            })
            .collect();
        for con in model.constraints() {
            let bounds: (Bound<f64>, Bound<f64>) = match con.sense {
                Sense::Le => (Bound::Unbounded, Bound::Included(con.rhs)),
                Sense::Ge => (Bound::Included(con.rhs), Bound::Unbounded),
                Sense::Eq => (Bound::Included(con.rhs), Bound::Included(con.rhs)),
            };
            pb.add_row(bounds, con.terms().iter().map(|&(a, v)| (cols[v.0], a)));
        }
        let mut hm = pb
            .try_optimise(HSense::Maximise)
            .map_err(|s| SolveError::Backend(format!("model rejected: {s:?}")))?;
        if std::env::var_os("TREEMILO_HIGHS_LOG").is_some() {
            hm.try_set_option("output_flag", true).map_err(|_| opt_err("output_flag"))?;
            hm.try_set_option("log_to_console", true).map_err(|_| opt_err("log_to_console"))?;
        }
        if let Ok(extra) = std::env::var("TREEMILO_HIGHS_OPTIONS") {
            for kv in extra.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(|| opt_err(kv))?;
                let r = if let Ok(i) = v.parse::<i32>() {
                    hm.try_set_option(k, i)
                } else if let Ok(f) = v.parse::<f64>() {
                    hm.try_set_option(k, f)
                } else if let Ok(b) = v.parse::<bool>() {
                    hm.try_set_option(k, b)
                } else {
                    hm.try_set_option(k, v)
                };
                r.map_err(|_| opt_err(k))?;
            }
        }
        hm.try_set_option("threads", opts.threads.max(1) as i32).map_err(|_| opt_err("threads"))?;
        hm.try_set_option("random_seed", (opts.seed % i32::MAX as u64) as i32)
            .map_err(|_| opt_err("random_seed"))?;
        hm.try_set_option("mip_rel_gap", opts.gap_tolerance).map_err(|_| opt_err("mip_rel_gap"))?;
        if let Some(g) = opts.abs_gap {
            hm.try_set_option("mip_abs_gap", g).map_err(|_| opt_err("mip_abs_gap"))?;
        }
        if let Some(t) = opts.time_limit_s {
            hm.try_set_option("time_limit", t.max(0.0)).map_err(|_| opt_err("time_limit"))?;
        }
        if let Some(ws) = warm_start {
            hm.try_set_solution(Some(ws), None, None, None)
                .map_err(|s| SolveError::Backend(format!("warm start rejected: {s:?}")))?;
        }
        let solved = hm
            .try_solve()
            .map_err(|s| SolveError::Backend(format!("solve failed: {s:?}")))?;

        let status = solved.status();
        let has_solution = solved.primal_solution_status() == HighsSolutionStatus::Feasible;
        let mip = !opts.relax && model.vars().iter().any(|v| v.kind == VarKind::Binary);
        let nodes = if mip {
            let mut n: i64 = 0;
            let name = c"mip_node_count";
            let st = unsafe { highs_sys::Highs_getInt64InfoValue(solved.as_ptr(), name.as_ptr(), &mut n) };
            if st == 0 { n.max(0) as u64 } else { 0 }
        } else {
            0
        };
        let raw_status = match status {
            HighsModelStatus::Optimal => RawStatus::Optimal,
            HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => RawStatus::Infeasible,
            HighsModelStatus::ModelEmpty => RawStatus::Optimal,
            HighsModelStatus::ReachedTimeLimit
            | HighsModelStatus::ReachedIterationLimit
            | HighsModelStatus::ReachedSolutionLimit => RawStatus::Limit,
            other => return Err(SolveError::Backend(format!("HiGHS status {other:?}"))),
        };
        if raw_status == RawStatus::Infeasible {
            return Ok(RawSolution { status: raw_status, objective: f64::NAN, bound: f64::NAN, values: None, nodes });
        }
        let values = if has_solution || status == HighsModelStatus::ModelEmpty {
            Some(solved.get_solution().columns().to_vec())
        } else {
            None
        };
        let objective = match &values {
            Some(v) => model.objective_value(v),
            None => f64::NAN,
        };
        let bound = if mip {
            solved.double_info_value(c"mip_dual_bound").unwrap_or(f64::INFINITY)
        } else if raw_status == RawStatus::Optimal {
            objective
        } else {
            f64::INFINITY
        };
        Ok(RawSolution { status: raw_status, objective, bound, values, nodes })
    }
}
