//! Solver-agnostic model store, the backend contract and the solve loops.
//!
//! [`solve`] runs a model once. [`solve_with_separation`] runs the portable
//! solve, separate, resolve loop: the model is solved, the separator is
//! queried at the returned point, violated constraints are appended and the
//! model is solved again until an integer optimum admits no cut.

mod highs;
mod model;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use self::highs::HighsBackend;
pub use self::model::{
    Infeasibility, LinearConstraint, ModelInstance, Sense, Var, VarId, VarKind, FEAS_TOL, INT_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("separation contract violated: constraint {tag} is not violated at the queried point")]
    SeparationContract { tag: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleLimit,
    Infeasible,
    Error,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleLimit => "feasible-limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Error => "error",
        }
    }

    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleLimit)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    pub time_limit_s: Option<f64>,
    pub gap_tolerance: f64,
    pub warm_start: Option<Vec<f64>>,
    pub relax: bool,
    pub threads: usize,
    pub seed: u64,
    /// Upper limit on separation rounds at the root relaxation.
    pub max_root_rounds: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            time_limit_s: None,
            gap_tolerance: 1e-4,
            warm_start: None,
            relax: false,
            threads: 1,
            seed: 0,
            max_root_rounds: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub wall_seconds: f64,
    pub cuts_added: usize,
    pub nodes: u64,
    /// Number of backend solves performed.
    pub solves: usize,
    /// `None` when no warm start was given.
    pub warm_start_accepted: Option<bool>,
    pub message: Option<String>,
}

impl SolveReport {
    fn empty(status: SolveStatus) -> Self {
        Self {
            status,
            objective: f64::NAN,
            best_bound: f64::NAN,
            gap: f64::NAN,
            wall_seconds: 0.0,
            cuts_added: 0,
            nodes: 0,
            solves: 0,
            warm_start_accepted: None,
            message: None,
        }
    }
}

/// Relative gap for a maximization problem.
pub fn relative_gap(objective: f64, best_bound: f64) -> f64 {
    ((best_bound - objective) / objective.abs().max(1e-10)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub report: SolveReport,
    pub values: Option<Vec<f64>>,
}

/// What a backend returns for one solve.
#[derive(Debug, Clone, PartialEq)]
pub enum RawStatus {
    Optimal,
    /// A limit was hit; `values` may hold an incumbent.
    Limit,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct RawSolution {
    pub status: RawStatus,
    pub objective: f64,
    pub bound: f64,
    pub values: Option<Vec<f64>>,
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawOptions {
    pub relax: bool,
    pub time_limit_s: Option<f64>,
    pub gap_tolerance: f64,
    /// Absolute gap at which the backend may stop. Set when the objective
    /// only takes integer values, so a bound below incumbent + 1 is a proof.
    pub abs_gap: Option<f64>,
    pub threads: usize,
    pub seed: u64,
}

/// The narrow contract a MILP solver has to fulfil.
pub trait Backend {
    fn name(&self) -> String;

    /// Solve `model` (maximization). `warm_start`, when given, is a full
    /// assignment already known to be feasible.
    fn solve_raw(
        &self,
        model: &ModelInstance,
        opts: &RawOptions,
        warm_start: Option<&[f64]>,
    ) -> Result<RawSolution, SolveError>;
}

const INTEGRAL_ABS_GAP: f64 = 1.0 - 1e-3;

fn raw_options(model: &ModelInstance, cfg: &SolveConfig, deadline: Option<Instant>, relax: bool) -> RawOptions {
    RawOptions {
        relax,
        time_limit_s: deadline.map(|d| d.saturating_duration_since(Instant::now()).as_secs_f64()),
        gap_tolerance: cfg.gap_tolerance,
        abs_gap: (!relax && model.objective_is_integral()).then_some(INTEGRAL_ABS_GAP),
        threads: cfg.threads,
        seed: cfg.seed,
    }
}

fn deadline_of(cfg: &SolveConfig, start: Instant) -> Option<Instant> {
    cfg.time_limit_s.map(|t| start + Duration::from_secs_f64(t.max(0.0)))
}

/// Solve once. Failures are reported through the status, never by panicking.
pub fn solve(backend: &dyn Backend, model: &ModelInstance, cfg: &SolveConfig) -> SolveOutcome {
    let start = Instant::now();
    let mut warm_ok = None;
    let mut warm = None;
    if let Some(ws) = &cfg.warm_start {
        let ok = !cfg.relax && model.is_feasible(ws);
        warm_ok = Some(ok);
        if ok {
            warm = Some(ws.as_slice());
        }
    }
    let opts = raw_options(model, cfg, deadline_of(cfg, start), cfg.relax);
    let mut outcome = match backend.solve_raw(model, &opts, warm) {
        Err(e) => {
            let mut r = SolveReport::empty(SolveStatus::Error);
            r.message = Some(e.to_string());
            SolveOutcome { report: r, values: None }
        }
        Ok(raw) => from_raw(raw, cfg.gap_tolerance, !cfg.relax && model.objective_is_integral()),
    };
    outcome.report.solves = 1;
    outcome.report.warm_start_accepted = warm_ok;
    outcome.report.wall_seconds = start.elapsed().as_secs_f64();
    outcome
}

/// Round a dual bound down to the next integer when the objective is
/// integral; the slack absorbs solver noise.
fn tighten(bound: f64, integral: bool) -> f64 {
    if integral && bound.is_finite() {
        (bound + 1e-6).floor()
    } else {
        bound
    }
}

fn from_raw(raw: RawSolution, gap_tolerance: f64, integral: bool) -> SolveOutcome {
    let mut r = SolveReport::empty(SolveStatus::Error);
    r.nodes = raw.nodes;
    match (raw.status, raw.values) {
        (RawStatus::Infeasible, _) => {
            r.status = SolveStatus::Infeasible;
            SolveOutcome { report: r, values: None }
        }
        (RawStatus::Limit, None) => {
            r.message = Some("limit reached before a feasible solution was found".into());
            SolveOutcome { report: r, values: None }
        }
        (RawStatus::Optimal, None) => {
            r.message = Some("backend reported optimality without a solution".into());
            SolveOutcome { report: r, values: None }
        }
        (status, Some(values)) => {
            r.objective = raw.objective;
            r.best_bound = tighten(raw.bound, integral).max(raw.objective);
            r.gap = relative_gap(r.objective, r.best_bound);
            r.status = if status == RawStatus::Optimal || r.gap <= gap_tolerance {
                SolveStatus::Optimal
            } else {
                SolveStatus::FeasibleLimit
            };
            SolveOutcome { report: r, values: Some(values) }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Fractional,
    Integral,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Fractional => "frac",
            Phase::Integral => "integral",
        }
    }
}

/// Callback queried by [`solve_with_separation`].
pub trait Separator {
    /// Whether to separate the root relaxation before branching.
    fn wants_fractional(&self) -> bool {
        false
    }

    /// Constraints violated at `x`. Every returned constraint must actually
    /// be violated by more than the feasibility tolerance.
    fn separate(&mut self, x: &[f64], phase: Phase) -> Vec<LinearConstraint>;

    /// Turn an integer candidate that violated some cuts into an assignment
    /// satisfying every constraint, if the separator knows how.
    fn repair(&mut self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Separator that never returns anything.
pub struct NoSeparation;

impl Separator for NoSeparation {
    fn separate(&mut self, _x: &[f64], _phase: Phase) -> Vec<LinearConstraint> {
        Vec::new()
    }
}

fn add_cuts(
    model: &mut ModelInstance,
    x: &[f64],
    cuts: Vec<LinearConstraint>,
) -> Result<usize, SolveError> {
    let n = cuts.len();
    for c in cuts {
        if c.violation(x) <= FEAS_TOL {
            return Err(SolveError::SeparationContract { tag: c.tag });
        }
        model.add_constraint(c);
    }
    Ok(n)
}

/// The solve, separate, resolve loop. Cuts are appended to `model`.
///
/// Every integer candidate is passed to the separator; candidates that
/// violate nothing become incumbents, the others may be repaired into one.
/// Each backend solve bounds the full model from above, so the loop stops
/// as soon as the incumbent meets the smallest such bound.
pub fn solve_with_separation(
    backend: &dyn Backend,
    model: &mut ModelInstance,
    cfg: &SolveConfig,
    sep: &mut dyn Separator,
) -> Result<SolveOutcome, SolveError> {
    let start = Instant::now();
    let deadline = deadline_of(cfg, start);
    let mut report = SolveReport::empty(SolveStatus::Error);
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut best_bound = f64::INFINITY;

    if let Some(ws) = &cfg.warm_start {
        let ok = !cfg.relax && model.is_feasible(ws) && sep.separate(ws, Phase::Integral).is_empty();
        report.warm_start_accepted = Some(ok);
        if ok {
            incumbent = Some((model.objective_value(ws), ws.clone()));
        }
    }

    let finish = |mut report: SolveReport, start: Instant| {
        report.wall_seconds = start.elapsed().as_secs_f64();
        report
    };

    if cfg.relax || sep.wants_fractional() {
        let mut rounds = 0;
        loop {
            let opts = raw_options(model, cfg, deadline, true);
            let raw = match backend.solve_raw(model, &opts, None) {
                Ok(r) => r,
                Err(e) => {
                    report.message = Some(e.to_string());
                    return Ok(SolveOutcome { report: finish(report, start), values: None });
                }
            };
            report.solves += 1;
            let values = match (&raw.status, raw.values) {
                (RawStatus::Optimal, Some(v)) => v,
                (RawStatus::Infeasible, _) => {
                    report.status = SolveStatus::Infeasible;
                    return Ok(SolveOutcome { report: finish(report, start), values: None });
                }
                _ => {
                    report.message = Some("root relaxation did not finish".into());
                    return Ok(SolveOutcome { report: finish(report, start), values: None });
                }
            };
            let cuts = if rounds < cfg.max_root_rounds {
                sep.separate(&values, Phase::Fractional)
            } else {
                Vec::new()
            };
            rounds += 1;
            if cuts.is_empty() {
                if cfg.relax {
                    report.status = SolveStatus::Optimal;
                    report.objective = raw.objective;
                    report.best_bound = raw.objective;
                    report.gap = 0.0;
                    return Ok(SolveOutcome { report: finish(report, start), values: Some(values) });
                }
                best_bound = best_bound.min(raw.objective);
                break;
            }
            report.cuts_added += add_cuts(model, &values, cuts)?;
        }
    }

    loop {
        let opts = raw_options(model, cfg, deadline, false);
        let integral = model.objective_is_integral();
        let warm = incumbent.as_ref().map(|(_, v)| v.as_slice());
        let raw = match backend.solve_raw(model, &opts, warm) {
            Ok(r) => r,
            Err(e) => {
                report.message = Some(e.to_string());
                return Ok(SolveOutcome { report: finish(report, start), values: None });
            }
        };
        report.solves += 1;
        report.nodes += raw.nodes;
        let hit_limit = raw.status == RawStatus::Limit;
        match (&raw.status, raw.values) {
            (RawStatus::Infeasible, _) => {
                report.status = SolveStatus::Infeasible;
                if incumbent.is_some() {
                    report.status = SolveStatus::Error;
                    report.message = Some("model became infeasible after adding cuts".into());
                }
                return Ok(SolveOutcome { report: finish(report, start), values: None });
            }
            (_, Some(x)) => {
                best_bound = best_bound.min(tighten(raw.bound, integral).max(raw.objective));
                let cuts = sep.separate(&x, Phase::Integral);
                if cuts.is_empty() {
                    let obj = model.objective_value(&x);
                    if incumbent.as_ref().map_or(true, |(o, _)| obj > *o) {
                        incumbent = Some((obj, x));
                    }
                } else {
                    let repaired = sep.repair(&x);
                    report.cuts_added += add_cuts(model, &x, cuts)?;
                    if let Some(r) = repaired {
                        if model.is_feasible(&r) && sep.separate(&r, Phase::Integral).is_empty() {
                            let obj = model.objective_value(&r);
                            if incumbent.as_ref().map_or(true, |(o, _)| obj > *o) {
                                incumbent = Some((obj, r));
                            }
                        }
                    }
                }
            }
            (_, None) => {
                if incumbent.is_none() {
                    report.message = Some("limit reached before a feasible solution was found".into());
                    return Ok(SolveOutcome { report: finish(report, start), values: None });
                }
                best_bound = best_bound.min(tighten(raw.bound, integral));
            }
        }
        if let Some((obj, _)) = &incumbent {
            let gap = relative_gap(*obj, best_bound.max(*obj));
            let out_of_time = deadline.is_some_and(|d| Instant::now() >= d);
            if gap <= cfg.gap_tolerance || hit_limit || out_of_time {
                let (obj, values) = incumbent.expect("checked above");
                report.objective = obj;
                report.best_bound = best_bound.max(obj);
                report.gap = gap;
                report.status = if gap <= cfg.gap_tolerance {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::FeasibleLimit
                };
                return Ok(SolveOutcome { report: finish(report, start), values: Some(values) });
            }
        } else if hit_limit || deadline.is_some_and(|d| Instant::now() >= d) {
            report.message = Some("limit reached before a feasible solution was found".into());
            return Ok(SolveOutcome { report: finish(report, start), values: None });
        }
    }
}
