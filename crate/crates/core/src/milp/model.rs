use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

/// Tolerance for constraint and bound checks.
pub const FEAS_TOL: f64 = 1e-6;
/// Tolerance for reading binary variables.
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Var {
    pub name: String,
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    terms: Vec<(f64, VarId)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinearConstraint {
    /// Duplicate variables are merged and zero coefficients dropped; first
    /// occurrence order is kept.
    pub fn new(
        terms: impl IntoIterator<Item = (f64, VarId)>,
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Self {
        let mut order = Vec::new();
        let mut coef: BTreeMap<VarId, f64> = BTreeMap::new();
        for (a, v) in terms {
            match coef.get_mut(&v) {
                Some(c) => *c += a,
                None => {
                    coef.insert(v, a);
                    order.push(v);
                }
            }
        }
        let terms = order
            .into_iter()
            .map(|v| (coef[&v], v))
            .filter(|(a, _)| *a != 0.0)
            .collect();
        Self { terms, sense, rhs, tag: tag.into() }
    }

    pub fn le(terms: impl IntoIterator<Item = (f64, VarId)>, rhs: f64, tag: impl Into<String>) -> Self {
        Self::new(terms, Sense::Le, rhs, tag)
    }

    pub fn eq(terms: impl IntoIterator<Item = (f64, VarId)>, rhs: f64, tag: impl Into<String>) -> Self {
        Self::new(terms, Sense::Eq, rhs, tag)
    }

    pub fn ge(terms: impl IntoIterator<Item = (f64, VarId)>, rhs: f64, tag: impl Into<String>) -> Self {
        Self::new(terms, Sense::Ge, rhs, tag)
    }

    pub fn terms(&self) -> &[(f64, VarId)] {
        &self.terms
    }

    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(a, v)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the constraint, zero if satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A point that fails a model check.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    Length { expected: usize, found: usize },
    Bound { var: String, value: f64 },
    Integrality { var: String, value: f64 },
    Constraint { tag: String, violation: f64 },
}

impl std::fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Infeasibility::Length { expected, found } => {
                write!(f, "assignment has {found} values, model has {expected} variables")
            }
            Infeasibility::Bound { var, value } => write!(f, "{var} = {value} outside its bounds"),
            Infeasibility::Integrality { var, value } => write!(f, "{var} = {value} is not integral"),
            Infeasibility::Constraint { tag, violation } => {
                write!(f, "constraint {tag} violated by {violation}")
            }
        }
    }
}

/// Variables, constraints and a maximization objective.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelInstance {
    vars: Vec<Var>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(f64, VarId)>,
}

impl ModelInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lo: f64, hi: f64) -> VarId {
        assert!(lo <= hi, "empty bounds");
        if kind == VarKind::Binary {
            assert!(lo >= 0.0 && hi <= 1.0, "binary bounds must lie in [0,1]");
        }
        self.vars.push(Var { name: name.into(), kind, lo, hi });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lo: f64, hi: f64) -> VarId {
        self.add_var(name, VarKind::Continuous, lo, hi)
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) {
        debug_assert!(c.terms.iter().all(|(_, v)| v.0 < self.vars.len()));
        self.constraints.push(c);
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (f64, VarId)>) {
        let c = LinearConstraint::new(terms, Sense::Le, 0.0, "");
        assert!(c.terms.iter().all(|(_, v)| v.0 < self.vars.len()));
        self.objective = c.terms;
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn var(&self, v: VarId) -> &Var {
        &self.vars[v.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(f64, VarId)] {
        &self.objective
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(a, v)| a * x[v.0]).sum()
    }

    /// True when every objective term is an integer multiple of a binary,
    /// so every integer-feasible point has an integer objective value.
    pub fn objective_is_integral(&self) -> bool {
        self.objective.iter().all(|&(a, v)| a.fract() == 0.0 && self.vars[v.0].kind == VarKind::Binary)
    }

    /// Checks length, bounds, constraints and, unless `relaxed`, integrality.
    pub fn check(&self, x: &[f64], tol: f64, relaxed: bool) -> Result<(), Infeasibility> {
        if x.len() != self.vars.len() {
            return Err(Infeasibility::Length { expected: self.vars.len(), found: x.len() });
        }
        for (var, &val) in self.vars.iter().zip(x) {
            if !(val >= var.lo - tol && val <= var.hi + tol) {
                return Err(Infeasibility::Bound { var: var.name.clone(), value: val });
            }
            if !relaxed && var.kind == VarKind::Binary && (val - val.round()).abs() > INT_TOL {
                return Err(Infeasibility::Integrality { var: var.name.clone(), value: val });
            }
        }
        for c in &self.constraints {
            let viol = c.violation(x);
            if viol > tol {
                return Err(Infeasibility::Constraint { tag: c.tag.clone(), violation: viol });
            }
        }
        Ok(())
    }

    /// Integer-feasibility check with the default tolerance.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.check(x, FEAS_TOL, false).is_ok()
    }

    /// LP-format text: variables in id order, constraints in insertion order.
    pub fn to_lp_format(&self) -> String {
        let names: Vec<String> = self.vars.iter().map(|v| sanitize(&v.name)).collect();
        let mut out = String::new();
        out.push_str("Maximize\n obj:");
        if self.objective.is_empty() && !names.is_empty() {
            let _ = write!(out, " 0 {}", names[0]);
        }
        write_terms(&mut out, &self.objective, &names);
        out.push_str("\nSubject To\n");
        let mut seen = HashSet::new();
        for (r, c) in self.constraints.iter().enumerate() {
            let mut tag = sanitize(&c.tag);
            if tag.is_empty() || !seen.insert(tag.clone()) {
                tag = format!("{tag}#{r}");
                seen.insert(tag.clone());
            }
            let _ = write!(out, " {tag}:");
            if c.terms.is_empty() && !names.is_empty() {
                let _ = write!(out, " 0 {}", names[0]);
            }
            write_terms(&mut out, &c.terms, &names);
            let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
        }
        out.push_str("Bounds\n");
        for (v, name) in self.vars.iter().zip(&names) {
            match (v.lo.is_finite(), v.hi.is_finite()) {
                (false, false) => {
                    let _ = writeln!(out, " {name} free");
                }
                (true, false) => {
                    let _ = writeln!(out, " {name} >= {}", fmt_num(v.lo));
                }
                (false, true) => {
                    let _ = writeln!(out, " -infinity <= {name} <= {}", fmt_num(v.hi));
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {name} <= {}", fmt_num(v.lo), fmt_num(v.hi));
                }
            }
        }
        let bins: Vec<&String> = self
            .vars
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == VarKind::Binary)
            .map(|(_, n)| n)
            .collect();
        if !bins.is_empty() {
            out.push_str("Binaries\n");
            for chunk in bins.chunks(8) {
                out.push(' ');
                out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
                out.push('\n');
            }
        }
        out.push_str("End\n");
        out
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x:e}")
    }
}

fn write_terms(out: &mut String, terms: &[(f64, VarId)], names: &[String]) {
    for (k, &(a, v)) in terms.iter().enumerate() {
        if k > 0 && k % 8 == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(a.abs()), names[v.0]);
    }
}

fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.()".contains(c) { c } else { '_' })
        .collect();
    if s.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        s.insert(0, '_');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_are_merged() {
        let c = LinearConstraint::le([(1.0, VarId(2)), (2.0, VarId(0)), (3.0, VarId(2)), (0.0, VarId(1))], 4.0, "t");
        assert_eq!(c.terms(), &[(4.0, VarId(2)), (2.0, VarId(0))]);
        let c = LinearConstraint::le([(1.0, VarId(0)), (-1.0, VarId(0))], 0.0, "t");
        assert!(c.terms().is_empty());
    }

    #[test]
    fn violation_by_sense() {
        let x = [0.5, 2.0];
        let t = [(1.0, VarId(0)), (1.0, VarId(1))];
        assert_eq!(LinearConstraint::le(t, 2.0, "").violation(&x), 0.5);
        assert_eq!(LinearConstraint::ge(t, 3.0, "").violation(&x), 0.5);
        assert_eq!(LinearConstraint::eq(t, 3.0, "").violation(&x), 0.5);
        assert_eq!(LinearConstraint::le(t, 3.0, "").violation(&x), 0.0);
    }

    #[test]
    fn check_reports_integrality() {
        let mut m = ModelInstance::new();
        let x = m.add_binary("x");
        m.add_constraint(LinearConstraint::le([(1.0, x)], 0.5, "cap"));
        assert!(matches!(m.check(&[0.5], FEAS_TOL, false), Err(Infeasibility::Integrality { .. })));
        assert!(m.check(&[0.5], FEAS_TOL, true).is_ok());
        assert!(matches!(m.check(&[1.0], FEAS_TOL, false), Err(Infeasibility::Constraint { .. })));
        assert!(matches!(m.check(&[], FEAS_TOL, false), Err(Infeasibility::Length { .. })));
    }

    #[test]
    fn lp_format_layout() {
        let mut m = ModelInstance::new();
        let x = m.add_binary("x");
        let y = m.add_continuous("y[1]", 0.0, 2.5);
        m.set_objective([(1.0, x), (2.0, y)]);
        m.add_constraint(LinearConstraint::le([(1.0, x), (-1.0, y)], 0.0, "link"));
        m.add_constraint(LinearConstraint::ge([(1.0, y)], 0.5, "link"));
        let lp = m.to_lp_format();
        let expected = "Maximize\n obj: + 1 x + 2 y_1_\nSubject To\n link: + 1 x - 1 y_1_ <= 0\n link#1: + 1 y_1_ >= 5e-1\nBounds\n 0 <= x <= 1\n 0 <= y_1_ <= 2.5e0\nBinaries\n x\nEnd\n";
        assert_eq!(lp, expected);
    }
}
