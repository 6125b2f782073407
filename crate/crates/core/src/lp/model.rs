//! Solver-agnostic linear model.
//!
//! Every model is a maximization. Rows are stored sparsely and may be marked
//! lazy: a lazy row is part of the model but the branch-and-bound driver only
//! loads it into the working LP once a relaxation violates it.

use serde::{Deserialize, Serialize};

use super::LpError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    /// Higher values are branched on first. Equal priorities fall back to
    /// the most-fractional rule.
    pub branch_priority: i32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub lazy: bool,
}

impl Constraint {
    /// Row activity for a full variable vector.
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let act = self.activity(values);
        match self.relation {
            Relation::Le => (act - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - act).max(0.0),
            Relation::Eq => (act - self.rhs).abs(),
        }
    }

    pub(crate) fn row_bounds(&self) -> (f64, f64) {
        match self.relation {
            Relation::Le => (f64::NEG_INFINITY, self.rhs),
            Relation::Ge => (self.rhs, f64::INFINITY),
            Relation::Eq => (self.rhs, self.rhs),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse objective coefficients; the sense is always maximize.
    pub objective: Vec<(VarId, f64)>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>) -> Self {
        LinearModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> VarId {
        let id = VarId(self.variables.len());
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            branch_priority: 0,
        });
        id
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn set_branch_priority(&mut self, var: VarId, priority: i32) {
        self.variables[var.0].branch_priority = priority;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        self.push_row(name.into(), coeffs, relation, rhs, false)
    }

    pub fn add_lazy_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        self.push_row(name.into(), coeffs, relation, rhs, true)
    }

    fn push_row(
        &mut self,
        name: String,
        coeffs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
        lazy: bool,
    ) -> RowId {
        let id = RowId(self.constraints.len());
        self.constraints.push(Constraint {
            name,
            coeffs: merge_terms(coeffs),
            relation,
            rhs,
            lazy,
        });
        id
    }

    pub fn set_objective(&mut self, coeffs: Vec<(VarId, f64)>) {
        self.objective = merge_terms(coeffs);
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.kind == VarKind::Binary)
    }

    /// Copy of the model with every binary turned continuous on [lo, hi].
    pub fn relaxed(&self) -> LinearModel {
        let mut m = self.clone();
        for v in &mut m.variables {
            v.kind = VarKind::Continuous;
        }
        m
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for (j, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(LpError::InvalidModel(format!(
                    "variable {} ({}) has bounds [{}, {}]",
                    j, v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(LpError::InvalidModel(format!(
                    "variable {} has an unattainable bound",
                    v.name
                )));
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(LpError::InvalidModel(format!(
                    "binary {} has bounds outside [0, 1]",
                    v.name
                )));
            }
        }
        let n = self.variables.len();
        let check_terms = |terms: &[(VarId, f64)], what: &str| -> Result<(), LpError> {
            for &(v, a) in terms {
                if v.0 >= n {
                    return Err(LpError::InvalidModel(format!(
                        "{what} references unknown variable {}",
                        v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidModel(format!(
                        "{what} has non-finite coefficient"
                    )));
                }
            }
            Ok(())
        };
        check_terms(&self.objective, "objective")?;
        for c in &self.constraints {
            check_terms(&c.coeffs, &c.name)?;
            if !c.rhs.is_finite() {
                return Err(LpError::InvalidModel(format!(
                    "row {} has non-finite rhs",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Largest row violation and largest bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(0.0, f64::max);
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    /// Stable 64-bit fingerprint of the model structure, used in error reports.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        };
        mix(self.variables.len() as u64);
        for v in &self.variables {
            mix(v.lower.to_bits());
            mix(v.upper.to_bits());
            mix(v.kind as u64);
        }
        for c in &self.constraints {
            mix(c.relation as u64);
            mix(c.rhs.to_bits());
            for &(v, a) in &c.coeffs {
                mix(v.0 as u64);
                mix(a.to_bits());
            }
        }
        for &(v, a) in &self.objective {
            mix(v.0 as u64);
            mix(a.to_bits());
        }
        h
    }
}

/// Sum duplicate variable entries and drop exact zeros.
fn merge_terms(mut terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    terms.sort_by_key(|t| t.0);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, a) in terms {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += a,
            _ => out.push((v, a)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Branch and bound stopped on a node or time limit with an incumbent.
    GapLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    /// Shadow price of every row (change in the optimum per unit increase of
    /// its right-hand side). Filled by LP solves only.
    #[serde(default)]
    pub duals: Vec<f64>,
    pub objective: f64,
    /// Best proven upper bound on the optimum (maximization).
    pub best_bound: f64,
    /// (bound - incumbent) / max(1, |incumbent|).
    pub gap: f64,
    pub nodes: usize,
    pub iterations: usize,
}

impl Solution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn is_usable(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::GapLimit)
    }
}

pub fn relative_gap(bound: f64, incumbent: f64) -> f64 {
    ((bound - incumbent) / incumbent.abs().max(1.0)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, 1.0);
        let y = m.add_continuous("y", 0.0, 1.0);
        m.add_constraint(
            "c",
            vec![(y, 1.0), (x, 2.0), (y, -1.0), (x, 0.5)],
            Relation::Le,
            1.0,
        );
        assert_eq!(m.constraints[0].coeffs, vec![(x, 2.5)]);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let mut m = LinearModel::new("t");
        m.add_continuous("x", 1.0, 0.0);
        assert!(matches!(m.validate(), Err(LpError::InvalidModel(_))));
    }

    #[test]
    fn binary_bounds_must_fit_unit_interval() {
        let mut m = LinearModel::new("t");
        m.add_var("b", 0.0, 2.0, VarKind::Binary);
        assert!(m.validate().is_err());
    }

    #[test]
    fn violation_by_relation() {
        let c = Constraint {
            name: "c".into(),
            coeffs: vec![(VarId(0), 1.0)],
            relation: Relation::Ge,
            rhs: 2.0,
            lazy: false,
        };
        assert_eq!(c.violation(&[1.5]), 0.5);
        assert_eq!(c.violation(&[2.5]), 0.0);
    }
}
