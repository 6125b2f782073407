//! Linear and binary-integer programming.
//!
//! [`solve_lp`] runs the bounded revised simplex on a [`LinearModel`];
//! [`solve_milp`] wraps it in a best-bound branch and bound over the binary
//! variables. [`export_mps`] writes a model in fixed MPS format for external
//! solvers.

mod bnb;
mod lu;
mod model;
mod mps;
mod simplex;

pub use bnb::{solve_milp, solve_milp_with, MilpParams};
pub use model::{
    relative_gap, Constraint, LinearModel, Relation, RowId, Solution, SolveStatus, VarId, VarKind,
    Variable,
};
pub use mps::{export_mps, parse_mps};
pub use simplex::SimplexParams;

use simplex::{LpOutcome, SimplexEngine};

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("numerical failure in simplex (model {fingerprint:016x}): {detail}")]
    NumericalFailure { fingerprint: u64, detail: String },
    #[error("model is infeasible")]
    Infeasible,
    #[error("node limit reached without an incumbent")]
    NodeLimitNoIncumbent,
    #[error("malformed MPS input at line {line}: {message}")]
    MpsParse { line: usize, message: String },
}

/// Rows violated by more than this are added back into the working LP.
pub(crate) const LAZY_TOL: f64 = 1e-7;
const MAX_LAZY_ROUNDS: usize = 200;

/// Solve the LP relaxation of `model` (binary marks are ignored).
pub fn solve_lp(model: &LinearModel) -> Result<Solution, LpError> {
    solve_lp_with(model, SimplexParams::default())
}

pub fn solve_lp_with(model: &LinearModel, params: SimplexParams) -> Result<Solution, LpError> {
    model.validate()?;
    let mut loaded: Vec<bool> = model.constraints.iter().map(|c| !c.lazy).collect();
    let mut eng = SimplexEngine::new(model, params, |r| loaded[r]);
    let mut order: Vec<usize> = (0..model.num_constraints())
        .filter(|&r| loaded[r])
        .collect();
    let mut rounds = 0;
    loop {
        let outcome = eng.solve();
        match outcome {
            LpOutcome::Optimal => {}
            LpOutcome::Infeasible => {
                return Ok(terminal(model, SolveStatus::Infeasible, eng.iterations))
            }
            LpOutcome::Unbounded => {
                return Ok(terminal(model, SolveStatus::Unbounded, eng.iterations))
            }
            LpOutcome::IterationLimit => {
                return Err(LpError::NumericalFailure {
                    fingerprint: model.fingerprint(),
                    detail: format!("iteration limit after {} pivots", eng.iterations),
                })
            }
        }
        let added = add_violated_lazy_rows(model, &mut eng, &mut loaded, usize::MAX);
        if added.is_empty() {
            break;
        }
        order.extend(added);
        rounds += 1;
        if rounds > MAX_LAZY_ROUNDS {
            return Err(LpError::NumericalFailure {
                fingerprint: model.fingerprint(),
                detail: "lazy row separation did not converge".into(),
            });
        }
    }
    check_duality(model, &mut eng)?;
    let values = eng.values().to_vec();
    let objective = model.objective_value(&values);
    let mut duals = vec![0.0; model.num_constraints()];
    for (y, &r) in eng.row_duals().into_iter().zip(&order) {
        duals[r] = y;
    }
    Ok(Solution {
        status: SolveStatus::Optimal,
        values,
        duals,
        objective,
        best_bound: objective,
        gap: 0.0,
        nodes: 0,
        iterations: eng.iterations,
    })
}

fn terminal(model: &LinearModel, status: SolveStatus, iterations: usize) -> Solution {
    let bound = match status {
        SolveStatus::Unbounded => f64::INFINITY,
        _ => f64::NEG_INFINITY,
    };
    Solution {
        status,
        values: vec![0.0; model.num_vars()],
        duals: Vec::new(),
        objective: f64::NAN,
        best_bound: bound,
        gap: f64::INFINITY,
        nodes: 0,
        iterations,
    }
}

/// Primal objective and the dual objective rebuilt from row duals must agree.
fn check_duality(model: &LinearModel, eng: &mut SimplexEngine) -> Result<(), LpError> {
    let primal = eng.objective();
    let (dual, _) = eng.dual_objective();
    let scale = primal.abs().max(1.0);
    if (primal - dual).abs() > 1e-6 * scale {
        return Err(LpError::NumericalFailure {
            fingerprint: model.fingerprint(),
            detail: format!("duality mismatch: primal {primal} dual {dual}"),
        });
    }
    Ok(())
}

/// Load lazy rows violated by the engine's current point. Returns the model
/// indices of the rows added, in the order they were appended.
pub(crate) fn add_violated_lazy_rows(
    model: &LinearModel,
    eng: &mut SimplexEngine,
    loaded: &mut [bool],
    max_rows: usize,
) -> Vec<usize> {
    let values = eng.values();
    let mut violated: Vec<(f64, usize)> = model
        .constraints
        .iter()
        .enumerate()
        .filter(|(r, _)| !loaded[*r])
        .filter_map(|(r, c)| {
            let v = c.violation(values);
            (v > LAZY_TOL).then_some((v, r))
        })
        .collect();
    if violated.is_empty() {
        return Vec::new();
    }
    violated.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    violated.truncate(max_rows);
    let rows: Vec<(Vec<(usize, f64)>, f64, f64)> = violated
        .iter()
        .map(|&(_, r)| {
            let c = &model.constraints[r];
            let (lo, hi) = c.row_bounds();
            (c.coeffs.iter().map(|&(v, a)| (v.0, a)).collect(), lo, hi)
        })
        .collect();
    for &(_, r) in &violated {
        loaded[r] = true;
    }
    eng.add_rows(&rows);
    violated.iter().map(|v| v.1).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bounded_variable() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        m.add_constraint("c", vec![(x, 1.0)], Relation::Le, 1.0);
        m.set_objective(vec![(x, 1.0)]);
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value(x) - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn any_optimal_vertex_of_a_tie() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Relation::Le, 1.0);
        m.set_objective(vec![(x, 1.0), (y, 1.0)]);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!(m.max_violation(&s.values) < 1e-9);
    }

    #[test]
    fn lazy_rows_are_enforced() {
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, 5.0);
        let y = m.add_continuous("y", 0.0, 5.0);
        m.add_lazy_constraint("lz", vec![(x, 1.0), (y, 1.0)], Relation::Le, 3.0);
        m.set_objective(vec![(x, 2.0), (y, 1.0)]);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 6.0).abs() < 1e-9);
    }

    #[test]
    fn resolving_is_deterministic() {
        let mut m = LinearModel::new("t");
        let vars: Vec<VarId> = (0..6)
            .map(|i| m.add_continuous(format!("v{i}"), 0.0, 3.0))
            .collect();
        for i in 0..5 {
            m.add_constraint(
                format!("c{i}"),
                vec![(vars[i], 1.0), (vars[i + 1], 2.0)],
                Relation::Le,
                4.0 + i as f64,
            );
        }
        m.set_objective(
            vars.iter()
                .enumerate()
                .map(|(i, &v)| (v, 1.0 + 0.1 * i as f64))
                .collect(),
        );
        let a = solve_lp(&m).unwrap();
        let b = solve_lp(&m).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-9);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn duals_are_shadow_prices() {
        // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3 (lazy).
        let mut m = LinearModel::new("t");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Relation::Le, 4.0);
        m.add_constraint("b", vec![(x, 1.0), (y, 3.0)], Relation::Le, 6.0);
        m.add_lazy_constraint("c", vec![(x, 1.0)], Relation::Le, 3.0);
        m.set_objective(vec![(x, 3.0), (y, 2.0)]);
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 11.0).abs() < 1e-9);
        assert!((s.duals[0] - 2.0).abs() < 1e-9);
        assert!(s.duals[1].abs() < 1e-9);
        assert!((s.duals[2] - 1.0).abs() < 1e-9);
    }
}
