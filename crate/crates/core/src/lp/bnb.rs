//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use super::model::{relative_gap, LinearModel, Solution, SolveStatus, VarKind};
use super::simplex::{BasisSnapshot, LpOutcome, SimplexEngine, SimplexParams};
use super::{add_violated_lazy_rows, LpError};

#[derive(Debug, Clone)]
pub struct MilpParams {
    /// Stop once (bound - incumbent) / max(1, |incumbent|) is at most this.
    pub gap_tol: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    /// A binary within this distance of 0 or 1 counts as integral.
    pub int_tol: f64,
    pub simplex: SimplexParams,
    /// Run the diving heuristic every this many nodes (0 disables after the root).
    pub dive_interval: usize,
    /// Candidate solutions, each with a value for every variable. Binaries
    /// are rounded and fixed, the continuous part is re-optimized, and the
    /// best feasible candidate becomes the first incumbent.
    pub starts: Vec<Vec<f64>>,
    /// Lazy rows loaded per separation round.
    pub lazy_batch: usize,
    /// Check lazy rows only at LP points that are integral on the binaries.
    /// Bounds stay valid either way; fractional points then solve smaller LPs.
    pub lazy_integral_only: bool,
    /// An upper bound on the optimum known from outside the model. Node
    /// bounds are capped by it, so the search ends once an incumbent reaches it.
    pub known_bound: Option<f64>,
}

impl Default for MilpParams {
    fn default() -> Self {
        MilpParams {
            gap_tol: 1e-4,
            node_limit: 2_000_000,
            time_limit: None,
            int_tol: 1e-6,
            simplex: SimplexParams::default(),
            dive_interval: 200,
            starts: Vec::new(),
            lazy_batch: 2000,
            lazy_integral_only: false,
            known_bound: None,
        }
    }
}

pub fn solve_milp(
    model: &LinearModel,
    gap_tol: f64,
    node_limit: usize,
) -> Result<Solution, LpError> {
    solve_milp_with(
        model,
        &MilpParams {
            gap_tol,
            node_limit,
            ..MilpParams::default()
        },
    )
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    /// Binary fixings from the root, as (variable, value).
    fixings: Rc<Vec<(usize, bool)>>,
    parent_basis: Rc<BasisSnapshot>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Search<'a> {
    model: &'a LinearModel,
    params: &'a MilpParams,
    eng: SimplexEngine,
    loaded: Vec<bool>,
    binaries: Vec<usize>,
    root_lb: Vec<f64>,
    root_ub: Vec<f64>,
    incumbent: Option<(f64, Vec<f64>)>,
    start: Instant,
}

enum NodeLp {
    Infeasible,
    Solved(f64),
}

impl<'a> Search<'a> {
    fn timed_out(&self) -> bool {
        self.params
            .time_limit
            .is_some_and(|t| self.start.elapsed() >= t)
    }

    fn incumbent_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::NEG_INFINITY, |i| i.0)
    }

    /// Solve the working LP and separate lazy rows until none is violated.
    fn solve_lp(&mut self) -> Result<NodeLp, LpError> {
        for _ in 0..500 {
            match self.eng.solve() {
                LpOutcome::Optimal => {}
                LpOutcome::Infeasible => return Ok(NodeLp::Infeasible),
                LpOutcome::Unbounded => {
                    return Err(LpError::InvalidModel("LP relaxation is unbounded".into()));
                }
                LpOutcome::IterationLimit => {
                    return Err(LpError::NumericalFailure {
                        fingerprint: self.model.fingerprint(),
                        detail: format!("iteration limit after {} pivots", self.eng.iterations),
                    })
                }
            }
            if self.params.lazy_integral_only && !self.fractional(self.eng.values()).is_empty() {
                return Ok(NodeLp::Solved(self.eng.objective()));
            }
            let added = add_violated_lazy_rows(
                self.model,
                &mut self.eng,
                &mut self.loaded,
                self.params.lazy_batch,
            );
            if added.is_empty() {
                return Ok(NodeLp::Solved(self.eng.objective()));
            }
        }
        Err(LpError::NumericalFailure {
            fingerprint: self.model.fingerprint(),
            detail: "lazy row separation did not converge".into(),
        })
    }

    fn set_node_bounds(&mut self, fixings: &[(usize, bool)]) {
        for (k, &j) in self.binaries.iter().enumerate() {
            let (lo, hi) = (self.root_lb[k], self.root_ub[k]);
            if self.eng.lower(j) != lo || self.eng.upper(j) != hi {
                self.eng.set_bounds(j, lo, hi);
            }
        }
        for &(j, v) in fixings {
            let x = if v { 1.0 } else { 0.0 };
            self.eng.set_bounds(j, x, x);
        }
    }

    fn fractional(&self, values: &[f64]) -> Vec<usize> {
        self.binaries
            .iter()
            .copied()
            .filter(|&j| {
                let v = values[j];
                v > self.params.int_tol && v < 1.0 - self.params.int_tol
            })
            .collect()
    }

    /// Most fractional binary, highest branching priority first, ties by index.
    fn branch_variable(&self, frac: &[usize], values: &[f64]) -> usize {
        let mut best = frac[0];
        let mut key = (i32::MIN, f64::NEG_INFINITY);
        for &j in frac {
            let pri = self.model.variables[j].branch_priority;
            let score = -(values[j] - 0.5).abs();
            if pri > key.0 || (pri == key.0 && score > key.1) {
                key = (pri, score);
                best = j;
            }
        }
        best
    }

    /// Fix every binary to its rounded value, re-optimize the continuous
    /// part and record an incumbent when feasible. Bounds are left fixed.
    fn polish(&mut self, values: &[f64]) -> Result<bool, LpError> {
        let binaries = self.binaries.clone();
        for &j in &binaries {
            let x = if values[j] >= 0.5 { 1.0 } else { 0.0 };
            self.eng.set_bounds(j, x, x);
        }
        match self.solve_lp()? {
            NodeLp::Infeasible => Ok(false),
            NodeLp::Solved(_) => {
                let mut vals = self.eng.values().to_vec();
                for &j in &binaries {
                    vals[j] = vals[j].round();
                }
                Ok(self.offer(vals))
            }
        }
    }

    fn offer(&mut self, vals: Vec<f64>) -> bool {
        if self.model.max_violation(&vals) > 1e-7 {
            return false;
        }
        let obj = self.model.objective_value(&vals);
        if obj > self.incumbent_value() + 1e-12 {
            log::debug!("new incumbent {obj:.9}");
            self.incumbent = Some((obj, vals));
            true
        } else {
            false
        }
    }

    /// Fractional diving from the current LP point: repeatedly fix the
    /// largest fractional binary to one (zero if that is infeasible).
    fn dive(&mut self, fixings: &[(usize, bool)]) -> Result<(), LpError> {
        let snap = self.eng.snapshot();
        let max_steps = self.binaries.len().min(5000);
        for _ in 0..max_steps {
            if self.timed_out() {
                break;
            }
            let values = self.eng.values().to_vec();
            if self.model.objective_value(&values) <= self.incumbent_value() + 1e-12 {
                break;
            }
            let frac = self.fractional(&values);
            if frac.is_empty() {
                self.polish(&values)?;
                break;
            }
            let mut pick = frac[0];
            for &j in &frac {
                if values[j] > values[pick] {
                    pick = j;
                }
            }
            self.eng.set_bounds(pick, 1.0, 1.0);
            if let NodeLp::Infeasible = self.solve_lp()? {
                self.eng.set_bounds(pick, 0.0, 0.0);
                if let NodeLp::Infeasible = self.solve_lp()? {
                    break;
                }
            }
        }
        self.eng.restore(&snap);
        self.set_node_bounds(fixings);
        Ok(())
    }
}

pub fn solve_milp_with(model: &LinearModel, params: &MilpParams) -> Result<Solution, LpError> {
    model.validate()?;
    let binaries: Vec<usize> = (0..model.num_vars())
        .filter(|&j| model.variables[j].kind == VarKind::Binary)
        .collect();
    let root_lb: Vec<f64> = binaries
        .iter()
        .map(|&j| model.variables[j].lower.max(0.0))
        .collect();
    let root_ub: Vec<f64> = binaries
        .iter()
        .map(|&j| model.variables[j].upper.min(1.0))
        .collect();
    let loaded: Vec<bool> = model.constraints.iter().map(|c| !c.lazy).collect();
    let eng = SimplexEngine::new(model, params.simplex, |r| loaded[r]);
    let mut s = Search {
        model,
        params,
        eng,
        loaded,
        binaries,
        root_lb,
        root_ub,
        incumbent: None,
        start: Instant::now(),
    };

    for start in &params.starts {
        if start.len() == model.num_vars() {
            s.polish(start)?;
            s.eng.restore(&s.eng.snapshot());
            s.set_node_bounds(&[]);
        }
    }

    let root_bound = match s.solve_lp()? {
        NodeLp::Infeasible => {
            return match s.incumbent {
                Some(_) => Err(LpError::NumericalFailure {
                    fingerprint: model.fingerprint(),
                    detail: "root relaxation infeasible despite a feasible start".into(),
                }),
                None => Err(LpError::Infeasible),
            };
        }
        NodeLp::Solved(v) => params.known_bound.map_or(v, |b| v.min(b)),
    };
    log::debug!(
        "root bound {root_bound:.9}, {} binaries, {} rows loaded",
        s.binaries.len(),
        s.eng.num_rows()
    );

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: root_bound,
        depth: 0,
        seq,
        fixings: Rc::new(Vec::new()),
        parent_basis: Rc::new(s.eng.snapshot()),
    });
    let mut nodes = 0usize;
    let mut last_fixings: Option<Rc<Vec<(usize, bool)>>> = None;
    let mut hit_limit = false;

    while let Some(node) = heap.pop() {
        let inc = s.incumbent_value();
        if s.incumbent.is_some() && relative_gap(node.bound, inc) <= params.gap_tol {
            // Best-bound order: every remaining node is no better.
            heap.push(node);
            break;
        }
        if nodes >= params.node_limit || s.timed_out() {
            heap.push(node);
            hit_limit = true;
            break;
        }
        nodes += 1;

        // Warm start from the parent basis unless the engine already holds it.
        let continuing = last_fixings
            .as_ref()
            .is_some_and(|lf| lf.len() + 1 == node.fixings.len() && node.fixings.starts_with(lf));
        if !continuing {
            s.eng.restore(&node.parent_basis);
        }
        s.set_node_bounds(&node.fixings);
        let lp = s.solve_lp()?;
        let obj = match lp {
            NodeLp::Infeasible => {
                last_fixings = None;
                continue;
            }
            NodeLp::Solved(v) => v,
        };
        let values = s.eng.values().to_vec();
        if s.incumbent.is_some()
            && relative_gap(obj.min(node.bound), s.incumbent_value()) <= params.gap_tol
        {
            last_fixings = None;
            continue;
        }
        let frac = s.fractional(&values);
        if frac.is_empty() {
            s.polish(&values)?;
            last_fixings = None;
            continue;
        }
        if nodes == 1 || (params.dive_interval > 0 && nodes % params.dive_interval == 0) {
            s.dive(&node.fixings)?;
            s.solve_lp()?;
        }
        let j = s.branch_variable(&frac, &values);
        let snap = Rc::new(s.eng.snapshot());
        let bound = obj.min(node.bound);
        for v in [false, true] {
            let mut fx = (*node.fixings).clone();
            fx.push((j, v));
            seq += 1;
            heap.push(Node {
                bound,
                depth: node.depth + 1,
                seq,
                fixings: Rc::new(fx),
                parent_basis: Rc::clone(&snap),
            });
        }
        last_fixings = Some(Rc::clone(&node.fixings));
        if nodes % 1000 == 0 {
            log::debug!(
                "nodes {nodes} open {} bound {:.6} incumbent {:.6}",
                heap.len(),
                heap.peek().map_or(f64::NAN, |n| n.bound),
                s.incumbent_value()
            );
        }
    }

    let iterations = s.eng.iterations;
    let open_bound = heap.peek().map(|n| n.bound);
    match s.incumbent {
        None => {
            if hit_limit {
                Err(LpError::NodeLimitNoIncumbent)
            } else {
                Err(LpError::Infeasible)
            }
        }
        Some((obj, values)) => {
            let best_bound = open_bound.map_or(obj, |b| b.max(obj));
            let gap = relative_gap(best_bound, obj);
            let status = if gap <= params.gap_tol {
                SolveStatus::Optimal
            } else {
                SolveStatus::GapLimit
            };
            Ok(Solution {
                status,
                values,
                duals: Vec::new(),
                objective: obj,
                best_bound,
                gap,
                nodes,
                iterations,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Relation};

    #[test]
    fn knapsack_picks_heavier_item() {
        let mut m = LinearModel::new("k");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        m.set_objective(vec![(a, 3.0), (b, 2.0)]);
        let s = solve_milp(&m, 1e-9, 1000).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert_eq!(s.values[a.0], 1.0);
        assert_eq!(s.values[b.0], 0.0);
    }

    #[test]
    fn fixed_binaries_reduce_to_lp() {
        let mut m = LinearModel::new("f");
        let a = m.add_var("a", 1.0, 1.0, VarKind::Binary);
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("c", vec![(x, 1.0), (a, 2.0)], Relation::Le, 5.5);
        m.set_objective(vec![(x, 1.0), (a, 1.0)]);
        let milp = solve_milp(&m, 1e-9, 100).unwrap();
        let lp = solve_lp(&m).unwrap();
        assert!((milp.objective - lp.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_integer_program() {
        // 2a = 1 has no binary solution.
        let mut m = LinearModel::new("i");
        let a = m.add_binary("a");
        m.add_constraint("c", vec![(a, 2.0)], Relation::Eq, 1.0);
        assert!(matches!(
            solve_milp(&m, 1e-9, 100),
            Err(LpError::Infeasible)
        ));
    }

    #[test]
    fn odd_cycle_packing_needs_branching() {
        // Maximum independent set of a 5-cycle is 2; the LP bound is 2.5.
        let mut m = LinearModel::new("c5");
        let v: Vec<_> = (0..5).map(|i| m.add_binary(format!("v{i}"))).collect();
        for i in 0..5 {
            m.add_constraint(
                format!("e{i}"),
                vec![(v[i], 1.0), (v[(i + 1) % 5], 1.0)],
                Relation::Le,
                1.0,
            );
        }
        m.set_objective(v.iter().map(|&x| (x, 1.0)).collect());
        let lp = solve_lp(&m).unwrap();
        assert!((lp.objective - 2.5).abs() < 1e-9);
        let s = solve_milp(&m, 1e-9, 10_000).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!(s.best_bound <= lp.objective + 1e-9);
    }

    #[test]
    fn known_bound_closes_the_search() {
        let mut m = LinearModel::new("c5");
        let v: Vec<_> = (0..5).map(|i| m.add_binary(format!("v{i}"))).collect();
        for i in 0..5 {
            m.add_constraint(
                format!("e{i}"),
                vec![(v[i], 1.0), (v[(i + 1) % 5], 1.0)],
                Relation::Le,
                1.0,
            );
        }
        m.set_objective(v.iter().map(|&x| (x, 1.0)).collect());
        let start = vec![1.0, 0.0, 1.0, 0.0, 0.0];
        let params = MilpParams {
            gap_tol: 1e-9,
            known_bound: Some(2.0),
            starts: vec![start],
            ..MilpParams::default()
        };
        let s = solve_milp_with(&m, &params).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.nodes, 0);
        assert!((s.best_bound - 2.0).abs() < 1e-12);
    }

    #[test]
    fn start_solution_is_used_as_incumbent() {
        let mut m = LinearModel::new("s");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        m.add_constraint("cap", vec![(a, 1.0), (b, 1.0)], Relation::Le, 1.0);
        m.set_objective(vec![(a, 1.0), (b, 1.0)]);
        let params = MilpParams {
            starts: vec![vec![0.0, 1.0]],
            node_limit: 0,
            ..MilpParams::default()
        };
        let s = solve_milp_with(&m, &params).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn node_limit_without_incumbent_is_reported() {
        let mut m = LinearModel::new("c5");
        let v: Vec<_> = (0..5).map(|i| m.add_binary(format!("v{i}"))).collect();
        for i in 0..5 {
            m.add_constraint(
                format!("e{i}"),
                vec![(v[i], 1.0), (v[(i + 1) % 5], 1.0)],
                Relation::Eq,
                1.0,
            );
        }
        m.set_objective(v.iter().map(|&x| (x, 1.0)).collect());
        let params = MilpParams {
            node_limit: 0,
            dive_interval: 0,
            ..MilpParams::default()
        };
        assert!(matches!(
            solve_milp_with(&m, &params),
            Err(LpError::NodeLimitNoIncumbent)
        ));
    }
}
