//! Bounded-variable revised simplex.
//!
//! Each row `i` gets a logical variable `s_i` with `a_i x - s_i = 0` and the
//! row bounds moved onto `s_i`, so every variable is simply boxed (possibly
//! with infinite bounds). The basis inverse is kept as a sparse LU with a
//! product-form eta file and is refactorized periodically.
//!
//! Primal simplex (composite phase 1 / phase 2, Dantzig pricing, Harris ratio
//! test, bound perturbation and then Bland's rule against long runs of
//! degenerate pivots) solves from scratch; the dual simplex re-optimizes
//! after bound changes and row additions during branch and bound.

use super::lu::{BasisFactor, SparseColumn};
use super::model::{LinearModel, VarKind};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub struct SimplexParams {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots after which Bland's rule takes over.
    pub bland_after: usize,
    pub max_iterations: usize,
}

impl Default for SimplexParams {
    fn default() -> Self {
        SimplexParams {
            feas_tol: 1e-8,
            opt_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_interval: 100,
            bland_after: 500,
            max_iterations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Free,
}

/// Compact basis snapshot used to warm start child nodes.
#[derive(Debug, Clone)]
pub struct BasisSnapshot {
    n: usize,
    status: Vec<VarStatus>,
}

#[derive(Debug, Clone)]
pub struct SimplexEngine {
    pub(crate) n: usize,
    pub(crate) m: usize,
    cols: Vec<SparseColumn>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    x: Vec<f64>,
    factor: Option<BasisFactor>,
    params: SimplexParams,
    pub(crate) iterations: usize,
    // scratch
    work: Vec<f64>,
    alpha: Vec<f64>,
    duals: Vec<f64>,
    reduced: Vec<f64>,
}

impl SimplexEngine {
    /// Build the engine over the model's structural variables and the rows
    /// selected by `row_filter`. Integrality marks are ignored.
    pub fn new(
        model: &LinearModel,
        params: SimplexParams,
        row_filter: impl Fn(usize) -> bool,
    ) -> Self {
        let n = model.num_vars();
        let mut cols: Vec<SparseColumn> = vec![Vec::new(); n];
        let mut lb: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
        let mut ub: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
        let mut m = 0;
        for (r, c) in model.constraints.iter().enumerate() {
            if !row_filter(r) {
                continue;
            }
            for &(v, a) in &c.coeffs {
                cols[v.0].push((m, a));
            }
            let (lo, hi) = c.row_bounds();
            lb.push(lo);
            ub.push(hi);
            m += 1;
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &model.objective {
            cost[v.0] += c;
        }
        for (j, var) in model.variables.iter().enumerate() {
            if var.kind == VarKind::Binary {
                lb[j] = lb[j].max(0.0);
                ub[j] = ub[j].min(1.0);
            }
        }
        let mut eng = SimplexEngine {
            n,
            m,
            cols,
            cost,
            lb,
            ub,
            status: Vec::new(),
            basis: Vec::new(),
            pos_of: Vec::new(),
            x: Vec::new(),
            factor: None,
            params,
            iterations: 0,
            work: Vec::new(),
            alpha: Vec::new(),
            duals: Vec::new(),
            reduced: Vec::new(),
        };
        eng.slack_basis();
        eng
    }

    fn slack_basis(&mut self) {
        let (n, m) = (self.n, self.m);
        self.status = vec![VarStatus::AtLower; n + m];
        self.x = vec![0.0; n + m];
        for j in 0..n {
            self.place_nonbasic(j);
        }
        self.basis = (n..n + m).collect();
        self.pos_of = vec![NONE; n + m];
        for (p, &j) in self.basis.iter().enumerate() {
            self.status[j] = VarStatus::Basic;
            self.pos_of[j] = p;
        }
        self.factor = None;
    }

    /// Put a nonbasic variable on its most natural bound.
    fn place_nonbasic(&mut self, j: usize) {
        let (lo, hi) = (self.lb[j], self.ub[j]);
        if lo.is_finite() && (!hi.is_finite() || lo.abs() <= hi.abs()) {
            self.status[j] = VarStatus::AtLower;
            self.x[j] = lo;
        } else if hi.is_finite() {
            self.status[j] = VarStatus::AtUpper;
            self.x[j] = hi;
        } else {
            self.status[j] = VarStatus::Free;
            self.x[j] = 0.0;
        }
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn lower(&self, j: usize) -> f64 {
        self.lb[j]
    }

    pub fn upper(&self, j: usize) -> f64 {
        self.ub[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            n: self.n,
            status: self.status.clone(),
        }
    }

    /// Restore a basis snapshot; rows added after the snapshot was taken get
    /// their logicals basic. Values of basic variables are recomputed.
    pub fn restore(&mut self, snap: &BasisSnapshot) {
        debug_assert_eq!(snap.n, self.n);
        let total = self.n + self.m;
        let mut status = snap.status.clone();
        status.resize(total, VarStatus::Basic);
        let basics: Vec<usize> = (0..total)
            .filter(|&j| status[j] == VarStatus::Basic)
            .collect();
        if basics.len() != self.m {
            self.slack_basis();
            return;
        }
        self.status = status;
        self.basis = basics;
        self.pos_of = vec![NONE; total];
        for (p, &j) in self.basis.iter().enumerate() {
            self.pos_of[j] = p;
        }
        for j in 0..total {
            if self.status[j] != VarStatus::Basic {
                self.snap_to_bound(j);
            }
        }
        self.factor = None;
    }

    fn snap_to_bound(&mut self, j: usize) {
        match self.status[j] {
            VarStatus::AtLower if self.lb[j].is_finite() => self.x[j] = self.lb[j],
            VarStatus::AtUpper if self.ub[j].is_finite() => self.x[j] = self.ub[j],
            VarStatus::Free if !self.lb[j].is_finite() && !self.ub[j].is_finite() => {
                self.x[j] = 0.0
            }
            VarStatus::Basic => {}
            _ => self.place_nonbasic(j),
        }
    }

    /// Change the bounds of a structural variable. A nonbasic variable moves
    /// onto its new bound and basic values follow through one FTRAN.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        if self.lb[j] == lo && self.ub[j] == hi {
            return;
        }
        self.lb[j] = lo;
        self.ub[j] = hi;
        if self.status[j] == VarStatus::Basic {
            return;
        }
        let old = self.x[j];
        self.snap_to_bound(j);
        let delta = self.x[j] - old;
        if delta == 0.0 || self.factor.is_none() {
            return;
        }
        self.ftran_column(j);
        for p in 0..self.m {
            let a = self.alpha[p];
            if a != 0.0 {
                let b = self.basis[p];
                self.x[b] -= delta * a;
            }
        }
    }

    /// Append rows given as sparse `(structural, coef)` lists with bounds.
    pub fn add_rows(&mut self, rows: &[(Vec<(usize, f64)>, f64, f64)]) {
        for (coeffs, lo, hi) in rows {
            let r = self.m;
            for &(j, a) in coeffs {
                self.cols[j].push((r, a));
            }
            self.lb.push(*lo);
            self.ub.push(*hi);
            self.cost.push(0.0);
            self.status.push(VarStatus::Basic);
            self.x.push(0.0);
            self.pos_of.push(self.basis.len());
            self.basis.push(self.n + r);
            self.m += 1;
        }
        self.factor = None;
    }

    fn column(&self, j: usize) -> SparseColumn {
        if j < self.n {
            self.cols[j].clone()
        } else {
            vec![(j - self.n, -1.0)]
        }
    }

    fn refactor(&mut self) {
        let columns: Vec<SparseColumn> = self.basis.iter().map(|&j| self.column(j)).collect();
        let (factor, replacements) = BasisFactor::factorize(self.m, &columns);
        for rep in replacements {
            let old = self.basis[rep.pos];
            let new = self.n + rep.row;
            self.pos_of[old] = NONE;
            self.place_nonbasic(old);
            self.basis[rep.pos] = new;
            self.pos_of[new] = rep.pos;
            self.status[new] = VarStatus::Basic;
        }
        self.factor = Some(factor);
        self.compute_basic_values();
    }

    fn ensure_factor(&mut self) {
        let stale = match &self.factor {
            None => true,
            Some(f) => {
                f.num_updates() >= self.params.refactor_interval
                    || f.eta_fill() > 4 * (f.lu_nnz() + self.m)
            }
        };
        if stale {
            self.refactor();
        }
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n {
            if self.status[j] != VarStatus::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    rhs[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..self.m {
            let j = self.n + i;
            if self.status[j] != VarStatus::Basic {
                rhs[i] += self.x[j];
            }
        }
        let f = self.factor.as_ref().expect("factor");
        f.ftran(&mut rhs, &mut self.work);
        for p in 0..self.m {
            self.x[self.basis[p]] = rhs[p];
        }
    }

    fn ftran_column(&mut self, j: usize) {
        self.alpha.clear();
        self.alpha.resize(self.m, 0.0);
        if j < self.n {
            for &(i, a) in &self.cols[j] {
                self.alpha[i] = a;
            }
        } else {
            self.alpha[j - self.n] = -1.0;
        }
        let f = self.factor.as_ref().expect("factor");
        f.ftran(&mut self.alpha, &mut self.work);
    }

    /// Compute duals `y = B^-T c_B` and reduced costs for the given cost vector.
    fn price(&mut self, basic_cost: &[f64], phase_one: bool) {
        let mut y = basic_cost.to_vec();
        let f = self.factor.as_ref().expect("factor");
        f.btran(&mut y, &mut self.work);
        let total = self.n + self.m;
        self.reduced.clear();
        self.reduced.resize(total, 0.0);
        for j in 0..self.n {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let c = if phase_one { 0.0 } else { self.cost[j] };
            let dot: f64 = self.cols[j].iter().map(|&(i, a)| a * y[i]).sum();
            self.reduced[j] = c - dot;
        }
        for i in 0..self.m {
            let j = self.n + i;
            if self.status[j] != VarStatus::Basic {
                self.reduced[j] = y[i];
            }
        }
        self.duals = y;
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lb[j] - self.params.feas_tol {
            self.lb[j] - v
        } else if v > self.ub[j] + self.params.feas_tol {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn is_primal_feasible(&self) -> bool {
        self.basis.iter().all(|&j| self.infeasibility(j) == 0.0)
    }

    fn eligible_direction(&self, j: usize, d: f64) -> Option<f64> {
        let tol = self.params.opt_tol;
        if self.lb[j] == self.ub[j] {
            return None;
        }
        match self.status[j] {
            VarStatus::AtLower if d > tol => Some(1.0),
            VarStatus::AtUpper if d < -tol => Some(-1.0),
            VarStatus::Free if d.abs() > tol => Some(d.signum()),
            _ => None,
        }
    }

    /// Primal simplex from the current basis (phase 1 when infeasible).
    pub fn primal(&mut self) -> LpOutcome {
        let limit = self.iteration_limit();
        let mut degenerate_run = 0usize;
        let mut saved: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut may_perturb = true;
        loop {
            self.ensure_factor();
            if self.iterations >= limit {
                self.unperturb(saved.take());
                return LpOutcome::IterationLimit;
            }
            if degenerate_run >= self.params.bland_after && may_perturb {
                saved = Some(self.perturb_basic_bounds());
                may_perturb = false;
                degenerate_run = 0;
            }
            let phase_one = !self.is_primal_feasible();
            let basic_cost: Vec<f64> = if phase_one {
                self.basis
                    .iter()
                    .map(|&j| {
                        let v = self.x[j];
                        if v < self.lb[j] - self.params.feas_tol {
                            1.0
                        } else if v > self.ub[j] + self.params.feas_tol {
                            -1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            } else {
                self.basis.iter().map(|&j| self.cost[j]).collect()
            };
            self.price(&basic_cost, phase_one);

            let bland = degenerate_run >= self.params.bland_after;
            let total = self.n + self.m;
            let mut entering = NONE;
            let mut dir = 0.0;
            let mut best = 0.0;
            for j in 0..total {
                if self.status[j] == VarStatus::Basic {
                    continue;
                }
                let d = self.reduced[j];
                if let Some(s) = self.eligible_direction(j, d) {
                    if bland {
                        entering = j;
                        dir = s;
                        break;
                    }
                    if d.abs() > best {
                        best = d.abs();
                        entering = j;
                        dir = s;
                    }
                }
            }
            if entering == NONE {
                if phase_one {
                    // A factor refresh can clear tiny infeasibilities left by updates.
                    if self.factor.as_ref().map_or(0, |f| f.num_updates()) > 0 {
                        self.refactor();
                        if self.is_primal_feasible() {
                            continue;
                        }
                    }
                    self.unperturb(saved.take());
                    return LpOutcome::Infeasible;
                }
                if saved.is_some() {
                    self.unperturb(saved.take());
                    degenerate_run = 0;
                    continue;
                }
                return LpOutcome::Optimal;
            }

            self.ftran_column(entering);
            let (leave_pos, theta, leave_to_upper) =
                match self.primal_ratio(entering, dir, phase_one, bland) {
                    Some(r) => r,
                    None => {
                        self.unperturb(saved.take());
                        return LpOutcome::Unbounded;
                    }
                };
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            let step = dir * theta;
            if leave_pos == NONE {
                // Bound flip of the entering variable.
                self.status[entering] = if dir > 0.0 {
                    VarStatus::AtUpper
                } else {
                    VarStatus::AtLower
                };
                self.x[entering] = if dir > 0.0 {
                    self.ub[entering]
                } else {
                    self.lb[entering]
                };
                for p in 0..self.m {
                    let a = self.alpha[p];
                    if a != 0.0 {
                        let b = self.basis[p];
                        self.x[b] -= step * a;
                    }
                }
                continue;
            }
            for p in 0..self.m {
                let a = self.alpha[p];
                if a != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= step * a;
                }
            }
            self.x[entering] += step;
            let leaving = self.basis[leave_pos];
            self.x[leaving] = if leave_to_upper {
                self.ub[leaving]
            } else {
                self.lb[leaving]
            };
            self.status[leaving] = if leave_to_upper {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            };
            self.swap_basis(leave_pos, entering, leaving);
        }
    }

    /// Widen the bounds of every basic variable by a small pseudo-random
    /// amount so that degenerate vertices split apart. Returns the original
    /// bounds.
    fn perturb_basic_bounds(&mut self) -> (Vec<f64>, Vec<f64>) {
        let saved = (self.lb.clone(), self.ub.clone());
        for p in 0..self.m {
            let j = self.basis[p];
            let mut z =
                (j as u64 ^ (self.iterations as u64) << 32).wrapping_add(0x9e37_79b9_7f4a_7c15);
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            let u = (z >> 11) as f64 / (1u64 << 53) as f64;
            let widen = |b: f64| 1e-7 * (1.0 + b.abs()) * (1.0 + u);
            if self.lb[j].is_finite() {
                self.lb[j] -= widen(self.lb[j]);
            }
            if self.ub[j].is_finite() {
                self.ub[j] += widen(self.ub[j]);
            }
        }
        log::trace!("bounds perturbed after {} pivots", self.iterations);
        saved
    }

    /// Put back bounds saved by `perturb_basic_bounds`, moving nonbasic
    /// variables onto them.
    fn unperturb(&mut self, saved: Option<(Vec<f64>, Vec<f64>)>) {
        let Some((lb, ub)) = saved else { return };
        self.lb = lb;
        self.ub = ub;
        for j in 0..self.n + self.m {
            match self.status[j] {
                VarStatus::AtLower => self.x[j] = self.lb[j],
                VarStatus::AtUpper => self.x[j] = self.ub[j],
                _ => {}
            }
        }
        self.refactor();
    }

    fn swap_basis(&mut self, pos: usize, entering: usize, leaving: usize) {
        self.pos_of[leaving] = NONE;
        self.basis[pos] = entering;
        self.pos_of[entering] = pos;
        self.status[entering] = VarStatus::Basic;
        let alpha = std::mem::take(&mut self.alpha);
        self.factor.as_mut().expect("factor").update(pos, &alpha);
        self.alpha = alpha;
    }

    /// Harris two-pass ratio test. Returns (position or NONE for a bound
    /// flip, step length, whether the leaving variable exits at its upper bound).
    fn primal_ratio(
        &self,
        q: usize,
        dir: f64,
        phase_one: bool,
        bland: bool,
    ) -> Option<(usize, f64, bool)> {
        let tol = self.params.feas_tol;
        let ptol = self.params.pivot_tol;
        // (position, exact ratio, relaxed ratio, to_upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for p in 0..self.m {
            let a = self.alpha[p];
            if a.abs() <= ptol {
                continue;
            }
            let j = self.basis[p];
            let delta = -dir * a;
            let v = self.x[j];
            let (lo, hi) = (self.lb[j], self.ub[j]);
            if phase_one && v < lo - tol {
                if delta > 0.0 {
                    cands.push((p, (lo - v) / delta, (lo - v + tol) / delta, false));
                }
                continue;
            }
            if phase_one && v > hi + tol {
                if delta < 0.0 {
                    cands.push((p, (v - hi) / -delta, (v - hi + tol) / -delta, true));
                }
                continue;
            }
            if delta < 0.0 && lo.is_finite() {
                cands.push((
                    p,
                    ((v - lo) / -delta).max(0.0),
                    (v - lo + tol) / -delta,
                    false,
                ));
            } else if delta > 0.0 && hi.is_finite() {
                cands.push((p, ((hi - v) / delta).max(0.0), (hi - v + tol) / delta, true));
            }
        }
        let flip = self.ub[q] - self.lb[q];
        if cands.is_empty() {
            return if flip.is_finite() {
                Some((NONE, flip, false))
            } else {
                None
            };
        }
        let chosen = if bland {
            let tmin = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= tmin + 1e-12)
                .min_by_key(|c| self.basis[c.0])
                .copied()
                .expect("candidate")
        } else {
            let relaxed = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.1 <= relaxed)
                .max_by(|a, b| {
                    self.alpha[a.0]
                        .abs()
                        .partial_cmp(&self.alpha[b.0].abs())
                        .unwrap()
                })
                .copied()
                .expect("candidate")
        };
        if flip.is_finite() && flip <= chosen.1 {
            return Some((NONE, flip, false));
        }
        Some((chosen.0, chosen.1, chosen.3))
    }

    /// Flip boxed nonbasic variables whose reduced cost has the wrong sign.
    /// Returns false when an unboxed variable is dual infeasible.
    fn make_dual_feasible(&mut self) -> bool {
        let tol = self.params.opt_tol;
        let total = self.n + self.m;
        let mut flipped = false;
        let mut ok = true;
        for j in 0..total {
            if self.status[j] == VarStatus::Basic || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.reduced[j];
            match self.status[j] {
                VarStatus::AtLower if d > tol => {
                    if self.ub[j].is_finite() {
                        self.status[j] = VarStatus::AtUpper;
                        self.x[j] = self.ub[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarStatus::AtUpper if d < -tol => {
                    if self.lb[j].is_finite() {
                        self.status[j] = VarStatus::AtLower;
                        self.x[j] = self.lb[j];
                        flipped = true;
                    } else {
                        ok = false;
                    }
                }
                VarStatus::Free if d.abs() > tol => ok = false,
                _ => {}
            }
        }
        if flipped {
            self.compute_basic_values();
        }
        ok
    }

    /// Dual simplex from the current basis. Falls back to the primal method
    /// when the starting basis cannot be made dual feasible.
    pub fn dual(&mut self) -> LpOutcome {
        let limit = self.iteration_limit();
        self.ensure_factor();
        let basic_cost: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.price(&basic_cost, false);
        if !self.make_dual_feasible() {
            return self.primal();
        }
        let mut stall = 0usize;
        let mut last_obj = f64::INFINITY;
        loop {
            self.ensure_factor();
            if self.iterations >= limit {
                return LpOutcome::IterationLimit;
            }
            // Leaving row: largest primal infeasibility.
            let mut r = NONE;
            let mut worst = 0.0;
            for p in 0..self.m {
                let inf = self.infeasibility(self.basis[p]);
                if inf > worst {
                    worst = inf;
                    r = p;
                }
            }
            if r == NONE {
                break;
            }
            let basic_cost: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
            self.price(&basic_cost, false);

            let leaving = self.basis[r];
            let below = self.x[leaving] < self.lb[leaving];
            let target = if below {
                self.lb[leaving]
            } else {
                self.ub[leaving]
            };

            let mut rho = vec![0.0; self.m];
            rho[r] = 1.0;
            let f = self.factor.as_ref().expect("factor");
            f.btran(&mut rho, &mut self.work);

            let tol = self.params.opt_tol;
            let ptol = self.params.pivot_tol;
            let total = self.n + self.m;
            // (var, alpha_r, ratio, relaxed ratio)
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for j in 0..total {
                if self.status[j] == VarStatus::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a = if j < self.n {
                    self.cols[j].iter().map(|&(i, v)| v * rho[i]).sum::<f64>()
                } else {
                    -rho[j - self.n]
                };
                if a.abs() <= ptol {
                    continue;
                }
                // Moving x_j by t changes x_leaving by -a t; we need the sign
                // that pushes the leaving variable toward its violated bound.
                let want_up = below;
                let ok = match self.status[j] {
                    VarStatus::AtLower => (a < 0.0) == want_up,
                    VarStatus::AtUpper => (a > 0.0) == want_up,
                    VarStatus::Free => true,
                    VarStatus::Basic => false,
                };
                if !ok {
                    continue;
                }
                let d = self.reduced[j];
                cands.push((j, a, d.abs() / a.abs(), (d.abs() + tol) / a.abs()));
            }
            if cands.is_empty() {
                return LpOutcome::Infeasible;
            }
            let relaxed = cands.iter().map(|c| c.3).fold(f64::INFINITY, f64::min);
            let (q, _, _, _) = cands
                .iter()
                .filter(|c| c.2 <= relaxed)
                .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
                .copied()
                .expect("candidate");

            self.ftran_column(q);
            let arq = self.alpha[r];
            if arq.abs() <= ptol {
                self.refactor();
                stall += 1;
                if stall > 5 {
                    return self.primal();
                }
                continue;
            }
            let dq = (self.x[leaving] - target) / arq;
            for p in 0..self.m {
                let a = self.alpha[p];
                if a != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= dq * a;
                }
            }
            self.x[q] += dq;
            self.x[leaving] = target;
            self.status[leaving] = if below {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            self.swap_basis(r, q, leaving);
            self.iterations += 1;

            let obj = self.objective();
            if obj >= last_obj - 1e-12 {
                stall += 1;
            } else {
                stall = 0;
            }
            last_obj = obj;
            if stall > self.params.bland_after.max(50) * 4 {
                // Persistent dual degeneracy; finish with the primal method.
                return self.primal();
            }
        }
        // Primal feasible: confirm optimality (and clean up drift) with primal.
        self.primal()
    }

    fn iteration_limit(&self) -> usize {
        if self.params.max_iterations > 0 {
            self.params.max_iterations
        } else {
            self.iterations + 50_000 + 50 * (self.n + self.m)
        }
    }

    /// Solve from the current basis, choosing the method from its state.
    pub fn solve(&mut self) -> LpOutcome {
        self.ensure_factor();
        if self.is_primal_feasible() {
            self.primal()
        } else {
            self.dual()
        }
    }

    /// Row duals `y` (by row) for the current basis under the true costs.
    pub fn row_duals(&mut self) -> Vec<f64> {
        self.ensure_factor();
        let basic_cost: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.price(&basic_cost, false);
        self.duals.clone()
    }

    /// Dual objective reconstructed from row duals and nonbasic bounds,
    /// together with the largest dual-feasibility violation.
    pub fn dual_objective(&mut self) -> (f64, f64) {
        let _ = self.row_duals();
        let total = self.n + self.m;
        let mut obj = 0.0;
        let mut worst: f64 = 0.0;
        for j in 0..total {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let d = self.reduced[j];
            let bound = match self.status[j] {
                VarStatus::AtLower => self.lb[j],
                VarStatus::AtUpper => self.ub[j],
                _ => 0.0,
            };
            if d != 0.0 {
                obj += d * bound;
            }
            if self.lb[j] != self.ub[j] {
                let viol = match self.status[j] {
                    VarStatus::AtLower => d.max(0.0),
                    VarStatus::AtUpper => (-d).max(0.0),
                    VarStatus::Free => d.abs(),
                    VarStatus::Basic => 0.0,
                };
                worst = worst.max(viol);
            }
        }
        (obj, worst)
    }
}
