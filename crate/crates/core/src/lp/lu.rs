//! Sparse LU factorization of simplex bases with a product-form update file.
//!
//! The factorization is left-looking: each basis column is reduced against
//! the L columns computed so far (sparse triangular solve ordered by a depth
//! first search over the elimination graph), then a pivot row is chosen by
//! threshold partial pivoting with a static row-count tie break.

const PIVOT_THRESHOLD: f64 = 0.1;
const SINGULAR_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;
const NONE: usize = usize::MAX;

/// Column of a basis matrix, as `(row, value)` pairs.
pub(crate) type SparseColumn = Vec<(usize, f64)>;

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct BasisFactor {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_pos: Vec<usize>,
    l_cols: Vec<Vec<(usize, f64)>>,
    u_cols: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
    etas: Vec<Eta>,
    eta_nnz: usize,
    lu_nnz: usize,
}

/// Outcome of a factorization: positions whose column had to be replaced by
/// the (negated unit) logical column of the given row.
pub(crate) struct Replacement {
    pub pos: usize,
    pub row: usize,
}

impl BasisFactor {
    /// Factorize the basis whose column at position `p` is `columns[p]`.
    pub fn factorize(m: usize, columns: &[SparseColumn]) -> (BasisFactor, Vec<Replacement>) {
        debug_assert_eq!(columns.len(), m);
        let mut row_count = vec![0usize; m];
        for col in columns {
            for &(i, _) in col {
                row_count[i] += 1;
            }
        }
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&p| columns[p].len());

        let mut f = BasisFactor {
            m,
            pivot_row: Vec::with_capacity(m),
            pivot_pos: Vec::with_capacity(m),
            l_cols: Vec::with_capacity(m),
            u_cols: Vec::with_capacity(m),
            u_diag: Vec::with_capacity(m),
            etas: Vec::new(),
            eta_nnz: 0,
            lu_nnz: 0,
        };
        let mut row_step = vec![NONE; m];
        let mut x = vec![0.0f64; m];
        let mut mark = vec![0u32; m];
        let mut generation = 0u32;
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();
        let mut failed: Vec<usize> = Vec::new();

        for &p in &order {
            generation += 1;
            topo.clear();
            // Depth-first reach from the column pattern through L.
            for &(start, _) in &columns[p] {
                if mark[start] == generation {
                    continue;
                }
                mark[start] = generation;
                stack.push((start, 0));
                while let Some(&mut (row, ref mut child)) = stack.last_mut() {
                    let s = row_step[row];
                    let next = if s != NONE {
                        let lc = &f.l_cols[s];
                        let mut found = None;
                        while *child < lc.len() {
                            let r = lc[*child].0;
                            *child += 1;
                            if mark[r] != generation {
                                found = Some(r);
                                break;
                            }
                        }
                        found
                    } else {
                        None
                    };
                    match next {
                        Some(r) => {
                            mark[r] = generation;
                            stack.push((r, 0));
                        }
                        None => {
                            topo.push(row);
                            stack.pop();
                        }
                    }
                }
            }
            for &(i, v) in &columns[p] {
                x[i] += v;
            }
            // Reverse postorder is a topological order of the elimination.
            for &row in topo.iter().rev() {
                let s = row_step[row];
                if s == NONE {
                    continue;
                }
                let v = x[row];
                if v != 0.0 {
                    for &(r, l) in &f.l_cols[s] {
                        x[r] -= l * v;
                    }
                }
            }
            let mut amax = 0.0f64;
            for &row in &topo {
                if row_step[row] == NONE {
                    amax = amax.max(x[row].abs());
                }
            }
            if amax <= SINGULAR_TOL {
                for &row in &topo {
                    x[row] = 0.0;
                }
                failed.push(p);
                continue;
            }
            let mut best = NONE;
            for &row in &topo {
                if row_step[row] != NONE || x[row].abs() < PIVOT_THRESHOLD * amax {
                    continue;
                }
                if best == NONE
                    || row_count[row] < row_count[best]
                    || (row_count[row] == row_count[best] && x[row].abs() > x[best].abs())
                {
                    best = row;
                }
            }
            let k = f.pivot_row.len();
            let piv = x[best];
            let mut ucol = Vec::new();
            let mut lcol = Vec::new();
            for &row in &topo {
                let v = x[row];
                x[row] = 0.0;
                if row == best || v.abs() <= DROP_TOL {
                    continue;
                }
                let s = row_step[row];
                if s != NONE {
                    ucol.push((s, v));
                } else {
                    lcol.push((row, v / piv));
                }
            }
            f.lu_nnz += ucol.len() + lcol.len() + 1;
            row_step[best] = k;
            f.pivot_row.push(best);
            f.pivot_pos.push(p);
            f.u_cols.push(ucol);
            f.l_cols.push(lcol);
            f.u_diag.push(piv);
        }

        let mut replacements = Vec::new();
        if !failed.is_empty() {
            let free_rows: Vec<usize> = (0..m).filter(|&r| row_step[r] == NONE).collect();
            debug_assert_eq!(free_rows.len(), failed.len());
            for (&p, &r) in failed.iter().zip(&free_rows) {
                let k = f.pivot_row.len();
                row_step[r] = k;
                f.pivot_row.push(r);
                f.pivot_pos.push(p);
                f.u_cols.push(Vec::new());
                f.l_cols.push(Vec::new());
                f.u_diag.push(-1.0);
                replacements.push(Replacement { pos: p, row: r });
            }
        }
        (f, replacements)
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub fn eta_fill(&self) -> usize {
        self.eta_nnz
    }

    pub fn lu_nnz(&self) -> usize {
        self.lu_nnz
    }

    /// Solve `B z = rhs` in place. Input is indexed by row, output by basis position.
    pub fn ftran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        work.clear();
        work.resize(m, 0.0);
        for s in 0..m {
            let v = rhs[self.pivot_row[s]];
            if v != 0.0 {
                for &(r, l) in &self.l_cols[s] {
                    rhs[r] -= l * v;
                }
            }
        }
        // work[s] holds the step-indexed right-hand side for U.
        for s in 0..m {
            work[s] = rhs[self.pivot_row[s]];
        }
        for k in (0..m).rev() {
            let v = work[k] / self.u_diag[k];
            work[k] = v;
            if v != 0.0 {
                for &(s, u) in &self.u_cols[k] {
                    work[s] -= u * v;
                }
            }
        }
        for k in 0..m {
            rhs[self.pivot_pos[k]] = work[k];
        }
        for eta in &self.etas {
            let zp = rhs[eta.pos];
            if zp != 0.0 {
                let v = zp / eta.pivot;
                rhs[eta.pos] = v;
                for &(i, a) in &eta.others {
                    rhs[i] -= a * v;
                }
            }
        }
    }

    /// Solve `B^T z = rhs` in place. Input is indexed by basis position, output by row.
    pub fn btran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut s = rhs[eta.pos];
            for &(i, a) in &eta.others {
                s -= a * rhs[i];
            }
            rhs[eta.pos] = s / eta.pivot;
        }
        work.clear();
        work.resize(m, 0.0);
        for k in 0..m {
            let mut t = rhs[self.pivot_pos[k]];
            for &(s, u) in &self.u_cols[k] {
                t -= u * work[s];
            }
            work[k] = t / self.u_diag[k];
        }
        for s in (0..m).rev() {
            let mut z = work[s];
            for &(r, l) in &self.l_cols[s] {
                z -= l * rhs[r];
            }
            rhs[self.pivot_row[s]] = z;
        }
    }

    /// Record that basis position `pos` was replaced by a column whose
    /// FTRAN image (indexed by position) is `alpha`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let pivot = alpha[pos];
        let others: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > DROP_TOL)
            .map(|(i, &a)| (i, a))
            .collect();
        self.eta_nnz += others.len() + 1;
        self.etas.push(Eta { pos, pivot, others });
    }
}
