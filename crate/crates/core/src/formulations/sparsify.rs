use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::interference::spectral_efficiency;
use crate::net::Network;
use crate::propagation::InterferenceMatrix;

/// Resource shares over global activation patterns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    /// (sorted pattern, share) pairs.
    pub patterns: Vec<(Vec<usize>, f64)>,
}

impl Allocation {
    pub fn total(&self) -> f64 {
        self.patterns.iter().map(|p| p.1).sum()
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Same allocation with duplicate patterns merged and zero shares removed.
    pub fn merged(&self) -> Allocation {
        let mut acc: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (p, share) in &self.patterns {
            let mut key = p.clone();
            key.sort_unstable();
            key.dedup();
            *acc.entry(key).or_insert(0.0) += share;
        }
        Allocation {
            patterns: acc.into_iter().filter(|p| p.1 > 0.0).collect(),
        }
    }
}

/// Net rate delivered to every node under one unit of `pattern`: incoming
/// minus outgoing link rates.
fn pattern_column(pattern: &[usize], net: &Network, m: &InterferenceMatrix) -> Vec<f64> {
    let mut col = vec![0.0; net.num_nodes()];
    for &l in pattern {
        let g = spectral_efficiency(l, pattern, m).expect("member of pattern");
        let link = &net.links[l];
        col[link.rx] += g;
        col[link.tx] -= g;
    }
    col
}

/// Downlink service d_i of every node when each link carries its full capacity.
pub fn node_service(alloc: &Allocation, net: &Network, m: &InterferenceMatrix) -> Vec<f64> {
    let mut d = vec![0.0; net.num_nodes()];
    for (p, share) in &alloc.patterns {
        for (di, c) in d.iter_mut().zip(pattern_column(p, net, m)) {
            *di += share * c;
        }
    }
    d
}

/// Nonzero vector in the null space of the matrix whose columns are `cols`,
/// which must outnumber the rows. Gaussian elimination with complete
/// pivoting; the free column is the one left over when the remaining
/// entries fall below a tolerance relative to the first pivot.
fn null_vector(cols: &[Vec<f64>]) -> Vec<f64> {
    let rows = cols[0].len();
    let n = cols.len();
    let mut a: Vec<Vec<f64>> = (0..rows)
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rank = 0;
    let mut tol = 0.0;
    while rank < rows {
        let mut best = (0.0, rank, rank);
        for (i, row) in a.iter().enumerate().skip(rank) {
            for (j, v) in row.iter().enumerate().skip(rank) {
                if v.abs() > best.0 {
                    best = (v.abs(), i, j);
                }
            }
        }
        if rank == 0 {
            tol = best.0 * 1e-11;
        }
        if best.0 <= tol {
            break;
        }
        a.swap(rank, best.1);
        for row in a.iter_mut() {
            row.swap(rank, best.2);
        }
        order.swap(rank, best.2);
        let p = a[rank][rank];
        for v in a[rank].iter_mut() {
            *v /= p;
        }
        let pivot_row = a[rank].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i != rank && row[rank] != 0.0 {
                let f = row[rank];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        rank += 1;
    }
    let mut z = vec![0.0; n];
    z[order[rank]] = 1.0;
    for i in 0..rank {
        z[order[i]] = -a[i][rank];
    }
    z
}

/// Reduce an allocation to at most N+1 patterns with the same node service
/// vector and the same total share.
pub fn sparsify_allocation(
    alloc: &Allocation,
    net: &Network,
    m: &InterferenceMatrix,
) -> Allocation {
    let merged = alloc.merged();
    let limit = net.num_nodes() + 1;
    if merged.len() <= limit {
        return merged;
    }
    let (mut pats, mut shares): (Vec<Vec<usize>>, Vec<f64>) = merged.patterns.into_iter().unzip();
    let mut cols: Vec<Vec<f64>> = pats
        .iter()
        .map(|p| {
            let mut c = pattern_column(p, net, m);
            c.push(1.0);
            c
        })
        .collect();
    while pats.len() > limit {
        let k = limit + 1;
        let z = null_vector(&cols[..k]);
        // The resource row sums z to zero, so some entry is positive.
        let (mut t, mut hit) = (f64::INFINITY, usize::MAX);
        for i in 0..k {
            if z[i] > 0.0 && shares[i] / z[i] < t {
                t = shares[i] / z[i];
                hit = i;
            }
        }
        for i in 0..k {
            shares[i] -= t * z[i];
        }
        shares[hit] = 0.0;
        let mut i = 0;
        while i < pats.len() {
            if shares[i] <= 0.0 {
                pats.swap_remove(i);
                shares.swap_remove(i);
                cols.swap_remove(i);
            } else {
                i += 1;
            }
        }
    }
    Allocation {
        patterns: pats.into_iter().zip(shares).collect(),
    }
}
