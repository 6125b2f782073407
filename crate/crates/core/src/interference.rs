//! Link spectral efficiency, interference neighborhoods and local patterns.

use serde::{Deserialize, Serialize};

use crate::propagation::InterferenceMatrix;

/// Interference threshold below the noise level used to form neighborhoods.
pub const DEFAULT_THRESHOLD_DB: f64 = 3.0;
/// Largest number of finite interferers kept in a neighborhood.
pub const DEFAULT_NEIGHBORHOOD_CAP: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum InterferenceError {
    #[error("link {0} is not active in the pattern")]
    LinkNotInPattern(usize),
    #[error("link {member} is outside the neighborhood of link {link}")]
    NotInNeighborhood { link: usize, member: usize },
}

fn rate(signal: f64, noise_plus_interference: f64) -> f64 {
    if noise_plus_interference.is_infinite() {
        0.0
    } else {
        (1.0 + signal / noise_plus_interference).log2()
    }
}

/// Exact spectral efficiency (bits/s/Hz) of link `l` while `pattern` is active.
pub fn spectral_efficiency(
    l: usize,
    pattern: &[usize],
    m: &InterferenceMatrix,
) -> Result<f64, InterferenceError> {
    if !pattern.contains(&l) {
        return Err(InterferenceError::LinkNotInPattern(l));
    }
    let interference: f64 = pattern
        .iter()
        .filter(|&&k| k != l)
        .map(|&k| m.get(k, l))
        .sum();
    Ok(rate(m.signal[l], m.noise + interference))
}

/// Interference-free spectral efficiency of link `l`.
pub fn nominal_rate(l: usize, m: &InterferenceMatrix) -> f64 {
    rate(m.signal[l], m.noise)
}

/// Per-link interference neighborhoods and the residual interference outside them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSet {
    /// Sorted members of each neighborhood; always contains the link itself.
    pub members: Vec<Vec<usize>>,
    /// Summed finite interference from links outside the neighborhood.
    pub residual: Vec<f64>,
    pub threshold_db: f64,
    pub cap: Option<usize>,
}

impl NeighborhoodSet {
    pub fn num_links(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, l: usize, k: usize) -> bool {
        self.members[l].binary_search(&k).is_ok()
    }

    pub fn max_size(&self) -> usize {
        self.members.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// True when the neighborhoods of `l` and `k` overlap (which covers
    /// `l ∈ Λ_k` and `k ∈ Λ_l`, as every link belongs to its own).
    pub fn interacts(&self, l: usize, k: usize) -> bool {
        let (a, b) = (&self.members[l], &self.members[k]);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Human-readable dump, one line per link.
    pub fn describe(&self) -> String {
        let mut s = format!(
            "threshold {} dB below noise, cap {:?}\n",
            self.threshold_db, self.cap
        );
        for (l, mem) in self.members.iter().enumerate() {
            s.push_str(&format!(
                "link {l}: residual {:.6e}, neighbors {:?}\n",
                self.residual[l], mem
            ));
        }
        s
    }
}

/// Neighborhoods with the default size cap.
pub fn build_neighborhoods(m: &InterferenceMatrix, threshold_db: f64) -> NeighborhoodSet {
    build_neighborhoods_with(m, threshold_db, Some(DEFAULT_NEIGHBORHOOD_CAP))
}

/// Λ_l holds `l`, every conflicting link and every link whose interference
/// on `l` is at least `threshold_db` below the noise. With a cap, only the
/// strongest finite interferers are kept; the rest join the residual floor.
pub fn build_neighborhoods_with(
    m: &InterferenceMatrix,
    threshold_db: f64,
    cap: Option<usize>,
) -> NeighborhoodSet {
    let n = m.num_links();
    let level = m.noise * 10f64.powf(-threshold_db / 10.0);
    let mut members = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    for l in 0..n {
        let mut set = vec![l];
        let mut strong: Vec<(f64, usize)> = Vec::new();
        let mut floor = 0.0;
        for k in (0..n).filter(|&k| k != l) {
            let v = m.get(k, l);
            if v == f64::INFINITY {
                set.push(k);
            } else if v >= level && v > 0.0 {
                strong.push((v, k));
            } else {
                floor += v;
            }
        }
        strong.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let keep = cap.unwrap_or(usize::MAX).min(strong.len());
        for &(v, _) in &strong[keep..] {
            floor += v;
        }
        set.extend(strong[..keep].iter().map(|&(_, k)| k));
        set.sort_unstable();
        members.push(set);
        residual.push(floor);
    }
    NeighborhoodSet {
        members,
        residual,
        threshold_db,
        cap,
    }
}

/// Every neighborhood is the whole link set and the residual floor is zero.
pub fn global_neighborhoods(m: &InterferenceMatrix) -> NeighborhoodSet {
    let n = m.num_links();
    NeighborhoodSet {
        members: (0..n).map(|_| (0..n).collect()).collect(),
        residual: vec![0.0; n],
        threshold_db: f64::INFINITY,
        cap: None,
    }
}

/// Pessimistic local spectral efficiency γ_l^B: interference from links
/// outside Λ_l is assumed always present.
pub fn local_spectral_efficiency(
    l: usize,
    b: &[usize],
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
) -> Result<f64, InterferenceError> {
    if !b.contains(&l) {
        return Err(InterferenceError::LinkNotInPattern(l));
    }
    if let Some(&k) = b.iter().find(|&&k| !nb.contains(l, k)) {
        return Err(InterferenceError::NotInNeighborhood { link: l, member: k });
    }
    let interference: f64 = b.iter().filter(|&&k| k != l).map(|&k| m.get(k, l)).sum();
    Ok(rate(m.signal[l], m.noise + interference + nb.residual[l]))
}

/// Sorted intersection of a sorted pattern with a sorted neighborhood.
pub fn restrict(pattern: &[usize], hood: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < pattern.len() && j < hood.len() {
        match pattern[i].cmp(&hood[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(pattern[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Local pattern `b` of link `l` and local pattern `a` of link `k` agree on
/// every link both neighborhoods see: A ∩ Λ_l = B ∩ Λ_k. Patterns are sorted.
pub fn compatible(l: usize, b: &[usize], k: usize, a: &[usize], nb: &NeighborhoodSet) -> bool {
    restrict(a, &nb.members[l]) == restrict(b, &nb.members[k])
}

/// Local patterns of link `l` that can carry traffic: subsets of Λ_l that
/// contain `l` and hold no conflicting pair. Patterns are sorted; the list
/// is ordered by the bitmask over the free members.
pub fn local_patterns(l: usize, m: &InterferenceMatrix, nb: &NeighborhoodSet) -> Vec<Vec<usize>> {
    let free: Vec<usize> = nb.members[l]
        .iter()
        .copied()
        .filter(|&k| k != l && !m.is_conflict(k, l) && !m.is_conflict(l, k))
        .collect();
    assert!(
        free.len() < 26,
        "neighborhood of link {l} is too large to enumerate ({} members)",
        free.len()
    );
    let f = free.len();
    let mut clash = vec![0u32; f];
    for i in 0..f {
        for j in 0..f {
            if i != j && (m.is_conflict(free[i], free[j]) || m.is_conflict(free[j], free[i])) {
                clash[i] |= 1 << j;
            }
        }
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << f) {
        if (0..f).any(|i| mask & (1 << i) != 0 && clash[i] & mask != 0) {
            continue;
        }
        let mut p: Vec<usize> = (0..f)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| free[i])
            .collect();
        p.push(l);
        p.sort_unstable();
        out.push(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(n: usize) -> InterferenceMatrix {
        InterferenceMatrix::with_signal(vec![10.0; n], 1.0)
    }

    #[test]
    fn nominal_rate_at_ten_db() {
        let m = matrix(2);
        assert!((spectral_efficiency(0, &[0], &m).unwrap() - 11f64.log2()).abs() < 1e-12);
        assert!((11f64.log2() - 3.4594).abs() < 1e-4);
    }

    #[test]
    fn one_noise_level_interferer() {
        let mut m = matrix(2);
        m.set(1, 0, 1.0);
        assert!((spectral_efficiency(0, &[0, 1], &m).unwrap() - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn conflict_gives_zero_rate() {
        let mut m = matrix(2);
        m.set(1, 0, f64::INFINITY);
        assert_eq!(spectral_efficiency(0, &[0, 1], &m).unwrap(), 0.0);
        assert_eq!(
            spectral_efficiency(0, &[1], &m),
            Err(InterferenceError::LinkNotInPattern(0))
        );
    }

    #[test]
    fn threshold_boundary() {
        let mut m = matrix(3);
        m.set(1, 0, 0.5);
        m.set(2, 0, 0.6);
        let nb = build_neighborhoods(&m, 3.0);
        assert_eq!(nb.members[0], vec![0, 2]);
        assert!((nb.residual[0] - 0.5).abs() < 1e-15);
        // Exactly at the threshold counts as inside.
        m.set(1, 0, 10f64.powf(-0.3));
        let nb = build_neighborhoods(&m, 3.0);
        assert_eq!(nb.members[0], vec![0, 1, 2]);
    }

    #[test]
    fn quiet_matrix_keeps_only_conflicts() {
        let mut m = matrix(3);
        m.set(1, 0, f64::INFINITY);
        let nb = build_neighborhoods(&m, 3.0);
        assert_eq!(nb.members[0], vec![0, 1]);
        assert_eq!(nb.members[2], vec![2]);
        assert_eq!(nb.residual, vec![0.0; 3]);
    }

    #[test]
    fn cap_folds_weakest_into_floor() {
        let mut m = matrix(5);
        for (k, v) in [(1, 4.0), (2, 3.0), (3, 2.0), (4, f64::INFINITY)] {
            m.set(k, 0, v);
        }
        let nb = build_neighborhoods_with(&m, 3.0, Some(2));
        assert_eq!(nb.members[0], vec![0, 1, 2, 4]);
        assert!((nb.residual[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn local_rate_with_unit_floor() {
        let mut m = matrix(3);
        m.set(1, 0, 0.1);
        m.set(2, 0, 0.9);
        let nb = build_neighborhoods_with(&m, -1.0, None);
        // Threshold is 1.26 n: both interferers fall into the floor of 1.0.
        assert!((local_spectral_efficiency(0, &[0], &m, &nb).unwrap() - 6f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn zero_floor_matches_exact_rate() {
        let mut m = matrix(3);
        m.set(1, 0, 0.7);
        m.set(2, 0, 2.0);
        let nb = global_neighborhoods(&m);
        let local = local_spectral_efficiency(0, &[0, 2], &m, &nb).unwrap();
        assert_eq!(local, spectral_efficiency(0, &[0, 2], &m).unwrap());
    }

    #[test]
    fn compatibility_cases() {
        // Λ_0 = {0, 2}, Λ_1 = {1, 2}: link 2 is seen by both.
        let nb = NeighborhoodSet {
            members: vec![vec![0, 2], vec![1, 2], vec![2], vec![3]],
            residual: vec![0.0; 4],
            threshold_db: 3.0,
            cap: None,
        };
        assert!(!compatible(0, &[0, 2], 1, &[1], &nb));
        assert!(compatible(0, &[0, 2], 1, &[1, 2], &nb));
        assert!(compatible(0, &[0], 0, &[0], &nb));
        assert!(compatible(0, &[0, 2], 3, &[3], &nb));
        assert!(!nb.interacts(0, 3));
        assert!(nb.interacts(0, 1));
    }

    #[test]
    fn local_patterns_skip_conflicts() {
        let mut m = matrix(4);
        m.set(1, 0, f64::INFINITY);
        m.set(2, 3, f64::INFINITY);
        let nb = global_neighborhoods(&m);
        let p = local_patterns(0, &m, &nb);
        assert_eq!(p, vec![vec![0], vec![0, 2], vec![0, 3]]);
    }
}
