//! Column generation over global activation patterns, used to build a
//! good starting schedule for the scalable models.

use std::collections::HashSet;

use super::{ScalableMap, ServiceWeights};
use crate::interference::{local_spectral_efficiency, restrict, NeighborhoodSet};
use crate::lp::{solve_lp, LinearModel, Relation, SolveStatus, VarId};
use crate::net::Network;
use crate::propagation::InterferenceMatrix;

/// Pessimistic rate of every member of a conflict-free global pattern.
fn pattern_rates(p: &[usize], m: &InterferenceMatrix, nb: &NeighborhoodSet) -> Vec<f64> {
    p.iter()
        .map(|&l| {
            local_spectral_efficiency(l, &restrict(p, &nb.members[l]), m, nb)
                .expect("view of a member")
        })
        .collect()
}

struct Master {
    patterns: Vec<Vec<usize>>,
    rates: Vec<Vec<f64>>,
}

struct MasterSolution {
    objective: f64,
    shares: Vec<f64>,
    link_price: Vec<f64>,
    slot_price: f64,
}

impl Master {
    fn add(&mut self, p: Vec<usize>, m: &InterferenceMatrix, nb: &NeighborhoodSet) {
        self.rates.push(pattern_rates(&p, m, nb));
        self.patterns.push(p);
    }

    /// Pattern LP over the `active` patterns.
    fn solve(
        &self,
        active: &[usize],
        net: &Network,
        w: &ServiceWeights,
        lambda: f64,
        uplink: bool,
    ) -> Option<MasterSolution> {
        let nl = net.num_links();
        let mut lp = LinearModel::new("pattern-master");
        let x: Vec<VarId> = active
            .iter()
            .map(|&a| lp.add_continuous(format!("x_{a}"), 0.0, 1.0))
            .collect();
        let rd: Vec<VarId> = (0..nl)
            .map(|l| lp.add_continuous(format!("rd_{l}"), 0.0, f64::INFINITY))
            .collect();
        let ru: Vec<VarId> = if uplink {
            (0..nl)
                .map(|l| lp.add_continuous(format!("ru_{l}"), 0.0, f64::INFINITY))
                .collect()
        } else {
            Vec::new()
        };
        let obj = lp.add_continuous("obj", 0.0, f64::INFINITY);
        let mut cap: Vec<Vec<(VarId, f64)>> = (0..nl)
            .map(|l| {
                let mut row = vec![(rd[l], 1.0)];
                if uplink {
                    row.push((ru[l], 1.0));
                }
                row
            })
            .collect();
        for (i, &a) in active.iter().enumerate() {
            for (&l, &g) in self.patterns[a].iter().zip(&self.rates[a]) {
                cap[l].push((x[i], -g));
            }
        }
        let resource = lp
            .add_constraint(
                "resource",
                x.iter().map(|&v| (v, 1.0)).collect(),
                Relation::Le,
                1.0,
            )
            .0;
        let cap_rows: Vec<usize> = cap
            .into_iter()
            .enumerate()
            .map(|(l, row)| {
                lp.add_constraint(format!("cap_{l}"), row, Relation::Le, 0.0)
                    .0
            })
            .collect();
        for i in net.clients() {
            let mut row: Vec<(VarId, f64)> =
                net.in_links(i).iter().map(|&l| (rd[l], 1.0)).collect();
            row.extend(net.out_links(i).iter().map(|&l| (rd[l], -1.0)));
            row.push((obj, -w.alpha[i]));
            lp.add_constraint(format!("down_{i}"), row, Relation::Ge, 0.0);
            if uplink {
                let mut row: Vec<(VarId, f64)> =
                    net.out_links(i).iter().map(|&l| (ru[l], 1.0)).collect();
                row.extend(net.in_links(i).iter().map(|&l| (ru[l], -1.0)));
                row.push((obj, -w.beta[i]));
                lp.add_constraint(format!("up_{i}"), row, Relation::Ge, 0.0);
            }
        }
        let mut objective = vec![(obj, 1.0)];
        if lambda > 0.0 {
            objective.extend(rd.iter().map(|&v| (v, -lambda)));
        }
        lp.set_objective(objective);
        let sol = solve_lp(&lp).ok()?;
        if sol.status != SolveStatus::Optimal {
            return None;
        }
        Some(MasterSolution {
            objective: sol.objective,
            shares: x.iter().map(|&v| sol.value(v)).collect(),
            link_price: cap_rows.iter().map(|&r| sol.duals[r].max(0.0)).collect(),
            slot_price: sol.duals[resource],
        })
    }
}

/// Greedy patterns of high priced rate, one per seed link.
fn price_patterns(
    price: &[f64],
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    seeds: usize,
) -> Vec<(f64, Vec<usize>)> {
    let nl = m.num_links();
    let mut order: Vec<usize> = (0..nl).filter(|&l| price[l] > 1e-12).collect();
    order.sort_by(|&a, &b| {
        (price[b] * m.snr(b))
            .total_cmp(&(price[a] * m.snr(a)))
            .then(a.cmp(&b))
    });
    let value = |p: &[usize]| -> f64 {
        p.iter()
            .zip(pattern_rates(p, m, nb))
            .map(|(&l, g)| price[l] * g)
            .sum()
    };
    let mut out = Vec::new();
    for s in 0..seeds.min(order.len()) {
        let mut p = vec![order[s]];
        let mut best = value(&p);
        for &l in &order {
            if p.contains(&l)
                || p.iter()
                    .any(|&k| m.is_conflict(k, l) || m.is_conflict(l, k))
            {
                continue;
            }
            let mut q = p.clone();
            let at = q.partition_point(|&k| k < l);
            q.insert(at, l);
            let v = value(&q);
            if v > best + 1e-12 {
                p = q;
                best = v;
            }
        }
        out.push((best, p));
    }
    out
}

const PRICING_ROUNDS: usize = 200;

/// Up to `t` slots of conflict-free global patterns with lengths, found by
/// column generation on the pattern LP with pessimistic rates and then
/// trimmed by repeatedly dropping the shortest slot. Slots come longest first.
pub fn initial_slots(
    net: &Network,
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    t: usize,
    w: &ServiceWeights,
    lambda: f64,
    uplink: bool,
) -> Option<Vec<(Vec<usize>, f64)>> {
    let nl = net.num_links();
    let mut master = Master {
        patterns: Vec::new(),
        rates: Vec::new(),
    };
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    for l in 0..nl {
        seen.insert(vec![l]);
        master.add(vec![l], m, nb);
    }
    let mut sol = master.solve(
        &(0..master.patterns.len()).collect::<Vec<_>>(),
        net,
        w,
        lambda,
        uplink,
    )?;
    for _ in 0..PRICING_ROUNDS {
        let mut added = 0;
        for (v, p) in price_patterns(&sol.link_price, m, nb, 8) {
            if v > sol.slot_price + 1e-9 && seen.insert(p.clone()) {
                master.add(p, m, nb);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
        sol = master.solve(
            &(0..master.patterns.len()).collect::<Vec<_>>(),
            net,
            w,
            lambda,
            uplink,
        )?;
    }
    log::debug!(
        "pattern master {:.6} over {} patterns",
        sol.objective,
        master.patterns.len()
    );

    let mut support: Vec<usize> = (0..master.patterns.len())
        .filter(|&a| sol.shares[a] > 1e-9)
        .collect();
    let mut shares: Vec<f64> = support.iter().map(|&a| sol.shares[a]).collect();
    while support.len() > t {
        let drop = (0..support.len())
            .min_by(|&i, &j| shares[i].total_cmp(&shares[j]))
            .unwrap();
        support.remove(drop);
        let s = master.solve(&support, net, w, lambda, uplink)?;
        let keep: Vec<usize> = (0..support.len()).filter(|&i| s.shares[i] > 1e-9).collect();
        shares = keep.iter().map(|&i| s.shares[i]).collect();
        support = keep.iter().map(|&i| support[i]).collect();
    }
    let mut slots: Vec<(Vec<usize>, f64)> = support
        .iter()
        .zip(&shares)
        .map(|(&a, &x)| (master.patterns[a].clone(), x.min(1.0)))
        .collect();
    slots.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Some(slots)
}

/// Start point for a scalable model built by `build_scalable_dl` or
/// `build_scalable_uldl` over the same inputs.
pub fn scalable_start(
    map: &ScalableMap,
    net: &Network,
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    w: &ServiceWeights,
) -> Option<Vec<f64>> {
    let slots = initial_slots(net, m, nb, map.slots, w, map.lambda, map.rate_up.is_some())?;
    map.start_from_slots(&slots)
}
