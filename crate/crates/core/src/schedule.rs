//! Link-activation schedules: extraction from solver output, validation and
//! exact throughput evaluation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::formulations::{Allocation, ScalableMap, ServiceWeights};
use crate::interference::{restrict, spectral_efficiency};
use crate::lp::{solve_lp, LinearModel, LpError, Relation, Solution, VarId};
use crate::net::Network;
use crate::propagation::InterferenceMatrix;

/// Slots shorter than this are dropped on extraction.
pub const MIN_SLOT: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("slot {slot}: local patterns of links {l} and {k} disagree")]
    InconsistentSolution { slot: usize, l: usize, k: usize },
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("reference schedule delivers zero max-min service")]
    DivisionByZero,
    #[error("solution does not match the variable map: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    /// Sorted active links.
    pub links: Vec<usize>,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub slots: Vec<Slot>,
    pub provenance: String,
}

impl Schedule {
    pub fn total_length(&self) -> f64 {
        self.slots.iter().map(|s| s.length).sum()
    }

    /// One slot per allocated pattern.
    pub fn from_allocation(alloc: &Allocation, provenance: impl Into<String>) -> Schedule {
        let slots = alloc
            .merged()
            .patterns
            .into_iter()
            .filter(|p| p.1 >= MIN_SLOT)
            .map(|(links, length)| Slot { links, length })
            .collect();
        Schedule {
            slots,
            provenance: provenance.into(),
        }
    }

    /// Slots as (links, length) pairs, the shape taken by
    /// [`ScalableMap::start_from_slots`].
    pub fn as_pairs(&self) -> Vec<(Vec<usize>, f64)> {
        self.slots
            .iter()
            .map(|s| (s.links.clone(), s.length))
            .collect()
    }

    /// Resource sum, slot lengths, link ids and half-duplex operation.
    pub fn validate(&self, net: &Network) -> Result<(), ScheduleError> {
        let total = self.total_length();
        if total > 1.0 + 1e-9 {
            return Err(ScheduleError::Invalid(format!(
                "slot lengths sum to {total}"
            )));
        }
        let mut tx = vec![usize::MAX; net.num_nodes()];
        let mut rx = vec![usize::MAX; net.num_nodes()];
        for (m, slot) in self.slots.iter().enumerate() {
            if !(slot.length >= 0.0 && slot.length.is_finite()) {
                return Err(ScheduleError::Invalid(format!(
                    "slot {m} has length {}",
                    slot.length
                )));
            }
            if slot.links.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ScheduleError::Invalid(format!(
                    "slot {m} links are not sorted and distinct"
                )));
            }
            for &l in &slot.links {
                let link = net.links.get(l).ok_or_else(|| {
                    ScheduleError::Invalid(format!("slot {m} names unknown link {l}"))
                })?;
                tx[link.tx] = m;
                rx[link.rx] = m;
            }
            if let Some(v) = (0..net.num_nodes()).find(|&v| tx[v] == m && rx[v] == m) {
                return Err(ScheduleError::Invalid(format!(
                    "node {v} transmits and receives in slot {m}"
                )));
            }
        }
        Ok(())
    }

    /// Exact per-link capacity Σ_m y_m γ_{l,P_m}.
    pub fn capacities(&self, m: &InterferenceMatrix) -> Vec<f64> {
        let mut cap = vec![0.0; m.num_links()];
        for slot in &self.slots {
            for &l in &slot.links {
                cap[l] +=
                    slot.length * spectral_efficiency(l, &slot.links, m).expect("member of slot");
            }
        }
        cap
    }
}

/// Read the global patterns out of a scalable-model solution. Each slot's
/// pattern is the union of the local patterns switched on in it.
pub fn extract_schedule(sol: &Solution, map: &ScalableMap) -> Result<Schedule, ScheduleError> {
    if sol.values.len() != map.num_vars {
        return Err(ScheduleError::Mismatch(format!(
            "{} values for {} variables",
            sol.values.len(),
            map.num_vars
        )));
    }
    let mut slots = Vec::new();
    for s in 0..map.slots {
        let length = sol.value(map.y[s]);
        if length < MIN_SLOT {
            continue;
        }
        let mut on: Vec<(usize, usize)> = Vec::new();
        for (l, qs) in map.q[s].iter().enumerate() {
            for (b, &v) in qs.iter().enumerate() {
                if sol.value(v) > 0.5 {
                    if on.last().is_some_and(|&(k, _)| k == l) {
                        return Err(ScheduleError::InconsistentSolution { slot: s, l, k: l });
                    }
                    on.push((l, b));
                }
            }
        }
        for (i, &(l, b)) in on.iter().enumerate() {
            for &(k, a) in &on[i + 1..] {
                let pb = &map.patterns[l][b];
                let pa = &map.patterns[k][a];
                if restrict(pa, &map.neighborhoods[l]) != restrict(pb, &map.neighborhoods[k]) {
                    return Err(ScheduleError::InconsistentSolution { slot: s, l, k });
                }
            }
        }
        let mut links: Vec<usize> = on
            .iter()
            .flat_map(|&(l, b)| map.patterns[l][b].iter().copied())
            .collect();
        links.sort_unstable();
        links.dedup();
        if !links.is_empty() {
            slots.push(Slot { links, length });
        }
    }
    Ok(Schedule {
        slots,
        provenance: String::new(),
    })
}

/// Exact throughput delivered by a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    /// Exact link capacities.
    pub capacity: Vec<f64>,
    pub rate_down: Vec<f64>,
    pub rate_up: Vec<f64>,
    /// Net downlink service per node (zero at gateways).
    pub service_down: Vec<f64>,
    pub service_up: Vec<f64>,
    pub max_min: f64,
    pub total_rate: f64,
}

impl ThroughputReport {
    /// `node,d,u` rows for client nodes.
    pub fn write_node_csv<W: Write>(&self, net: &Network, out: W) -> Result<(), ScheduleError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "d", "u"]).map_err(csv_err)?;
        for i in net.clients() {
            w.write_record([
                i.to_string(),
                fmt(self.service_down[i]),
                fmt(self.service_up[i]),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `link,tx,rx,capacity,utilization` rows.
    pub fn write_link_csv<W: Write>(&self, net: &Network, out: W) -> Result<(), ScheduleError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["link", "tx", "rx", "capacity", "utilization"])
            .map_err(csv_err)?;
        for (l, link) in net.links.iter().enumerate() {
            let used = self.rate_down[l] + self.rate_up[l];
            let util = if self.capacity[l] > 0.0 {
                used / self.capacity[l]
            } else {
                0.0
            };
            w.write_record([
                l.to_string(),
                link.tx.to_string(),
                link.rx.to_string(),
                fmt(self.capacity[l]),
                fmt(util),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.9}")
}

fn csv_err(e: csv::Error) -> ScheduleError {
    ScheduleError::Io(std::io::Error::other(e))
}

/// Exact capacities under the full matrix, then the best max-min routing
/// over those capacities. Ties are broken toward the least total link rate.
pub fn evaluate_schedule(
    schedule: &Schedule,
    m: &InterferenceMatrix,
    net: &Network,
    w: &ServiceWeights,
) -> Result<ThroughputReport, ScheduleError> {
    schedule.validate(net)?;
    let nl = net.num_links();
    let capacity = schedule.capacities(m);
    let clients = net.clients();
    let has_up = clients.iter().any(|&i| w.beta[i] > 0.0);
    let weight_sum: f64 = clients.iter().map(|&i| w.alpha[i] + w.beta[i]).sum();
    if !(weight_sum > 0.0) {
        return Err(ScheduleError::Invalid(
            "service weights are all zero".into(),
        ));
    }
    let penalty = 0.5 / (nl.max(1) as f64 * weight_sum);

    let mut lp = LinearModel::new("evaluate");
    let rd: Vec<VarId> = (0..nl)
        .map(|l| lp.add_continuous(format!("rd_{l}"), 0.0, f64::INFINITY))
        .collect();
    let ru: Vec<VarId> = if has_up {
        (0..nl)
            .map(|l| lp.add_continuous(format!("ru_{l}"), 0.0, f64::INFINITY))
            .collect()
    } else {
        Vec::new()
    };
    let t = lp.add_continuous("t", 0.0, f64::INFINITY);
    for l in 0..nl {
        let mut row = vec![(rd[l], 1.0)];
        if has_up {
            row.push((ru[l], 1.0));
        }
        lp.add_constraint(format!("cap_{l}"), row, Relation::Le, capacity[l]);
    }
    for &i in &clients {
        let mut row: Vec<(VarId, f64)> = net.in_links(i).iter().map(|&l| (rd[l], 1.0)).collect();
        row.extend(net.out_links(i).iter().map(|&l| (rd[l], -1.0)));
        row.push((t, -w.alpha[i]));
        lp.add_constraint(format!("down_{i}"), row, Relation::Ge, 0.0);
        if has_up {
            let mut row: Vec<(VarId, f64)> =
                net.out_links(i).iter().map(|&l| (ru[l], 1.0)).collect();
            row.extend(net.in_links(i).iter().map(|&l| (ru[l], -1.0)));
            row.push((t, -w.beta[i]));
            lp.add_constraint(format!("up_{i}"), row, Relation::Ge, 0.0);
        }
    }
    let mut obj = vec![(t, 1.0)];
    obj.extend(rd.iter().chain(&ru).map(|&v| (v, -penalty)));
    lp.set_objective(obj);
    let sol = solve_lp(&lp)?;

    let rate_down: Vec<f64> = rd.iter().map(|&v| sol.value(v)).collect();
    let rate_up: Vec<f64> = if has_up {
        ru.iter().map(|&v| sol.value(v)).collect()
    } else {
        vec![0.0; nl]
    };
    let mut service_down = vec![0.0; net.num_nodes()];
    let mut service_up = vec![0.0; net.num_nodes()];
    for &i in &clients {
        service_down[i] = net.in_links(i).iter().map(|&l| rate_down[l]).sum::<f64>()
            - net.out_links(i).iter().map(|&l| rate_down[l]).sum::<f64>();
        service_up[i] = net.out_links(i).iter().map(|&l| rate_up[l]).sum::<f64>()
            - net.in_links(i).iter().map(|&l| rate_up[l]).sum::<f64>();
    }
    let mut max_min = f64::INFINITY;
    for &i in &clients {
        if w.alpha[i] > 0.0 {
            max_min = max_min.min(service_down[i] / w.alpha[i]);
        }
        if w.beta[i] > 0.0 {
            max_min = max_min.min(service_up[i] / w.beta[i]);
        }
    }
    let max_min = max_min.max(0.0);
    let total_rate = rate_down.iter().chain(&rate_up).sum();
    Ok(ThroughputReport {
        capacity,
        rate_down,
        rate_up,
        service_down,
        service_up,
        max_min,
        total_rate,
    })
}

/// Relative max-min loss of `candidate` against `reference`, both evaluated
/// under the full matrix.
pub fn degradation(
    candidate: &Schedule,
    reference: &Schedule,
    m: &InterferenceMatrix,
    net: &Network,
    w: &ServiceWeights,
) -> Result<f64, ScheduleError> {
    let b = evaluate_schedule(reference, m, net, w)?.max_min;
    if b <= 0.0 {
        return Err(ScheduleError::DivisionByZero);
    }
    let a = evaluate_schedule(candidate, m, net, w)?.max_min;
    Ok((b - a) / b)
}
