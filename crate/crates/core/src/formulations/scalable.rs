use serde::{Deserialize, Serialize};

use super::{check_matrix, resolve_lambda, FormulationError, ServiceWeights};
use crate::interference::{
    compatible, local_patterns, local_spectral_efficiency, restrict, NeighborhoodSet,
};
use crate::lp::{LinearModel, Relation, VarId};
use crate::net::Network;
use crate::propagation::InterferenceMatrix;

/// Optional model strengthening for the scalable formulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalableOptions {
    /// Add a binary on/off status per link and slot, tied to every local
    /// pattern that sees the link. Tightens the relaxation considerably.
    pub status_rows: bool,
    /// Split each slot at every node into receive and transmit time and cap
    /// link activity by both ends.
    pub node_rows: bool,
    /// Mark the pairwise consistency rows lazy.
    pub lazy_consistency: bool,
    /// Order slots by decreasing length.
    pub symmetry_breaking: bool,
}

impl Default for ScalableOptions {
    fn default() -> Self {
        ScalableOptions {
            status_rows: true,
            node_rows: true,
            lazy_consistency: true,
            symmetry_breaking: true,
        }
    }
}

/// Variable layout of a scalable model. Indexing is `[slot][link][pattern]`
/// for `q` and `x`, `[link][pattern]` for the pattern tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalableMap {
    pub slots: usize,
    pub num_vars: usize,
    /// Local patterns of each link (sorted members, always containing the link).
    pub patterns: Vec<Vec<Vec<usize>>>,
    /// Pessimistic spectral efficiency of each local pattern.
    pub gamma: Vec<Vec<f64>>,
    /// Neighborhood of each link.
    pub neighborhoods: Vec<Vec<usize>>,
    pub y: Vec<VarId>,
    /// Link status per slot; empty when status rows are disabled.
    pub status: Vec<Vec<VarId>>,
    pub q: Vec<Vec<Vec<VarId>>>,
    pub x: Vec<Vec<Vec<VarId>>>,
    pub rate_down: Vec<VarId>,
    pub rate_up: Option<Vec<VarId>>,
    pub objective: VarId,
    pub lambda: f64,
}

impl ScalableMap {
    /// Full variable vector realizing a slot schedule, for use as a start
    /// point. Each slot lists its active links and its length. Returns `None`
    /// when some link's view of a slot is not one of its local patterns, or
    /// when there are more slots than the model holds.
    pub fn start_from_slots(&self, slots: &[(Vec<usize>, f64)]) -> Option<Vec<f64>> {
        if slots.len() > self.slots {
            return None;
        }
        let mut values = vec![0.0; self.num_vars];
        for (m, (active, len)) in slots.iter().enumerate() {
            let mut active = active.clone();
            active.sort_unstable();
            values[self.y[m].0] = *len;
            for &l in &active {
                let view = restrict(&active, &self.neighborhoods[l]);
                let b = self.patterns[l].iter().position(|p| *p == view)?;
                values[self.q[m][l][b].0] = 1.0;
                values[self.x[m][l][b].0] = *len;
                if !self.status.is_empty() {
                    values[self.status[m][l].0] = 1.0;
                }
            }
        }
        Some(values)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Service {
    Down,
    Joint,
}

/// Max-min downlink service over `t` slots of consistent local patterns.
pub fn build_scalable_dl(
    net: &Network,
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    t: usize,
    w: &ServiceWeights,
    lambda: Option<f64>,
) -> Result<(LinearModel, ScalableMap), FormulationError> {
    build_scalable_with(net, m, nb, t, w, Some(lambda), ScalableOptions::default())
}

/// Max-min joint downlink/uplink service over `t` slots.
pub fn build_scalable_uldl(
    net: &Network,
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    t: usize,
    w: &ServiceWeights,
) -> Result<(LinearModel, ScalableMap), FormulationError> {
    build_scalable_with(net, m, nb, t, w, None, ScalableOptions::default())
}

/// Shared builder. `lambda` is `Some(..)` for the downlink model (with the
/// inner `None` selecting the default delay weight) and `None` for the joint
/// downlink/uplink model.
pub fn build_scalable_with(
    net: &Network,
    m: &InterferenceMatrix,
    nb: &NeighborhoodSet,
    t: usize,
    w: &ServiceWeights,
    lambda: Option<Option<f64>>,
    opts: ScalableOptions,
) -> Result<(LinearModel, ScalableMap), FormulationError> {
    check_matrix(net, m)?;
    if nb.num_links() != net.num_links() {
        return Err(FormulationError::Mismatch(format!(
            "{} neighborhoods, {} links",
            nb.num_links(),
            net.num_links()
        )));
    }
    if t == 0 {
        return Err(FormulationError::InvalidSlots);
    }
    let service = if lambda.is_some() {
        Service::Down
    } else {
        Service::Joint
    };
    w.validate(net, service == Service::Down)?;
    let lambda = match lambda {
        Some(l) => resolve_lambda(l, net, w)?,
        None => 0.0,
    };

    let nl = net.num_links();
    let patterns: Vec<Vec<Vec<usize>>> = (0..nl).map(|l| local_patterns(l, m, nb)).collect();
    let gamma: Vec<Vec<f64>> = patterns
        .iter()
        .enumerate()
        .map(|(l, ps)| {
            ps.iter()
                .map(|b| local_spectral_efficiency(l, b, m, nb).expect("local pattern"))
                .collect()
        })
        .collect();
    let partners: Vec<Vec<usize>> = (0..nl)
        .map(|l| (0..nl).filter(|&k| nb.interacts(l, k)).collect())
        .collect();

    let name = if service == Service::Down {
        "scalable-dl"
    } else {
        "scalable-uldl"
    };
    let mut model = LinearModel::new(name);
    let y: Vec<VarId> = (0..t)
        .map(|s| model.add_continuous(format!("y_{s}"), 0.0, 1.0))
        .collect();
    let mut status = Vec::new();
    let mut q = Vec::with_capacity(t);
    let mut x = Vec::with_capacity(t);
    for s in 0..t {
        if opts.status_rows {
            let z: Vec<VarId> = (0..nl)
                .map(|j| {
                    let v = model.add_binary(format!("z_{s}_{j}"));
                    model.set_branch_priority(v, 1);
                    v
                })
                .collect();
            status.push(z);
        }
        let mut qs = Vec::with_capacity(nl);
        let mut xs = Vec::with_capacity(nl);
        for l in 0..nl {
            let n = patterns[l].len();
            qs.push(
                (0..n)
                    .map(|b| model.add_binary(format!("q_{s}_{l}_{b}")))
                    .collect::<Vec<_>>(),
            );
            xs.push(
                (0..n)
                    .map(|b| model.add_continuous(format!("x_{s}_{l}_{b}"), 0.0, 1.0))
                    .collect::<Vec<_>>(),
            );
        }
        q.push(qs);
        x.push(xs);
    }
    let rd: Vec<VarId> = (0..nl)
        .map(|l| model.add_continuous(format!("rd_{l}"), 0.0, f64::INFINITY))
        .collect();
    let ru: Option<Vec<VarId>> = (service == Service::Joint).then(|| {
        (0..nl)
            .map(|l| model.add_continuous(format!("ru_{l}"), 0.0, f64::INFINITY))
            .collect()
    });
    let obj = model.add_continuous(
        if service == Service::Down { "d" } else { "c" },
        0.0,
        f64::INFINITY,
    );

    for l in 0..nl {
        let mut row = vec![(rd[l], 1.0)];
        if let Some(ru) = &ru {
            row.push((ru[l], 1.0));
        }
        for s in 0..t {
            row.extend(x[s][l].iter().zip(&gamma[l]).map(|(&v, &g)| (v, -g)));
        }
        model.add_constraint(format!("rate_{l}"), row, Relation::Le, 0.0);
    }
    for i in net.clients() {
        let mut row: Vec<(VarId, f64)> = net.in_links(i).iter().map(|&l| (rd[l], 1.0)).collect();
        row.extend(net.out_links(i).iter().map(|&l| (rd[l], -1.0)));
        row.push((obj, -w.alpha[i]));
        model.add_constraint(format!("flow_down_{i}"), row, Relation::Ge, 0.0);
        if let Some(ru) = &ru {
            let mut row: Vec<(VarId, f64)> =
                net.out_links(i).iter().map(|&l| (ru[l], 1.0)).collect();
            row.extend(net.in_links(i).iter().map(|&l| (ru[l], -1.0)));
            row.push((obj, -w.beta[i]));
            model.add_constraint(format!("flow_up_{i}"), row, Relation::Ge, 0.0);
        }
    }
    for s in 0..t {
        for l in 0..nl {
            let mut row: Vec<(VarId, f64)> = x[s][l].iter().map(|&v| (v, 1.0)).collect();
            row.push((y[s], -1.0));
            model.add_constraint(format!("slot_{s}_{l}"), row, Relation::Le, 0.0);
            for (b, &xv) in x[s][l].iter().enumerate() {
                model.add_constraint(
                    format!("act_{s}_{l}_{b}"),
                    vec![(xv, 1.0), (q[s][l][b], -1.0)],
                    Relation::Le,
                    0.0,
                );
            }
        }
    }
    if opts.node_rows {
        for s in 0..t {
            let nn = net.num_nodes();
            let recv: Vec<VarId> = (0..nn)
                .map(|v| model.add_continuous(format!("recv_{s}_{v}"), 0.0, 1.0))
                .collect();
            let send: Vec<VarId> = (0..nn)
                .map(|v| model.add_continuous(format!("send_{s}_{v}"), 0.0, 1.0))
                .collect();
            for v in 0..nn {
                model.add_constraint(
                    format!("duplex_{s}_{v}"),
                    vec![(recv[v], 1.0), (send[v], 1.0), (y[s], -1.0)],
                    Relation::Le,
                    0.0,
                );
            }
            for (l, link) in net.links.iter().enumerate() {
                for (end, tag) in [(recv[link.rx], "rx"), (send[link.tx], "tx")] {
                    let mut row: Vec<(VarId, f64)> = x[s][l].iter().map(|&v| (v, 1.0)).collect();
                    row.push((end, -1.0));
                    model.add_constraint(format!("{tag}_{s}_{l}"), row, Relation::Le, 0.0);
                }
            }
        }
    }
    model.add_constraint(
        "resource",
        y.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Le,
        1.0,
    );
    if opts.symmetry_breaking {
        for s in 1..t {
            model.add_constraint(
                format!("order_{s}"),
                vec![(y[s - 1], 1.0), (y[s], -1.0)],
                Relation::Ge,
                0.0,
            );
        }
    }
    if opts.status_rows {
        for s in 0..t {
            for l in 0..nl {
                for &j in &nb.members[l] {
                    let (with, without): (Vec<usize>, Vec<usize>) = (0..patterns[l].len())
                        .partition(|&b| patterns[l][b].binary_search(&j).is_ok());
                    if !with.is_empty() {
                        let mut row: Vec<(VarId, f64)> =
                            with.iter().map(|&b| (q[s][l][b], 1.0)).collect();
                        row.push((status[s][j], -1.0));
                        model.add_constraint(format!("on_{s}_{l}_{j}"), row, Relation::Le, 0.0);
                    }
                    if !without.is_empty() {
                        let mut row: Vec<(VarId, f64)> =
                            without.iter().map(|&b| (q[s][l][b], 1.0)).collect();
                        row.push((status[s][j], 1.0));
                        model.add_constraint(format!("off_{s}_{l}_{j}"), row, Relation::Le, 1.0);
                    }
                }
            }
        }
    }
    // Pairwise consistency, bundled per (l, B, k). The k = l rows limit each
    // link to one local pattern per slot.
    for s in 0..t {
        for l in 0..nl {
            for (b, pb) in patterns[l].iter().enumerate() {
                for &k in &partners[l] {
                    let clash: Vec<usize> = if k == l {
                        (0..patterns[l].len()).filter(|&a| a != b).collect()
                    } else {
                        (0..patterns[k].len())
                            .filter(|&a| !compatible(l, pb, k, &patterns[k][a], nb))
                            .collect()
                    };
                    if clash.is_empty() {
                        continue;
                    }
                    let mut row = vec![(q[s][l][b], 1.0)];
                    row.extend(clash.iter().map(|&a| (q[s][k][a], 1.0)));
                    let name = format!("cons_{s}_{l}_{b}_{k}");
                    if opts.lazy_consistency && (k != l || opts.status_rows) {
                        model.add_lazy_constraint(name, row, Relation::Le, 1.0);
                    } else {
                        model.add_constraint(name, row, Relation::Le, 1.0);
                    }
                }
            }
        }
    }
    let mut objective = vec![(obj, 1.0)];
    if lambda > 0.0 {
        objective.extend(rd.iter().map(|&v| (v, -lambda)));
    }
    model.set_objective(objective);

    let map = ScalableMap {
        slots: t,
        num_vars: model.num_vars(),
        patterns,
        gamma,
        neighborhoods: nb.members.clone(),
        y,
        status,
        q,
        x,
        rate_down: rd,
        rate_up: ru,
        objective: obj,
        lambda,
    };
    Ok((model, map))
}
