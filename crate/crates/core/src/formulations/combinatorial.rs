use serde::{Deserialize, Serialize};

use super::{check_matrix, resolve_lambda, FormulationError, ServiceWeights};
use crate::interference::spectral_efficiency;
use crate::lp::{LinearModel, Relation, Solution, VarId};
use crate::net::Network;
use crate::propagation::InterferenceMatrix;

/// Every nonempty link subset without a conflicting pair, as sorted link
/// lists ordered by bitmask.
pub fn enumerate_patterns(
    m: &InterferenceMatrix,
    cap: usize,
) -> Result<Vec<Vec<usize>>, FormulationError> {
    let n = m.num_links();
    if n > cap || n >= 32 {
        return Err(FormulationError::TooManyLinks { links: n, cap });
    }
    let mut clash = vec![0u32; n];
    for k in 0..n {
        for l in 0..n {
            if k != l && (m.is_conflict(k, l) || m.is_conflict(l, k)) {
                clash[k] |= 1 << l;
            }
        }
    }
    let mut out = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let ok = (0..n)
            .filter(|&l| mask & (1 << l) != 0)
            .all(|l| clash[l] & mask == 0);
        if ok {
            out.push((0..n).filter(|&l| mask & (1 << l) != 0).collect());
        }
    }
    Ok(out)
}

/// Variable layout of a combinatorial model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinatorialMap {
    pub patterns: Vec<Vec<usize>>,
    /// Exact spectral efficiency of each member of each pattern.
    pub gamma: Vec<Vec<f64>>,
    pub x: Vec<VarId>,
    /// Downlink link rates (all link rates for the downlink-only model).
    pub rate_down: Vec<VarId>,
    pub rate_up: Option<Vec<VarId>>,
    /// Per-node downlink service, `None` at gateways.
    pub service_down: Vec<Option<VarId>>,
    pub service_up: Option<Vec<Option<VarId>>>,
    /// The max-min variable (`d` or `c`).
    pub objective: VarId,
    pub lambda: f64,
}

impl CombinatorialMap {
    /// Patterns with a positive share in `sol`.
    pub fn allocation(&self, sol: &Solution) -> super::Allocation {
        let patterns = self
            .patterns
            .iter()
            .zip(&self.x)
            .filter_map(|(p, &v)| {
                let share = sol.value(v);
                (share > 1e-12).then(|| (p.clone(), share.min(1.0)))
            })
            .collect();
        super::Allocation { patterns }
    }
}

fn pattern_gammas(patterns: &[Vec<usize>], m: &InterferenceMatrix) -> Vec<Vec<f64>> {
    patterns
        .iter()
        .map(|p| {
            p.iter()
                .map(|&l| spectral_efficiency(l, p, m).expect("member of pattern"))
                .collect()
        })
        .collect()
}

struct Core {
    model: LinearModel,
    patterns: Vec<Vec<usize>>,
    gamma: Vec<Vec<f64>>,
    x: Vec<VarId>,
}

fn core(
    name: &str,
    net: &Network,
    m: &InterferenceMatrix,
    cap: usize,
) -> Result<Core, FormulationError> {
    check_matrix(net, m)?;
    let patterns = enumerate_patterns(m, cap)?;
    let gamma = pattern_gammas(&patterns, m);
    let mut model = LinearModel::new(name);
    let x = (0..patterns.len())
        .map(|a| model.add_continuous(format!("x_{a}"), 0.0, 1.0))
        .collect();
    Ok(Core {
        model,
        patterns,
        gamma,
        x,
    })
}

/// Per-link capacity terms Σ_A γ_{l,A} x_A.
fn capacity_terms(c: &Core, links: usize) -> Vec<Vec<(VarId, f64)>> {
    let mut terms = vec![Vec::new(); links];
    for (a, p) in c.patterns.iter().enumerate() {
        for (i, &l) in p.iter().enumerate() {
            terms[l].push((c.x[a], c.gamma[a][i]));
        }
    }
    terms
}

/// Max-min downlink service over all global activation patterns, with the
/// delay proxy `lambda·Σr` subtracted. `lambda = None` picks the default.
pub fn build_combinatorial_dl(
    net: &Network,
    m: &InterferenceMatrix,
    w: &ServiceWeights,
    lambda: Option<f64>,
    pattern_cap: usize,
) -> Result<(LinearModel, CombinatorialMap), FormulationError> {
    w.validate(net, true)?;
    let lambda = resolve_lambda(lambda, net, w)?;
    let mut c = core("combinatorial-dl", net, m, pattern_cap)?;
    let nl = net.num_links();
    let terms = capacity_terms(&c, nl);
    let model = &mut c.model;
    let r: Vec<VarId> = (0..nl)
        .map(|l| model.add_continuous(format!("r_{l}"), 0.0, f64::INFINITY))
        .collect();
    let d = model.add_continuous("d", 0.0, f64::INFINITY);
    model.add_constraint(
        "resource",
        c.x.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Eq,
        1.0,
    );
    for l in 0..nl {
        let mut row = vec![(r[l], 1.0)];
        row.extend(terms[l].iter().map(|&(v, g)| (v, -g)));
        model.add_constraint(format!("rate_{l}"), row, Relation::Eq, 0.0);
    }
    let mut service = vec![None; net.num_nodes()];
    for i in net.clients() {
        let di = model.add_continuous(format!("d_{i}"), 0.0, f64::INFINITY);
        service[i] = Some(di);
        let mut row: Vec<(VarId, f64)> = net.in_links(i).iter().map(|&l| (r[l], 1.0)).collect();
        row.extend(net.out_links(i).iter().map(|&l| (r[l], -1.0)));
        row.push((di, -1.0));
        model.add_constraint(format!("flow_{i}"), row, Relation::Eq, 0.0);
        model.add_constraint(
            format!("service_{i}"),
            vec![(di, 1.0), (d, -w.alpha[i])],
            Relation::Ge,
            0.0,
        );
    }
    let mut obj = vec![(d, 1.0)];
    obj.extend(r.iter().map(|&v| (v, -lambda)));
    model.set_objective(obj);
    let map = CombinatorialMap {
        patterns: c.patterns,
        gamma: c.gamma,
        x: c.x,
        rate_down: r,
        rate_up: None,
        service_down: service,
        service_up: None,
        objective: d,
        lambda,
    };
    Ok((c.model, map))
}

/// Max-min joint downlink/uplink service `c` over all global patterns.
pub fn build_combinatorial_uldl(
    net: &Network,
    m: &InterferenceMatrix,
    w: &ServiceWeights,
    pattern_cap: usize,
) -> Result<(LinearModel, CombinatorialMap), FormulationError> {
    w.validate(net, false)?;
    let mut c = core("combinatorial-uldl", net, m, pattern_cap)?;
    let nl = net.num_links();
    let terms = capacity_terms(&c, nl);
    let model = &mut c.model;
    let rd: Vec<VarId> = (0..nl)
        .map(|l| model.add_continuous(format!("rd_{l}"), 0.0, f64::INFINITY))
        .collect();
    let ru: Vec<VarId> = (0..nl)
        .map(|l| model.add_continuous(format!("ru_{l}"), 0.0, f64::INFINITY))
        .collect();
    let obj = model.add_continuous("c", 0.0, f64::INFINITY);
    model.add_constraint(
        "resource",
        c.x.iter().map(|&v| (v, 1.0)).collect(),
        Relation::Le,
        1.0,
    );
    for l in 0..nl {
        let mut row = vec![(rd[l], 1.0), (ru[l], 1.0)];
        row.extend(terms[l].iter().map(|&(v, g)| (v, -g)));
        model.add_constraint(format!("rate_{l}"), row, Relation::Eq, 0.0);
    }
    let mut down = vec![None; net.num_nodes()];
    let mut up = vec![None; net.num_nodes()];
    for i in net.clients() {
        let di = model.add_continuous(format!("d_{i}"), 0.0, f64::INFINITY);
        let ui = model.add_continuous(format!("u_{i}"), 0.0, f64::INFINITY);
        down[i] = Some(di);
        up[i] = Some(ui);
        let mut row: Vec<(VarId, f64)> = net.in_links(i).iter().map(|&l| (rd[l], 1.0)).collect();
        row.extend(net.out_links(i).iter().map(|&l| (rd[l], -1.0)));
        row.push((di, -1.0));
        model.add_constraint(format!("flow_down_{i}"), row, Relation::Eq, 0.0);
        let mut row: Vec<(VarId, f64)> = net.out_links(i).iter().map(|&l| (ru[l], 1.0)).collect();
        row.extend(net.in_links(i).iter().map(|&l| (ru[l], -1.0)));
        row.push((ui, -1.0));
        model.add_constraint(format!("flow_up_{i}"), row, Relation::Eq, 0.0);
        model.add_constraint(
            format!("service_down_{i}"),
            vec![(di, 1.0), (obj, -w.alpha[i])],
            Relation::Ge,
            0.0,
        );
        model.add_constraint(
            format!("service_up_{i}"),
            vec![(ui, 1.0), (obj, -w.beta[i])],
            Relation::Ge,
            0.0,
        );
    }
    model.set_objective(vec![(obj, 1.0)]);
    let map = CombinatorialMap {
        patterns: c.patterns,
        gamma: c.gamma,
        x: c.x,
        rate_down: rd,
        rate_up: Some(ru),
        service_down: down,
        service_up: Some(up),
        objective: obj,
        lambda: 0.0,
    };
    Ok((c.model, map))
}
