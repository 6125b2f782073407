use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{derive_seed, ExperimentConfig, ExperimentError, Formulation, NetworkKind};
use crate::formulations::{
    build_combinatorial_dl, build_combinatorial_uldl, build_scalable_dl, build_scalable_uldl,
    perturb_interference, scalable_start, sparsify_allocation, CombinatorialMap, ScalableMap,
    ServiceWeights,
};
use crate::interference::{build_neighborhoods_with, nominal_rate, NeighborhoodSet};
use crate::lp::{solve_lp, solve_milp_with, LinearModel, LpError, MilpParams, SolveStatus};
use crate::net::{
    cluster_groups, generate_suburban, generate_urban_grid, partition_groups, split_gateways_by_x,
    NetError, Network,
};
use crate::propagation::{compute_link_budget, InterferenceMatrix, PropagationParams};
use crate::schedule::{
    degradation, evaluate_schedule, extract_schedule, Schedule, ThroughputReport,
};

/// A network with its interference matrix.
#[derive(Debug, Clone)]
pub struct Instance {
    pub net: Network,
    pub matrix: InterferenceMatrix,
}

impl Instance {
    /// Same network with the link budget recomputed under other propagation
    /// parameters. The phase seed is unchanged.
    pub fn with_propagation(
        &self,
        params: &PropagationParams,
        master_seed: u64,
        perturb: Option<f64>,
    ) -> Result<Instance, ExperimentError> {
        Ok(Instance {
            net: self.net.clone(),
            matrix: instance_matrix(&self.net, params, master_seed, perturb)?,
        })
    }
}

fn instance_matrix(
    net: &Network,
    params: &PropagationParams,
    master_seed: u64,
    perturb: Option<f64>,
) -> Result<InterferenceMatrix, ExperimentError> {
    let m = compute_link_budget(net, params, derive_seed(master_seed, "phases"))?;
    Ok(match perturb {
        Some(mag) => perturb_interference(&m, mag, derive_seed(master_seed, "perturb"))?,
        None => m,
    })
}

/// Generate or load the network and compute its link budget.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<Instance, ExperimentError> {
    let topology = derive_seed(cfg.seed, "topology");
    let net = match cfg.network.kind {
        NetworkKind::Suburban => generate_suburban(&crate::net::GenParams {
            seed: topology,
            ..cfg.network.suburban.clone()
        })?,
        NetworkKind::Urban => generate_urban_grid(&crate::net::UrbanParams {
            seed: topology,
            ..cfg.network.urban.clone()
        })?,
        NetworkKind::File => {
            let path = cfg
                .network
                .path
                .as_ref()
                .ok_or_else(|| ExperimentError::Config("network path missing".into()))?;
            Network::load(path)?
        }
    };
    let matrix = instance_matrix(&net, &cfg.propagation, cfg.seed, cfg.model.perturb)?;
    Ok(Instance { net, matrix })
}

/// Model and solver settings of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub formulation: Formulation,
    pub slots: usize,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: Option<f64>,
    pub threshold_db: f64,
    pub neighborhood_cap: Option<usize>,
    pub pattern_cap: usize,
    pub gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<f64>,
}

impl SolveSettings {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        let m = &cfg.model;
        SolveSettings {
            formulation: m.formulation,
            slots: m.slots,
            alpha: m.alpha,
            beta: m.beta,
            lambda: m.lambda,
            threshold_db: m.threshold_db,
            neighborhood_cap: m.neighborhood_cap,
            pattern_cap: m.pattern_cap,
            gap: cfg.solver.gap,
            node_limit: cfg.solver.node_limit,
            time_limit: cfg.solver.time_limit,
        }
    }

    /// Service weights on the clients of `net`. Downlink-only models get no
    /// uplink weight.
    pub fn weights(&self, net: &Network) -> ServiceWeights {
        let beta = if self.formulation.has_uplink() {
            self.beta
        } else {
            0.0
        };
        ServiceWeights::uniform(net, self.alpha, beta)
    }

    fn milp_params(&self, starts: Vec<Vec<f64>>) -> MilpParams {
        MilpParams {
            gap_tol: self.gap,
            node_limit: self.node_limit,
            time_limit: self.time_limit.map(Duration::from_secs_f64),
            starts,
            lazy_integral_only: true,
            ..MilpParams::default()
        }
    }
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings::from_config(&ExperimentConfig::default())
    }
}

/// Variable layout of a built model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelMap {
    Combinatorial(CombinatorialMap),
    Scalable(ScalableMap),
}

#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: LinearModel,
    pub map: ModelMap,
    pub weights: ServiceWeights,
    /// Neighborhoods of the scalable models.
    pub neighborhoods: Option<NeighborhoodSet>,
}

pub fn build_model(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
) -> Result<BuiltModel, ExperimentError> {
    let weights = s.weights(net);
    let (model, map, neighborhoods) = match s.formulation {
        Formulation::CombDl => {
            let (model, map) = build_combinatorial_dl(net, m, &weights, s.lambda, s.pattern_cap)?;
            (model, ModelMap::Combinatorial(map), None)
        }
        Formulation::CombUldl => {
            let (model, map) = build_combinatorial_uldl(net, m, &weights, s.pattern_cap)?;
            (model, ModelMap::Combinatorial(map), None)
        }
        Formulation::ScalDl | Formulation::ScalUldl => {
            let nb = build_neighborhoods_with(m, s.threshold_db, s.neighborhood_cap);
            let (model, map) = if s.formulation == Formulation::ScalDl {
                build_scalable_dl(net, m, &nb, s.slots, &weights, s.lambda)?
            } else {
                build_scalable_uldl(net, m, &nb, s.slots, &weights)?
            };
            (model, ModelMap::Scalable(map), Some(nb))
        }
    };
    Ok(BuiltModel {
        model,
        map,
        weights,
        neighborhoods,
    })
}

/// Result of one end-to-end solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub formulation: Formulation,
    pub slots: usize,
    /// Solver value of the max-min variable (`d` or `c`).
    pub objective: f64,
    /// Solver bound on the full objective including the delay term.
    pub best_bound: f64,
    pub gap: f64,
    pub status: SolveStatus,
    pub nodes: usize,
    /// Wall time in seconds, model construction included.
    pub wall_time: f64,
    /// Interference-free rate of the links, averaged.
    pub nominal: f64,
    pub schedule: Schedule,
    pub report: ThroughputReport,
}

impl SolveOutcome {
    /// Objective as a fraction of the nominal link rate.
    pub fn relative(&self) -> f64 {
        self.objective / self.nominal
    }
}

fn mean_nominal(m: &InterferenceMatrix) -> f64 {
    let n = m.num_links();
    if n == 0 {
        return 0.0;
    }
    (0..n).map(|l| nominal_rate(l, m)).sum::<f64>() / n as f64
}

/// Build, solve, extract the schedule and evaluate it under `m`.
pub fn solve_instance(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
) -> Result<SolveOutcome, ExperimentError> {
    solve_instance_from(net, m, s, &[])
}

/// Like [`solve_instance`], with earlier schedules of the same instance
/// offered to the scalable models as start points. Schedules with more slots
/// than the model holds are skipped.
pub fn solve_instance_from(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
    hints: &[Schedule],
) -> Result<SolveOutcome, ExperimentError> {
    let clock = Instant::now();
    let built = build_model(net, m, s)?;
    let provenance = format!("{} T={}", s.formulation, s.slots);
    let (sol, objective, schedule) = match &built.map {
        ModelMap::Combinatorial(map) => {
            let sol = solve_lp(&built.model)?;
            if sol.status == SolveStatus::Infeasible {
                return Err(ExperimentError::Infeasible);
            }
            let alloc = sparsify_allocation(&map.allocation(&sol), net, m);
            let objective = sol.value(map.objective);
            (
                sol,
                objective,
                Schedule::from_allocation(&alloc, provenance),
            )
        }
        ModelMap::Scalable(map) => {
            let nb = built
                .neighborhoods
                .as_ref()
                .expect("scalable model has neighborhoods");
            let mut starts: Vec<Vec<f64>> = scalable_start(map, net, m, nb, &built.weights)
                .into_iter()
                .collect();
            starts.extend(
                hints
                    .iter()
                    .filter_map(|h| map.start_from_slots(&h.as_pairs())),
            );
            let mut params = s.milp_params(starts);
            params.time_limit = params.time_limit.map(|t| t.saturating_sub(clock.elapsed()));
            let sol = match solve_milp_with(&built.model, &params) {
                Err(LpError::Infeasible) => return Err(ExperimentError::Infeasible),
                other => other?,
            };
            let mut schedule = extract_schedule(&sol, map)?;
            schedule.provenance = provenance;
            let objective = sol.value(map.objective);
            (sol, objective, schedule)
        }
    };
    let report = evaluate_schedule(&schedule, m, net, &built.weights)?;
    Ok(SolveOutcome {
        formulation: s.formulation,
        slots: s.slots,
        objective,
        best_bound: sol.best_bound,
        gap: sol.gap,
        status: sol.status,
        nodes: sol.nodes,
        wall_time: clock.elapsed().as_secs_f64(),
        nominal: mean_nominal(m),
        schedule,
        report,
    })
}

/// Optima with only half-duplex conflicts and with the full matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityCheck {
    pub conflict_only: f64,
    pub full: f64,
    /// |conflict_only − full| / conflict_only.
    pub relative_difference: f64,
    pub equal: bool,
}

/// Solve twice, once with finite interference removed, and compare optima
/// within `tolerance` (relative).
pub fn capacity_check(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
    tolerance: f64,
) -> Result<CapacityCheck, ExperimentError> {
    let conflict_only = solve_instance(net, &m.conflict_only(), s)?.objective;
    let full = solve_instance(net, m, s)?.objective;
    let relative_difference = if conflict_only > 0.0 {
        (conflict_only - full).abs() / conflict_only
    } else {
        0.0
    };
    Ok(CapacityCheck {
        conflict_only,
        full,
        relative_difference,
        equal: relative_difference <= tolerance,
    })
}

/// An interference-aware schedule against one planned with finite
/// interference ignored, both evaluated under the full matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradationStudy {
    pub aware: SolveOutcome,
    pub agnostic: SolveOutcome,
    /// Max-min of the agnostic schedule under the full matrix.
    pub agnostic_max_min: f64,
    pub degradation: f64,
}

pub fn agnostic_degradation(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
) -> Result<DegradationStudy, ExperimentError> {
    let aware = solve_instance(net, m, s)?;
    let agnostic = solve_instance(net, &m.conflict_only(), s)?;
    let w = s.weights(net);
    let agnostic_max_min = evaluate_schedule(&agnostic.schedule, m, net, &w)?.max_min;
    let degradation = degradation(&agnostic.schedule, &aware.schedule, m, net, &w)?;
    Ok(DegradationStudy {
        aware,
        agnostic,
        agnostic_max_min,
        degradation,
    })
}

/// Whole network against gateway clusters solved independently.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterComparison {
    pub whole: f64,
    pub clusters: Vec<f64>,
    /// Node count of every cluster.
    pub sizes: Vec<usize>,
    pub nominal: f64,
}

impl ClusterComparison {
    pub fn min_cluster(&self) -> f64 {
        self.clusters.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Split the gateways into `parts` groups by x coordinate, attach every node
/// to its nearest group, drop the links between groups and solve each part
/// on its own, keeping the channel of the whole network.
pub fn cluster_compare(
    net: &Network,
    m: &InterferenceMatrix,
    s: &SolveSettings,
    parts: usize,
) -> Result<ClusterComparison, ExperimentError> {
    let g = net.gateways().len();
    if g < 2 {
        return Err(NetError::TooFewGateways(g).into());
    }
    if parts == 0 || parts > g {
        return Err(ExperimentError::Config(format!(
            "cannot split {g} gateways into {parts} clusters"
        )));
    }
    let whole = solve_instance(net, m, s)?;
    let groups = split_gateways_by_x(net, parts);
    let label = partition_groups(net, &groups);
    let subnets = cluster_groups(net, &groups)?;
    let mut clusters = Vec::new();
    let mut sizes = Vec::new();
    for (gi, sub) in subnets.iter().enumerate() {
        let members: Vec<usize> = (0..net.num_nodes()).filter(|&v| label[v] == gi).collect();
        let keep: Vec<usize> = sub
            .links
            .iter()
            .map(|l| {
                let (tx, rx) = (members[l.tx], members[l.rx]);
                *net.out_links(tx)
                    .iter()
                    .find(|&&k| net.links[k].rx == rx)
                    .expect("cluster link exists in the network")
            })
            .collect();
        let mut subm = m.submatrix(&keep);
        subm.links = sub.links.iter().map(|l| (l.tx, l.rx)).collect();
        clusters.push(solve_instance(sub, &subm, s)?.objective);
        sizes.push(sub.num_nodes());
    }
    Ok(ClusterComparison {
        whole: whole.objective,
        clusters,
        sizes,
        nominal: whole.nominal,
    })
}
