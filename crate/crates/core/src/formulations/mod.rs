//! Optimization models for joint routing and time-resource allocation.
//!
//! The combinatorial models enumerate every global activation pattern and are
//! plain LPs; the scalable models work with local patterns inside interference
//! neighborhoods over `T` time slots and are binary MILPs.

mod combinatorial;
mod heuristic;
mod perturb;
mod scalable;
mod sparsify;

use serde::{Deserialize, Serialize};

use crate::net::Network;

pub use combinatorial::{
    build_combinatorial_dl, build_combinatorial_uldl, enumerate_patterns, CombinatorialMap,
};
pub use heuristic::{initial_slots, scalable_start};
pub use perturb::perturb_interference;
pub use scalable::{
    build_scalable_dl, build_scalable_uldl, build_scalable_with, ScalableMap, ScalableOptions,
};
pub use sparsify::{node_service, sparsify_allocation, Allocation};

/// Largest link count accepted by the combinatorial builders by default.
pub const DEFAULT_PATTERN_CAP: usize = 16;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FormulationError {
    #[error("{links} links exceed the pattern enumeration cap of {cap}")]
    TooManyLinks { links: usize, cap: usize },
    #[error("delay weight {lambda} violates the priority bound {bound}")]
    PriorityBoundViolation { lambda: f64, bound: f64 },
    #[error("invalid service weights: {0}")]
    InvalidWeights(String),
    #[error("slot count must be at least 1")]
    InvalidSlots,
    #[error("inputs do not describe the same links: {0}")]
    Mismatch(String),
    #[error("perturbation magnitude {0} is outside (0, 0.01]")]
    InvalidPerturbation(f64),
}

/// Downlink (`alpha`) and uplink (`beta`) service weights, indexed by node id.
/// Gateway entries are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceWeights {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl ServiceWeights {
    pub fn uniform(net: &Network, alpha: f64, beta: f64) -> Self {
        let n = net.num_nodes();
        let pick = |v: f64| {
            (0..n)
                .map(|i| if net.nodes[i].is_gateway { 0.0 } else { v })
                .collect()
        };
        ServiceWeights {
            alpha: pick(alpha),
            beta: pick(beta),
        }
    }

    /// Unit downlink weight on every client node, no uplink.
    pub fn downlink(net: &Network) -> Self {
        Self::uniform(net, 1.0, 0.0)
    }

    pub fn alpha_sum(&self, net: &Network) -> f64 {
        net.clients().iter().map(|&i| self.alpha[i]).sum()
    }

    fn validate(&self, net: &Network, need_alpha: bool) -> Result<(), FormulationError> {
        let n = net.num_nodes();
        if self.alpha.len() != n || self.beta.len() != n {
            return Err(FormulationError::InvalidWeights(format!(
                "expected {n} entries per weight vector"
            )));
        }
        let clients = net.clients();
        if clients.iter().any(|&i| {
            !(self.alpha[i] >= 0.0
                && self.beta[i] >= 0.0
                && self.alpha[i].is_finite()
                && self.beta[i].is_finite())
        }) {
            return Err(FormulationError::InvalidWeights(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = clients
            .iter()
            .map(|&i| {
                if need_alpha {
                    self.alpha[i]
                } else {
                    self.alpha[i] + self.beta[i]
                }
            })
            .sum();
        if total <= 0.0 {
            return Err(FormulationError::InvalidWeights(
                "all weights are zero".into(),
            ));
        }
        Ok(())
    }
}

/// Upper bound on the delay weight that keeps max-min service the priority.
pub fn priority_bound(num_links: usize, alpha_sum: f64) -> f64 {
    1.0 / (num_links as f64 * alpha_sum)
}

/// Default delay weight: half the priority bound.
pub fn default_lambda(num_links: usize, alpha_sum: f64) -> f64 {
    0.5 * priority_bound(num_links, alpha_sum)
}

fn resolve_lambda(
    lambda: Option<f64>,
    net: &Network,
    w: &ServiceWeights,
) -> Result<f64, FormulationError> {
    let bound = priority_bound(net.num_links(), w.alpha_sum(net));
    match lambda {
        None => Ok(0.5 * bound),
        Some(l) if l >= 0.0 && l < bound => Ok(l),
        Some(l) => Err(FormulationError::PriorityBoundViolation { lambda: l, bound }),
    }
}

fn check_matrix(
    net: &Network,
    m: &crate::propagation::InterferenceMatrix,
) -> Result<(), FormulationError> {
    if m.num_links() != net.num_links() {
        return Err(FormulationError::Mismatch(format!(
            "{} links in matrix, {} in network",
            m.num_links(),
            net.num_links()
        )));
    }
    Ok(())
}
