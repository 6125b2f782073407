//! End-to-end runs: configuration, instance construction, solving,
//! schedule evaluation, parameter sweeps and the clustering comparison.
//!
//! All randomness flows from one master seed. Each consumer gets its own
//! sub-seed from [`derive_seed`], keyed by a purpose string: `"topology"`
//! for network generation, `"phases"` for the urban multipath phases and
//! `"perturb"` for interference perturbation.

mod config;
mod run;
mod sweep;

pub use config::{
    ExperimentConfig, Formulation, ModelSection, NetworkKind, NetworkSection, OutputSection,
    SolverSection, SweepAxis, SweepSection,
};
pub use run::{
    agnostic_degradation, build_instance, build_model, capacity_check, cluster_compare,
    solve_instance, solve_instance_from, BuiltModel, CapacityCheck, ClusterComparison,
    DegradationStudy, Instance, ModelMap, SolveOutcome, SolveSettings,
};
pub use sweep::{run_sweep, write_sweep_csv, SweepRow};

use crate::formulations::FormulationError;
use crate::lp::LpError;
use crate::net::NetError;
use crate::propagation::PropagationError;
use crate::schedule::ScheduleError;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("model is infeasible")]
    Infeasible,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit status: 1 for bad input, 2 for solver or output
    /// failures, 3 for infeasible models.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Infeasible | ExperimentError::Lp(LpError::Infeasible) => 3,
            ExperimentError::Config(_) | ExperimentError::Net(_) | ExperimentError::Propagation(_) => 1,
            ExperimentError::Formulation(FormulationError::Mismatch(_)) => 2,
            ExperimentError::Formulation(_) => 1,
            ExperimentError::Lp(_) | ExperimentError::Schedule(_) | ExperimentError::Io(_) => 2,
        }
    }
}

/// Sub-seed for `purpose`: the 64-bit FNV-1a hash of the purpose string is
/// XORed into the master seed and the result goes through the SplitMix64
/// finalizer.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in purpose.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = (master ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
