use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::interference::{DEFAULT_NEIGHBORHOOD_CAP, DEFAULT_THRESHOLD_DB};
use crate::net::{GenParams, UrbanParams};
use crate::propagation::PropagationParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "comb-dl")]
    CombDl,
    #[serde(rename = "comb-uldl")]
    CombUldl,
    #[serde(rename = "scal-dl")]
    ScalDl,
    #[serde(rename = "scal-uldl")]
    ScalUldl,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::CombDl,
        Formulation::CombUldl,
        Formulation::ScalDl,
        Formulation::ScalUldl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::CombDl => "comb-dl",
            Formulation::CombUldl => "comb-uldl",
            Formulation::ScalDl => "scal-dl",
            Formulation::ScalUldl => "scal-uldl",
        }
    }

    pub fn is_scalable(self) -> bool {
        matches!(self, Formulation::ScalDl | Formulation::ScalUldl)
    }

    pub fn has_uplink(self) -> bool {
        matches!(self, Formulation::CombUldl | Formulation::ScalUldl)
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| ExperimentError::Config(format!("unknown formulation '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Suburban,
    Urban,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub kind: NetworkKind,
    /// Network file read when `kind = "file"`.
    pub path: Option<PathBuf>,
    /// Generator settings. Their `seed` fields are replaced by the seed
    /// derived from the master seed.
    pub suburban: GenParams,
    pub urban: UrbanParams,
}

impl Default for NetworkSection {
    fn default() -> Self {
        NetworkSection {
            kind: NetworkKind::Urban,
            path: None,
            suburban: GenParams::default(),
            urban: UrbanParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub formulation: Formulation,
    /// Time slots T of the scalable models.
    pub slots: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Delay weight; the default is half the priority bound.
    pub lambda: Option<f64>,
    /// Neighborhood threshold in dB below the noise.
    pub threshold_db: f64,
    /// Largest number of finite interferers kept in a neighborhood.
    pub neighborhood_cap: Option<usize>,
    /// Relative magnitude of random fluctuations added to the interference.
    pub perturb: Option<f64>,
    /// Largest link count the combinatorial models enumerate.
    pub pattern_cap: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            formulation: Formulation::ScalDl,
            slots: 4,
            alpha: 1.0,
            beta: 0.0,
            lambda: None,
            threshold_db: DEFAULT_THRESHOLD_DB,
            neighborhood_cap: Some(DEFAULT_NEIGHBORHOOD_CAP),
            perturb: None,
            pattern_cap: crate::formulations::DEFAULT_PATTERN_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub gap: f64,
    pub node_limit: usize,
    /// Wall-clock limit per solve in seconds.
    pub time_limit: Option<f64>,
    pub threads: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            gap: 1e-4,
            node_limit: 2_000_000,
            time_limit: Some(600.0),
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Truncation,
    Snr,
    Uplink,
}

impl FromStr for SweepAxis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truncation" => Ok(SweepAxis::Truncation),
            "snr" => Ok(SweepAxis::Snr),
            "uplink" => Ok(SweepAxis::Uplink),
            _ => Err(ExperimentError::Config(format!("unknown sweep axis '{s}'"))),
        }
    }
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Truncation => "truncation",
            SweepAxis::Snr => "snr",
            SweepAxis::Uplink => "uplink",
        }
    }

    /// Points swept when none are configured.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Truncation => (1..=8).map(f64::from).collect(),
            SweepAxis::Snr => vec![5.0, 10.0, 15.0, 20.0, 25.0],
            SweepAxis::Uplink => (0..=5).map(|i| f64::from(i) * 0.2).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Option<Vec<f64>>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            axis: SweepAxis::Truncation,
            values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Also write the model in MPS format with its variable map.
    pub export_mps: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            export_mps: false,
        }
    }
}

/// Everything a command needs. Every field has a default, so an empty file
/// is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub network: NetworkSection,
    pub propagation: PropagationParams,
    pub model: ModelSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            network: NetworkSection::default(),
            propagation: PropagationParams::default(),
            model: ModelSection::default(),
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        match self.network.kind {
            NetworkKind::File => match &self.network.path {
                None => return bad("network kind 'file' needs a path".into()),
                Some(p) if !p.exists() => {
                    return bad(format!("network file {} does not exist", p.display()))
                }
                Some(_) => {}
            },
            NetworkKind::Suburban => self
                .network
                .suburban
                .validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?,
            NetworkKind::Urban => {
                let u = &self.network.urban;
                if !(u.gateway_fraction > 0.0 && u.gateway_fraction <= 1.0) {
                    return bad("gateway fraction must lie in (0, 1]".into());
                }
                if u.gateways == Some(0) {
                    return bad("gateway count must be at least 1".into());
                }
            }
        }
        self.propagation
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))?;
        let m = &self.model;
        if m.slots == 0 {
            return bad("slots must be at least 1".into());
        }
        if !(m.alpha >= 0.0 && m.beta >= 0.0 && m.alpha.is_finite() && m.beta.is_finite()) {
            return bad("alpha and beta must be finite and non-negative".into());
        }
        if !m.threshold_db.is_finite() {
            return bad("neighborhood threshold must be finite".into());
        }
        if let Some(p) = m.perturb {
            if !(p > 0.0 && p <= 1e-2) {
                return bad(format!("perturbation magnitude {p} is outside (0, 0.01]"));
            }
        }
        let s = &self.solver;
        if !(s.gap >= 0.0 && s.gap.is_finite()) {
            return bad("gap must be finite and non-negative".into());
        }
        if s.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        if let Some(t) = s.time_limit {
            if !(t > 0.0) {
                return bad("time limit must be positive".into());
            }
        }
        Ok(())
    }
}
