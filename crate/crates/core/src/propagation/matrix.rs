use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{azimuth, suburban_gain, urban_canyon_gain, PropagationParams};
use crate::net::{Environment, Network};

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("invalid propagation parameters: {0}")]
    InvalidParams(String),
    #[error("interference matrix does not match the network: {0}")]
    Mismatch(String),
    #[error("interference file: {0}")]
    Io(#[from] std::io::Error),
    #[error("interference file is not valid: {0}")]
    Format(#[from] serde_json::Error),
}

/// Noise-normalized signal and pairwise interference PSDs of every link.
///
/// Entry `(k, l)` is the interference of link `k` on link `l`; it is
/// `f64::INFINITY` for half-duplex conflicts. The diagonal is unused and zero.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceMatrix {
    pub signal: Vec<f64>,
    pub noise: f64,
    data: Vec<f64>,
    pub seed: u64,
    pub params: Option<PropagationParams>,
    /// (tx, rx) of every link, kept to detect a mismatched network on reload.
    pub links: Vec<(usize, usize)>,
}

impl InterferenceMatrix {
    /// A matrix with the given signal vector and no interference.
    pub fn with_signal(signal: Vec<f64>, noise: f64) -> Self {
        let l = signal.len();
        InterferenceMatrix {
            signal,
            noise,
            data: vec![0.0; l * l],
            seed: 0,
            params: None,
            links: Vec::new(),
        }
    }

    /// Unit noise, the same linear SNR on every link, infinite interference
    /// between half-duplex conflicts and none elsewhere.
    pub fn from_conflicts(net: &Network, snr: f64) -> Self {
        let mut m = InterferenceMatrix::with_signal(vec![snr; net.num_links()], 1.0);
        for k in 0..net.num_links() {
            for l in 0..net.num_links() {
                if net.conflict(k, l) {
                    m.set(k, l, f64::INFINITY);
                }
            }
        }
        m.links = net.links.iter().map(|l| (l.tx, l.rx)).collect();
        m
    }

    pub fn num_links(&self) -> usize {
        self.signal.len()
    }

    /// Interference of link `k` on link `l`.
    #[inline]
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.signal.len() + l]
    }

    pub fn set(&mut self, k: usize, l: usize, value: f64) {
        let n = self.signal.len();
        self.data[k * n + l] = value;
    }

    pub fn is_conflict(&self, k: usize, l: usize) -> bool {
        k != l && self.get(k, l) == f64::INFINITY
    }

    /// Nominal SNR of link `l` (linear).
    pub fn snr(&self, l: usize) -> f64 {
        self.signal[l] / self.noise
    }

    /// Copy keeping only the half-duplex conflicts; finite interference is zeroed.
    pub fn conflict_only(&self) -> InterferenceMatrix {
        let mut m = self.clone();
        for v in &mut m.data {
            if v.is_finite() {
                *v = 0.0;
            }
        }
        m
    }

    /// The entries among `keep`, renumbered in the given order. Endpoint
    /// records are dropped since link ids change.
    pub fn submatrix(&self, keep: &[usize]) -> InterferenceMatrix {
        let mut m = InterferenceMatrix::with_signal(
            keep.iter().map(|&l| self.signal[l]).collect(),
            self.noise,
        );
        for (i, &k) in keep.iter().enumerate() {
            for (j, &l) in keep.iter().enumerate() {
                m.set(i, j, self.get(k, l));
            }
        }
        m.seed = self.seed;
        m.params = self.params.clone();
        m
    }

    /// Links `k != l` with nonzero interference on `l`.
    pub fn interferers(&self, l: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.num_links())
            .filter(move |&k| k != l)
            .map(move |k| (k, self.get(k, l)))
            .filter(|&(_, v)| v != 0.0)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn check_network(&self, net: &Network) -> Result<(), PropagationError> {
        if self.num_links() != net.num_links() {
            return Err(PropagationError::Mismatch(format!(
                "{} links in matrix, {} in network",
                self.num_links(),
                net.num_links()
            )));
        }
        if !self.links.is_empty() {
            for (l, link) in net.links.iter().enumerate() {
                if self.links[l] != (link.tx, link.rx) {
                    return Err(PropagationError::Mismatch(format!(
                        "link {l} endpoints differ"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let n = self.num_links();
        let mut entries = Vec::new();
        for k in 0..n {
            for l in 0..n {
                let v = self.get(k, l);
                if k != l && v != 0.0 {
                    let e = if v.is_infinite() {
                        Entry::Text("inf".into())
                    } else {
                        Entry::Num(v)
                    };
                    entries.push((k, l, e));
                }
            }
        }
        let f = MatrixFile {
            format: FORMAT.into(),
            seed: self.seed,
            params: self.params.clone(),
            noise: self.noise,
            links: self.links.clone(),
            signal: self.signal.clone(),
            interference: entries,
        };
        serde_json::to_string_pretty(&f).expect("matrix serializes")
    }

    pub fn from_json(text: &str) -> Result<InterferenceMatrix, PropagationError> {
        let f: MatrixFile = serde_json::from_str(text)?;
        if f.format != FORMAT {
            return Err(PropagationError::Mismatch(format!(
                "unsupported matrix format '{}'",
                f.format
            )));
        }
        let mut m = InterferenceMatrix::with_signal(f.signal, f.noise);
        m.seed = f.seed;
        m.params = f.params;
        m.links = f.links;
        let n = m.num_links();
        for (k, l, e) in f.interference {
            if k >= n || l >= n || k == l {
                return Err(PropagationError::Mismatch(format!(
                    "entry ({k}, {l}) out of range"
                )));
            }
            let v = match e {
                Entry::Num(v) if v >= 0.0 && v.is_finite() => v,
                Entry::Text(s) if s == "inf" => f64::INFINITY,
                _ => {
                    return Err(PropagationError::Mismatch(format!(
                        "entry ({k}, {l}) is not a valid PSD"
                    )))
                }
            };
            m.set(k, l, v);
        }
        Ok(m)
    }

    pub fn save(&self, path: &FsPath) -> Result<(), PropagationError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &FsPath) -> Result<InterferenceMatrix, PropagationError> {
        InterferenceMatrix::from_json(&std::fs::read_to_string(path)?)
    }
}

const FORMAT: &str = "backhaul-interference/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Entry {
    Num(f64),
    Text(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct MatrixFile {
    format: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<PropagationParams>,
    noise: f64,
    links: Vec<(usize, usize)>,
    signal: Vec<f64>,
    interference: Vec<(usize, usize, Entry)>,
}

/// Independent random stream for the (k, l) link pair.
fn pair_rng(seed: u64, k: usize, l: usize) -> ChaCha8Rng {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15;
    for x in [k as u64, l as u64] {
        z = z.wrapping_add(x).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    ChaCha8Rng::seed_from_u64(z)
}

/// Signal and interference of every link pair with power control to the
/// nominal SNR. Each link steers both arrays along its own axis.
pub fn compute_link_budget(
    net: &Network,
    params: &PropagationParams,
    seed: u64,
) -> Result<InterferenceMatrix, PropagationError> {
    params.validate()?;
    let n = net.num_links();
    let tx_steer: Vec<f64> = net
        .links
        .iter()
        .map(|l| azimuth(&net.nodes[l.tx], &net.nodes[l.rx]))
        .collect();
    let rx_steer: Vec<f64> = net
        .links
        .iter()
        .map(|l| azimuth(&net.nodes[l.rx], &net.nodes[l.tx]))
        .collect();
    let street_width = net
        .streets
        .as_ref()
        .map_or(params.street_width, |s| s.street_width);

    // Raw gain from the transmitter of k to the receiver of l with k's TX and
    // l's RX steering; zero when they share no street canyon.
    let gain = |k: usize, l: usize| -> f64 {
        let (a, b) = (&net.nodes[net.links[k].tx], &net.nodes[net.links[l].rx]);
        match (net.environment, &net.streets) {
            (Environment::Urban, Some(streets)) => match streets.shared_canyon(a, b) {
                Some(canyon) => {
                    let mut rng = pair_rng(seed, k, l);
                    urban_canyon_gain(
                        a,
                        b,
                        tx_steer[k],
                        rx_steer[l],
                        canyon,
                        street_width,
                        params,
                        &mut rng,
                    )
                }
                None => 0.0,
            },
            _ => suburban_gain(a, b, tx_steer[k], rx_steer[l], params),
        }
    };

    let own: Vec<f64> = (0..n).into_par_iter().map(|l| gain(l, l)).collect();
    if let Some(l) = own.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(PropagationError::Mismatch(format!(
            "link {l} has no usable signal path"
        )));
    }
    let snr = params.snr_linear();
    let noise = 1.0;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|l| {
                    if k == l {
                        0.0
                    } else if net.conflict(k, l) {
                        f64::INFINITY
                    } else {
                        snr * noise * gain(k, l) / own[k]
                    }
                })
                .collect()
        })
        .collect();
    let mut m = InterferenceMatrix::with_signal(vec![snr * noise; n], noise);
    for (k, row) in rows.into_iter().enumerate() {
        m.data[k * n..(k + 1) * n].copy_from_slice(&row);
    }
    m.seed = seed;
    m.params = Some(params.clone());
    m.links = net.links.iter().map(|l| (l.tx, l.rx)).collect();
    Ok(m)
}
