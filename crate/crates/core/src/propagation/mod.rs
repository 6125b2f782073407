//! Channel gains for the suburban (free-space) and urban (street canyon)
//! environments, and the per-link signal/interference budget built from them.

mod matrix;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::net::{Axis, Canyon, Node};

pub use matrix::{compute_link_budget, InterferenceMatrix, PropagationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationParams {
    /// Nominal link SNR after power control, in dB.
    pub snr_db: f64,
    /// Elements of the uniform linear array at each link end.
    pub array_size: usize,
    /// Carrier wavelength in meters (5 mm at 60 GHz).
    pub wavelength: f64,
    /// Relative permittivity of walls and ground.
    pub permittivity: f64,
    /// Street width used when a network carries no street geometry.
    pub street_width: f64,
    /// Attenuation behind the array face (planar arrays cover one half-plane).
    pub front_to_back_db: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            snr_db: 10.0,
            array_size: 32,
            wavelength: 0.005,
            permittivity: 6.0,
            street_width: 25.0,
            front_to_back_db: 30.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), PropagationError> {
        if !self.snr_db.is_finite() {
            return Err(PropagationError::InvalidParams("SNR must be finite".into()));
        }
        if self.array_size == 0 {
            return Err(PropagationError::InvalidParams(
                "array size must be at least 1".into(),
            ));
        }
        if !(self.permittivity > 1.0) {
            return Err(PropagationError::InvalidParams(
                "permittivity must exceed 1".into(),
            ));
        }
        if !(self.front_to_back_db >= 0.0) {
            return Err(PropagationError::InvalidParams(
                "front-to-back ratio must be non-negative".into(),
            ));
        }
        if !(self.wavelength > 0.0 && self.street_width > 0.0) {
            return Err(PropagationError::InvalidParams(
                "wavelength and street width must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// Azimuth of the direction from `a` to `b`.
pub fn azimuth(a: &Node, b: &Node) -> f64 {
    (b.y - a.y).atan2(b.x - a.x)
}

/// Power gain of an N-element half-wavelength uniform linear array whose
/// broadside faces `steer`, observed at azimuth `observe` (radians).
/// Peak gain is N²; a single element is isotropic.
pub fn array_factor_gain(array_size: usize, steer: f64, observe: f64) -> f64 {
    let n = array_size as f64;
    let u = (observe - steer).sin();
    let half = PI * u / 2.0;
    let den = half.sin();
    if den.abs() < 1e-12 {
        // Limit of sin(N x)/sin(x) at x = k·π.
        return n * n;
    }
    let af = (n * half).sin() / den;
    af * af
}

/// Array gain of a planar face: the array factor in the front half-plane,
/// attenuated by the front-to-back ratio behind it. A single element has no
/// face and stays isotropic.
pub fn antenna_gain(params: &PropagationParams, steer: f64, observe: f64) -> f64 {
    let af = array_factor_gain(params.array_size, steer, observe);
    if params.array_size > 1 && (observe - steer).cos() < 0.0 {
        af * 10f64.powf(-params.front_to_back_db / 10.0)
    } else {
        af
    }
}

/// Free-space LOS gain between two nodes with steered arrays at both ends.
pub fn suburban_gain(
    tx: &Node,
    rx: &Node,
    tx_steer: f64,
    rx_steer: f64,
    params: &PropagationParams,
) -> f64 {
    let d = tx.distance(rx);
    let gt = antenna_gain(params, tx_steer, azimuth(tx, rx));
    let gr = antenna_gain(params, rx_steer, azimuth(rx, tx));
    let fs = params.wavelength / (4.0 * PI * d);
    gt * gr * fs * fs
}

/// Fresnel reflection coefficient for perpendicular polarization.
/// `cos_incidence` is the cosine of the angle to the surface normal.
pub fn fresnel_perpendicular(cos_incidence: f64, permittivity: f64) -> f64 {
    let c = cos_incidence.clamp(0.0, 1.0);
    let s2 = 1.0 - c * c;
    let root = (permittivity - s2).sqrt();
    (c - root) / (c + root)
}

/// One propagation path between a transmitter and a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub length: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Product of reflection coefficients along the path (1 for LOS).
    pub reflection: f64,
}

impl Path {
    /// Complex amplitude with the given phase.
    pub fn amplitude(&self, wavelength: f64, phase: f64) -> Complex64 {
        let mag = (self.tx_gain * self.rx_gain).sqrt() * wavelength / (4.0 * PI * self.length)
            * self.reflection;
        Complex64::from_polar(mag, phase)
    }
}

/// Power of the coherent sum of paths with the given phases.
pub fn coherent_power(paths: &[Path], phases: &[f64], wavelength: f64) -> f64 {
    paths
        .iter()
        .zip(phases)
        .map(|(p, &ph)| p.amplitude(wavelength, ph))
        .sum::<Complex64>()
        .norm_sqr()
}

/// LOS, the two wall images and the ground image of a canyon link.
pub fn canyon_paths(
    tx: &Node,
    rx: &Node,
    tx_steer: f64,
    rx_steer: f64,
    canyon: &Canyon,
    street_width: f64,
    params: &PropagationParams,
) -> [Path; 4] {
    let los = {
        let d = tx.distance(rx);
        Path {
            length: d,
            tx_gain: antenna_gain(params, tx_steer, azimuth(tx, rx)),
            rx_gain: antenna_gain(params, rx_steer, azimuth(rx, tx)),
            reflection: 1.0,
        }
    };
    // Work in street coordinates: `along` runs with the street, `across` is lateral.
    let (ta, tc, ra, rc) = match canyon.axis {
        Axis::Horizontal => (tx.x, tx.y, rx.x, rx.y),
        Axis::Vertical => (tx.y, tx.x, rx.y, rx.x),
    };
    let to_xy = |along: f64, across: f64| match canyon.axis {
        Axis::Horizontal => (along, across),
        Axis::Vertical => (across, along),
    };
    let dz = tx.height - rx.height;
    let wall = |wall_coord: f64| {
        let image_c = 2.0 * wall_coord - tc;
        let (da, dc) = (ra - ta, rc - image_c);
        let length = (da * da + dc * dc + dz * dz).sqrt();
        // Arrival direction at rx points back toward the image; departure at tx
        // is the mirror of the image-to-rx direction.
        let (ax, ay) = to_xy(-da, -dc);
        let (dx, dy) = to_xy(da, -dc);
        Path {
            length,
            tx_gain: antenna_gain(params, tx_steer, dy.atan2(dx)),
            rx_gain: antenna_gain(params, rx_steer, ay.atan2(ax)),
            reflection: fresnel_perpendicular(dc.abs() / length, params.permittivity),
        }
    };
    let ground = {
        let g = tx.ground_distance(rx);
        let h = tx.height + rx.height;
        let length = (g * g + h * h).sqrt();
        Path {
            reflection: fresnel_perpendicular(h / length, params.permittivity),
            length,
            ..los
        }
    };
    let half = street_width / 2.0;
    [
        los,
        wall(canyon.center + half),
        wall(canyon.center - half),
        ground,
    ]
}

/// Four-path street canyon gain with independent uniform phases from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn urban_canyon_gain<R: Rng>(
    tx: &Node,
    rx: &Node,
    tx_steer: f64,
    rx_steer: f64,
    canyon: &Canyon,
    street_width: f64,
    params: &PropagationParams,
    rng: &mut R,
) -> f64 {
    let paths = canyon_paths(tx, rx, tx_steer, rx_steer, canyon, street_width, params);
    let phases: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
    coherent_power(&paths, &phases, params.wavelength)
}
