use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::FormulationError;
use crate::propagation::InterferenceMatrix;

/// Multiply every finite, nonzero interference entry by `1 + u` with `u`
/// uniform in `[-magnitude, magnitude]`. Entries are visited row by row, so
/// the result depends only on the matrix and the seed.
pub fn perturb_interference(
    m: &InterferenceMatrix,
    magnitude: f64,
    seed: u64,
) -> Result<InterferenceMatrix, FormulationError> {
    if !(magnitude > 0.0 && magnitude <= 1e-2) {
        return Err(FormulationError::InvalidPerturbation(magnitude));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = m.clone();
    for v in out.data_mut() {
        if v.is_finite() && *v != 0.0 {
            *v *= 1.0 + rng.gen_range(-magnitude..=magnitude);
        }
    }
    Ok(out)
}
