//! Synthetic data from the hidden MRF: a hidden field drawn by prior block
//! Gibbs, then independent Gaussian observations given the hidden spins.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::gibbs::BlockGibbs;
use crate::lattice::{LatticeDims, ObservedField, SpinField};
use crate::model::StHmrfParams;
use crate::rng::substream;
use crate::scalar::Real;

pub const DEFAULT_HIDDEN_SWEEPS: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmrfSimConfig<T> {
    pub dims: LatticeDims,
    /// `sigma2 = 0` is allowed here and gives noiseless observations.
    pub params: StHmrfParams<T>,
    pub sweeps: usize,
    pub seed: u64,
}

impl<T: Real> HmrfSimConfig<T> {
    pub fn new(dims: LatticeDims, params: StHmrfParams<T>, seed: u64) -> Self {
        Self { dims, params, sweeps: DEFAULT_HIDDEN_SWEEPS, seed }
    }
}

/// Prior block Gibbs from a seeded uniform random field.
pub fn simulate_hidden<T: Real>(dims: &LatticeDims, params: &StHmrfParams<T>, sweeps: usize, seed: u64) -> SpinField {
    let mut rng = substream(seed, &[1]);
    let mut z = SpinField::random(*dims, &mut rng);
    let k = BlockGibbs::prior(dims, params.coupling());
    for _ in 0..sweeps {
        k.sweep(&mut z, &mut rng);
    }
    z
}

/// Independent draws `y_i ~ N(mu_{z_i}, sigma2)`.
pub fn emit<T: Real>(z: &SpinField, params: &StHmrfParams<T>, seed: u64) -> Result<ObservedField<T>> {
    let p = params;
    if !(p.sigma2 >= T::zero()) || !p.sigma2.is_finite() || !p.mu_plus.is_finite() || !p.mu_minus.is_finite() {
        return Err(invalid("emission parameters must be finite with sigma2 >= 0"));
    }
    let sd = p.sigma2.sqrt();
    let mut rng = substream(seed, &[2]);
    let vals = z
        .values()
        .iter()
        .map(|&s| {
            let mu = if s > 0 { p.mu_plus } else { p.mu_minus };
            if sd == T::zero() {
                mu
            } else {
                T::normal(&mut rng, mu, sd)
            }
        })
        .collect();
    ObservedField::new(z.dims(), vals)
}

pub fn simulate_hmrf<T: Real>(config: &HmrfSimConfig<T>) -> Result<(SpinField, ObservedField<T>)> {
    if config.params.beta.is_nan() || config.params.alpha.is_nan() {
        return Err(invalid("couplings must be numbers"));
    }
    let z = simulate_hidden(&config.dims, &config.params, config.sweeps, config.seed);
    let y = emit(&z, &config.params, config.seed)?;
    Ok((z, y))
}
