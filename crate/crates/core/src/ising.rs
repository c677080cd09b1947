//! Single-site Metropolis–Hastings sampler for the Ising prior.
//!
//! One update picks a site uniformly, proposes flipping it and accepts with
//! probability `min(1, exp(-2 beta (a - d)))`, where `a`/`d` count the
//! neighbours agreeing/disagreeing with the current spin. The site is drawn
//! before the acceptance uniform, both from the same stream.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{neighbor_spin_sum, spatial_stat, LatticeDims, Neighborhood, SpinField};
use crate::rng::{seeded, ChainRng};
use crate::scalar::Real;
use crate::trace::ChainTrace;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialField {
    RandomUniform,
    AllPlus,
    Provided(SpinField),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingRunConfig<T> {
    pub dims: LatticeDims,
    pub beta: T,
    pub total_updates: u64,
    pub seed: u64,
    /// Stride (in updates) between recorded values of `S`.
    pub record_every: u64,
    pub init: InitialField,
}

impl<T: Real> IsingRunConfig<T> {
    pub fn new(dims: LatticeDims, beta: T, total_updates: u64, seed: u64) -> Self {
        Self {
            dims,
            beta,
            total_updates,
            seed,
            record_every: dims.site_count() as u64,
            init: InitialField::RandomUniform,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.is_spatial() {
            return Err(invalid("the Metropolis sampler runs on a single frame"));
        }
        if self.total_updates == 0 {
            return Err(invalid("total_updates must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be at least 1"));
        }
        if !self.beta.is_finite() {
            return Err(invalid("beta must be finite"));
        }
        if let InitialField::Provided(f) = &self.init {
            if f.dims() != self.dims {
                return Err(invalid("provided initial field does not match dims"));
            }
        }
        Ok(())
    }
}

/// Acceptance probability of flipping `site` of a spatial field.
pub fn flip_acceptance<T: Real>(z: &SpinField, site: usize, beta: T) -> T {
    let nb = Neighborhood::new(&z.dims());
    let s = neighbor_spin_sum(z, &nb, 0, site);
    // z_i * s_i = a - d
    let a_minus_d = z.get(site) as i32 * s;
    acceptance_for(beta, a_minus_d)
}

#[inline]
fn acceptance_for<T: Real>(beta: T, a_minus_d: i32) -> T {
    (T::lit(-2.0) * beta * T::from_i32(a_minus_d).unwrap()).exp().min(T::one())
}

/// Reusable sampler state for one coupling and lattice.
#[derive(Debug, Clone)]
pub struct MetropolisSampler<T> {
    nb: Neighborhood,
    /// Acceptance indexed by `(a - d) + 4`.
    table: [T; 9],
}

/// Outcome of one proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MhStep {
    pub site: usize,
    pub accepted: bool,
    /// Change in `S`; zero when rejected.
    pub delta_s: i64,
}

impl<T: Real> MetropolisSampler<T> {
    pub fn new(dims: &LatticeDims, beta: T) -> Self {
        let mut table = [T::one(); 9];
        for (k, slot) in table.iter_mut().enumerate() {
            *slot = acceptance_for(beta, k as i32 - 4);
        }
        Self { nb: Neighborhood::new(dims), table }
    }

    /// One proposal: draw a site, then `u`, and flip when `u <= alpha`.
    #[inline]
    pub fn update<R: Rng + ?Sized>(&self, z: &mut SpinField, rng: &mut R) -> MhStep {
        let n = self.nb.len();
        let site = rng.random_range(0..n);
        let u = T::uniform(rng);
        self.apply(z, site, u)
    }

    /// Apply a proposal with explicit draws.
    pub fn apply(&self, z: &mut SpinField, site: usize, u: T) -> MhStep {
        let s = neighbor_spin_sum(z, &self.nb, 0, site);
        let zs = z.get(site) as i32 * s;
        if u <= self.table[(zs + 4) as usize] {
            z.flip(site);
            MhStep { site, accepted: true, delta_s: -2 * zs as i64 }
        } else {
            MhStep { site, accepted: false, delta_s: 0 }
        }
    }
}

/// Single MH update of `z` at coupling `beta`.
pub fn mh_update<T: Real, R: Rng + ?Sized>(z: &mut SpinField, beta: T, rng: &mut R) -> MhStep {
    MetropolisSampler::new(&z.dims(), beta).update(z, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsingRunSummary {
    pub total_updates: u64,
    pub accepted: u64,
    /// Updates divided by the number of sites.
    pub sweeps: f64,
    pub final_s: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsingRun {
    pub field: SpinField,
    /// `S(z)` at update 0 and every `record_every` updates.
    pub trace: ChainTrace<i64>,
    pub summary: IsingRunSummary,
}

pub fn initial_field(init: &InitialField, dims: LatticeDims, rng: &mut ChainRng) -> SpinField {
    match init {
        InitialField::RandomUniform => SpinField::random(dims, rng),
        InitialField::AllPlus => SpinField::filled(dims, 1),
        InitialField::Provided(f) => f.clone(),
    }
}

/// Run `total_updates` proposals from the configured initial field.
pub fn simulate<T: Real>(config: &IsingRunConfig<T>) -> Result<IsingRun> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let mut z = initial_field(&config.init, config.dims, &mut rng);
    let sampler = MetropolisSampler::new(&config.dims, config.beta);
    let mut s = spatial_stat(&z);
    let mut trace = ChainTrace::new(config.seed, 0);
    trace.push(0, s);
    let mut accepted = 0u64;
    for k in 1..=config.total_updates {
        let step = sampler.update(&mut z, &mut rng);
        if step.accepted {
            accepted += 1;
            s += step.delta_s;
        }
        if k % config.record_every == 0 {
            trace.push(k, s);
        }
    }
    debug_assert_eq!(s, spatial_stat(&z));
    let summary = IsingRunSummary {
        total_updates: config.total_updates,
        accepted,
        sweeps: config.total_updates as f64 / config.dims.site_count() as f64,
        final_s: s,
    };
    Ok(IsingRun { field: z, trace, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coupling;
    use crate::oracle::log_prior_weight;

    fn d(r: usize, c: usize) -> LatticeDims {
        LatticeDims::spatial(r, c).unwrap()
    }

    #[test]
    fn balanced_neighbourhood_always_accepts() {
        // centre of 3x3 with two agreeing and two disagreeing neighbours
        let z = SpinField::new(d(3, 3), vec![1, 1, 1, -1, 1, 1, 1, -1, 1]).unwrap();
        for beta in [-1.0f64, 0.3, 2.0] {
            assert_eq!(flip_acceptance(&z, 4, beta), 1.0);
        }
    }

    #[test]
    fn acceptance_equals_ratio_of_joint_weights() {
        // all agree: a = 4, d = 0
        let z = SpinField::filled(d(3, 3), 1);
        let a = flip_acceptance(&z, 4, 0.3f64);
        let mut zf = z.clone();
        zf.flip(4);
        let ratio =
            (log_prior_weight(&zf, Coupling::spatial(0.3f64)) - log_prior_weight(&z, Coupling::spatial(0.3))).exp();
        assert!((a - ratio).abs() < 1e-15);
        assert!((a - 0.090_717_953_289_412_5).abs() < 1e-12);

        // all disagree: a = 0, d = 4
        let z = SpinField::checkerboard(d(3, 3));
        let a = flip_acceptance(&z, 4, -1.0f64);
        let mut zf = z.clone();
        zf.flip(4);
        let ratio =
            (log_prior_weight(&zf, Coupling::spatial(-1.0f64)) - log_prior_weight(&z, Coupling::spatial(-1.0))).exp();
        assert!((a - ratio.min(1.0)).abs() < 1e-15);
        assert!((a - 3.354_626_279_025_119e-4).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_accepts_every_proposal() {
        let mut rng = seeded(3);
        let mut z = SpinField::random(d(4, 4), &mut rng);
        let s = MetropolisSampler::new(&z.dims(), 0.0f64);
        for _ in 0..500 {
            assert!(s.update(&mut z, &mut rng).accepted);
        }
    }

    #[test]
    fn zero_uniform_always_accepts() {
        let s = MetropolisSampler::new(&d(3, 3), 5.0f64);
        let mut z = SpinField::filled(d(3, 3), 1);
        let step = s.apply(&mut z, 4, 0.0);
        assert!(step.accepted);
        assert_eq!(step.delta_s, -8);
        assert_eq!(z.get(4), -1);
    }

    #[test]
    fn one_update_changes_at_most_one_spin() {
        let mut cfg = IsingRunConfig::new(d(5, 5), 0.4f64, 1, 9);
        cfg.init = InitialField::AllPlus;
        let run = simulate(&cfg).unwrap();
        let changed = run.field.values().iter().filter(|&&v| v == -1).count();
        assert!(changed <= 1);
        cfg.total_updates = 0;
        assert!(simulate(&cfg).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut cfg = IsingRunConfig::new(d(8, 8), 0.35f64, 20_000, 42);
        cfg.record_every = 64;
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a.field, b.field);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace.len(), 1 + 20_000 / 64);
        assert_eq!(a.summary.final_s, spatial_stat(&a.field));
    }

    #[test]
    fn multi_frame_rejected() {
        let cfg = IsingRunConfig::new(LatticeDims::new(3, 3, 2).unwrap(), 0.1f64, 10, 1);
        assert!(simulate(&cfg).is_err());
    }
}
