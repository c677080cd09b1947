//! Coupling estimation from an observed spin field by Metropolis–Hastings on
//! the pseudo-likelihood.
//!
//! With `s_i` the neighbour spin sum of site `i`,
//!
//! ```text
//! log PL(beta) = sum_i [ z_i beta s_i - log(2 cosh(beta s_i)) ]
//! ```
//!
//! The `s_i` do not change while the chain on `beta` runs, so the field is
//! reduced once to `sum_i z_i s_i` and a histogram of `|s_i|`; each
//! evaluation is then constant time.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{neighbor_spin_sum, Neighborhood, SpinField};
use crate::rng::seeded;
use crate::scalar::{log_two_cosh, Real};
use crate::trace::{mean, std_dev, ChainTrace};

/// Mean-spin magnitude above which a field is flagged as a sparse state.
pub const SPARSE_STATE_THRESHOLD: f64 = 0.95;

/// Sufficient summary of a field for its pseudo-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlStatistics {
    /// `sum_i z_i s_i` (twice the spatial statistic).
    pub agreement: i64,
    /// Number of sites with `|s_i| = k`, for `k = 0..=4`.
    pub abs_counts: [u64; 5],
}

impl PlStatistics {
    pub fn from_field(z: &SpinField) -> Self {
        let dims = z.dims();
        let nb = Neighborhood::new(&dims);
        let mut agreement = 0i64;
        let mut abs_counts = [0u64; 5];
        for t in 0..dims.frames {
            for site in 0..dims.frame_len() {
                let s = neighbor_spin_sum(z, &nb, t, site);
                agreement += (z.get(t * dims.frame_len() + site) as i32 * s) as i64;
                abs_counts[s.unsigned_abs() as usize] += 1;
            }
        }
        Self { agreement, abs_counts }
    }

    pub fn log_pl<T: Real>(&self, beta: T) -> T {
        let lin = beta * T::from_stat(self.agreement);
        let norm: T = self
            .abs_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(k, &c)| T::from_f64(c as f64).unwrap() * log_two_cosh(beta * T::from_count(k)))
            .sum();
        lin - norm
    }

    /// `d log PL / d beta = sum_i s_i (z_i - tanh(beta s_i))`.
    pub fn score<T: Real>(&self, beta: T) -> T {
        let sub: T = self
            .abs_counts
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let kt = T::from_count(k);
                T::from_f64(c as f64).unwrap() * kt * (beta * kt).tanh()
            })
            .sum();
        T::from_stat(self.agreement) - sub
    }
}

/// Log pseudo-likelihood of `z` at coupling `beta`.
pub fn log_pseudo_likelihood<T: Real>(z: &SpinField, beta: T) -> T {
    PlStatistics::from_field(z).log_pl(beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlChainConfig<T> {
    pub init_beta: T,
    /// Standard deviation of the Gaussian random-walk proposal.
    pub proposal_sd: T,
    pub n_total: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl<T: Real> Default for PlChainConfig<T> {
    fn default() -> Self {
        Self { init_beta: T::zero(), proposal_sd: T::one(), n_total: 1000, burn_in: 500, seed: 0 }
    }
}

impl<T: Real> PlChainConfig<T> {
    pub fn with_init(init_beta: T, seed: u64) -> Self {
        Self { init_beta, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_sd > T::zero()) {
            return Err(invalid("proposal_sd must be positive"));
        }
        if self.n_total == 0 {
            return Err(invalid("n_total must be positive"));
        }
        if self.burn_in >= self.n_total {
            return Err(invalid(format!("burn_in {} must be below n_total {}", self.burn_in, self.n_total)));
        }
        if !self.init_beta.is_finite() {
            return Err(invalid("init_beta must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlStep<T> {
    pub beta: T,
    pub proposal: T,
    pub accepted: bool,
}

/// Acceptance probability of moving the chain from `from` to `to`.
pub fn pl_acceptance<T: Real>(stats: &PlStatistics, from: T, to: T) -> T {
    (stats.log_pl(to) - stats.log_pl(from)).exp().min(T::one())
}

/// One random-walk step: draw `beta' ~ N(beta_t, sd^2)`, then `u`, and move
/// when `u < alpha(beta_t, beta')`.
pub fn pl_mh_step<T: Real, R: Rng + ?Sized>(beta_t: T, stats: &PlStatistics, proposal_sd: T, rng: &mut R) -> PlStep<T> {
    let proposal = T::normal(rng, beta_t, proposal_sd);
    let u = T::uniform(rng);
    if u < pl_acceptance(stats, beta_t, proposal) {
        PlStep { beta: proposal, proposal, accepted: true }
    } else {
        PlStep { beta: beta_t, proposal, accepted: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlEstimate<T> {
    pub init_beta: T,
    /// Mean of the chain after burn-in.
    pub beta_hat: T,
    /// Standard deviation of the retained chain.
    pub trace_sd: T,
    pub acceptance_rate: T,
    /// `|mean spin|` of the field exceeds [`SPARSE_STATE_THRESHOLD`].
    pub suspect_sparse_state: bool,
    /// `beta^0 .. beta^n`; `burn_in` is set so `retained()` is `beta^{m+1}..beta^n`.
    pub trace: ChainTrace<T>,
    /// Acceptance of the move into each trace entry (`false` for `beta^0`).
    pub accepted: Vec<bool>,
}

fn run_chain<T: Real>(stats: &PlStatistics, cfg: &PlChainConfig<T>, sparse: bool) -> PlEstimate<T> {
    let mut rng = seeded(cfg.seed);
    let mut trace = ChainTrace::new(cfg.seed, cfg.burn_in + 1);
    let mut accepted = Vec::with_capacity(cfg.n_total + 1);
    let mut beta = cfg.init_beta;
    trace.push(0, beta);
    accepted.push(false);
    let mut n_acc = 0usize;
    for step in 1..=cfg.n_total {
        let s = pl_mh_step(beta, stats, cfg.proposal_sd, &mut rng);
        beta = s.beta;
        n_acc += s.accepted as usize;
        trace.push(step as u64, beta);
        accepted.push(s.accepted);
    }
    let retained = trace.retained();
    PlEstimate {
        init_beta: cfg.init_beta,
        beta_hat: mean(retained),
        trace_sd: std_dev(retained),
        acceptance_rate: T::from_count(n_acc) / T::from_count(cfg.n_total),
        suspect_sparse_state: sparse,
        trace,
        accepted,
    }
}

/// Run one pseudo-likelihood chain per config. Chains run concurrently; each
/// result depends only on its own config.
pub fn estimate_beta<T: Real>(z: &SpinField, configs: &[PlChainConfig<T>]) -> Result<Vec<PlEstimate<T>>> {
    if configs.is_empty() {
        return Err(invalid("at least one chain config is required"));
    }
    for c in configs {
        c.validate()?;
    }
    let stats = PlStatistics::from_field(z);
    let sparse = z.mean_spin().abs() > SPARSE_STATE_THRESHOLD;
    Ok(configs.par_iter().map(|c| run_chain(&stats, c, sparse)).collect())
}
