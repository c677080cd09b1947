//! Brute-force enumeration over every spin configuration of a small lattice.
//!
//! The prior side enumerates once into an integer density of states over
//! `(T1, T2)` and evaluates partition functions and moments from it in log
//! space, so any coupling up to `|beta| = 2` and beyond stays finite. The
//! posterior side walks all states with the emission term attached.
//!
//! States are visited in Gray-code order so that each step flips one spin and
//! the statistics update incrementally. The state space is split over the
//! high-order bits into independent chunks; results are merged in chunk
//! order, which keeps them bit-identical regardless of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{spatial_stat, temporal_stat, LatticeDims, Neighborhood, ObservedField, SpinField};
use crate::model::{Coupling, StHmrfParams};
use crate::scalar::Real;

/// Largest lattice (in sites) the oracle will enumerate.
pub const ENUMERATION_LIMIT: usize = 20;

const CHUNK_BITS: usize = 6;

fn check_capacity(dims: &LatticeDims) -> Result<()> {
    let sites = dims.site_count();
    if sites > ENUMERATION_LIMIT {
        return Err(Error::Capacity { sites, limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

/// Exact Gibbs-distribution moments of the lattice statistics.
///
/// `mean_stats`/`covariance` are over `(S)` for one frame and `(T1, T2)` for
/// several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactMoments<T> {
    pub log_partition: T,
    pub mean_stats: Vec<T>,
    pub covariance: Vec<Vec<T>>,
}

/// Multiplicities of every attained `(T1, T2)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DensityOfStates {
    pub dims: LatticeDims,
    /// `(t1, t2, count)`, sorted by `(t1, t2)`.
    pub entries: Vec<(i64, i64, u64)>,
}

/// Precomputed per-site spatial and temporal neighbours over all frames.
struct Geometry {
    spatial: Vec<Vec<usize>>,
    temporal: Vec<Vec<usize>>,
}

impl Geometry {
    fn new(dims: &LatticeDims) -> Self {
        let nb = Neighborhood::new(dims);
        let n = dims.frame_len();
        let mut spatial = Vec::with_capacity(dims.site_count());
        let mut temporal = Vec::with_capacity(dims.site_count());
        for site in 0..dims.site_count() {
            let (t, local) = (site / n, site % n);
            spatial.push(nb.of(local).iter().map(|&j| t * n + j).collect());
            let mut tn = Vec::with_capacity(2);
            if t > 0 {
                tn.push(site - n);
            }
            if t + 1 < dims.frames {
                tn.push(site + n);
            }
            temporal.push(tn);
        }
        Self { spatial, temporal }
    }
}

struct GrayWalker<'a> {
    geo: &'a Geometry,
    spins: Vec<i8>,
    t1: i64,
    t2: i64,
}

impl<'a> GrayWalker<'a> {
    fn start(geo: &'a Geometry, dims: LatticeDims, state: u64) -> Self {
        let z = SpinField::from_state_index(dims, state);
        let t1 = spatial_stat(&z);
        let t2 = temporal_stat(&z);
        Self { geo, spins: z.into_values(), t1, t2 }
    }

    #[inline]
    fn flip(&mut self, k: usize) {
        let zk = self.spins[k] as i64;
        let s: i64 = self.geo.spatial[k].iter().map(|&j| self.spins[j] as i64).sum();
        let tsum: i64 = self.geo.temporal[k].iter().map(|&j| self.spins[j] as i64).sum();
        self.t1 -= 2 * zk * s;
        self.t2 -= 2 * zk * tsum;
        self.spins[k] = -self.spins[k];
    }
}

/// Split `n` bits into `(high, low)` chunking.
fn chunking(n: usize) -> (usize, usize) {
    let high = CHUNK_BITS.min(n);
    (high, n - high)
}

/// Enumerate all `2^sites` states into a density of states.
pub fn density_of_states(dims: &LatticeDims) -> Result<DensityOfStates> {
    check_capacity(dims)?;
    let geo = Geometry::new(dims);
    let e1 = (dims.frames * dims.edge_count()) as i64;
    let e2 = dims.temporal_edge_count() as i64;
    let width = (2 * e2 + 1) as usize;
    let cells = (2 * e1 + 1) as usize * width;
    let n = dims.site_count();
    let (high, low) = chunking(n);

    let hist = (0..1u64 << high)
        .into_par_iter()
        .map(|h| {
            let mut hist = vec![0u64; cells];
            let mut w = GrayWalker::start(&geo, *dims, h << low);
            let cell = |w: &GrayWalker| ((w.t1 + e1) as usize) * width + (w.t2 + e2) as usize;
            hist[cell(&w)] += 1;
            for i in 1..(1u64 << low) {
                w.flip(i.trailing_zeros() as usize);
                hist[cell(&w)] += 1;
            }
            hist
        })
        .reduce(
            || vec![0u64; cells],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );

    let entries = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(idx, &c)| ((idx / width) as i64 - e1, (idx % width) as i64 - e2, c))
        .collect();
    Ok(DensityOfStates { dims: *dims, entries })
}

impl DensityOfStates {
    pub fn total_states(&self) -> u64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// Partition function and moments at the given coupling.
    pub fn moments<T: Real>(&self, coupling: Coupling<T>) -> ExactMoments<T> {
        let spatial = self.dims.is_spatial();
        let alpha = if spatial { T::zero() } else { coupling.alpha };
        let logw: Vec<T> = self
            .entries
            .iter()
            .map(|&(t1, t2, c)| {
                coupling.beta * T::from_stat(t1) + alpha * T::from_stat(t2) + T::from_f64(c as f64).unwrap().ln()
            })
            .collect();
        let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
        let weights: Vec<T> = logw.iter().map(|&l| (l - max).exp()).collect();
        let total: T = weights.iter().copied().sum();
        let log_partition = max + total.ln();
        let probs: Vec<T> = weights.iter().map(|&w| w / total).collect();

        let dim = if spatial { 1 } else { 2 };
        let stat = |e: &(i64, i64, u64), k: usize| T::from_stat(if k == 0 { e.0 } else { e.1 });
        let mean: Vec<T> =
            (0..dim).map(|k| self.entries.iter().zip(&probs).map(|(e, &p)| p * stat(e, k)).sum()).collect();
        let mut cov = vec![vec![T::zero(); dim]; dim];
        for a in 0..dim {
            for b in a..dim {
                let v: T = self
                    .entries
                    .iter()
                    .zip(&probs)
                    .map(|(e, &p)| p * (stat(e, a) - mean[a]) * (stat(e, b) - mean[b]))
                    .sum();
                cov[a][b] = v;
                cov[b][a] = v;
            }
        }
        ExactMoments { log_partition, mean_stats: mean, covariance: cov }
    }
}

/// Exact prior moments of `S` (one frame) or `(T1, T2)` (several frames).
///
/// `alpha` is ignored on a single frame and taken as 0 when absent.
pub fn exact_prior_moments<T: Real>(dims: &LatticeDims, beta: T, alpha: Option<T>) -> Result<ExactMoments<T>> {
    let dos = density_of_states(dims)?;
    Ok(dos.moments(Coupling::new(beta, alpha.unwrap_or_else(T::zero))))
}

/// Exact score `target - E[stats]` of the coupling log-likelihood.
pub fn exact_score_beta<T: Real>(dims: &LatticeDims, beta: T, alpha: Option<T>, target_stats: &[T]) -> Result<Vec<T>> {
    let m = exact_prior_moments(dims, beta, alpha)?;
    if target_stats.len() != m.mean_stats.len() {
        return Err(Error::InvalidArgument(format!(
            "expected {} target statistics, got {}",
            m.mean_stats.len(),
            target_stats.len()
        )));
    }
    Ok(target_stats.iter().zip(&m.mean_stats).map(|(&t, &e)| t - e).collect())
}

/// Exact posterior quantities under Gaussian emissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior<T> {
    /// `P(Z_i = +1 | Y)` per site.
    pub marginals_plus: Vec<T>,
    /// `E[S | Y]`, or `(E[T1 | Y], E[T2 | Y])` for several frames.
    pub mean_stats_given_y: Vec<T>,
    /// `log sum_z exp(beta T1 + alpha T2) prod_i exp(-(y_i - mu_{z_i})^2 / 2 sigma2)`.
    pub log_weight_total: T,
}

struct PosteriorChunk<T> {
    max: T,
    total: T,
    t1: T,
    t2: T,
    plus: Vec<T>,
}

pub fn exact_posterior<T: Real>(y: &ObservedField<T>, params: &StHmrfParams<T>) -> Result<ExactPosterior<T>> {
    let dims = y.dims();
    check_capacity(&dims)?;
    let emission = params.emission();
    emission.validate()?;
    let alpha = if dims.is_spatial() { T::zero() } else { params.alpha };
    let beta = params.beta;
    let geo = Geometry::new(&dims);
    let n = dims.site_count();
    let (high, low) = chunking(n);
    let kern_plus: Vec<T> = y.values().iter().map(|&v| emission.log_kernel(v, 1)).collect();
    let kern_minus: Vec<T> = y.values().iter().map(|&v| emission.log_kernel(v, -1)).collect();

    let walk = |h: u64, visit: &mut dyn FnMut(&GrayWalker, T)| {
        let mut w = GrayWalker::start(&geo, dims, h << low);
        let mut emis: T =
            w.spins.iter().enumerate().map(|(i, &s)| if s > 0 { kern_plus[i] } else { kern_minus[i] }).sum();
        let lw = |w: &GrayWalker, emis: T| emis + beta * T::from_stat(w.t1) + alpha * T::from_stat(w.t2);
        visit(&w, lw(&w, emis));
        for i in 1..(1u64 << low) {
            let k = i.trailing_zeros() as usize;
            let d = kern_plus[k] - kern_minus[k];
            emis = if w.spins[k] > 0 { emis - d } else { emis + d };
            w.flip(k);
            visit(&w, lw(&w, emis));
        }
    };

    let chunks: Vec<PosteriorChunk<T>> = (0..1u64 << high)
        .into_par_iter()
        .map(|h| {
            let mut max = T::neg_infinity();
            walk(h, &mut |_, l| max = max.max(l));
            let mut c =
                PosteriorChunk { max, total: T::zero(), t1: T::zero(), t2: T::zero(), plus: vec![T::zero(); n] };
            walk(h, &mut |w, l| {
                let wt = (l - max).exp();
                c.total = c.total + wt;
                c.t1 = c.t1 + wt * T::from_stat(w.t1);
                c.t2 = c.t2 + wt * T::from_stat(w.t2);
                for (acc, &s) in c.plus.iter_mut().zip(&w.spins) {
                    if s > 0 {
                        *acc = *acc + wt;
                    }
                }
            });
            c
        })
        .collect();

    let gmax = chunks.iter().map(|c| c.max).fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    let mut t1 = T::zero();
    let mut t2 = T::zero();
    let mut plus = vec![T::zero(); n];
    for c in &chunks {
        let s = (c.max - gmax).exp();
        total = total + s * c.total;
        t1 = t1 + s * c.t1;
        t2 = t2 + s * c.t2;
        for (a, &b) in plus.iter_mut().zip(&c.plus) {
            *a = *a + s * b;
        }
    }
    let marginals_plus = plus.iter().map(|&p| (p / total).min(T::one())).collect();
    let mean_stats_given_y = if dims.is_spatial() { vec![t1 / total] } else { vec![t1 / total, t2 / total] };
    Ok(ExactPosterior { marginals_plus, mean_stats_given_y, log_weight_total: gmax + total.ln() })
}

/// Unnormalised prior log weight `beta T1 + alpha T2` of a configuration.
pub fn log_prior_weight<T: Real>(z: &SpinField, coupling: Coupling<T>) -> T {
    let alpha = if z.dims().is_spatial() { T::zero() } else { coupling.alpha };
    coupling.beta * T::from_stat(spatial_stat(z)) + alpha * T::from_stat(temporal_stat(z))
}

/// Exact probability of every state (indexed by [`SpinField::state_index`])
/// under the prior, or under the posterior when `y` is given.
pub fn state_probabilities<T: Real>(
    dims: &LatticeDims,
    params: &StHmrfParams<T>,
    y: Option<&ObservedField<T>>,
) -> Result<Vec<T>> {
    check_capacity(dims)?;
    let emission = params.emission();
    let coupling = params.coupling();
    let logw: Vec<T> = (0..1u64 << dims.site_count())
        .map(|s| {
            let z = SpinField::from_state_index(*dims, s);
            let mut lw = log_prior_weight(&z, coupling);
            if let Some(y) = y {
                lw = lw + z.values().iter().zip(y.values()).map(|(&zi, &yi)| emission.log_kernel(yi, zi)).sum();
            }
            lw
        })
        .collect();
    let max = logw.iter().copied().fold(T::neg_infinity(), T::max);
    let w: Vec<T> = logw.iter().map(|&l| (l - max).exp()).collect();
    let total: T = w.iter().copied().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Exact single-site full conditional `P(Z_site = z_site | z_rest)` from the
/// ratio of joint prior weights.
pub fn exact_full_conditional<T: Real>(z: &SpinField, site: usize, coupling: Coupling<T>) -> T {
    let here = log_prior_weight(z, coupling);
    let mut flipped = z.clone();
    flipped.flip(site);
    let there = log_prior_weight(&flipped, coupling);
    T::one() / (T::one() + (there - here).exp())
}
