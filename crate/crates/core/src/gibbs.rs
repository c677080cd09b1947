//! Block Gibbs samplers over 2x2 blocks, for the posterior `P(Z | Y, theta)`
//! and for the Gibbs prior, with Monte-Carlo estimators of the expectations
//! the EM engine consumes.
//!
//! For a block `B` in frame `t` the unnormalised log conditional of a block
//! configuration is
//!
//! ```text
//!   sum_{j in B} -(y_j - mu_{z_j})^2 / (2 sigma2)                (posterior only)
//! + beta  ( sum_{inner edges} z_j z_k + sum_j z_j sum_{l in L_j} z_l )
//! + alpha   sum_j z_j (z_{j,t-1} + z_{j,t+1})                   (frames > 1)
//! ```
//!
//! where `L_j` are the neighbours of `j` outside the block and temporal terms
//! missing at the first and last frame are dropped. A sweep visits every block
//! of every frame once: frames ascending, blocks row-major. Each block is
//! drawn by inverse CDF over its `2^|B|` configurations with one uniform.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lattice::{block_partition, spatial_stat, temporal_stat, Block, LatticeDims, ObservedField, SpinField};
use crate::model::{Coupling, Emission, StHmrfParams};
use crate::rng::{derive_seed, seeded, substream, ChainRng};
use crate::scalar::Real;
use crate::trace::{BatchAccumulator, ChainTrace, DEFAULT_BATCHES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GibbsMode {
    /// Target `P(Z | Y, theta)`.
    Posterior,
    /// Target the Gibbs prior; observations are ignored.
    Prior,
}

/// Order in which blocks are refreshed within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepSchedule {
    /// One generator stream, blocks in fixed order.
    #[default]
    Sequential,
    /// Two colour classes of mutually non-adjacent blocks, each class updated
    /// concurrently with one counter-derived stream per block. Results do not
    /// depend on the number of threads but differ from `Sequential`.
    Colored,
}

/// Optional outputs of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub marginals: bool,
    /// Keep the per-sweep statistics of retained sweeps.
    pub trace: bool,
}

impl Default for Record {
    fn default() -> Self {
        Self { marginals: true, trace: false }
    }
}

/// Starting state of a prior chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PriorStart {
    /// Seeded uniform random field.
    #[default]
    Random,
    /// Ground state of the coupling (see [`ground_state`]). Above the
    /// critical coupling a random start coarsens slowly and leaves domain
    /// walls that bias the statistics low.
    Ordered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsRunConfig {
    pub sweeps_total: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: GibbsMode,
    pub record: Record,
    pub schedule: SweepSchedule,
    /// Ignored in posterior mode.
    pub prior_start: PriorStart,
}

impl GibbsRunConfig {
    pub fn posterior(seed: u64) -> Self {
        Self {
            sweeps_total: 10_000,
            burn_in: 5_000,
            seed,
            mode: GibbsMode::Posterior,
            record: Record::default(),
            schedule: SweepSchedule::Sequential,
            prior_start: PriorStart::Random,
        }
    }

    pub fn prior(seed: u64) -> Self {
        Self {
            sweeps_total: 1_000,
            burn_in: 200,
            seed,
            mode: GibbsMode::Prior,
            record: Record { marginals: false, trace: false },
            schedule: SweepSchedule::Sequential,
            prior_start: PriorStart::Random,
        }
    }

    pub fn with_budget(mut self, sweeps_total: usize, burn_in: usize) -> Self {
        self.sweeps_total = sweeps_total;
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps_total == 0 {
            return Err(invalid("sweeps_total must be positive"));
        }
        if self.burn_in >= self.sweeps_total {
            return Err(invalid(format!("burn_in {} must be below sweeps_total {}", self.burn_in, self.sweeps_total)));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.sweeps_total - self.burn_in
    }
}

/// Block with frame-local geometry resolved to positions for fast evaluation.
#[derive(Debug, Clone)]
struct CompiledBlock {
    sites: Vec<usize>,
    /// `sum over inner edges of z_j z_k` for every configuration.
    inner_sum: Vec<i32>,
    boundary: Vec<Vec<usize>>,
    /// Block row and column in the block grid; used for colouring.
    grid: (usize, usize),
}

impl CompiledBlock {
    fn new(block: &Block, dims: &LatticeDims) -> Self {
        let k = block.sites.len();
        let pos = |s: usize| block.sites.iter().position(|&x| x == s).expect("inner edge endpoint in block");
        let inner: Vec<(usize, usize)> = block.inner_edges.iter().map(|&(a, b)| (pos(a), pos(b))).collect();
        let inner_sum = (0..1usize << k)
            .map(|c| inner.iter().map(|&(a, b)| if ((c >> a) & 1) == ((c >> b) & 1) { 1 } else { -1 }).sum())
            .collect();
        let first = block.sites[0];
        Self {
            sites: block.sites.clone(),
            inner_sum,
            boundary: block.boundary.clone(),
            grid: (first / dims.cols / 2, first % dims.cols / 2),
        }
    }
}

/// Spin of bit `j` in block configuration `c`.
#[inline]
fn spin_of(c: usize, j: usize) -> i8 {
    if (c >> j) & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Prepared block Gibbs kernel for one lattice, parameter set and mode.
#[derive(Debug, Clone)]
pub struct BlockGibbs<T> {
    dims: LatticeDims,
    blocks: Vec<CompiledBlock>,
    coupling: Coupling<T>,
    /// Per-site `(log g(y|+1), log g(y|-1))` kernels; empty in prior mode.
    kernels: Vec<(T, T)>,
    mode: GibbsMode,
}

impl<T: Real> BlockGibbs<T> {
    /// Posterior kernel. `y` fixes the lattice.
    pub fn posterior(y: &ObservedField<T>, params: &StHmrfParams<T>) -> Result<Self> {
        let e = params.emission();
        e.validate()?;
        Ok(Self::build(y.dims(), params.coupling(), Some((y, e))))
    }

    /// Prior kernel.
    pub fn prior(dims: &LatticeDims, coupling: Coupling<T>) -> Self {
        Self::build(*dims, coupling, None)
    }

    /// Kernel for `mode`; observations are required by, and only used in,
    /// posterior mode.
    pub fn for_mode(
        dims: &LatticeDims,
        params: &StHmrfParams<T>,
        y: Option<&ObservedField<T>>,
        mode: GibbsMode,
    ) -> Result<Self> {
        match mode {
            GibbsMode::Prior => Ok(Self::prior(dims, params.coupling())),
            GibbsMode::Posterior => {
                let y = y.ok_or_else(|| invalid("posterior mode requires observations"))?;
                if y.dims() != *dims {
                    return Err(invalid("observations do not match the lattice"));
                }
                Self::posterior(y, params)
            }
        }
    }

    fn build(dims: LatticeDims, coupling: Coupling<T>, obs: Option<(&ObservedField<T>, Emission<T>)>) -> Self {
        let blocks = block_partition(&dims).iter().map(|b| CompiledBlock::new(b, &dims)).collect();
        let (kernels, mode) = match obs {
            Some((y, e)) => {
                (y.values().iter().map(|&v| (e.log_kernel(v, 1), e.log_kernel(v, -1))).collect(), GibbsMode::Posterior)
            }
            None => (Vec::new(), GibbsMode::Prior),
        };
        let coupling = if dims.is_spatial() { Coupling::spatial(coupling.beta) } else { coupling };
        Self { dims, blocks, coupling, kernels, mode }
    }

    pub fn dims(&self) -> LatticeDims {
        self.dims
    }

    pub fn mode(&self) -> GibbsMode {
        self.mode
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Unnormalised log conditional of every configuration of block `b` in
    /// frame `t`, written into `out[..2^|B|]`; returns the configuration count.
    fn log_weights(&self, z: &SpinField, t: usize, b: usize, out: &mut [T; 16]) -> usize {
        let blk = &self.blocks[b];
        let n = self.dims.frame_len();
        let base_idx = t * n;
        let vals = z.values();
        let k = blk.sites.len();
        let beta = self.coupling.beta;
        let alpha = self.coupling.alpha;
        let temporal = !self.dims.is_spatial();

        // gain[j]: log-weight difference between z_j = +1 and z_j = -1
        let mut gain = [T::zero(); 4];
        let mut base = T::zero();
        for j in 0..k {
            let site = blk.sites[j];
            let g = base_idx + site;
            let ext: i32 = blk.boundary[j].iter().map(|&l| vals[base_idx + l] as i32).sum();
            let mut h = beta * T::from_i32(ext).unwrap();
            if temporal {
                let mut tn = 0i32;
                if t > 0 {
                    tn += vals[g - n] as i32;
                }
                if t + 1 < self.dims.frames {
                    tn += vals[g + n] as i32;
                }
                h = h + alpha * T::from_i32(tn).unwrap();
            }
            let (ep, em) = if self.kernels.is_empty() { (T::zero(), T::zero()) } else { self.kernels[g] };
            base = base - h + em;
            gain[j] = h + h + ep - em;
        }
        let configs = 1usize << k;
        out[0] = base;
        for c in 1..configs {
            let low = c.trailing_zeros() as usize;
            out[c] = out[c & (c - 1)] + gain[low];
        }
        for c in 0..configs {
            out[c] = out[c] + beta * T::from_i32(blk.inner_sum[c]).unwrap();
        }
        configs
    }

    /// Normalised conditional distribution of block `b` in frame `t`.
    pub fn conditional(&self, z: &SpinField, t: usize, b: usize) -> Vec<T> {
        let mut lw = [T::zero(); 16];
        let m = self.log_weights(z, t, b, &mut lw);
        let max = lw[..m].iter().copied().fold(T::neg_infinity(), T::max);
        let w: Vec<T> = lw[..m].iter().map(|&l| (l - max).exp()).collect();
        let total: T = w.iter().copied().sum();
        w.into_iter().map(|x| x / total).collect()
    }

    /// Draw configuration of block `b` in frame `t` given one uniform.
    #[inline]
    fn draw(&self, z: &SpinField, t: usize, b: usize, u: T) -> usize {
        let mut lw = [T::zero(); 16];
        let m = self.log_weights(z, t, b, &mut lw);
        let max = lw[..m].iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for l in lw[..m].iter_mut() {
            *l = (*l - max).exp();
            total = total + *l;
        }
        let target = u * total;
        let mut cum = T::zero();
        for (c, &w) in lw[..m].iter().enumerate() {
            cum = cum + w;
            if cum > target {
                return c;
            }
        }
        m - 1
    }

    #[inline]
    fn write(&self, z: &mut SpinField, t: usize, b: usize, c: usize) {
        let base = t * self.dims.frame_len();
        for (j, &s) in self.blocks[b].sites.iter().enumerate() {
            z.set(base + s, spin_of(c, j));
        }
    }

    fn check(&self, z: &SpinField) {
        assert_eq!(z.dims(), self.dims, "field does not match the sampler's lattice");
    }

    /// One sequential sweep.
    pub fn sweep<R: Rng + ?Sized>(&self, z: &mut SpinField, rng: &mut R) {
        self.check(z);
        for t in 0..self.dims.frames {
            for b in 0..self.blocks.len() {
                let u = T::uniform(rng);
                let c = self.draw(z, t, b, u);
                self.write(z, t, b, c);
            }
        }
    }

    /// One coloured sweep. Every block draws its uniform from a stream keyed
    /// by `(seed, sweep_index, frame, block)`.
    pub fn sweep_colored(&self, z: &mut SpinField, seed: u64, sweep_index: u64) {
        self.check(z);
        for color in 0..2 {
            let jobs: Vec<(usize, usize)> = (0..self.dims.frames)
                .flat_map(|t| {
                    self.blocks
                        .iter()
                        .enumerate()
                        .filter(move |(_, blk)| (blk.grid.0 + blk.grid.1 + t) % 2 == color)
                        .map(move |(b, _)| (t, b))
                })
                .collect();
            let field: &SpinField = z;
            let draws: Vec<usize> = jobs
                .par_iter()
                .map(|&(t, b)| {
                    let mut rng = substream(seed, &[sweep_index, t as u64, b as u64]);
                    self.draw(field, t, b, T::uniform(&mut rng))
                })
                .collect();
            for (&(t, b), &c) in jobs.iter().zip(&draws) {
                self.write(z, t, b, c);
            }
        }
    }
}

/// Context for evaluating one block conditional.
#[derive(Debug, Clone, Copy)]
pub struct BlockContext<'a, T> {
    pub field: &'a SpinField,
    pub frame: usize,
    pub y: Option<&'a ObservedField<T>>,
    pub params: &'a StHmrfParams<T>,
    pub mode: GibbsMode,
}

/// Conditional distribution over the `2^|sites|` configurations of `block`
/// (bit `j` of the index set means `sites[j] = +1`).
pub fn block_conditional<T: Real>(block: &Block, ctx: &BlockContext<'_, T>) -> Result<Vec<T>> {
    let dims = ctx.field.dims();
    if ctx.frame >= dims.frames {
        return Err(invalid(format!("frame {} out of range", ctx.frame)));
    }
    let kernel = BlockGibbs::for_mode(&dims, ctx.params, ctx.y, ctx.mode)?;
    let single = CompiledBlock::new(block, &dims);
    let kernel = BlockGibbs { blocks: vec![single], ..kernel };
    Ok(kernel.conditional(ctx.field, ctx.frame, 0))
}

/// One sweep of `z` in the given mode.
pub fn gibbs_sweep<T: Real, R: Rng + ?Sized>(
    z: &mut SpinField,
    y: Option<&ObservedField<T>>,
    params: &StHmrfParams<T>,
    mode: GibbsMode,
    rng: &mut R,
) -> Result<()> {
    let k = BlockGibbs::for_mode(&z.dims(), params, y, mode)?;
    k.sweep(z, rng);
    Ok(())
}

/// Drive a chain for `config.sweeps_total` sweeps, calling `visit` after each
/// retained sweep with its index.
pub fn run_chain<T: Real>(
    kernel: &BlockGibbs<T>,
    z: &mut SpinField,
    config: &GibbsRunConfig,
    rng: &mut ChainRng,
    mut visit: impl FnMut(usize, &SpinField),
) {
    let sweep_seed = derive_seed(config.seed, &[0xC010]);
    for s in 0..config.sweeps_total {
        match config.schedule {
            SweepSchedule::Sequential => kernel.sweep(z, rng),
            SweepSchedule::Colored => kernel.sweep_colored(z, sweep_seed, s as u64),
        }
        if s >= config.burn_in {
            visit(s, z);
        }
    }
}

/// Per-sweep statistics `(T1, T2)` recorded on retained sweeps.
pub type StatTrace = ChainTrace<(i64, i64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEstimates<T> {
    /// `E[S | Y]` (`E[T1 | Y]` for several frames).
    pub e_s_given_y: T,
    pub e_t2_given_y: Option<T>,
    /// `P(Z = +1 | Y)` per (frame, site); empty when not recorded.
    pub marginals_plus: Vec<T>,
    pub se_s: T,
    pub se_t2: Option<T>,
    pub se_marginals: Vec<T>,
    pub retained_sweeps: usize,
    #[serde(skip)]
    pub trace: Option<StatTrace>,
}

impl<T: Real> PosteriorEstimates<T> {
    /// Targets for the coupling update: `(E[S|Y])` or `(E[T1|Y], E[T2|Y])`.
    pub fn targets(&self) -> Vec<T> {
        match self.e_t2_given_y {
            Some(t2) => vec![self.e_s_given_y, t2],
            None => vec![self.e_s_given_y],
        }
    }

    pub fn target_errors(&self) -> Vec<T> {
        match self.se_t2 {
            Some(t2) => vec![self.se_s, t2],
            None => vec![self.se_s],
        }
    }
}

/// Initial posterior state: each site takes the sign favoured by its own
/// emission.
pub fn responsibility_sign_field<T: Real>(y: &ObservedField<T>, emission: &Emission<T>) -> SpinField {
    let vals = y
        .values()
        .iter()
        .map(|&v| if emission.log_kernel(v, 1) >= emission.log_kernel(v, -1) { 1 } else { -1 })
        .collect();
    SpinField::new(y.dims(), vals).expect("spins are valid")
}

/// Monte-Carlo posterior expectations from a block Gibbs run.
pub fn estimate_posterior<T: Real>(
    y: &ObservedField<T>,
    params: &StHmrfParams<T>,
    config: &GibbsRunConfig,
) -> Result<PosteriorEstimates<T>> {
    config.validate()?;
    if config.mode != GibbsMode::Posterior {
        return Err(invalid("estimate_posterior needs a posterior-mode config"));
    }
    let kernel = BlockGibbs::posterior(y, params)?;
    let mut z = responsibility_sign_field(y, &params.emission());
    Ok(posterior_from_chain(&kernel, &mut z, config))
}

/// As [`estimate_posterior`], continuing from a caller-supplied state.
pub fn estimate_posterior_from<T: Real>(
    y: &ObservedField<T>,
    params: &StHmrfParams<T>,
    config: &GibbsRunConfig,
    z: &mut SpinField,
) -> Result<PosteriorEstimates<T>> {
    config.validate()?;
    if z.dims() != y.dims() {
        return Err(invalid("initial state does not match observations"));
    }
    let kernel = BlockGibbs::posterior(y, params)?;
    Ok(posterior_from_chain(&kernel, z, config))
}

fn posterior_from_chain<T: Real>(
    kernel: &BlockGibbs<T>,
    z: &mut SpinField,
    config: &GibbsRunConfig,
) -> PosteriorEstimates<T> {
    let dims = kernel.dims();
    let temporal = !dims.is_spatial();
    let n = dims.site_count();
    let retained = config.retained();
    let with_marg = config.record.marginals;
    let width = 2 + if with_marg { n } else { 0 };
    let mut acc = BatchAccumulator::new(width, retained, DEFAULT_BATCHES);
    let mut sum_t1 = 0i64;
    let mut sum_t2 = 0i64;
    let mut plus = vec![0u64; if with_marg { n } else { 0 }];
    let mut trace = config.record.trace.then(|| ChainTrace::new(config.seed, 0));
    let mut rng = seeded(config.seed);

    run_chain(kernel, z, config, &mut rng, |s, f| {
        let t1 = spatial_stat(f);
        let t2 = if temporal { temporal_stat(f) } else { 0 };
        sum_t1 += t1;
        sum_t2 += t2;
        let vals = f.values();
        if with_marg {
            for (p, &v) in plus.iter_mut().zip(vals) {
                *p += (v > 0) as u64;
            }
        }
        acc.push_with(|k| match k {
            0 => T::from_stat(t1),
            1 => T::from_stat(t2),
            _ => {
                if vals[k - 2] > 0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
        });
        if let Some(tr) = trace.as_mut() {
            tr.push(s as u64, (t1, t2));
        }
    });

    let r = T::from_count(retained);
    let se = acc.standard_errors();
    PosteriorEstimates {
        e_s_given_y: T::from_stat(sum_t1) / r,
        e_t2_given_y: temporal.then(|| T::from_stat(sum_t2) / r),
        marginals_plus: plus.iter().map(|&c| T::from_f64(c as f64).unwrap() / r).collect(),
        se_s: se[0],
        se_t2: temporal.then(|| se[1]),
        se_marginals: se[2..].to_vec(),
        retained_sweeps: retained,
        trace,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorMoments<T> {
    /// `E[S]`, or `(E[T1], E[T2])` for several frames.
    pub mean_stats: Vec<T>,
    /// Sample covariance of the statistics over retained sweeps.
    pub covariance: Vec<Vec<T>>,
    /// Batch-means standard errors of `mean_stats`.
    pub mc_standard_errors: Vec<T>,
    pub retained_sweeps: usize,
    #[serde(skip)]
    pub trace: Option<StatTrace>,
}

/// Configuration maximising the prior weight: all `+1` for `beta >= 0`, a
/// checkerboard otherwise, with every other frame negated when `alpha < 0`.
pub fn ground_state<T: Real>(dims: &LatticeDims, coupling: Coupling<T>) -> SpinField {
    let anti_space = coupling.beta < T::zero();
    let anti_time = !dims.is_spatial() && coupling.alpha < T::zero();
    let vals = (0..dims.site_count())
        .map(|g| {
            let (t, r, c) = dims.coords(g);
            let odd = (anti_space && (r + c) % 2 == 1) != (anti_time && t % 2 == 1);
            if odd {
                -1
            } else {
                1
            }
        })
        .collect();
    SpinField::new(*dims, vals).expect("spins are valid")
}

/// Monte-Carlo prior moments of the lattice statistics, started as
/// `config.prior_start` says.
pub fn estimate_prior_moments<T: Real>(
    dims: &LatticeDims,
    coupling: Coupling<T>,
    config: &GibbsRunConfig,
) -> Result<PriorMoments<T>> {
    config.validate()?;
    if config.mode != GibbsMode::Prior {
        return Err(invalid("estimate_prior_moments needs a prior-mode config"));
    }
    let mut rng = seeded(config.seed);
    let mut z = match config.prior_start {
        PriorStart::Random => SpinField::random(*dims, &mut rng),
        PriorStart::Ordered => ground_state(dims, coupling),
    };
    Ok(prior_from_chain(dims, coupling, config, &mut z, &mut rng))
}

/// As [`estimate_prior_moments`], continuing from a caller-supplied state.
pub fn estimate_prior_moments_from<T: Real>(
    coupling: Coupling<T>,
    config: &GibbsRunConfig,
    z: &mut SpinField,
) -> Result<PriorMoments<T>> {
    config.validate()?;
    let mut rng = seeded(config.seed);
    let dims = z.dims();
    Ok(prior_from_chain(&dims, coupling, config, z, &mut rng))
}

fn prior_from_chain<T: Real>(
    dims: &LatticeDims,
    coupling: Coupling<T>,
    config: &GibbsRunConfig,
    z: &mut SpinField,
    rng: &mut ChainRng,
) -> PriorMoments<T> {
    let kernel = BlockGibbs::prior(dims, coupling);
    let temporal = !dims.is_spatial();
    let dim = if temporal { 2 } else { 1 };
    let mut samples: Vec<[i64; 2]> = Vec::with_capacity(config.retained());
    let mut trace = config.record.trace.then(|| ChainTrace::new(config.seed, 0));
    run_chain(&kernel, z, config, rng, |s, f| {
        let t1 = spatial_stat(f);
        let t2 = if temporal { temporal_stat(f) } else { 0 };
        samples.push([t1, t2]);
        if let Some(tr) = trace.as_mut() {
            tr.push(s as u64, (t1, t2));
        }
    });
    moments_of(&samples, dim, trace)
}

fn moments_of<T: Real>(samples: &[[i64; 2]], dim: usize, trace: Option<StatTrace>) -> PriorMoments<T> {
    let n = samples.len();
    let nt = T::from_count(n);
    // accumulate in integers around the first sample to keep sums exact
    let mean: Vec<T> = (0..dim).map(|k| T::from_stat(samples.iter().map(|s| s[k]).sum::<i64>()) / nt).collect();
    let mut cov = vec![vec![T::zero(); dim]; dim];
    if n > 1 {
        for a in 0..dim {
            for b in a..dim {
                let v: T =
                    samples.iter().map(|s| (T::from_stat(s[a]) - mean[a]) * (T::from_stat(s[b]) - mean[b])).sum::<T>()
                        / T::from_count(n - 1);
                cov[a][b] = v;
                cov[b][a] = v;
            }
        }
    }
    let mut acc = BatchAccumulator::new(dim, n, DEFAULT_BATCHES);
    for s in samples {
        acc.push_with(|k| T::from_stat(s[k]));
    }
    PriorMoments {
        mean_stats: mean,
        covariance: cov,
        mc_standard_errors: acc.standard_errors(),
        retained_sweeps: n,
        trace,
    }
}
