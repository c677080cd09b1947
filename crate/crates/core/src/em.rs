//! Parameter estimation for the spatial and spatio-temporal hidden MRF.
//!
//! Each EM iteration runs a Monte-Carlo E-step at the current parameters,
//! giving posterior marginals and the posterior means of the lattice
//! statistics. The M-step then updates the couplings by Newton–Raphson on the
//! prior log-likelihood (score `E[T|Y] - E_theta[T]`, Hessian
//! `-Cov_theta[T]`, both re-estimated at every inner step) and the emission
//! parameters by closed-form responsibility-weighted moments. The two groups
//! do not interact, so their order within the M-step does not matter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gibbs::{estimate_posterior, estimate_prior_moments, GibbsRunConfig, PriorMoments, PriorStart};
use crate::lattice::{LatticeDims, ObservedField, SpinField};
use crate::model::{Coupling, Emission, HmrfParams, StHmrfParams};
use crate::oracle::{exact_posterior, exact_prior_moments};
use crate::rng::derive_seed;
use crate::scalar::Real;

/// Relative variance floor: a scalar NR step is flat when
/// `Var[S] < FLAT_VARIANCE_FACTOR * E_total^2`.
pub const FLAT_VARIANCE_FACTOR: f64 = 1e-8;
/// Largest acceptable condition number of the 2x2 prior covariance.
pub const MAX_CONDITION: f64 = 1e8;
/// `|score| / E_total` below this is treated as a flat score curve.
pub const SCORE_FLATNESS_FRACTION: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmStatus {
    Converged,
    MaxIters,
    NrDiverged,
}

/// Why a Newton–Raphson coupling update gave up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NrFailure {
    /// Prior variance of `S` below the flatness floor.
    FlatVariance { variance: f64, floor: f64 },
    /// Prior covariance of `(T1, T2)` singular or badly conditioned.
    SingularHessian { determinant: f64, condition: f64 },
    /// No convergence within the inner iteration budget.
    IterationLimit { iterations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig<T> {
    pub max_em_iters: usize,
    /// Bound on every parameter increment for EM convergence.
    pub em_tol: T,
    pub nr_tol: T,
    pub nr_max_iters: usize,
    pub nr_step_cap: T,
    pub posterior_gibbs: GibbsRunConfig,
    /// Budget and seed of every prior-moment estimate inside the NR loop.
    pub prior_gibbs: GibbsRunConfig,
    /// Starting point; derived from the data when absent.
    pub init_params: Option<StHmrfParams<T>>,
    /// Compute `sigma2` around the previous iteration's means instead of the
    /// freshly updated ones.
    pub sigma_from_previous_means: bool,
}

impl<T: Real> EmConfig<T> {
    /// Defaults with the two Gibbs streams derived from `seed`.
    pub fn new(seed: u64) -> Self {
        Self {
            max_em_iters: 100,
            em_tol: T::lit(1e-3),
            nr_tol: T::lit(1e-3),
            nr_max_iters: 50,
            nr_step_cap: T::lit(0.5),
            posterior_gibbs: GibbsRunConfig::posterior(derive_seed(seed, &[0xE1])),
            prior_gibbs: GibbsRunConfig {
                prior_start: PriorStart::Ordered,
                ..GibbsRunConfig::prior(derive_seed(seed, &[0xE2]))
            },
            init_params: None,
            sigma_from_previous_means: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_em_iters == 0 || self.nr_max_iters == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        for (name, v) in [("em_tol", self.em_tol), ("nr_tol", self.nr_tol), ("nr_step_cap", self.nr_step_cap)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        self.posterior_gibbs.validate()?;
        self.prior_gibbs.validate()?;
        if let Some(p) = &self.init_params {
            p.emission().validate()?;
        }
        Ok(())
    }
}

/// Posterior quantities consumed by one EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary<T> {
    pub marginals_plus: Vec<T>,
    /// `E[S|Y]` or `(E[T1|Y], E[T2|Y])`.
    pub targets: Vec<T>,
    pub target_se: Vec<T>,
}

/// Source of posterior and prior expectations.
pub trait MomentEngine<T: Real>: Sync {
    fn posterior(&self, y: &ObservedField<T>, params: &StHmrfParams<T>) -> Result<PosteriorSummary<T>>;
    fn prior(&self, dims: &LatticeDims, coupling: Coupling<T>) -> Result<PriorMoments<T>>;
}

/// Block Gibbs estimates. Every call reuses the configured seeds, so the
/// estimates are smooth functions of the parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEngine {
    pub posterior: GibbsRunConfig,
    pub prior: GibbsRunConfig,
}

impl<T: Real> MomentEngine<T> for MonteCarloEngine {
    fn posterior(&self, y: &ObservedField<T>, params: &StHmrfParams<T>) -> Result<PosteriorSummary<T>> {
        let mut cfg = self.posterior;
        cfg.record.marginals = true;
        let est = estimate_posterior(y, params, &cfg)?;
        Ok(PosteriorSummary {
            targets: est.targets(),
            target_se: est.target_errors(),
            marginals_plus: est.marginals_plus,
        })
    }

    fn prior(&self, dims: &LatticeDims, coupling: Coupling<T>) -> Result<PriorMoments<T>> {
        estimate_prior_moments(dims, coupling, &self.prior)
    }
}

/// Exact expectations by enumeration; small lattices only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExactEngine;

impl<T: Real> MomentEngine<T> for ExactEngine {
    fn posterior(&self, y: &ObservedField<T>, params: &StHmrfParams<T>) -> Result<PosteriorSummary<T>> {
        let ex = exact_posterior(y, params)?;
        let k = ex.mean_stats_given_y.len();
        Ok(PosteriorSummary {
            marginals_plus: ex.marginals_plus,
            targets: ex.mean_stats_given_y,
            target_se: vec![T::zero(); k],
        })
    }

    fn prior(&self, dims: &LatticeDims, coupling: Coupling<T>) -> Result<PriorMoments<T>> {
        let alpha = (!dims.is_spatial()).then_some(coupling.alpha);
        let m = exact_prior_moments(dims, coupling.beta, alpha)?;
        let k = m.mean_stats.len();
        Ok(PriorMoments {
            mean_stats: m.mean_stats,
            covariance: m.covariance,
            mc_standard_errors: vec![T::zero(); k],
            retained_sweeps: 0,
            trace: None,
        })
    }
}

fn check_marginals<T: Real>(y: &ObservedField<T>, marginals: &[T]) -> Result<()> {
    if marginals.len() != y.len() {
        return Err(invalid(format!("expected {} marginals, got {}", y.len(), marginals.len())));
    }
    if marginals.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
        return Err(invalid("marginals must lie in [0, 1]"));
    }
    Ok(())
}

/// Responsibility-weighted class means `(mu_plus, mu_minus)`.
pub fn m_step_means<T: Real>(y: &ObservedField<T>, marginals_plus: &[T]) -> Result<(T, T)> {
    check_marginals(y, marginals_plus)?;
    let (mut wp, mut wm, mut sp, mut sm) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (&v, &p) in y.values().iter().zip(marginals_plus) {
        let q = T::one() - p;
        wp = wp + p;
        wm = wm + q;
        sp = sp + p * v;
        sm = sm + q * v;
    }
    if !(wp > T::zero()) {
        return Err(Error::DegenerateClass { class: "+1" });
    }
    if !(wm > T::zero()) {
        return Err(Error::DegenerateClass { class: "-1" });
    }
    Ok((sp / wp, sm / wm))
}

/// Responsibility-weighted mean squared deviation about the given means,
/// over all sites of all frames.
pub fn m_step_variance<T: Real>(y: &ObservedField<T>, marginals_plus: &[T], mu_plus: T, mu_minus: T) -> Result<T> {
    check_marginals(y, marginals_plus)?;
    let total: T = y
        .values()
        .iter()
        .zip(marginals_plus)
        .map(|(&v, &p)| {
            let (a, b) = (v - mu_plus, v - mu_minus);
            p * a * a + (T::one() - p) * b * b
        })
        .sum();
    let s2 = total / T::from_count(y.len());
    if !(s2 > T::zero()) || !s2.is_finite() {
        return Err(Error::DegenerateVariance(s2.to_f64_lossy()));
    }
    Ok(s2)
}

/// Expected emission log-likelihood `sum_i E[log g(y_i | z_i)]` under the
/// given marginals.
pub fn expected_emission_loglik<T: Real>(y: &ObservedField<T>, marginals_plus: &[T], e: &Emission<T>) -> T {
    y.values()
        .iter()
        .zip(marginals_plus)
        .map(|(&v, &p)| p * e.log_density(v, 1) + (T::one() - p) * e.log_density(v, -1))
        .sum()
}

/// One scalar Newton–Raphson step on `beta`.
///
/// `edge_total` is the largest attainable `S`, used to scale the flatness floor.
pub fn nr_update_spatial<T: Real>(
    beta_t: T,
    e_s_given_y: T,
    prior: &PriorMoments<T>,
    step_cap: T,
    edge_total: usize,
) -> std::result::Result<T, NrFailure> {
    let var = prior.covariance[0][0];
    let e = edge_total as f64;
    let floor = FLAT_VARIANCE_FACTOR * e * e;
    if !(var.to_f64_lossy() >= floor) {
        return Err(NrFailure::FlatVariance { variance: var.to_f64_lossy(), floor });
    }
    let step = (e_s_given_y - prior.mean_stats[0]) / var;
    Ok(beta_t + step.max(-step_cap).min(step_cap))
}

/// One 2x2 Newton–Raphson step on `(beta, alpha)`, solving `C delta = g`
/// with `C` the prior covariance of `(T1, T2)` and `g` the score.
pub fn nr_update_st<T: Real>(
    theta: (T, T),
    targets: (T, T),
    prior: &PriorMoments<T>,
    step_cap: T,
) -> std::result::Result<(T, T), NrFailure> {
    let c = &prior.covariance;
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let det = a * d - b * b;
    let half_tr = (a + d) / T::lit(2.0);
    let half_gap = (((a - d) / T::lit(2.0)).powi(2) + b * b).sqrt();
    let (hi, lo) = (half_tr + half_gap, half_tr - half_gap);
    let cond = if lo > T::zero() { (hi / lo).to_f64_lossy() } else { f64::INFINITY };
    if !(det > T::zero()) || !(cond <= MAX_CONDITION) {
        return Err(NrFailure::SingularHessian { determinant: det.to_f64_lossy(), condition: cond });
    }
    let g0 = targets.0 - prior.mean_stats[0];
    let g1 = targets.1 - prior.mean_stats[1];
    let clamp = |x: T| x.max(-step_cap).min(step_cap);
    let db = clamp((d * g0 - b * g1) / det);
    let da = clamp((a * g1 - b * g0) / det);
    Ok((theta.0 + db, theta.1 + da))
}

/// Deterministic starting point: class means one standard deviation either
/// side of the sample mean, the sample variance, zero couplings.
pub fn default_init<T: Real>(y: &ObservedField<T>) -> Result<StHmrfParams<T>> {
    let m = y.mean();
    let v = y.variance();
    if !(v > T::zero()) {
        return Err(Error::DegenerateVariance(v.to_f64_lossy()));
    }
    let sd = v.sqrt();
    StHmrfParams::new(m + sd, m - sd, v, T::zero(), T::zero())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmDiagnostics<T> {
    pub em_iterations: usize,
    /// Inner NR steps taken in each EM iteration, including a failed last one.
    pub nr_steps: Vec<usize>,
    /// Standard errors of the posterior targets in each EM iteration.
    pub posterior_se: Vec<Vec<T>>,
    /// Standard errors of the last prior-moment estimate.
    pub prior_se: Vec<T>,
    /// Largest parameter increment of the last completed iteration.
    pub last_increment: Option<T>,
    pub nr_failure: Option<NrFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult<T> {
    /// Final parameters; `alpha` is zero for a spatial fit.
    pub params_final: StHmrfParams<T>,
    pub temporal: bool,
    /// Parameter vectors, starting with the initial point.
    pub param_trace: Vec<Vec<T>>,
    /// Sites with posterior marginal above one half set to `+1`.
    pub restored_field: SpinField,
    pub status: EmStatus,
    pub diagnostics: EmDiagnostics<T>,
}

impl<T: Real> EmResult<T> {
    pub fn spatial_params(&self) -> HmrfParams<T> {
        self.params_final.spatial()
    }

    /// Parameter vector in reporting order.
    pub fn estimates(&self) -> Vec<T> {
        param_vec(&self.params_final, self.temporal)
    }
}

fn param_vec<T: Real>(p: &StHmrfParams<T>, temporal: bool) -> Vec<T> {
    if temporal {
        p.to_vec()
    } else {
        p.spatial().to_vec()
    }
}

/// Spatial fit with block Gibbs expectations.
pub fn fit_spatial<T: Real>(y: &ObservedField<T>, config: &EmConfig<T>) -> Result<EmResult<T>> {
    fit_spatial_with(y, config, &engine_of(config))
}

/// Spatio-temporal fit with block Gibbs expectations.
pub fn fit_st<T: Real>(y: &ObservedField<T>, config: &EmConfig<T>) -> Result<EmResult<T>> {
    fit_st_with(y, config, &engine_of(config))
}

fn engine_of<T>(config: &EmConfig<T>) -> MonteCarloEngine {
    MonteCarloEngine { posterior: config.posterior_gibbs, prior: config.prior_gibbs }
}

pub fn fit_spatial_with<T: Real, E: MomentEngine<T>>(
    y: &ObservedField<T>,
    config: &EmConfig<T>,
    engine: &E,
) -> Result<EmResult<T>> {
    if !y.dims().is_spatial() {
        return Err(invalid("spatial fit needs a single frame"));
    }
    fit(y, config, engine, false)
}

pub fn fit_st_with<T: Real, E: MomentEngine<T>>(
    y: &ObservedField<T>,
    config: &EmConfig<T>,
    engine: &E,
) -> Result<EmResult<T>> {
    if y.dims().frames < 2 {
        return Err(invalid("spatio-temporal fit needs at least two frames"));
    }
    fit(y, config, engine, true)
}

/// Converged couplings and step count, or the failure and the step it hit.
type NrOutcome<T> = std::result::Result<(Coupling<T>, usize), (NrFailure, usize)>;

/// Inner NR loop on the couplings. Reads only couplings and statistics.
fn couplings_step<T: Real, E: MomentEngine<T>>(
    dims: &LatticeDims,
    start: Coupling<T>,
    targets: &[T],
    config: &EmConfig<T>,
    engine: &E,
    temporal: bool,
    last_prior_se: &mut Vec<T>,
) -> Result<NrOutcome<T>> {
    let mut c = start;
    let edge_total = dims.edge_count() * dims.frames;
    for step in 1..=config.nr_max_iters {
        let prior = engine.prior(dims, c)?;
        last_prior_se.clone_from(&prior.mc_standard_errors);
        let (next, size) = if temporal {
            match nr_update_st((c.beta, c.alpha), (targets[0], targets[1]), &prior, config.nr_step_cap) {
                Ok((b, a)) => {
                    let size = ((b - c.beta).powi(2) + (a - c.alpha).powi(2)).sqrt();
                    (Coupling::new(b, a), size)
                }
                Err(f) => return Ok(Err((f, step))),
            }
        } else {
            match nr_update_spatial(c.beta, targets[0], &prior, config.nr_step_cap, edge_total) {
                Ok(b) => (Coupling::spatial(b), (b - c.beta).abs()),
                Err(f) => return Ok(Err((f, step))),
            }
        };
        c = next;
        if size < config.nr_tol {
            return Ok(Ok((c, step)));
        }
    }
    Ok(Err((NrFailure::IterationLimit { iterations: config.nr_max_iters }, config.nr_max_iters)))
}

fn fit<T: Real, E: MomentEngine<T>>(
    y: &ObservedField<T>,
    config: &EmConfig<T>,
    engine: &E,
    temporal: bool,
) -> Result<EmResult<T>> {
    config.validate()?;
    let dims = y.dims();
    let mut params = match config.init_params {
        Some(p) => p,
        None => default_init(y)?,
    };
    if !temporal {
        params.alpha = T::zero();
    }
    let mut trace = vec![param_vec(&params, temporal)];
    let mut diag = EmDiagnostics::default();
    let mut marginals: Vec<T> = Vec::new();
    let mut status = EmStatus::MaxIters;

    for _ in 0..config.max_em_iters {
        diag.em_iterations += 1;
        let post = engine.posterior(y, &params)?;
        diag.posterior_se.push(post.target_se.clone());
        marginals = post.marginals_plus;

        let coupling = match couplings_step(
            &dims,
            params.coupling(),
            &post.targets,
            config,
            engine,
            temporal,
            &mut diag.prior_se,
        )? {
            Ok((c, steps)) => {
                diag.nr_steps.push(steps);
                c
            }
            Err((f, steps)) => {
                diag.nr_steps.push(steps);
                diag.nr_failure = Some(f);
                status = EmStatus::NrDiverged;
                break;
            }
        };

        let (mu_plus, mu_minus) = m_step_means(y, &marginals)?;
        let sigma2 = if config.sigma_from_previous_means {
            m_step_variance(y, &marginals, params.mu_plus, params.mu_minus)?
        } else {
            m_step_variance(y, &marginals, mu_plus, mu_minus)?
        };
        let next = StHmrfParams {
            mu_plus,
            mu_minus,
            sigma2,
            beta: coupling.beta,
            alpha: if temporal { coupling.alpha } else { T::zero() },
        };
        let inc = params.to_vec().iter().zip(next.to_vec()).map(|(&a, b)| (b - a).abs()).fold(T::zero(), T::max);
        params = next;
        trace.push(param_vec(&params, temporal));
        diag.last_increment = Some(inc);
        if inc < config.em_tol {
            status = EmStatus::Converged;
            break;
        }
    }

    let spins = marginals.iter().map(|&p| if p > T::lit(0.5) { 1 } else { -1 }).collect();
    Ok(EmResult {
        params_final: params,
        temporal,
        param_trace: trace,
        restored_field: SpinField::new(dims, spins)?,
        status,
        diagnostics: diag,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePoint<T> {
    pub beta: T,
    /// `E[S|Y] - E_beta[S]`.
    pub score: T,
    pub mc_se: T,
}

/// Score curve of `beta`. `E[S|Y]` is estimated once at `fitted`; the prior
/// mean is re-estimated at every grid point with its own derived seed.
pub fn score_scan<T: Real>(
    y: &ObservedField<T>,
    fitted: &HmrfParams<T>,
    beta_grid: &[T],
    config: &EmConfig<T>,
) -> Result<Vec<ScorePoint<T>>> {
    if beta_grid.is_empty() {
        return Err(invalid("beta grid is empty"));
    }
    let dims = y.dims();
    if !dims.is_spatial() {
        return Err(invalid("score scan runs on a single frame"));
    }
    config.posterior_gibbs.validate()?;
    config.prior_gibbs.validate()?;
    let mut pcfg = config.posterior_gibbs;
    pcfg.record.marginals = false;
    let post = estimate_posterior(y, &StHmrfParams::from(*fitted), &pcfg)?;
    beta_grid
        .par_iter()
        .enumerate()
        .map(|(i, &beta)| {
            let mut cfg = config.prior_gibbs;
            cfg.seed = derive_seed(config.prior_gibbs.seed, &[i as u64]);
            let prior = estimate_prior_moments(&dims, Coupling::spatial(beta), &cfg)?;
            let se = (post.se_s.powi(2) + prior.mc_standard_errors[0].powi(2)).sqrt();
            Ok(ScorePoint { beta, score: post.e_s_given_y - prior.mean_stats[0], mc_se: se })
        })
        .collect()
}

/// True when every point with `lo <= beta <= hi` has
/// `|score| < SCORE_FLATNESS_FRACTION * E_total`.
pub fn score_is_flat<T: Real>(points: &[ScorePoint<T>], dims: &LatticeDims, lo: T, hi: T) -> bool {
    let bound = SCORE_FLATNESS_FRACTION * (dims.edge_count() * dims.frames) as f64;
    points.iter().filter(|p| p.beta >= lo && p.beta <= hi).all(|p| p.score.abs().to_f64_lossy() < bound)
}
