//! Binary lattice Markov random fields: Ising simulation, pseudo-likelihood
//! coupling estimation, block Gibbs sampling and EM fitting of Gaussian
//! hidden MRFs over one frame or a stack of frames, plus exact enumeration
//! for small lattices.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod em;
pub mod error;
pub mod format;
pub mod gibbs;
pub mod ising;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod pseudo;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod trace;

pub use em::{
    fit_spatial, fit_st, score_scan, EmConfig, EmDiagnostics, EmResult, EmStatus, ExactEngine, MomentEngine,
    MonteCarloEngine, NrFailure, ScorePoint,
};
pub use error::{Error, Result};
pub use gibbs::{
    estimate_posterior, estimate_prior_moments, BlockGibbs, GibbsMode, GibbsRunConfig, PosteriorEstimates,
    PriorMoments, PriorStart, SweepSchedule,
};
pub use ising::{IsingRun, IsingRunConfig};
pub use lattice::{BinaryField, LatticeDims, ObservedField, SpatioTemporalField, SpinField};
pub use model::{Coupling, Emission, HmrfParams, StHmrfParams};
pub use pseudo::{estimate_beta, PlChainConfig, PlEstimate};
pub use rng::ChainRng;
pub use scalar::Real;
pub use simulate::{simulate_hmrf, HmrfSimConfig};
pub use trace::ChainTrace;

pub type HmrfParams64 = HmrfParams<f64>;
pub type HmrfParams32 = HmrfParams<f32>;
pub type StHmrfParams64 = StHmrfParams<f64>;
pub type StHmrfParams32 = StHmrfParams<f32>;
pub type ObservedField64 = ObservedField<f64>;
pub type ObservedField32 = ObservedField<f32>;
pub type EmConfig64 = EmConfig<f64>;
pub type EmConfig32 = EmConfig<f32>;
pub type EmResult64 = EmResult<f64>;
pub type EmResult32 = EmResult<f32>;
pub type PlEstimate64 = PlEstimate<f64>;
pub type PlEstimate32 = PlEstimate<f32>;
