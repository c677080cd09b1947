use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "hmrf", version, about = "Lattice Markov random field simulation and estimation")]
pub struct Cli {
    /// Worker threads for internal parallel loops. Results do not depend on it.
    #[arg(long, global = true, env = "HMRF_PARALLEL")]
    pub parallel: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw synthetic fields.
    #[command(subcommand)]
    Simulate(SimulateCmd),
    /// Estimate model parameters from a field on disk.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Run a block Gibbs sampler and report Monte-Carlo expectations.
    #[command(subcommand)]
    Gibbs(GibbsCmd),
    /// Score curve of the spatial coupling over a grid.
    ScoreScan(ScoreScanArgs),
    /// Exact moments by enumeration (at most 20 sites).
    Oracle(OracleArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCmd {
    /// Ising field by single-site Metropolis-Hastings.
    Ising(SimIsingArgs),
    /// Hidden field and Gaussian observations on one frame.
    Hmrf(SimHmrfArgs),
    /// Hidden field and Gaussian observations over several frames.
    StHmrf(SimStHmrfArgs),
}

#[derive(Debug, Subcommand)]
pub enum EstimateCmd {
    /// Coupling of an observed spin field by pseudo-likelihood MCMC.
    PlBeta(PlBetaArgs),
    /// EM fit of the spatial hidden MRF.
    Hmrf(FitArgs),
    /// EM fit of the spatio-temporal hidden MRF.
    StHmrf(FitArgs),
}

#[derive(Debug, Subcommand)]
pub enum GibbsCmd {
    /// Posterior expectations given observations.
    Posterior(GibbsPosteriorArgs),
    /// Prior moments of the lattice statistics.
    Prior(GibbsPriorArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Random,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    Sequential,
    Colored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Random,
    Ordered,
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Primary output file; JSON results go to stdout when omitted.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
    /// Run manifest path [default: <output>.manifest.json, or stderr].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Grid2 {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct SimIsingArgs {
    #[command(flatten)]
    pub grid: Grid2,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    /// Single-site proposals.
    #[arg(long)]
    pub updates: u64,
    #[arg(long)]
    pub seed: u64,
    /// Proposals between trace records [default: one sweep].
    #[arg(long)]
    pub record_every: Option<u64>,
    #[arg(long, value_enum, default_value = "random")]
    pub init: InitKind,
    /// Trace CSV `update,S` [default: <output>.trace.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmissionArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub mu_plus: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_minus: f64,
    #[arg(long)]
    pub sigma2: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimHmrfArgs {
    #[command(flatten)]
    pub grid: Grid2,
    #[command(flatten)]
    pub emission: EmissionArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    /// Prior block Gibbs sweeps for the hidden field.
    #[arg(long, default_value_t = 5000)]
    pub sweeps: usize,
    #[arg(long)]
    pub seed: u64,
    /// Hidden field file [default: <output stem>.hidden.lat].
    #[arg(long)]
    pub hidden: Option<PathBuf>,
    /// Observed field file.
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimStHmrfArgs {
    #[command(flatten)]
    pub base: SimHmrfArgs,
    #[arg(long)]
    pub frames: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PlBetaArgs {
    /// Spin field in lattice text format.
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated starting values, one chain each.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0")]
    pub inits: Vec<f64>,
    /// Chain length.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1.0)]
    pub proposal_sd: f64,
    #[arg(long)]
    pub seed: u64,
    /// Directory for per-chain trace CSVs [default: next to the output].
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct GibbsBudget {
    #[arg(long, default_value_t = 10_000)]
    pub posterior_sweeps: usize,
    #[arg(long, default_value_t = 5_000)]
    pub posterior_burnin: usize,
    #[arg(long, default_value_t = 1_000)]
    pub prior_sweeps: usize,
    #[arg(long, default_value_t = 200)]
    pub prior_burnin: usize,
    #[arg(long, value_enum, default_value = "sequential")]
    pub schedule: Schedule,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// Observations in lattice text format.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_em_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub em_tol: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub nr_tol: f64,
    #[arg(long, default_value_t = 50)]
    pub nr_max_iters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub nr_step_cap: f64,
    #[command(flatten)]
    pub budget: GibbsBudget,
    /// Start of the prior chains inside the Newton-Raphson loop.
    #[arg(long, value_enum, default_value = "ordered")]
    pub prior_start: StartKind,
    /// Initial `mu_plus,mu_minus,sigma2,beta[,alpha]` [default: from the data].
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// Centre the variance update on the previous iteration's means.
    #[arg(long)]
    pub sigma_previous_means: bool,
    /// Restored field [default: <output stem>.restored.lat].
    #[arg(long)]
    pub restored: Option<PathBuf>,
    /// Per-iteration parameter CSV [default: <output stem>.trace.csv].
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(short = 'o', long = "output")]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CouplingArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    /// Temporal coupling; ignored on one frame.
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub alpha: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct GibbsPosteriorArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub emission: EmissionArgs,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    #[arg(long, default_value_t = 10_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 5_000)]
    pub burnin: usize,
    #[arg(long, value_enum, default_value = "sequential")]
    pub schedule: Schedule,
    #[arg(long)]
    pub seed: u64,
    /// Retained-sweep statistic trace CSV `sweep,T1,T2`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct GibbsPriorArgs {
    #[command(flatten)]
    pub grid: Grid2,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    #[arg(long, default_value_t = 1_000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 200)]
    pub burnin: usize,
    #[arg(long, value_enum, default_value = "sequential")]
    pub schedule: Schedule,
    #[arg(long, value_enum, default_value = "random")]
    pub start: StartKind,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreScanArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Emission parameters at which `E[S|Y]` is estimated.
    #[command(flatten)]
    pub emission: EmissionArgs,
    /// Coupling at which `E[S|Y]` is estimated.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
    /// Grid as `start:stop:step`.
    #[arg(long, default_value = "-2:2:0.1", allow_hyphen_values = true)]
    pub grid: String,
    #[command(flatten)]
    pub budget: GibbsBudget,
    #[arg(long, value_enum, default_value = "ordered")]
    pub prior_start: StartKind,
    #[arg(long)]
    pub seed: u64,
    /// Curve CSV `beta,score,mc_se`; stdout when omitted.
    #[command(flatten)]
    pub out: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct OracleArgs {
    #[command(flatten)]
    pub grid: Grid2,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    #[command(flatten)]
    pub coupling: CouplingArgs,
    /// Observations for exact posterior quantities (needs the emission flags).
    #[arg(long, requires_all = ["mu_plus", "mu_minus", "sigma2"])]
    pub input: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_plus: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_minus: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[command(flatten)]
    pub out: Output,
}
