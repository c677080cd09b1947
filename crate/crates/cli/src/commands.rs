use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use hmrf_core::em::{self, EmConfig, EmResult, EmStatus};
use hmrf_core::format::{read_obs, read_spins, write_obs, write_spins};
use hmrf_core::gibbs::{
    estimate_posterior, estimate_prior_moments, GibbsMode, GibbsRunConfig, PriorStart, Record, SweepSchedule,
};
use hmrf_core::ising::{self, InitialField, IsingRunConfig};
use hmrf_core::lattice::{LatticeDims, ObservedField};
use hmrf_core::model::{Coupling, HmrfParams, StHmrfParams};
use hmrf_core::oracle::{exact_posterior, exact_prior_moments};
use hmrf_core::pseudo::{estimate_beta, PlChainConfig};
use hmrf_core::rng::derive_seed;
use hmrf_core::simulate::{simulate_hmrf, HmrfSimConfig};

use crate::cli::*;
use crate::manifest::{now, RunManifest, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NR_DIVERGED: i32 = 4;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, values or paths.
    Usage(String),
    /// Input data the models cannot handle.
    Data(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

impl From<hmrf_core::Error> for Failure {
    fn from(e: hmrf_core::Error) -> Self {
        use hmrf_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::Io(_) => Failure::Usage(e.to_string()),
            E::Capacity { .. } | E::DegenerateClass { .. } | E::DegenerateVariance(_) | E::Parse { .. } => {
                Failure::Data(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(format!("i/o error: {e}"))
    }
}

type Outcome = Result<i32, Failure>;

/// `dir/stem.<suffix>` next to `base`.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}.{suffix}"))
}

fn manifest_dest(explicit: &Option<PathBuf>, output: Option<&Path>) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        output.map(|o| {
            let mut s = o.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serialisable") + "\n"
}

/// Write `text` to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str, outputs: &mut Vec<PathBuf>) -> Result<(), Failure> {
    match path {
        Some(p) => {
            std::fs::write(p, text)?;
            outputs.push(p.to_path_buf());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn config_value<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("serialisable")
}

fn schedule(s: Schedule) -> SweepSchedule {
    match s {
        Schedule::Sequential => SweepSchedule::Sequential,
        Schedule::Colored => SweepSchedule::Colored,
    }
}

fn start(s: StartKind) -> PriorStart {
    match s {
        StartKind::Random => PriorStart::Random,
        StartKind::Ordered => PriorStart::Ordered,
    }
}

fn dims(rows: usize, cols: usize, frames: usize) -> Result<LatticeDims, Failure> {
    Ok(LatticeDims::new(rows, cols, frames)?)
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Simulate(SimulateCmd::Ising(a)) => simulate_ising(a),
        Command::Simulate(SimulateCmd::Hmrf(a)) => simulate_field(a, 1, 0.0, "simulate hmrf", config_value(a)),
        Command::Simulate(SimulateCmd::StHmrf(a)) => {
            if a.frames < 2 {
                return Err(Failure::Usage("--frames must be at least 2".into()));
            }
            simulate_field(&a.base, a.frames, a.alpha, "simulate st-hmrf", config_value(a))
        }
        Command::Estimate(EstimateCmd::PlBeta(a)) => pl_beta(a),
        Command::Estimate(EstimateCmd::Hmrf(a)) => fit(a, false),
        Command::Estimate(EstimateCmd::StHmrf(a)) => fit(a, true),
        Command::Gibbs(GibbsCmd::Posterior(a)) => gibbs_posterior(a),
        Command::Gibbs(GibbsCmd::Prior(a)) => gibbs_prior(a),
        Command::ScoreScan(a) => score_scan(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn simulate_ising(a: &SimIsingArgs) -> Outcome {
    let started = now();
    let d = dims(a.grid.rows, a.grid.cols, 1)?;
    let mut cfg = IsingRunConfig::new(d, a.beta, a.updates, a.seed);
    if let Some(r) = a.record_every {
        cfg.record_every = r;
    }
    cfg.init = match a.init {
        InitKind::Random => InitialField::RandomUniform,
        InitKind::Plus => InitialField::AllPlus,
    };
    let run = ising::simulate(&cfg)?;
    write_spins(&a.output, &run.field)?;
    let trace_path = a.trace.clone().unwrap_or_else(|| sibling(&a.output, "trace.csv"));
    let mut csv = String::from("update,S\n");
    for (step, s) in run.trace.steps.iter().zip(&run.trace.values) {
        writeln!(csv, "{step},{s}").unwrap();
    }
    std::fs::write(&trace_path, csv)?;
    let mut config = config_value(a);
    config["summary"] = json!(run.summary);
    let m = RunManifest::new("simulate ising", config, Some(a.seed), started);
    m.finish(&[], &[a.output.clone(), trace_path], EXIT_OK, manifest_dest(&a.manifest, Some(&a.output)).as_deref())?;
    Ok(EXIT_OK)
}

fn simulate_field(a: &SimHmrfArgs, frames: usize, alpha: f64, command: &str, config: Value) -> Outcome {
    let started = now();
    let d = dims(a.grid.rows, a.grid.cols, frames)?;
    let e = &a.emission;
    let params = StHmrfParams { mu_plus: e.mu_plus, mu_minus: e.mu_minus, sigma2: e.sigma2, beta: a.beta, alpha };
    let cfg = HmrfSimConfig { dims: d, params, sweeps: a.sweeps, seed: a.seed };
    let (z, y) = simulate_hmrf(&cfg)?;
    let hidden = a.hidden.clone().unwrap_or_else(|| sibling(&a.output, "hidden.lat"));
    write_obs(&a.output, &y)?;
    write_spins(&hidden, &z)?;
    let m = RunManifest::new(command, config, Some(a.seed), started);
    m.finish(&[], &[a.output.clone(), hidden], EXIT_OK, manifest_dest(&a.manifest, Some(&a.output)).as_deref())?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct PlRow {
    init_beta: f64,
    beta_hat: f64,
    trace_sd: f64,
    acceptance_rate: f64,
    seed: u64,
}

fn pl_beta(a: &PlBetaArgs) -> Outcome {
    let started = now();
    if a.inits.is_empty() {
        return Err(Failure::Usage("--inits needs at least one value".into()));
    }
    let z = read_spins(&a.input)?;
    let configs: Vec<PlChainConfig<f64>> = a
        .inits
        .iter()
        .enumerate()
        .map(|(k, &init)| PlChainConfig {
            init_beta: init,
            proposal_sd: a.proposal_sd,
            n_total: a.n,
            burn_in: a.burnin,
            seed: derive_seed(a.seed, &[k as u64]),
        })
        .collect();
    let est = estimate_beta(&z, &configs)?;
    let rows: Vec<PlRow> = est
        .iter()
        .zip(&configs)
        .map(|(e, c)| PlRow {
            init_beta: e.init_beta,
            beta_hat: e.beta_hat,
            trace_sd: e.trace_sd,
            acceptance_rate: e.acceptance_rate,
            seed: c.seed,
        })
        .collect();
    let result = json!({
        "schema_version": SCHEMA_VERSION,
        "input": a.input,
        "mean_spin": z.mean_spin(),
        "suspect_sparse_state": est[0].suspect_sparse_state,
        "estimates": rows,
    });
    let mut outputs = Vec::new();
    emit(a.out.output.as_deref(), &to_json(&result), &mut outputs)?;

    let dir = match (&a.trace_dir, &a.out.output) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(o)) => Some(o.parent().map(Path::to_path_buf).unwrap_or_default()),
        (None, None) => None,
    };
    if let Some(dir) = dir {
        let stem = a
            .out
            .output
            .as_ref()
            .and_then(|o| o.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pl".into());
        for (k, e) in est.iter().enumerate() {
            let mut csv = String::from("step,beta,accepted\n");
            for ((step, b), acc) in e.trace.steps.iter().zip(&e.trace.values).zip(&e.accepted) {
                writeln!(csv, "{step},{b},{}", *acc as u8).unwrap();
            }
            let p = dir.join(format!("{stem}.chain{k}.csv"));
            std::fs::write(&p, csv)?;
            outputs.push(p);
        }
    }
    if a.out.output.is_some() {
        println!("{:>10} {:>10} {:>10}", "init", "beta_hat", "sd");
        for r in &rows {
            println!("{:>10.4} {:>10.4} {:>10.4}", r.init_beta, r.beta_hat, r.trace_sd);
        }
    }
    let m = RunManifest::new("estimate pl-beta", config_value(a), Some(a.seed), started);
    m.finish(
        std::slice::from_ref(&a.input),
        &outputs,
        EXIT_OK,
        manifest_dest(&a.out.manifest, a.out.output.as_deref()).as_deref(),
    )?;
    Ok(EXIT_OK)
}

fn em_config(a: &FitArgs, temporal: bool) -> Result<EmConfig<f64>, Failure> {
    let mut cfg = EmConfig::<f64>::new(a.seed);
    cfg.max_em_iters = a.max_em_iters;
    cfg.em_tol = a.em_tol;
    cfg.nr_tol = a.nr_tol;
    cfg.nr_max_iters = a.nr_max_iters;
    cfg.nr_step_cap = a.nr_step_cap;
    apply_budget(&mut cfg, &a.budget, a.prior_start);
    cfg.sigma_from_previous_means = a.sigma_previous_means;
    if let Some(v) = &a.init {
        let want = if temporal { 5 } else { 4 };
        if v.len() != want {
            return Err(Failure::Usage(format!("--init needs {want} comma-separated values")));
        }
        let alpha = if temporal { v[4] } else { 0.0 };
        cfg.init_params = Some(StHmrfParams::new(v[0], v[1], v[2], v[3], alpha)?);
    }
    Ok(cfg)
}

fn apply_budget(cfg: &mut EmConfig<f64>, b: &GibbsBudget, prior_start: StartKind) {
    cfg.posterior_gibbs = cfg.posterior_gibbs.with_budget(b.posterior_sweeps, b.posterior_burnin);
    cfg.posterior_gibbs.schedule = schedule(b.schedule);
    cfg.prior_gibbs = cfg.prior_gibbs.with_budget(b.prior_sweeps, b.prior_burnin);
    cfg.prior_gibbs.schedule = schedule(b.schedule);
    cfg.prior_gibbs.prior_start = start(prior_start);
}

fn param_names(temporal: bool) -> &'static [&'static str] {
    if temporal {
        &["mu_plus", "mu_minus", "sigma2", "beta", "alpha"]
    } else {
        &["mu_plus", "mu_minus", "sigma2", "beta"]
    }
}

fn fit_json(r: &EmResult<f64>) -> Value {
    let names = param_names(r.temporal);
    let params: serde_json::Map<String, Value> =
        names.iter().zip(r.estimates()).map(|(n, v)| (n.to_string(), json!(v))).collect();
    json!({
        "schema_version": SCHEMA_VERSION,
        "model": if r.temporal { "st-hmrf" } else { "hmrf" },
        "status": r.status,
        "params_final": params,
        "param_names": names,
        "param_trace": r.param_trace,
        "diagnostics": r.diagnostics,
    })
}

fn fit(a: &FitArgs, temporal: bool) -> Outcome {
    let started = now();
    let command = if temporal { "estimate st-hmrf" } else { "estimate hmrf" };
    let y: ObservedField<f64> = read_obs(&a.input)?;
    let cfg = em_config(a, temporal)?;
    let r = if temporal { em::fit_st(&y, &cfg)? } else { em::fit_spatial(&y, &cfg)? };
    let mut outputs = Vec::new();
    emit(Some(&a.output), &to_json(&fit_json(&r)), &mut outputs)?;
    let restored = a.restored.clone().unwrap_or_else(|| sibling(&a.output, "restored.lat"));
    write_spins(&restored, &r.restored_field)?;
    outputs.push(restored);
    let trace = a.trace.clone().unwrap_or_else(|| sibling(&a.output, "trace.csv"));
    let mut csv = format!("iteration,{}\n", param_names(temporal).join(","));
    for (i, row) in r.param_trace.iter().enumerate() {
        let vals: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(csv, "{i},{}", vals.join(",")).unwrap();
    }
    std::fs::write(&trace, csv)?;
    outputs.push(trace);

    eprintln!("status: {:?} after {} iterations", r.status, r.diagnostics.em_iterations);
    for (n, v) in param_names(temporal).iter().zip(r.estimates()) {
        eprintln!("{n:>9} {v:>10.4}");
    }
    let mut config = config_value(a);
    config["em"] = config_value(&cfg);
    let code = if r.status == EmStatus::NrDiverged { EXIT_NR_DIVERGED } else { EXIT_OK };
    let m = RunManifest::new(command, config, Some(a.seed), started);
    m.finish(std::slice::from_ref(&a.input), &outputs, code, manifest_dest(&a.manifest, Some(&a.output)).as_deref())?;
    Ok(code)
}

fn stat_trace_csv(trace: &hmrf_core::gibbs::StatTrace, temporal: bool) -> String {
    let mut csv = String::from(if temporal { "sweep,T1,T2\n" } else { "sweep,S\n" });
    for (s, (t1, t2)) in trace.steps.iter().zip(&trace.values) {
        if temporal {
            writeln!(csv, "{s},{t1},{t2}").unwrap();
        } else {
            writeln!(csv, "{s},{t1}").unwrap();
        }
    }
    csv
}

fn gibbs_posterior(a: &GibbsPosteriorArgs) -> Outcome {
    let started = now();
    let y: ObservedField<f64> = read_obs(&a.input)?;
    let e = &a.emission;
    let params = StHmrfParams::new(e.mu_plus, e.mu_minus, e.sigma2, a.coupling.beta, a.coupling.alpha)?;
    let mut cfg = GibbsRunConfig::posterior(a.seed).with_budget(a.sweeps, a.burnin);
    cfg.schedule = schedule(a.schedule);
    cfg.record = Record { marginals: true, trace: a.trace.is_some() };
    let est = estimate_posterior(&y, &params, &cfg)?;
    let temporal = !y.dims().is_spatial();
    let result = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": GibbsMode::Posterior,
        "retained_sweeps": est.retained_sweeps,
        "e_t1_given_y": est.e_s_given_y,
        "se_t1": est.se_s,
        "e_t2_given_y": est.e_t2_given_y,
        "se_t2": est.se_t2,
        "marginals_plus": est.marginals_plus,
        "se_marginals": est.se_marginals,
    });
    let mut outputs = Vec::new();
    emit(a.out.output.as_deref(), &to_json(&result), &mut outputs)?;
    if let (Some(p), Some(tr)) = (&a.trace, &est.trace) {
        std::fs::write(p, stat_trace_csv(tr, temporal))?;
        outputs.push(p.clone());
    }
    let m = RunManifest::new("gibbs posterior", config_value(a), Some(a.seed), started);
    m.finish(
        std::slice::from_ref(&a.input),
        &outputs,
        EXIT_OK,
        manifest_dest(&a.out.manifest, a.out.output.as_deref()).as_deref(),
    )?;
    Ok(EXIT_OK)
}

fn gibbs_prior(a: &GibbsPriorArgs) -> Outcome {
    let started = now();
    let d = dims(a.grid.rows, a.grid.cols, a.frames)?;
    let mut cfg = GibbsRunConfig::prior(a.seed).with_budget(a.sweeps, a.burnin);
    cfg.schedule = schedule(a.schedule);
    cfg.prior_start = start(a.start);
    cfg.record.trace = a.trace.is_some();
    let m = estimate_prior_moments(&d, Coupling::new(a.coupling.beta, a.coupling.alpha), &cfg)?;
    let result = json!({
        "schema_version": SCHEMA_VERSION,
        "mode": GibbsMode::Prior,
        "retained_sweeps": m.retained_sweeps,
        "mean_stats": m.mean_stats,
        "covariance": m.covariance,
        "mc_standard_errors": m.mc_standard_errors,
    });
    let mut outputs = Vec::new();
    emit(a.out.output.as_deref(), &to_json(&result), &mut outputs)?;
    if let (Some(p), Some(tr)) = (&a.trace, &m.trace) {
        std::fs::write(p, stat_trace_csv(tr, !d.is_spatial()))?;
        outputs.push(p.clone());
    }
    let man = RunManifest::new("gibbs prior", config_value(a), Some(a.seed), started);
    man.finish(&[], &outputs, EXIT_OK, manifest_dest(&a.out.manifest, a.out.output.as_deref()).as_deref())?;
    Ok(EXIT_OK)
}

/// Parse `start:stop:step` into an inclusive grid.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("grid `{s}` is not start:stop:step"));
    let parts: Vec<f64> = s.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(lo.is_finite() && hi.is_finite() && step.is_finite()) || step <= 0.0 || hi < lo {
        return Err(bad());
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

fn score_scan(a: &ScoreScanArgs) -> Outcome {
    let started = now();
    let y: ObservedField<f64> = read_obs(&a.input)?;
    let grid = parse_grid(&a.grid)?;
    let e = &a.emission;
    let fitted = HmrfParams::new(e.mu_plus, e.mu_minus, e.sigma2, a.beta)?;
    let mut cfg = EmConfig::<f64>::new(a.seed);
    apply_budget(&mut cfg, &a.budget, a.prior_start);
    let pts = em::score_scan(&y, &fitted, &grid, &cfg)?;
    let mut csv = String::from("beta,score,mc_se\n");
    for p in &pts {
        writeln!(csv, "{},{},{}", p.beta, p.score, p.mc_se).unwrap();
    }
    let mut outputs = Vec::new();
    emit(a.out.output.as_deref(), &csv, &mut outputs)?;
    let mut config = config_value(a);
    config["edge_total"] = json!(y.dims().edge_count());
    let m = RunManifest::new("score-scan", config, Some(a.seed), started);
    m.finish(
        std::slice::from_ref(&a.input),
        &outputs,
        EXIT_OK,
        manifest_dest(&a.out.manifest, a.out.output.as_deref()).as_deref(),
    )?;
    Ok(EXIT_OK)
}

fn oracle(a: &OracleArgs) -> Outcome {
    let started = now();
    let d = dims(a.grid.rows, a.grid.cols, a.frames)?;
    let alpha = (!d.is_spatial()).then_some(a.coupling.alpha);
    let prior = exact_prior_moments(&d, a.coupling.beta, alpha)?;
    let mut result = json!({
        "schema_version": SCHEMA_VERSION,
        "rows": d.rows,
        "cols": d.cols,
        "frames": d.frames,
        "log_partition": prior.log_partition,
        "mean_stats": prior.mean_stats,
        "covariance": prior.covariance,
    });
    let mut inputs = Vec::new();
    if let Some(path) = &a.input {
        let y: ObservedField<f64> = read_obs(path)?;
        if y.dims() != d {
            return Err(Failure::Usage("observations do not match --rows/--cols/--frames".into()));
        }
        let (mp, mm, s2) =
            (a.mu_plus.unwrap_or_default(), a.mu_minus.unwrap_or_default(), a.sigma2.unwrap_or_default());
        let params = StHmrfParams::new(mp, mm, s2, a.coupling.beta, a.coupling.alpha)?;
        let post = exact_posterior(&y, &params)?;
        result["posterior"] = json!(post);
        inputs.push(path.clone());
    }
    let mut outputs = Vec::new();
    emit(a.out.output.as_deref(), &to_json(&result), &mut outputs)?;
    let m = RunManifest::new("oracle", config_value(a), None, started);
    m.finish(&inputs, &outputs, EXIT_OK, manifest_dest(&a.out.manifest, a.out.output.as_deref()).as_deref())?;
    Ok(EXIT_OK)
}
