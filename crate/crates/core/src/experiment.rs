//! Experiment orchestration behind the `nolana` command: seeded multi-pass
//! runs, epsilon sweeps, prefix tuning and kernel-approximation curves.
//!
//! Artifacts are computed fully in memory and only then written, each file
//! via write-then-rename, so a failed run leaves nothing behind.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{Fogd, PaLearner, PaMode, PaModel};
use crate::data::{build_stream, Dataset, MinMaxScaler, Sample, StreamSpec, Task};
use crate::error::{Error, Result};
use crate::eval::{approx_experiment, ApproxMethod, ApproxPoint, BudgetReport, MetricsLog};
use crate::learner::{EtaSchedule, LossKind, ModelParams, Nolana, StreamLearner};
use crate::numerics::{KernelConfig, DEFAULT_PINV_REL_TOL};
use crate::oana::OanaConfig;

/// Environment variable naming the directory relative dataset paths resolve against.
pub const DATA_DIR_ENV: &str = "NOLANA_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pa,
    Fogd,
    Nogd,
    Nolana,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Pa, Method::Fogd, Method::Nogd, Method::Nolana];
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pa" => Ok(Method::Pa),
            "fogd" => Ok(Method::Fogd),
            "nogd" => Ok(Method::Nogd),
            "nolana" => Ok(Method::Nolana),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Pa => "pa",
            Method::Fogd => "fogd",
            Method::Nogd => "nogd",
            Method::Nolana => "nolana",
        })
    }
}

/// How the initial landmarks are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmupPolicy {
    /// The first `m` stream points.
    FirstM,
    /// `m` points sampled (seeded) from the first `buffer` stream points.
    Sampled { buffer: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: Method,
    pub loss: LossKind,
    pub data: StreamSpec,
    pub m: usize,
    pub r: Option<usize>,
    pub r_ratio: f64,
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub eta: f64,
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
    pub p: usize,
    pub seed: u64,
    /// Independent seeded shuffles; 0 keeps file order for a single pass.
    pub shuffles: usize,
    pub out_dir: PathBuf,
    pub schedule: EtaSchedule,
    pub inner_steps: usize,
    pub warmup: WarmupPolicy,
    /// Min-max scale features using the warm-up buffer.
    pub scale: bool,
    /// Record wall-clock timings (makes artifacts non-reproducible).
    pub timing: bool,
    pub pa_aggressiveness: f64,
    pub pa_insensitivity: f64,
}

impl RunConfig {
    pub fn new(method: Method, loss: LossKind, data: StreamSpec, m: usize) -> Self {
        Self {
            method,
            loss,
            data,
            m,
            r: None,
            r_ratio: 0.8,
            epsilon: 0.0,
            eta: 0.1,
            lambda: 0.0,
            theta: 1e-3,
            gamma: 1.0,
            p: crate::numerics::DEFAULT_POWER_ITERS,
            seed: 0,
            shuffles: 5,
            out_dir: PathBuf::from("out"),
            schedule: EtaSchedule::Constant,
            inner_steps: 1,
            warmup: WarmupPolicy::FirstM,
            scale: false,
            timing: false,
            pa_aggressiveness: f64::INFINITY,
            pa_insensitivity: 0.0,
        }
    }

    pub fn rank(&self) -> usize {
        self.r
            .unwrap_or_else(|| ((self.r_ratio * self.m as f64).round() as usize).clamp(1, self.m.max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if !(self.r_ratio > 0.0 && self.r_ratio <= 1.0) {
            return bad(format!("r_ratio must lie in (0, 1], got {}", self.r_ratio));
        }
        let r = self.rank();
        if r == 0 || r > self.m {
            return bad(format!("r = {r} must lie in 1..={}", self.m));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be >= 0, got {}", self.eta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return bad(format!("theta must be > 0, got {}", self.theta));
        }
        if self.p == 0 || self.inner_steps == 0 {
            return bad("p and inner_steps must be at least 1".into());
        }
        if !(self.pa_aggressiveness > 0.0) || self.pa_insensitivity < 0.0 {
            return bad("PA aggressiveness must be > 0 and insensitivity >= 0".into());
        }
        if let WarmupPolicy::Sampled { buffer } = self.warmup {
            if buffer < self.m {
                return bad(format!("warm-up buffer {buffer} is smaller than m = {}", self.m));
            }
        }
        match (self.data.task, self.loss.is_classification()) {
            (Task::Classification, false) => bad("squared loss needs a regression task".into()),
            (Task::Regression, true) => bad(format!("{} loss needs a classification task", self.loss)),
            _ => Ok(()),
        }
    }

    fn kernel(&self) -> Result<KernelConfig> {
        KernelConfig::gaussian(self.gamma)
    }

    fn oana(&self) -> Result<OanaConfig> {
        let epsilon = if self.method == Method::Nogd { f64::INFINITY } else { self.epsilon };
        Ok(OanaConfig {
            m: self.m,
            r: self.rank(),
            epsilon,
            kernel: self.kernel()?,
            power_iters: self.p,
            pinv_rel_tol: DEFAULT_PINV_REL_TOL,
        })
    }

    fn params(&self) -> ModelParams {
        let mut p = ModelParams::new(self.loss, self.eta, self.lambda, self.theta);
        p.schedule = self.schedule;
        p.inner_steps = self.inner_steps;
        p
    }

    /// Shuffle seed of pass `k`, or `None` for file order.
    pub fn pass_seed(&self, k: usize) -> Option<u64> {
        (self.shuffles > 0).then(|| self.seed.wrapping_add(k as u64))
    }

    pub fn passes(&self) -> usize {
        self.shuffles.max(1)
    }
}

/// Resolve a dataset path, trying `$NOLANA_DATA_DIR` for relative paths that do not exist.
pub fn resolve_data_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Outcome of one pass over one stream ordering.
#[derive(Debug, Clone)]
pub struct PassResult {
    pub seed: Option<u64>,
    pub log: MetricsLog,
    pub budget: BudgetReport,
    pub updates: u64,
    pub wall_secs: Option<f64>,
}

fn pick_warmup(config: &RunConfig, samples: &[Sample], seed: u64) -> Vec<Vec<f64>> {
    match config.warmup {
        WarmupPolicy::FirstM => samples.iter().take(config.m).map(|s| s.features.clone()).collect(),
        WarmupPolicy::Sampled { buffer } => {
            let buffer = buffer.min(samples.len());
            let perm = crate::data::permutation(buffer, seed ^ 0x5eed_1a4d);
            let mut idx: Vec<usize> = perm.into_iter().take(config.m).collect();
            idx.sort_unstable();
            idx.into_iter().map(|i| samples[i].features.clone()).collect()
        }
    }
}

/// Build the learner `config.method` describes, seeded from the stream's warm-up buffer.
pub fn build_learner(
    config: &RunConfig,
    warmup: &[Vec<f64>],
    dim: usize,
    seed: u64,
) -> Result<Box<dyn StreamLearner>> {
    Ok(match config.method {
        Method::Nolana | Method::Nogd => Box::new(Nolana::new(warmup, config.oana()?, config.params())?),
        Method::Fogd => Box::new(Fogd::with_parity(
            dim,
            config.m,
            config.rank(),
            &config.kernel()?,
            seed,
            config.params(),
        )?),
        Method::Pa => {
            let mode = match config.data.task {
                Task::Classification => PaMode::Classification,
                Task::Regression => PaMode::Regression { insensitivity: config.pa_insensitivity },
            };
            Box::new(PaLearner::new(PaModel::new(dim, config.pa_aggressiveness, mode)?, config.loss))
        }
    })
}

/// Run one prequential pass over `samples`.
pub fn run_pass(config: &RunConfig, samples: &[Sample], dim: usize, seed: Option<u64>) -> Result<PassResult> {
    config.validate()?;
    if samples.len() < config.m {
        return Err(Error::InsufficientWarmup { needed: config.m, got: samples.len() });
    }
    let seed_val = seed.unwrap_or(config.seed);
    let mut warmup = pick_warmup(config, samples, seed_val);
    let scaler = if config.scale { Some(MinMaxScaler::fit(&warmup)?) } else { None };
    if let Some(s) = &scaler {
        warmup.iter_mut().for_each(|x| s.transform(x));
    }
    let mut learner = build_learner(config, &warmup, dim, seed_val)?;

    let mut log = MetricsLog::new(config.data.task == Task::Classification);
    let started = Instant::now();
    let mut x = vec![0.0; dim];
    for s in samples {
        x.copy_from_slice(&s.features);
        if let Some(sc) = &scaler {
            sc.transform(&mut x);
        }
        let t0 = config.timing.then(Instant::now);
        let norm = learner.weight_norm_sq();
        let out = learner.process(&x, s.label)?;
        let elapsed = t0.map_or(0, |t| t.elapsed().as_nanos() as u64);
        log.push(out.prediction, s.label, out.loss, out.updated, elapsed, norm);
    }
    let wall_secs = config.timing.then(|| started.elapsed().as_secs_f64());
    Ok(PassResult { seed, budget: learner.budget(), updates: learner.updates(), log, wall_secs })
}

/// Load the stream for pass `k`.
pub fn load_pass(config: &RunConfig, k: usize) -> Result<Dataset> {
    let mut spec = config.data.clone();
    spec.path = resolve_data_path(&spec.path);
    spec.shuffle_seed = config.pass_seed(k);
    build_stream(&spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: Method,
    pub metric: String,
    pub per_pass: Vec<f64>,
    pub mean: f64,
    pub stddev: f64,
    pub updates: Vec<u64>,
    pub budget: BudgetReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_secs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_path: PathBuf,
    pub dataset_digest: String,
    pub n: usize,
    pub dim: usize,
    pub label_map: Vec<(f64, f64)>,
    pub pass_seeds: Vec<Option<u64>>,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub passes: Vec<PassResult>,
    pub summary: RunSummary,
    pub manifest: Manifest,
}

pub fn metric_name(task: Task) -> &'static str {
    match task {
        Task::Classification => "accuracy",
        Task::Regression => "rmse",
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Execute every pass of `config` in memory.
pub fn execute(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mut passes = Vec::with_capacity(config.passes());
    let mut first: Option<Dataset> = None;
    for k in 0..config.passes() {
        let ds = load_pass(config, k)?;
        let pass = run_pass(config, &ds.samples, ds.dim, config.pass_seed(k))?;
        passes.push(pass);
        if first.is_none() {
            first = Some(ds);
        }
    }
    let ds = first.expect("at least one pass");
    let per_pass: Vec<f64> = passes.iter().map(|p| p.log.final_metric()).collect();
    let (mean, stddev) = mean_std(&per_pass);
    let summary = RunSummary {
        method: config.method,
        metric: metric_name(config.data.task).to_string(),
        per_pass,
        mean,
        stddev,
        updates: passes.iter().map(|p| p.updates).collect(),
        budget: passes[0].budget.clone(),
        wall_secs: if config.timing { passes.iter().map(|p| p.wall_secs).collect() } else { None },
    };
    let manifest = Manifest {
        dataset_path: config.data.path.clone(),
        dataset_digest: ds.digest,
        n: ds.samples.len(),
        dim: ds.dim,
        label_map: ds.label_map,
        pass_seeds: (0..config.passes()).map(|k| config.pass_seed(k)).collect(),
        config: config.clone(),
    };
    Ok(RunReport { passes, summary, manifest })
}

/// Paths of the artifacts `run` writes.
pub fn artifact_paths(config: &RunConfig) -> (Vec<PathBuf>, PathBuf, PathBuf) {
    let dir = &config.out_dir;
    let m = config.method;
    let csvs = (0..config.passes()).map(|k| dir.join(format!("{m}_pass{k}.csv"))).collect();
    (csvs, dir.join(format!("{m}_summary.json")), dir.join(format!("{m}_manifest.json")))
}

/// Execute all passes and write per-pass metric CSVs, the summary and the manifest.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    let report = execute(config)?;
    let (csvs, summary_path, manifest_path) = artifact_paths(config);
    for (pass, path) in report.passes.iter().zip(&csvs) {
        write_atomic(path, pass.log.to_csv().as_bytes())?;
    }
    write_atomic(&summary_path, serde_json::to_string_pretty(&report.summary)?.as_bytes())?;
    write_atomic(&manifest_path, serde_json::to_string_pretty(&report.manifest)?.as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub metric: f64,
    pub time_secs: f64,
    pub updates: f64,
}

/// One full run per threshold; the table mirrors accuracy / time / update counts.
pub fn sweep_epsilon(config: &RunConfig, epsilons: &[f64]) -> Result<Vec<SweepRow>> {
    if epsilons.is_empty() {
        return Err(Error::Config("epsilon list is empty".into()));
    }
    let mut rows = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut cfg = config.clone();
        cfg.epsilon = eps;
        let report = execute(&cfg)?;
        let n = report.passes.len() as f64;
        let updates = report.passes.iter().map(|p| p.updates as f64).sum::<f64>() / n;
        let time_secs = report.passes.iter().filter_map(|p| p.wall_secs).sum::<f64>() / n;
        rows.push(SweepRow { epsilon: eps, metric: report.summary.mean, time_secs, updates });
    }
    Ok(rows)
}

pub fn sweep_csv(task: Task, rows: &[SweepRow]) -> String {
    let mut out = format!("epsilon,{},time_secs,updates\n", metric_name(task));
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.epsilon, r.metric, r.time_secs, r.updates));
    }
    out
}

pub fn write_sweep(config: &RunConfig, epsilons: &[f64]) -> Result<Vec<SweepRow>> {
    let rows = sweep_epsilon(config, epsilons)?;
    let path = config.out_dir.join(format!("{}_sweep_eps.csv", config.method));
    write_atomic(&path, sweep_csv(config.data.task, &rows).as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub gammas: Vec<f64>,
    pub etas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// Fraction of the (seeded) stream used for tuning.
    pub prefix: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub gamma: f64,
    pub eta: f64,
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub metric: f64,
}

/// Grid search on a seeded prefix; rows come back best first.
pub fn tune(config: &RunConfig, grid: &TuneGrid) -> Result<Vec<TuneRow>> {
    config.validate()?;
    if grid.gammas.is_empty() || grid.etas.is_empty() || grid.epsilons.is_empty() {
        return Err(Error::Config("tuning grid has an empty axis".into()));
    }
    if !(grid.prefix > 0.0 && grid.prefix <= 1.0) {
        return Err(Error::Config(format!("prefix fraction must lie in (0, 1], got {}", grid.prefix)));
    }
    let ds = load_pass(config, 0)?;
    let take = ((ds.samples.len() as f64 * grid.prefix).round() as usize).max(config.m);
    let prefix = &ds.samples[..take.min(ds.samples.len())];
    let mut rows = Vec::new();
    for &gamma in &grid.gammas {
        for &eta in &grid.etas {
            for &epsilon in &grid.epsilons {
                let mut cfg = config.clone();
                cfg.gamma = gamma;
                cfg.eta = eta;
                cfg.epsilon = epsilon;
                let pass = run_pass(&cfg, prefix, ds.dim, config.pass_seed(0))?;
                rows.push(TuneRow { gamma, eta, epsilon, metric: pass.log.final_metric() });
            }
        }
    }
    let higher_better = config.data.task == Task::Classification;
    rows.sort_by(|a, b| {
        let ord = a.metric.total_cmp(&b.metric);
        if higher_better {
            ord.reverse()
        } else {
            ord
        }
    });
    Ok(rows)
}

pub fn write_tune(config: &RunConfig, grid: &TuneGrid) -> Result<Vec<TuneRow>> {
    let rows = tune(config, grid)?;
    let mut out = format!("gamma,eta,epsilon,{}\n", metric_name(config.data.task));
    for r in &rows {
        out.push_str(&format!("{},{},{},{}\n", r.gamma, r.eta, r.epsilon, r.metric));
    }
    write_atomic(&config.out_dir.join(format!("{}_tune.csv", config.method)), out.as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxRow {
    pub method: ApproxMethod,
    pub m: usize,
    pub budget: usize,
    pub error_mean: f64,
    pub errors: Vec<f64>,
}

/// Approximation error per method and budget, averaged over `seeds` shuffles.
pub fn approx_curve(
    config: &RunConfig,
    methods: &[ApproxMethod],
    ms: &[usize],
    subset_size: usize,
    seeds: usize,
) -> Result<Vec<ApproxRow>> {
    if methods.is_empty() || ms.is_empty() || seeds == 0 {
        return Err(Error::Config("approx needs methods, budgets and at least one seed".into()));
    }
    let mut rows: Vec<ApproxRow> = Vec::new();
    for s in 0..seeds {
        let mut spec = config.data.clone();
        spec.path = resolve_data_path(&spec.path);
        let seed = config.seed.wrapping_add(s as u64);
        spec.shuffle_seed = Some(seed);
        let ds = build_stream(&spec)?;
        let stream: Vec<Vec<f64>> = ds.samples.into_iter().map(|x| x.features).collect();
        for &m in ms {
            let mut cfg = config.clone();
            cfg.m = m;
            cfg.r = None;
            let oana = cfg.oana()?;
            let subset = subset_size.min(stream.len());
            for &method in methods {
                let ApproxPoint { budget, error, .. } = approx_experiment(&stream, method, oana, subset, seed)?;
                match rows.iter_mut().find(|r| r.method == method && r.m == m) {
                    Some(r) => r.errors.push(error),
                    None => rows.push(ApproxRow { method, m, budget, error_mean: 0.0, errors: vec![error] }),
                }
            }
        }
    }
    for r in &mut rows {
        r.error_mean = r.errors.iter().sum::<f64>() / r.errors.len() as f64;
    }
    Ok(rows)
}

pub fn write_approx(
    config: &RunConfig,
    methods: &[ApproxMethod],
    ms: &[usize],
    subset_size: usize,
    seeds: usize,
) -> Result<Vec<ApproxRow>> {
    let rows = approx_curve(config, methods, ms, subset_size, seeds)?;
    let mut out = String::from("method,m,budget,error_mean\n");
    for r in &rows {
        out.push_str(&format!("{},{},{},{}\n", r.method, r.m, r.budget, r.error_mean));
    }
    write_atomic(&config.out_dir.join("approx.csv"), out.as_bytes())?;
    Ok(rows)
}
