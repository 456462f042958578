use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nolana::data::{LabelMap, StreamSpec, Task};
use nolana::eval::ApproxMethod;
use nolana::experiment::{self, Method, RunConfig, TuneGrid, WarmupPolicy};
use nolana::{EtaSchedule, Error, LossKind};

#[derive(Parser)]
#[command(name = "nolana", about = "Budgeted online kernel learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prequential run over seeded shuffles.
    Run(Common),
    /// Relative kernel approximation error versus budget.
    Approx {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "oana,nogd,fogd")]
        methods: Vec<String>,
        #[arg(long = "ms", value_delimiter = ',', default_value = "20,50,100,200")]
        ms: Vec<usize>,
        #[arg(long, default_value_t = 10_000)]
        subset: usize,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
    },
    /// One run per epsilon; emits accuracy / time / update counts.
    SweepEps {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        eps_list: Vec<String>,
    },
    /// Grid search over gamma, eta and epsilon on a stream prefix.
    Tune {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        etas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        epsilons: Vec<String>,
        #[arg(long, default_value_t = 0.2)]
        prefix: f64,
    },
}

#[derive(Args)]
struct Common {
    /// LIBSVM file; relative paths also resolve against $NOLANA_DATA_DIR.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "nolana")]
    method: String,
    #[arg(long, default_value = "hinge")]
    loss: String,
    /// classification or regression (default: from the loss).
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Raw label mapped to +1 (others to -1); default picks automatically.
    #[arg(long)]
    positive_label: Option<f64>,
    /// Truncate each shuffled stream to this many samples.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long, default_value_t = 0.8)]
    r_ratio: f64,
    /// Squared-distance gate; "inf" freezes landmarks.
    #[arg(long, default_value = "0")]
    epsilon: String,
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-3)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// 0 keeps file order for a single pass.
    #[arg(long, default_value_t = 5)]
    shuffles: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    inv_sqrt_eta: bool,
    #[arg(long, default_value_t = 1)]
    inner_steps: usize,
    /// Sample the initial landmarks from this many leading points instead of taking the first m.
    #[arg(long)]
    warmup_buffer: Option<usize>,
    #[arg(long)]
    scale: bool,
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value = "inf")]
    pa_c: String,
    #[arg(long, default_value_t = 0.0)]
    pa_insensitivity: f64,
}

fn parse_f64(s: &str) -> Result<f64, Error> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => t.parse().map_err(|_| Error::Config(format!("not a number: '{t}'"))),
    }
}

impl Common {
    fn config(&self) -> Result<RunConfig, Error> {
        let loss: LossKind = self.loss.parse()?;
        let task = match self.task.as_deref() {
            None if loss.is_classification() => Task::Classification,
            None => Task::Regression,
            Some("classification") => Task::Classification,
            Some("regression") => Task::Regression,
            Some(other) => return Err(Error::Config(format!("unknown task '{other}'"))),
        };
        let mut data = StreamSpec::new(&self.data, task);
        data.dim = self.dim;
        data.limit = self.limit;
        if let Some(p) = self.positive_label {
            data.label_map = LabelMap::OneVsRest(p);
        }
        let method: Method = self.method.parse()?;
        let mut c = RunConfig::new(method, loss, data, self.m);
        c.r = self.r;
        c.r_ratio = self.r_ratio;
        c.epsilon = parse_f64(&self.epsilon)?;
        c.eta = self.eta;
        c.lambda = self.lambda;
        c.theta = self.theta;
        c.gamma = self.gamma;
        c.p = self.p;
        c.seed = self.seed;
        c.shuffles = self.shuffles;
        c.out_dir = self.out.clone();
        c.schedule = if self.inv_sqrt_eta { EtaSchedule::InvSqrt } else { EtaSchedule::Constant };
        c.inner_steps = self.inner_steps;
        c.warmup = match self.warmup_buffer {
            Some(buffer) => WarmupPolicy::Sampled { buffer },
            None => WarmupPolicy::FirstM,
        };
        c.scale = self.scale;
        c.timing = self.timing;
        c.pa_aggressiveness = parse_f64(&self.pa_c)?;
        c.pa_insensitivity = self.pa_insensitivity;
        c.validate()?;
        Ok(c)
    }
}

fn parse_list(items: &[String]) -> Result<Vec<f64>, Error> {
    items.iter().map(|s| parse_f64(s)).collect()
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run(common) => {
            let c = common.config()?;
            let report = experiment::run(&c)?;
            let s = &report.summary;
            println!(
                "{} {}: {:.6} ± {:.6} over {} pass(es); updates {:?}; budget {} reals",
                s.method,
                s.metric,
                s.mean,
                s.stddev,
                s.per_pass.len(),
                s.updates,
                s.budget.total
            );
        }
        Command::Approx { common, methods, ms, subset, seeds } => {
            let c = common.config()?;
            let methods = methods
                .iter()
                .map(|m| match m.as_str() {
                    "oana" => Ok(ApproxMethod::Oana),
                    "nogd" => Ok(ApproxMethod::Nogd),
                    "fogd" => Ok(ApproxMethod::Fogd),
                    other => Err(Error::Config(format!("unknown approx method '{other}'"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            for r in experiment::write_approx(&c, &methods, &ms, subset, seeds)? {
                println!("{:>5} m={:<4} budget={:<7} error={:.6}", r.method, r.m, r.budget, r.error_mean);
            }
        }
        Command::SweepEps { common, eps_list } => {
            let c = common.config()?;
            let rows = experiment::write_sweep(&c, &parse_list(&eps_list)?)?;
            print!("{}", experiment::sweep_csv(c.data.task, &rows));
        }
        Command::Tune { common, gammas, etas, epsilons, prefix } => {
            let c = common.config()?;
            let grid = TuneGrid { gammas, etas, epsilons: parse_list(&epsilons)?, prefix };
            let rows = experiment::write_tune(&c, &grid)?;
            if let Some(best) = rows.first() {
                println!(
                    "best: gamma={} eta={} epsilon={} {}={:.6}",
                    best.gamma,
                    best.eta,
                    best.epsilon,
                    experiment::metric_name(c.data.task),
                    best.metric
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
