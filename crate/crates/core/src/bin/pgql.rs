use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pgql::harness::{
    certify, emit_plot, run_async, run_experiment, write_certificate, CertifyConfig, ExperimentConfig, ExperimentRun,
};
use pgql::{Error, Result};

#[derive(Parser)]
#[command(name = "pgql", version, about = "Tabular PGQL experiments and fixed-point certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on one environment, one seed at a time.
    Run(RunArgs),
    /// Train with several actor threads and one learner thread (4 workers unless set).
    RunAsync(RunArgs),
    /// Solve fixed points on random MDPs and check their bounds.
    Certify(CertifyArgs),
    /// Render trace CSVs as an SVG learning-curve chart.
    Plot(PlotArgs),
}

/// Each flag overrides the key of the same name in `--config`.
#[derive(Args)]
struct RunArgs {
    /// Flat key=value file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// gridworld | garnet
    #[arg(long)]
    env: Option<String>,
    /// actor-critic | q-learning | pgql | expected-sarsa
    #[arg(long)]
    agent: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    lr_actor: Option<String>,
    #[arg(long)]
    lr_critic: Option<String>,
    #[arg(long)]
    lr_q: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
    /// Comma list, ranges allowed: `0..5` or `1,4,9`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    replay_capacity: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// Output directory for traces, checkpoints and the summary.
    #[arg(long)]
    out: Option<String>,
    /// Grid layout with `.`, `#`, `S` and `T` cells.
    #[arg(long)]
    layout_file: Option<String>,
    /// Extra `key=value` settings (e.g. `--set pgql-mode=blend`).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

impl RunArgs {
    fn to_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        // `env` first: it resets environment-specific settings.
        let flags = [
            ("env", &self.env),
            ("agent", &self.agent),
            ("alpha", &self.alpha),
            ("gamma", &self.gamma),
            ("eta", &self.eta),
            ("lr-actor", &self.lr_actor),
            ("lr-critic", &self.lr_critic),
            ("lr-q", &self.lr_q),
            ("steps", &self.steps),
            ("eval-every", &self.eval_every),
            ("seeds", &self.seeds),
            ("workers", &self.workers),
            ("replay-capacity", &self.replay_capacity),
            ("batch-size", &self.batch_size),
            ("out", &self.out),
            ("layout-file", &self.layout_file),
        ];
        for (key, value) in flags {
            if let Some(value) = value {
                cfg.set(key, value)?;
            }
        }
        for kv in &self.extra {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct CertifyArgs {
    /// MDP seeds.
    #[arg(long, default_value = "0..20")]
    seeds: String,
    /// Comma list of temperatures.
    #[arg(long, default_value = "1,0.1,0.01")]
    alpha: String,
    /// Comma list of mixing weights; 0 is the plain regularized fixed point.
    #[arg(long, default_value = "0,0.25,0.5,0.75")]
    eta: String,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value = "certificate.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV files written by `run` or `run-async`.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    #[arg(long, default_value = "traces.svg")]
    out: PathBuf,
}

fn parse_list<T: std::str::FromStr>(field: &str, text: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("--{field}: cannot parse {s:?}"))))
        .collect()
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let mut cfg = ExperimentConfig::default();
    cfg.set("seeds", text)?;
    Ok(cfg.seeds)
}

fn report(runs: &[ExperimentRun]) {
    for run in runs {
        println!(
            "{} seed {}: final j_true {:.6}, mean j_true {:.6}",
            run.agent,
            run.seed,
            run.final_j(),
            run.auc()
        );
    }
}

fn main_inner(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.to_config()?;
            if cfg.workers > 1 {
                return Err(Error::Config {
                    field: "workers".into(),
                    message: "use run-async for more than one worker".into(),
                });
            }
            report(&run_experiment(&cfg)?);
        }
        Command::RunAsync(args) => {
            let mut cfg = args.to_config()?;
            if args.workers.is_none() && cfg.workers == 1 {
                cfg.workers = 4;
            }
            report(&run_async(&cfg)?);
        }
        Command::Certify(args) => {
            let cfg = CertifyConfig {
                mdp_seeds: parse_seeds(&args.seeds)?,
                alphas: parse_list("alpha", &args.alpha)?,
                etas: parse_list("eta", &args.eta)?,
                gamma: args.gamma,
                ..CertifyConfig::default()
            };
            let rows = certify(&cfg)?;
            write_certificate(&args.out, &rows)?;
            let passed = rows.iter().filter(|r| r.passed()).count();
            println!("{passed}/{} rows passed; wrote {}", rows.len(), args.out.display());
            return Ok(passed == rows.len());
        }
        Command::Plot(args) => {
            emit_plot(&args.traces, &args.out)?;
            println!("wrote {}", args.out.display());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
