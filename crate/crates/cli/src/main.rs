mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use vdecor::kernel::Family;
use vdecor::learners::LearnerSpec;
use vdecor::simgen::Scenario;

use config::{parse_kernel, parse_learner, parse_scenario, set, RunConfig};

/// Spatial decorrelation for regression learners.
#[derive(Debug, Parser)]
#[command(name = "vdecor", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (simulate, fit) or file (others; default stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write train.csv, test.csv and simulation.json.
    Simulate(SimArgs),
    /// Decorrelate, fit a learner and save the pipeline (tunes unset values).
    Fit {
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict on a query CSV with a saved pipeline.
    Predict {
        #[arg(long)]
        pipeline: Option<PathBuf>,
        #[arg(long)]
        query: Option<PathBuf>,
    },
    /// Cross-validate the nugget, range and learner grid.
    Tune {
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Compare spatial and non-spatial learners over simulated replicates.
    Benchmark {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        replicates: Option<usize>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Write the decorrelated response and design as CSV.
    Transform {
        #[arg(long)]
        train: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Fit { .. } => "fit",
            Command::Predict { .. } => "predict",
            Command::Tune { .. } => "tune",
            Command::Benchmark { .. } => "benchmark",
            Command::Transform { .. } => "transform",
        }
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    /// 1, 2, 3 or indep_linear, spatial_linear, spatial_nonlinear.
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Conditioning set size.
    #[arg(long = "C")]
    neighbors: Option<usize>,
    /// exponential or matern:<smoothness>.
    #[arg(long, value_parser = parse_kernel)]
    kernel: Option<Family>,
    #[arg(long)]
    range: Option<f64>,
    #[arg(long)]
    nugget: Option<f64>,
    /// linear, knn:k=<k> or trees:trees=<t>,min_leaf=<m>,mtry=<p>,seed=<s>.
    #[arg(long, value_parser = parse_learner)]
    learner: Option<LearnerSpec>,
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Lib(vdecor::Error),
    Io(String),
}

impl From<vdecor::Error> for CliError {
    fn from(e: vdecor::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

fn apply_model(cfg: &mut RunConfig, m: ModelArgs) {
    set(&mut cfg.neighbors, m.neighbors);
    set(&mut cfg.kernel, m.kernel);
    set(&mut cfg.range, m.range);
    set(&mut cfg.nugget, m.nugget);
    set(&mut cfg.learner, m.learner);
    set(&mut cfg.folds, m.folds);
}

fn apply_sim(cfg: &mut RunConfig, s: SimArgs) {
    set(&mut cfg.scenario, s.scenario);
    set(&mut cfg.n, s.n);
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    set(&mut cfg.seed, cli.seed);
    set(&mut cfg.threads, cli.threads);
    set(&mut cfg.out, cli.out);
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Io(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(sim) => {
            apply_sim(&mut cfg, sim);
            commands::simulate(&cfg)
        }
        Command::Fit { train, model } => {
            set(&mut cfg.train, train);
            apply_model(&mut cfg, model);
            commands::fit(&cfg)
        }
        Command::Predict { pipeline, query } => {
            set(&mut cfg.pipeline, pipeline);
            set(&mut cfg.query, query);
            commands::predict(&cfg)
        }
        Command::Tune { train, model } => {
            set(&mut cfg.train, train);
            apply_model(&mut cfg, model);
            commands::tune(&cfg)
        }
        Command::Benchmark { sim, replicates, model } => {
            apply_sim(&mut cfg, sim);
            set(&mut cfg.replicates, replicates);
            apply_model(&mut cfg, model);
            commands::benchmark(&cfg)
        }
        Command::Transform { train, model } => {
            set(&mut cfg.train, train);
            apply_model(&mut cfg, model);
            commands::transform(&cfg)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("VDECOR_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                let mut cmd = Cli::command();
                let usage = match cmd.find_subcommand_mut(name) {
                    Some(sub) => sub.render_usage(),
                    None => cmd.render_usage(),
                };
                eprintln!("\n{usage}\n\nFor more information, try '--help'.");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
