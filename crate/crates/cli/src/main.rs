use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use soma_cli::commands::{cmd_bounds, cmd_couple, cmd_damcmc, cmd_sample, RunReport};
use soma_cli::config::{check_grid, ExperimentConfig, ExperimentKind};
use soma_cli::recipes::{parse_override, run_experiment, RECIPES};
use soma_cli::{CliError, Result};

/// Samplers for differentially private data augmentation.
#[derive(Parser)]
#[command(name = "soma", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Keep every k-th state; overrides the config.
    #[arg(long, global = true)]
    thin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run independent chains and write their traces.
    Sample,
    /// Run coupled chains and estimate coupling rates.
    Couple {
        #[arg(long)]
        allow_censored: bool,
    },
    /// Tabulate acceptance and rate bounds over an (n, M) grid.
    Bounds {
        /// Comma-separated dataset sizes.
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Comma-separated likelihood ratio bounds.
        #[arg(long = "m", value_delimiter = ',')]
        m: Vec<f64>,
    },
    /// Data-augmentation MCMC for private linear regression.
    Damcmc {
        #[arg(long)]
        allow_censored: bool,
    },
    /// Run a named recipe (see `soma list`).
    Experiment {
        id: String,
        /// Override a recipe parameter, e.g. `--set replicates=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long)]
        allow_censored: bool,
    },
    /// List recipe ids.
    List,
}

fn load(g: &Global) -> Result<ExperimentConfig> {
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs --config <FILE>".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.out = o.clone();
    }
    if let Some(t) = g.thin {
        cfg.thin = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<RunReport> {
    if let Some(w) = cli.global.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    let g = &cli.global;
    let out = || g.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Sample => cmd_sample(&load(g)?),
        Command::Couple { allow_censored } => {
            let mut cfg = load(g)?;
            cfg.allow_censored |= allow_censored;
            cmd_couple(&cfg)
        }
        Command::Damcmc { allow_censored } => {
            let mut cfg = load(g)?;
            cfg.allow_censored |= allow_censored;
            cmd_damcmc(&cfg)
        }
        Command::Bounds { n, m } => {
            if g.config.is_some() {
                let cfg = load(g)?;
                if cfg.experiment != ExperimentKind::Bounds {
                    return Err(CliError::Config("bounds needs a bounds experiment config".into()));
                }
                let b = cfg.bounds.expect("validated");
                cmd_bounds(&b.n, &b.m, &cfg.out)
            } else {
                check_grid(&n, &m)?;
                cmd_bounds(&n, &m, &out())
            }
        }
        Command::Experiment { id, set, allow_censored } => {
            let overrides = set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
            let mut report = run_experiment(&id, &overrides, g.seed, &out())?;
            report.allow_censored |= allow_censored;
            Ok(report)
        }
        Command::List => {
            for r in RECIPES {
                println!("{:<7} {}", r.id, r.about);
            }
            Ok(RunReport::default())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for f in &report.files {
                println!("{}", f.display());
            }
            if report.success() {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "warning: {} coupled run(s) hit t_max without meeting; pass --allow-censored to accept",
                    report.censored
                );
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
