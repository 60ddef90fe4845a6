//! `scma`: design, analyse and simulate downlink SCMA codebooks.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_snr_grid, Config, ConfigError};

/// Exit status for configuration problems.
pub const EXIT_CONFIG: u8 = 3;
/// Exit status when a codebook file cannot be read or parsed.
pub const EXIT_CODEBOOK: u8 = 4;
/// Exit status for failures while running a command.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "scma",
    version,
    about = "SCMA codebook design, union-bound analysis and BER simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Print and validate the signature matrix for the configured dimensions
    Assign,
    /// Run the genetic search and export the best codebook set
    Design,
    /// Per-user union-bound BEP over an SNR grid for one codebook file
    Analyze,
    /// Monte Carlo BER sweep for one codebook file
    Simulate,
    /// Analyse (and optionally simulate) several codebook files side by side
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectorArg {
    Mpa,
    Ml,
}

/// Flags override values from `--config`; unset values fall back to the
/// defaults shown in brackets.
#[derive(Args, Debug, Clone, Default)]
struct GlobalOpts {
    /// TOML file with [system], [channel], [analysis], [design], [simulation] and [run] sections
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master random seed [1]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// SNR grid in dB, either "a,b,c" or "start:step:stop" [0:2:18]
    #[arg(long, global = true, value_name = "GRID")]
    snr_grid: Option<String>,
    /// Rician factor [10]
    #[arg(long, global = true)]
    kappa: Option<f64>,
    /// Path-loss exponent [3]
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Altitude-to-radius ratio H/R [1]
    #[arg(long, global = true)]
    c1: Option<f64>,
    /// Resource nodes [4]
    #[arg(short = 'K', long = "nodes", global = true)]
    k: Option<usize>,
    /// Users [6]
    #[arg(short = 'J', long = "users", global = true)]
    j: Option<usize>,
    /// Codebook size [4]
    #[arg(short = 'M', long = "order", global = true)]
    m: Option<usize>,
    /// Nonzero entries per codeword [2]
    #[arg(short = 'N', long = "spread", global = true)]
    n: Option<usize>,
    /// Codebook file; repeat for `compare`
    #[arg(long, global = true, value_name = "FILE")]
    codebook: Vec<PathBuf>,
    /// Output directory [scma-out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads [all cores]
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report the exact union bound instead of the truncated one
    #[arg(long, global = true)]
    exact_bep: bool,
    /// Maximum number of simultaneously wrong users in the bound [3]
    #[arg(long, global = true, value_name = "E*")]
    truncation: Option<usize>,
    /// Detector used in simulations [mpa]
    #[arg(long, global = true, value_enum)]
    detector: Option<DetectorArg>,
    /// MPA iterations [8]
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// GA population size [50]
    #[arg(long, global = true)]
    population: Option<usize>,
    /// GA generations [20]
    #[arg(long, global = true)]
    generations: Option<usize>,
    /// SNR in dB at which the design metric is evaluated [12]
    #[arg(long, global = true)]
    design_snr: Option<f64>,
    /// Codeword cap per SNR point in simulations [1000000]
    #[arg(long, global = true)]
    max_symbols: Option<u64>,
    /// Stop a simulated point once every user has this many bit errors [100]
    #[arg(long, global = true)]
    target_errors: Option<u64>,
    /// In `compare`, also run the BER simulation
    #[arg(long, global = true)]
    simulate: bool,
}

impl GlobalOpts {
    /// Loads the config file and applies flag overrides.
    fn merged_config(&self) -> Result<Config, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        set(&mut cfg.system.k, self.k);
        set(&mut cfg.system.j, self.j);
        set(&mut cfg.system.m, self.m);
        set(&mut cfg.system.n, self.n);
        set(&mut cfg.channel.kappa, self.kappa);
        set(&mut cfg.channel.alpha, self.alpha);
        set(&mut cfg.channel.c1, self.c1);
        if let Some(g) = &self.snr_grid {
            let grid = parse_snr_grid(g).map_err(ConfigError)?;
            cfg.analysis.snr_grid = Some(grid.clone());
            cfg.simulation.snr_grid = Some(grid);
        }
        if self.exact_bep {
            cfg.analysis.exact_bep = Some(true);
        }
        set(&mut cfg.analysis.truncation, self.truncation);
        if let Some(d) = self.detector {
            cfg.simulation.detector = Some(match d {
                DetectorArg::Mpa => "mpa".into(),
                DetectorArg::Ml => "ml".into(),
            });
        }
        set(&mut cfg.simulation.iterations, self.iterations);
        set(&mut cfg.simulation.max_symbols, self.max_symbols);
        set(&mut cfg.simulation.target_errors, self.target_errors);
        set(&mut cfg.design.population, self.population);
        set(&mut cfg.design.generations, self.generations);
        set(&mut cfg.design.design_snr_db, self.design_snr);
        set(&mut cfg.run.seed, self.seed);
        set(&mut cfg.run.threads, self.threads);
        Ok(cfg.resolve())
    }
}

fn set<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

/// Failure classes, each with its own exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot load codebook: {0}")]
    Codebook(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Codebook(_) => EXIT_CODEBOOK,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<scma_core::Error> for CliError {
    fn from(e: scma_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.opts.merged_config()?;
    if let Some(n) = cfg.run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("--threads: {e}")))?;
    }
    let ctx = commands::Context {
        cfg,
        codebooks: cli.opts.codebook.clone(),
        out: cli.opts.out.clone(),
        simulate: cli.opts.simulate,
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::Assign => commands::assign(&ctx),
        Command::Design => commands::design(&ctx),
        Command::Analyze => commands::analyze(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Compare => commands::compare(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
