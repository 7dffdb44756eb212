//! Command-line front end: flags, config loading, dispatch and report files.

pub mod commands;
pub mod config;
pub mod report;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use config::RunConfig;
use report::{ExperimentReport, ReportBuilder};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "nonlocal-lab", version, about = "Monotone solvers and verification experiments for parabolic nonlocal equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; each subcommand writes into its own subdirectory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated list of sigma values.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sigma_sweep: Option<Vec<f64>>,
    /// Grid cells per unit length.
    #[arg(long, global = true)]
    pub resolution: Option<u32>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    /// Solve one problem and dump the trajectory.
    Solve,
    /// Check the capped power, the special function, the boundary barrier and the bump.
    VerifyBarriers,
    /// Envelope and ABP checks on the randomized supersolution family.
    AbpCheck,
    /// Fit the measure decay of superlevel sets.
    PointEstimate,
    /// Oscillation decay on rough-data Isaacs runs.
    HolderFit,
    /// Incremental quotients on a smooth translation-invariant run.
    C1aFit,
    /// Calderón-Zygmund selection on random sets.
    CzDemo,
    /// Zero solution before the switch, positive time derivative after it.
    Counterexample,
}

impl Command {
    pub fn name(self) -> String {
        self.to_possible_value().expect("no skipped variants").get_name().to_string()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{command}: {message}")]
    Module { command: String, message: String },
    #[error("writing reports: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

/// Merge the file config with flag overrides and pick the subcommand.
pub fn resolve(cli: &Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => match config::load(p)? {
            Some(c) => c,
            None => return Err(CliError::Usage(format!("{} is empty\n\n{}", p.display(), usage()))),
        },
        None => RunConfig::default(),
    };
    let command = match (cli.command, &cfg.subcommand) {
        (Some(c), _) => c,
        (None, Some(name)) => Command::from_str(name, true)
            .map_err(|_| CliError::Usage(format!("unknown subcommand {name:?} in the config\n\n{}", usage())))?,
        (None, None) => return Err(CliError::Usage(usage())),
    };
    cfg.subcommand = Some(command.name());
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(s) = &cli.sigma_sweep {
        cfg.run.sigmas = s.clone();
    }
    if let Some(r) = cli.resolution {
        cfg.run.resolution = Some(r);
    }
    if let Some(o) = &cli.out {
        cfg.run.out = o.clone();
    }
    cfg.validate()?;
    Ok((command, cfg))
}

pub fn usage() -> String {
    Cli::command().render_help().to_string()
}

/// Run one subcommand and write its report into `<out>/<subcommand>/`.
pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<ExperimentReport, CliError> {
    let start = Instant::now();
    let name = command.name();
    let inputs = serde_json::to_value(cfg).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rep = ReportBuilder::new(&name, inputs);
    let run = match command {
        Command::Solve => commands::solve,
        Command::VerifyBarriers => commands::verify_barriers,
        Command::AbpCheck => commands::abp_check,
        Command::PointEstimate => commands::point_estimate,
        Command::HolderFit => commands::holder_fit,
        Command::C1aFit => commands::c1a_fit,
        Command::CzDemo => commands::cz_demo,
        Command::Counterexample => commands::counterexample,
    };
    run(cfg, &mut rep).map_err(|message| CliError::Module {
        command: name.clone(),
        message,
    })?;
    let dir = cfg.run.out.join(&name);
    // the echo doubles as a replayable config
    if let Ok(text) = toml::to_string(cfg) {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("inputs.toml"), text)?;
    }
    Ok(rep.finish(&dir, start.elapsed().as_secs_f64())?)
}

/// Process exit status: 0 when every assertion holds, 1 when one fails, 2 on errors.
pub fn run(cli: &Cli) -> i32 {
    let (command, cfg) = match resolve(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    match dispatch(command, &cfg) {
        Ok(rep) => {
            if !cli.quiet {
                for a in rep.assertions.iter().filter(|a| !a.passed) {
                    println!("FAIL {}: {} {:?} {} (margin {:.3e})", a.name, a.lhs, a.relation, a.rhs, a.margin);
                }
                println!(
                    "{}: {} ({} assertions, {:.1}s) -> {}",
                    rep.name,
                    if rep.passed { "PASS" } else { "FAIL" },
                    rep.assertions.len(),
                    rep.wall_clock_seconds,
                    report::report_path(&cfg.run.out.join(&rep.name)).display()
                );
            }
            if rep.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
