//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qgdebias_core::nets::Architecture;

use crate::config::ExperimentConfig;
use crate::{stages, PipelineError};

#[derive(Debug, Parser)]
#[command(name = "qgdebias", version, about = "Nudging-based debiasing of coarse two-layer QG simulations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = ArchArg::All)]
    pub arch: ArchArg,
    /// Override the nudging time scale.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Free fine and coarse runs, split into training and test windows.
    Simulate,
    /// Nudged coarse run and the spectrally corrected training set.
    Nudge,
    /// Train the correction ensembles.
    Train,
    /// Correct the coarse test run with every member.
    Correct,
    /// Statistics and summary table.
    Report,
    /// Ensemble-size × epochs error surfaces.
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    Rnn,
    Vaernn,
    Storn,
    Vrnn,
    All,
}

impl ArchArg {
    pub fn resolve(self, cfg: &ExperimentConfig) -> Vec<Architecture> {
        match self {
            Self::Rnn => vec![Architecture::Rnn],
            Self::Vaernn => vec![Architecture::VaeRnn],
            Self::Storn => vec![Architecture::Storn],
            Self::Vrnn => vec![Architecture::Vrnn],
            Self::All => cfg.nets.architectures.clone(),
        }
    }
}

/// Load the config and apply command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<ExperimentConfig, PipelineError> {
    let path = cli.config.as_ref().ok_or_else(|| PipelineError::Usage("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = Some(o.clone());
    } else if let Some(rel) = cfg.out_dir.clone().filter(|p| p.is_relative()) {
        // relative to the config file
        let base = path.parent().unwrap_or_else(|| std::path::Path::new("."));
        cfg.out_dir = Some(base.join(rel));
    }
    if let Some(t) = cli.tau {
        cfg.nudge.tau = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let cfg = effective_config(cli)?;
    let archs = cli.arch.resolve(&cfg);
    match cli.command {
        Command::Simulate => {
            let s = stages::simulate(&cfg)?;
            eprintln!("simulate: {} training and {} test snapshots per run", s.train_snapshots, s.test_snapshots);
        }
        Command::Nudge => {
            let set = stages::nudge(&cfg, cli.tau.is_some())?;
            eprintln!("nudge: {} snapshots, tau = {}", set.u.len(), set.tau);
        }
        Command::Train => {
            stages::train(&cfg, &archs)?;
            eprintln!("train: {} members × {} architectures", cfg.nets.ensemble, archs.len());
        }
        Command::Correct => stages::correct(&cfg, &archs)?,
        Command::Report => {
            let rows = stages::report(&cfg, &archs)?;
            for (name, _, kl, l1) in rows {
                eprintln!("{name:<8} mean D_KL {kl:.4e}  mean L1 {l1:.4e}");
            }
        }
        Command::Sweep => {
            let cells = stages::sweep(&cfg, &archs)?;
            eprintln!("sweep: {} cells", cells.len());
        }
    }
    Ok(())
}

/// Parse, run and map the outcome to the process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
