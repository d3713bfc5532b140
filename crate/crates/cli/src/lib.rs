//! `diglab`: train toy GANs, run the attractor experiments, compare
//! regularizers and replay runs from their manifests.
//!
//! The binary is a thin wrapper around [`run`].

mod args;
mod manifest;
mod run;

use std::path::{Path, PathBuf};
use std::ffi::OsString;

use clap::{Parser, Subcommand};
use diglab::dynamics::{DynamicsError, PRESETS};

use args::ConfigArgs;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Dependency(String),
    Io { path: PathBuf, source: std::io::Error },
    Run(String),
    Mismatch(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Dependency(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Run(_) | CliError::Mismatch(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Dependency(m) => write!(f, "{m}"),
            CliError::Io { path, source } => write!(f, "i/o error on {}: {source}", path.display()),
            CliError::Run(m) => write!(f, "{m}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Config(m) | DynamicsError::Format(m) => CliError::Config(m),
            DynamicsError::MissingArtifact(m) => CliError::Dependency(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "diglab", version, about = "GAN training-dynamics lab for the discriminator gradient-gap regularizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one GAN and write its trajectory, snapshots and manifest.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run stuck, perturb, avoid, escape (or all) for one or more seeds.
    Experiment {
        #[arg(value_parser = ["stuck", "perturb", "avoid", "escape", "all"])]
        which: String,
        /// Number of consecutive seeds, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Train one run per regularizer from shared initial states.
    Compare {
        /// Comma-separated list of none, dig, gp1, r1, r2, dragan.
        #[arg(long, value_delimiter = ',', default_value = "none,dig")]
        regularizers: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-run a manifest into a fresh directory and compare output hashes.
    Replay {
        manifest: PathBuf,
        /// Defaults to `replay/` next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the named configurations.
    Presets,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code() as u8;
        }
    };
    let result = match cli.command {
        Command::Train { config, out } => config.resolve().and_then(|c| run::train(&c, &out)),
        Command::Experiment {
            which,
            seeds,
            config,
            out,
        } => config.resolve().and_then(|c| run::experiment(&c, &which, seeds, &out)),
        Command::Compare {
            regularizers,
            seeds,
            config,
            out,
        } => config
            .resolve()
            .and_then(|c| run::compare(&c, &regularizers, seeds, &out)),
        Command::Replay { manifest, out } => run::replay(&manifest, out.as_deref()),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<22} {about}");
            }
            Ok(run::Status::Ok)
        }
    };
    match result {
        Ok(run::Status::Ok) => 0,
        Ok(run::Status::Diverged) => 3,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
