use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Args, FromArgMatches};
use diglab::dynamics::{GanConfig, CONFIG_KEYS};

use crate::CliError;

/// Run configuration sources. Later sources win: preset, then config file,
/// then one flag per config key (`--learning-rate 0.05`, ...).
#[derive(Debug, Clone, Default)]
pub struct ConfigArgs {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub overrides: Vec<(&'static str, String)>,
}

fn flag(key: &str) -> String {
    key.replace('_', "-")
}

impl FromArgMatches for ConfigArgs {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = ConfigArgs {
            preset: m.get_one::<String>("preset").cloned(),
            config: m.get_one::<PathBuf>("config").cloned(),
            overrides: Vec::new(),
        };
        for key in CONFIG_KEYS {
            if let Some(v) = m.get_one::<String>(key) {
                out.overrides.push((key, v.clone()));
            }
        }
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for ConfigArgs {
    fn augment_args(cmd: clap::Command) -> clap::Command {
        let mut cmd = cmd
            .arg(
                Arg::new("preset")
                    .long("preset")
                    .value_name("NAME")
                    .help("Start from a named configuration (see `diglab presets`)"),
            )
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("key = value config file applied over the preset"),
            );
        for key in CONFIG_KEYS {
            cmd = cmd.arg(
                Arg::new(*key)
                    .long(flag(key))
                    .value_name("VALUE")
                    .action(ArgAction::Set)
                    .help_heading("Config overrides")
                    .help(format!("Override `{key}`")),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: clap::Command) -> clap::Command {
        Self::augment_args(cmd)
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<GanConfig, CliError> {
        let mut config = match &self.preset {
            Some(name) => GanConfig::preset(name)?,
            None => GanConfig::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            config = config
                .apply_text(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        }
        for (key, value) in &self.overrides {
            config
                .set(key, value)
                .map_err(|e| CliError::Config(format!("--{}: {e}", flag(key))))?;
        }
        config.validate()?;
        Ok(config)
    }
}
