//! Training dynamics on small problems: the alternating trainer, coverage
//! classification and the stuck/perturb/avoid/escape experiments.

mod config;
mod config_text;
mod coverage;
mod experiment;
mod log;
mod train;

pub use config::{GanConfig, LatentDist, PRESETS};
pub use config_text::{suggest_key, CONFIG_KEYS};
pub use coverage::{coverage, coverage_1d, Coverage};
pub use experiment::*;
pub use log::{Divergence, TrajectoryLog, TrajectoryRecord};
pub use train::{
    discriminator_step, generate, generator_step, gradient_gap, initial_params, perturb_params, stream_seed, train,
    train_discriminator_to_optimality, DiscriminatorStep, LatentSampler, OptimalityOutcome, StopRule, Stream,
    TrainOutcome,
};

use thiserror::Error;

use crate::autodiff::{Array, AutodiffError};
use crate::ganreg::GanRegError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("missing prerequisite: {0}")]
    MissingArtifact(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    GanReg(#[from] GanRegError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Real samples, optionally labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `[n, dim]`.
    pub points: Array,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn from_config(config: &GanConfig) -> Result<Self, DynamicsError> {
        config.validate()?;
        Ok(Self {
            points: config.reals(),
            labels: config.labels.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check_against(&self, config: &GanConfig) -> Result<(), DynamicsError> {
        let shape = self.points.shape();
        if shape.len() != 2 || shape[1] != config.data_dim() {
            return Err(DynamicsError::Config(format!(
                "dataset shape {shape:?} does not match data dimension {}",
                config.data_dim()
            )));
        }
        if let Some(l) = &self.labels {
            if l.len() != shape[0] {
                return Err(DynamicsError::Config(format!("{} labels for {} points", l.len(), shape[0])));
            }
        }
        Ok(())
    }
}
