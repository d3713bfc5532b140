use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::autodiff::Array;
use crate::ganreg::{DigMode, LossFamily, PairingStrategy, RegularizerKind};
use crate::nn::{Activation, MlpConfig, OptimizerKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentDist {
    Normal,
    Uniform,
}

impl LatentDist {
    pub fn as_str(self) -> &'static str {
        match self {
            LatentDist::Normal => "normal",
            LatentDist::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for LatentDist {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(LatentDist::Normal),
            "uniform" => Ok(LatentDist::Uniform),
            other => Err(format!("unknown latent distribution `{other}` (expected normal or uniform)")),
        }
    }
}

/// Every knob of a training run. Nothing about a run depends on values that
/// are not stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Real data points, one row per point.
    pub data: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
    pub loss: LossFamily,
    pub regularizer: RegularizerKind,
    pub lambda: f64,
    pub alpha: f64,
    pub dig_mode: DigMode,
    pub pairing: PairingStrategy,
    /// `None` resolves to half the per-coordinate std of the data.
    pub dragan_noise_std: Option<f64>,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Adam β1, or the momentum coefficient for SGD.
    pub momentum: f64,
    pub iterations: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub latent_dist: LatentDist,
    /// Draw the latent codes once and reuse them every iteration.
    pub fixed_codes: bool,
    /// Generated samples per iteration.
    pub fake_batch: usize,
    pub gen_hidden: Vec<usize>,
    pub gen_hidden_act: Activation,
    pub gen_output_act: Activation,
    pub gen_output_scale: f64,
    pub disc_hidden: Vec<usize>,
    pub disc_hidden_act: Activation,
    pub disc_output_act: Activation,
    pub log_stride: usize,
    pub coverage_eps: f64,
    /// A run is declared diverged once any |parameter| exceeds this.
    pub divergence_threshold: f64,
    /// Gradient L∞ tolerance when training a discriminator to optimality.
    pub optimality_tol: f64,
    pub optimality_max_steps: usize,
}

impl Default for GanConfig {
    /// The two-point toy setup without regularization.
    fn default() -> Self {
        Self {
            data: vec![vec![0.0], vec![4.0]],
            labels: None,
            loss: LossFamily::NonsaturatingJs,
            regularizer: RegularizerKind::None,
            lambda: 1.0,
            alpha: 1.0,
            dig_mode: DigMode::BlendThenGap,
            pairing: PairingStrategy::Random,
            dragan_noise_std: None,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            momentum: 0.9,
            iterations: 10_000,
            seed: 0,
            latent_dim: 1,
            latent_dist: LatentDist::Normal,
            fixed_codes: true,
            fake_batch: 2,
            gen_hidden: vec![5, 5, 5],
            gen_hidden_act: Activation::Tanh,
            gen_output_act: Activation::Tanh,
            gen_output_scale: 5.0,
            disc_hidden: vec![10, 10, 10],
            disc_hidden_act: Activation::Sigmoid,
            disc_output_act: Activation::Identity,
            log_stride: 10,
            coverage_eps: 0.25,
            divergence_threshold: 1e6,
            optimality_tol: 1e-6,
            optimality_max_steps: 50_000,
        }
    }
}

/// Named configurations.
pub const PRESETS: &[(&str, &str)] = &[
    ("paper-toy-vanilla", "two-point toy task, no regularizer"),
    ("paper-toy-dig", "two-point toy task, gradient-gap regularizer with lambda=1, alpha=1"),
    (
        "limited-data-100pct",
        "untested at desk scale: lambda = 1000 / 1.0, alpha = 0.5, gradient-gap regularizer",
    ),
    (
        "limited-data-20pct",
        "untested at desk scale: lambda = 1000 / 0.2, alpha = 0.5, gradient-gap regularizer",
    ),
    (
        "limited-data-10pct",
        "untested at desk scale: lambda = 1000 / 0.1, alpha = 0.5, gradient-gap regularizer",
    ),
];

impl GanConfig {
    pub fn preset(name: &str) -> Result<Self, DynamicsError> {
        let base = Self::default();
        let limited = |fraction: f64| Self {
            regularizer: RegularizerKind::Dig,
            lambda: 1000.0 / fraction,
            alpha: 0.5,
            ..Self::default()
        };
        match name {
            "paper-toy-vanilla" => Ok(base),
            "paper-toy-dig" => Ok(Self {
                regularizer: RegularizerKind::Dig,
                lambda: 1.0,
                alpha: 1.0,
                ..base
            }),
            "limited-data-100pct" => Ok(limited(1.0)),
            "limited-data-20pct" => Ok(limited(0.2)),
            "limited-data-10pct" => Ok(limited(0.1)),
            other => Err(DynamicsError::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn generator_config(&self) -> MlpConfig {
        let mut widths = vec![self.latent_dim];
        widths.extend(&self.gen_hidden);
        widths.push(self.data_dim());
        MlpConfig::new(widths, self.gen_hidden_act, self.gen_output_act).with_output_scale(self.gen_output_scale)
    }

    pub fn discriminator_config(&self) -> MlpConfig {
        let mut widths = vec![self.data_dim()];
        widths.extend(&self.disc_hidden);
        widths.push(1);
        MlpConfig::new(widths, self.disc_hidden_act, self.disc_output_act)
    }

    /// λ actually applied to the discriminator objective.
    pub fn effective_lambda(&self) -> f64 {
        if self.regularizer == RegularizerKind::None {
            0.0
        } else {
            self.lambda
        }
    }

    pub fn reals(&self) -> Array {
        let dim = self.data_dim();
        Array::new(vec![self.data.len(), dim], self.data.concat()).expect("validated data")
    }

    /// Modes used for coverage: the distinct data points.
    pub fn modes(&self) -> Vec<Vec<f64>> {
        let mut modes: Vec<Vec<f64>> = Vec::new();
        for p in &self.data {
            if !modes.contains(p) {
                modes.push(p.clone());
            }
        }
        modes
    }

    pub fn resolved_dragan_noise_std(&self) -> f64 {
        self.dragan_noise_std
            .unwrap_or_else(|| crate::ganreg::default_dragan_noise_std(&self.reals()))
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let err = |m: String| Err(DynamicsError::Config(m));
        if self.data.is_empty() {
            return err("data must contain at least one point".into());
        }
        let dim = self.data_dim();
        if dim == 0 || self.data.iter().any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
            return err("data points must be finite and share one nonzero dimension".into());
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.data.len() {
                return err(format!("{} labels for {} data points", labels.len(), self.data.len()));
            }
        }
        if self.iterations < 1 {
            return err("iterations must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return err(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return err(format!("lambda must be finite and nonnegative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.latent_dim < 1 || self.fake_batch < 1 {
            return err("latent_dim and fake_batch must be at least 1".into());
        }
        if self.log_stride < 1 {
            return err("log_stride must be at least 1".into());
        }
        if !(self.coverage_eps > 0.0) {
            return err(format!("coverage_eps must be positive, got {}", self.coverage_eps));
        }
        if let Some(s) = self.dragan_noise_std {
            if !(s > 0.0 && s.is_finite()) {
                return err(format!("dragan_noise_std must be positive, got {s}"));
            }
        }
        let paired = matches!(self.regularizer, RegularizerKind::Dig | RegularizerKind::Gp1);
        if paired && self.fake_batch != self.data.len() {
            return err(format!(
                "{} pairs reals with fakes: fake_batch ({}) must equal the number of data points ({})",
                self.regularizer.as_str(),
                self.fake_batch,
                self.data.len()
            ));
        }
        if self.regularizer == RegularizerKind::Dig
            && self.pairing == PairingStrategy::SameClass
            && self.labels.is_none()
        {
            return err("same_class pairing requires labeled data".into());
        }
        self.generator_config().validate().map_err(|e| DynamicsError::Config(e.to_string()))?;
        self.discriminator_config()
            .validate()
            .map_err(|e| DynamicsError::Config(e.to_string()))?;
        Ok(())
    }
}
