use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    coverage, initial_params, perturb_params, stream_seed, train, train_discriminator_to_optimality, Coverage, Dataset,
    DynamicsError, GanConfig, OptimalityOutcome, Stream, TrainOutcome, TrajectoryLog,
};
use crate::ganreg::RegularizerKind;
use crate::nn::{snapshot, MlpParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Vanilla training from a fresh initialization.
    Stuck,
    /// Vanilla continuations from a noise-perturbed stuck discriminator.
    Perturb,
    /// Gradient-gap training from the same initialization as `Stuck`.
    Avoid,
    /// Vanilla and gradient-gap continuations from a trapped state whose
    /// discriminator was trained to optimality.
    Escape,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [Self::Stuck, Self::Perturb, Self::Avoid, Self::Escape];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Stuck => "stuck",
            Self::Perturb => "perturb",
            Self::Avoid => "avoid",
            Self::Escape => "escape",
        }
    }

    /// Whether the experiment continues from a stuck run's final state.
    pub fn needs_stuck(self) -> bool {
        matches!(self, Self::Perturb | Self::Escape)
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown experiment `{s}` (expected stuck, perturb, avoid or escape)"))
    }
}

/// Noise variances for the perturbation experiment.
pub const PERTURB_VARIANCES: [f64; 4] = [0.1, 1.0, 5.0, 10.0];

/// The escape comparison only starts from a discriminator whose gradient gap
/// is below this.
pub const ESCAPE_GAP_LIMIT: f64 = 1e-4;

pub fn vanilla_config(base: &GanConfig) -> GanConfig {
    GanConfig {
        regularizer: RegularizerKind::None,
        ..base.clone()
    }
}

/// `base` with the gradient-gap regularizer switched on, keeping its λ and α.
pub fn dig_config(base: &GanConfig) -> GanConfig {
    GanConfig {
        regularizer: RegularizerKind::Dig,
        ..base.clone()
    }
}

/// Final state of a stuck run, the starting point of perturb and escape.
#[derive(Debug, Clone, PartialEq)]
pub struct StuckArtifacts {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
}

/// One training run inside a bundle.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub tag: String,
    pub config: GanConfig,
    pub init_generator: MlpParams,
    pub init_discriminator: MlpParams,
    pub outcome: TrainOutcome,
    pub coverage: Coverage,
}

impl RunRecord {
    fn new(
        tag: impl Into<String>,
        config: GanConfig,
        dataset: &Dataset,
        g: &MlpParams,
        d: &MlpParams,
    ) -> Result<Self, DynamicsError> {
        let outcome = train(&config, dataset, g, d)?;
        let coverage = final_coverage(&config, &outcome);
        Ok(Self {
            tag: tag.into(),
            config,
            init_generator: g.clone(),
            init_discriminator: d.clone(),
            outcome,
            coverage,
        })
    }

    pub fn log(&self) -> &TrajectoryLog {
        &self.outcome.log
    }

    pub fn summary(&self) -> RunSummary {
        let last = self.outcome.log.last();
        RunSummary {
            tag: self.tag.clone(),
            regularizer: self.config.regularizer,
            seed: self.config.seed,
            covered_modes: self.coverage.covered_modes,
            trapped_mode: self.coverage.trapped_mode,
            final_fakes: last.map(|r| r.fakes.clone()).unwrap_or_default(),
            final_gap: last.map_or(f64::NAN, |r| r.gap),
            diverged_at: self.outcome.log.diverged.as_ref().map(|d| d.iteration),
            init_generator_hash: snapshot::hash(&self.init_generator),
            init_discriminator_hash: snapshot::hash(&self.init_discriminator),
            final_generator_hash: snapshot::hash(&self.outcome.generator),
            final_discriminator_hash: snapshot::hash(&self.outcome.discriminator),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tag: String,
    pub regularizer: RegularizerKind,
    pub seed: u64,
    pub covered_modes: usize,
    pub trapped_mode: Option<usize>,
    pub final_fakes: Vec<f64>,
    pub final_gap: f64,
    pub diverged_at: Option<usize>,
    pub init_generator_hash: String,
    pub init_discriminator_hash: String,
    pub final_generator_hash: String,
    pub final_discriminator_hash: String,
}

/// How the escape experiment's discriminator was prepared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub stop: super::StopRule,
    pub steps: usize,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_grad_linf: f64,
    pub gap: f64,
}

impl From<&OptimalityOutcome> for OptimalityReport {
    fn from(o: &OptimalityOutcome) -> Self {
        Self {
            stop: o.stop,
            steps: o.steps,
            initial_objective: o.initial_objective,
            final_objective: o.final_objective,
            final_grad_linf: o.final_grad_linf,
            gap: o.gap,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    /// Mode the stuck state was trapped at, for continuation experiments.
    pub start_trapped_mode: Option<usize>,
    pub optimality: Option<OptimalityReport>,
}

impl ExperimentBundle {
    pub fn run(&self, tag: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.tag == tag)
    }

    /// Final state of the first run, used as a stuck run's artifacts.
    pub fn stuck_artifacts(&self) -> Option<StuckArtifacts> {
        (self.kind == ExperimentKind::Stuck).then(|| StuckArtifacts {
            generator: self.runs[0].outcome.generator.clone(),
            discriminator: self.runs[0].outcome.discriminator.clone(),
        })
    }
}

pub fn final_coverage(config: &GanConfig, outcome: &TrainOutcome) -> Coverage {
    let fakes = super::generate(
        &outcome.generator,
        &super::LatentSampler::new(config).next_batch(),
    );
    let dim = fakes.shape()[1];
    let points: Vec<Vec<f64>> = fakes.values().chunks(dim).map(<[f64]>::to_vec).collect();
    coverage(&points, &config.modes(), config.coverage_eps)
}

/// Runs one experiment for `base.seed`.
///
/// `Stuck` and `Avoid` start from [`initial_params`]; `Perturb` and `Escape`
/// continue from `stuck` and fail with a dependency error without it.
pub fn run_experiment(
    kind: ExperimentKind,
    base: &GanConfig,
    stuck: Option<&StuckArtifacts>,
) -> Result<ExperimentBundle, DynamicsError> {
    let dataset = Dataset::from_config(base)?;
    let mut bundle = ExperimentBundle {
        kind,
        seed: base.seed,
        runs: Vec::new(),
        start_trapped_mode: None,
        optimality: None,
    };
    let prior = || {
        stuck.ok_or_else(|| {
            DynamicsError::MissingArtifact(format!(
                "the {} experiment continues from a stuck run's final generator and discriminator; run `stuck` first",
                kind.as_str()
            ))
        })
    };
    match kind {
        ExperimentKind::Stuck | ExperimentKind::Avoid => {
            let (g0, d0) = initial_params(base)?;
            let (tag, config) = if kind == ExperimentKind::Stuck {
                ("vanilla", vanilla_config(base))
            } else {
                ("dig", dig_config(base))
            };
            bundle.runs.push(RunRecord::new(tag, config, &dataset, &g0, &d0)?);
        }
        ExperimentKind::Perturb => {
            let s = prior()?;
            bundle.start_trapped_mode = trapped_mode_of(base, &s.generator);
            let config = vanilla_config(base);
            for (i, &var) in PERTURB_VARIANCES.iter().enumerate() {
                let noise_seed = stream_seed(base.seed, Stream::Perturbation).wrapping_add(i as u64);
                let d = perturb_params(&s.discriminator, var, noise_seed)?;
                bundle
                    .runs
                    .push(RunRecord::new(format!("var{var}"), config.clone(), &dataset, &s.generator, &d)?);
            }
        }
        ExperimentKind::Escape => {
            let s = prior()?;
            bundle.start_trapped_mode = trapped_mode_of(base, &s.generator);
            let opt = train_discriminator_to_optimality(&dig_config(base), &dataset, &s.generator, &s.discriminator)?;
            bundle.optimality = Some(OptimalityReport::from(&opt));
            if !(opt.gap < ESCAPE_GAP_LIMIT) {
                return Err(DynamicsError::Precondition(format!(
                    "discriminator trained to optimality has gradient gap {:.3e} (limit {ESCAPE_GAP_LIMIT:e}, stop rule {:?} after {} steps)",
                    opt.gap, opt.stop, opt.steps
                )));
            }
            for (tag, config) in [("vanilla", vanilla_config(base)), ("dig", dig_config(base))] {
                bundle
                    .runs
                    .push(RunRecord::new(tag, config, &dataset, &s.generator, &opt.discriminator)?);
            }
        }
    }
    Ok(bundle)
}

fn trapped_mode_of(config: &GanConfig, g: &MlpParams) -> Option<usize> {
    let fakes = super::generate(g, &super::LatentSampler::new(config).next_batch());
    let dim = fakes.shape()[1];
    let points: Vec<Vec<f64>> = fakes.values().chunks(dim).map(<[f64]>::to_vec).collect();
    coverage(&points, &config.modes(), config.coverage_eps).trapped_mode
}

/// Runs `f` for every seed, concurrently, returning results in seed order.
/// The worker count follows `RAYON_NUM_THREADS`.
pub fn for_each_seed<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Trains one run per regularizer kind, all from the same initialization.
pub fn compare(base: &GanConfig, kinds: &[RegularizerKind]) -> Result<Vec<RunRecord>, DynamicsError> {
    let dataset = Dataset::from_config(base)?;
    let (g0, d0) = initial_params(base)?;
    let configs = kinds
        .iter()
        .map(|&k| {
            let c = GanConfig {
                regularizer: k,
                ..base.clone()
            };
            c.validate().map(|_| c)
        })
        .collect::<Result<Vec<_>, _>>()?;
    configs
        .into_par_iter()
        .map(|c| RunRecord::new(c.regularizer.as_str(), c, &dataset, &g0, &d0))
        .collect()
}

/// First logged iteration from which every later record sits within `eps`
/// of one mode (the one the run ends at).
pub fn trap_iteration(log: &TrajectoryLog, modes: &[f64], eps: f64) -> Option<usize> {
    let trapped_at = |fakes: &[f64]| super::coverage_1d(fakes, modes, eps).trapped_mode;
    let mode = trapped_at(&log.last()?.fakes)?;
    let mut first = None;
    for r in log.records.iter().rev() {
        if trapped_at(&r.fakes) == Some(mode) {
            first = Some(r.iter);
        } else {
            break;
        }
    }
    first
}

/// Mean logged gap R over records with `start <= iter < end`.
pub fn mean_gap(log: &TrajectoryLog, start: usize, end: usize) -> Option<f64> {
    let window: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.iter >= start && r.iter < end)
        .map(|r| r.gap)
        .collect();
    (!window.is_empty()).then(|| window.iter().sum::<f64>() / window.len() as f64)
}

/// Largest distance of any logged generated point from `center`.
pub fn max_excursion(log: &TrajectoryLog, center: f64) -> f64 {
    log.records
        .iter()
        .flat_map(|r| r.fakes.iter())
        .map(|f| (f - center).abs())
        .fold(0.0, f64::max)
}
