use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Divergence, DynamicsError, GanConfig, LatentDist, TrajectoryLog, TrajectoryRecord};
use crate::autodiff::{Array, Tape};
use crate::ganreg::{
    dig_penalty, discriminator_loss, dragan_penalty, generator_loss, gp1_penalty, input_grad_norms, pair_samples,
    regularized_d_loss, Critic, EmaState, RegularizerKind,
};
use crate::nn::{AdamState, MlpParams};

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    GeneratorInit = 1,
    DiscriminatorInit = 2,
    Latent = 3,
    Regularizer = 4,
    Perturbation = 5,
}

/// SplitMix64 finalizer over `seed` and a stream tag.
pub fn stream_seed(seed: u64, stream: Stream) -> u64 {
    let mut z = seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initial `(generator, discriminator)` for a config; depends only on the
/// seed and the network layouts, never on the regularizer.
pub fn initial_params(config: &GanConfig) -> Result<(MlpParams, MlpParams), DynamicsError> {
    let g = MlpParams::init(&config.generator_config(), stream_seed(config.seed, Stream::GeneratorInit))?;
    let d = MlpParams::init(
        &config.discriminator_config(),
        stream_seed(config.seed, Stream::DiscriminatorInit),
    )?;
    Ok((g, d))
}

/// Source of latent batches: either a fixed set of codes or fresh draws.
#[derive(Debug, Clone)]
pub struct LatentSampler {
    fixed: Option<Array>,
    dist: LatentDist,
    dim: usize,
    batch: usize,
    rng: ChaCha8Rng,
}

impl LatentSampler {
    /// With fixed codes and a one-dimensional latent, the codes are evenly
    /// spaced over [-1, 1] (so two codes are exactly -1 and +1).
    pub fn new(config: &GanConfig) -> Self {
        let mut s = Self {
            fixed: None,
            dist: config.latent_dist,
            dim: config.latent_dim,
            batch: config.fake_batch,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(config.seed, Stream::Latent)),
        };
        if config.fixed_codes {
            s.fixed = Some(if s.dim == 1 {
                let n = s.batch;
                let codes = (0..n)
                    .map(|i| if n == 1 { 0.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 })
                    .collect();
                Array::column(codes)
            } else {
                s.draw()
            });
        }
        s
    }

    fn draw(&mut self) -> Array {
        let n = self.batch * self.dim;
        let values = match self.dist {
            LatentDist::Normal => (0..n).map(|_| StandardNormal.sample(&mut self.rng)).collect(),
            LatentDist::Uniform => (0..n).map(|_| self.rng.random_range(-1.0..1.0)).collect(),
        };
        Array::matrix(self.batch, self.dim, values).expect("consistent latent shape")
    }

    pub fn next_batch(&mut self) -> Array {
        match &self.fixed {
            Some(codes) => codes.clone(),
            None => self.draw(),
        }
    }
}

/// Generated samples for a batch of latent codes, as a `[batch, dim]` array.
pub fn generate(g: &MlpParams, z: &Array) -> Array {
    let width = z.shape()[1];
    let rows: Vec<Vec<f64>> = z.values().chunks(width).map(<[f64]>::to_vec).collect();
    let out = g.eval(&rows);
    let dim = g.config.output_width();
    Array::matrix(out.len(), dim, out.concat()).expect("consistent generator output")
}

/// Everything one discriminator update needs, evaluated at the current state.
#[derive(Debug, Clone)]
pub struct DiscriminatorStep {
    pub d_loss: f64,
    pub objective: f64,
    pub penalty: Option<f64>,
    pub grads: MlpParams,
    pub norms_real: Option<Vec<f64>>,
    pub norms_fake: Option<Vec<f64>>,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
    pub ema: EmaState,
}

/// Builds the regularized discriminator objective and its parameter gradient.
///
/// `want_norms` forces the input-gradient norms to be computed for
/// telemetry even when the regularizer does not need them.
pub fn discriminator_step(
    config: &GanConfig,
    dataset: &Dataset,
    d: &MlpParams,
    fakes: &Array,
    ema: &EmaState,
    reg_rng: &mut ChaCha8Rng,
    want_norms: bool,
) -> Result<DiscriminatorStep, DynamicsError> {
    let reals = &dataset.points;
    let mut tape = Tape::new();
    let nodes = d.register(&mut tape);
    let xr = tape.leaf(reals.clone());
    let xf = tape.leaf(fakes.clone());
    let sr = nodes.score(&mut tape, xr)?;
    let sf = nodes.score(&mut tape, xf)?;
    let d_loss = discriminator_loss(&mut tape, config.loss, sr, sf)?;

    let kind = config.regularizer;
    let needs_norms = want_norms || matches!(kind, RegularizerKind::Dig | RegularizerKind::R1 | RegularizerKind::R2);
    let norms = if needs_norms {
        Some((
            input_grad_norms(&mut tape, &nodes, reals)?,
            input_grad_norms(&mut tape, &nodes, fakes)?,
        ))
    } else {
        None
    };

    let mut next_ema = *ema;
    let penalty = match kind {
        RegularizerKind::None => None,
        RegularizerKind::Dig => {
            let (nr, nf) = norms.expect("norms computed for dig");
            let labels = dataset.labels.as_deref();
            let norm_values = (tape.value(nr).values().to_vec(), tape.value(nf).values().to_vec());
            let pairs = pair_samples(
                config.pairing,
                reals.shape()[0],
                fakes.shape()[0],
                labels.map(|l| (l, l)),
                Some((&norm_values.0, &norm_values.1)),
                reg_rng,
            )?;
            let (r, e) = dig_penalty(&mut tape, nr, nf, &pairs, ema, config.dig_mode)?;
            next_ema = e;
            Some(r)
        }
        RegularizerKind::Gp1 => Some(gp1_penalty(&mut tape, &nodes, reals, fakes, reg_rng)?),
        RegularizerKind::R1 | RegularizerKind::R2 => {
            let (nr, nf) = norms.expect("norms computed for r1/r2");
            let n = if kind == RegularizerKind::R1 { nr } else { nf };
            let sq = tape.square(n)?;
            Some(tape.mean(sq)?)
        }
        RegularizerKind::Dragan => Some(dragan_penalty(
            &mut tape,
            &nodes,
            reals,
            config.resolved_dragan_noise_std(),
            reg_rng,
        )?),
    };
    let objective = regularized_d_loss(&mut tape, d_loss, penalty, config.lambda)?;
    let grads = nodes.gradients(&mut tape, objective)?;
    let mean_of = |id| {
        let v: &Array = tape.value(id);
        v.values().to_vec()
    };
    Ok(DiscriminatorStep {
        d_loss: tape.value(d_loss).item(),
        objective: tape.value(objective).item(),
        penalty: penalty.map(|p| tape.value(p).item()),
        norms_real: norms.map(|(nr, _)| mean_of(nr)),
        norms_fake: norms.map(|(_, nf)| mean_of(nf)),
        d_real: mean_of(sr),
        d_fake: mean_of(sf),
        grads,
        ema: next_ema,
    })
}

/// Generator loss and gradient with the discriminator held fixed. The
/// regularizer plays no part here.
pub fn generator_step(
    config: &GanConfig,
    g: &MlpParams,
    d: &MlpParams,
    z: &Array,
) -> Result<(f64, MlpParams), DynamicsError> {
    let mut tape = Tape::new();
    let g_nodes = g.register(&mut tape);
    let d_nodes = d.register(&mut tape);
    let z = tape.leaf(z.clone());
    let fakes = g_nodes.forward(&mut tape, z)?;
    let scores = d_nodes.score(&mut tape, fakes)?;
    let loss = generator_loss(&mut tape, config.loss, scores)?;
    let grads = g_nodes.gradients(&mut tape, loss)?;
    Ok((tape.value(loss).item(), grads))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn optimizer(config: &GanConfig, params: &MlpParams) -> AdamState {
    let mut s = AdamState::with_kind(params, config.optimizer);
    s.beta1 = config.momentum;
    s
}

fn check_params(config: &GanConfig, which: &str, p: &MlpParams) -> Option<String> {
    if !p.is_finite() {
        Some(format!("{which} parameters became non-finite"))
    } else if p.max_abs() > config.divergence_threshold {
        Some(format!(
            "{which} parameter magnitude {:.3e} exceeds {:.0e}",
            p.max_abs(),
            config.divergence_threshold
        ))
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: MlpParams,
    pub discriminator: MlpParams,
    pub log: TrajectoryLog,
    pub ema: EmaState,
}

impl TrainOutcome {
    pub fn diverged(&self) -> bool {
        self.log.diverged.is_some()
    }
}

/// Alternating training: one discriminator step on the regularized objective,
/// then one generator step, per iteration.
///
/// A non-finite loss or exploding parameter halts the run; the returned log
/// is then marked diverged at the offending iteration.
pub fn train(
    config: &GanConfig,
    dataset: &Dataset,
    init_g: &MlpParams,
    init_d: &MlpParams,
) -> Result<TrainOutcome, DynamicsError> {
    config.validate()?;
    dataset.check_against(config)?;
    if init_g.config != config.generator_config() || init_d.config != config.discriminator_config() {
        return Err(DynamicsError::Config(
            "initial parameters do not match the configured network layouts".into(),
        ));
    }
    let mut g = init_g.clone();
    let mut d = init_d.clone();
    let mut g_opt = optimizer(config, &g);
    let mut d_opt = optimizer(config, &d);
    let mut ema = EmaState::new(config.alpha)?;
    let mut latents = LatentSampler::new(config);
    let mut reg_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, Stream::Regularizer));
    let mut log = TrajectoryLog::default();

    for it in 0..config.iterations {
        let logged = it % config.log_stride == 0;
        let z = latents.next_batch();
        let fakes = generate(&g, &z);

        let step = discriminator_step(config, dataset, &d, &fakes, &ema, &mut reg_rng, logged)?;
        if !step.objective.is_finite() {
            log.diverged = Some(Divergence {
                iteration: it,
                reason: format!("non-finite discriminator objective {}", step.objective),
            });
            break;
        }
        if d_opt.step(&mut d, &step.grads, config.learning_rate).is_err() {
            log.diverged = Some(Divergence {
                iteration: it,
                reason: "non-finite discriminator gradient".into(),
            });
            break;
        }
        ema = step.ema;

        let (g_loss, g_grads) = generator_step(config, &g, &d, &z)?;
        if !g_loss.is_finite() || g_opt.step(&mut g, &g_grads, config.learning_rate).is_err() {
            log.diverged = Some(Divergence {
                iteration: it,
                reason: format!("non-finite generator loss or gradient (loss {g_loss})"),
            });
            break;
        }

        if logged {
            let norm_real = mean(step.norms_real.as_deref().unwrap_or(&[]));
            let norm_fake = mean(step.norms_fake.as_deref().unwrap_or(&[]));
            let dim = fakes.shape()[1];
            log.records.push(TrajectoryRecord {
                iter: it,
                fakes: fakes.values().iter().step_by(dim).copied().collect(),
                norm_real,
                norm_fake,
                gap: (norm_real - norm_fake).powi(2),
                d_loss: step.d_loss,
                g_loss,
                d_real_mean: mean(&step.d_real),
                d_fake_mean: mean(&step.d_fake),
            });
        }

        if let Some(reason) = check_params(config, "discriminator", &d).or_else(|| check_params(config, "generator", &g)) {
            log.diverged = Some(Divergence { iteration: it, reason });
            break;
        }
    }
    Ok(TrainOutcome {
        generator: g,
        discriminator: d,
        log,
        ema,
    })
}

/// Adds i.i.d. `N(0, variance)` noise to every parameter.
pub fn perturb_params(params: &MlpParams, variance: f64, seed: u64) -> Result<MlpParams, DynamicsError> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(DynamicsError::Config(format!("noise variance must be nonnegative, got {variance}")));
    }
    let mut out = params.clone();
    if variance == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("positive std");
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, Stream::Perturbation));
    for t in out.tensors_mut() {
        for v in t.values_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    GradientTolerance,
    StepCap,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct OptimalityOutcome {
    pub discriminator: MlpParams,
    pub steps: usize,
    pub stop: StopRule,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_grad_linf: f64,
    /// `|mean ‖∂D/∂x_R‖ - mean ‖∂D/∂x_F‖|` at the returned discriminator.
    pub gap: f64,
}

/// `|mean ‖∂D/∂x_R‖₂ − mean ‖∂D/∂x_F‖₂|` for the given reals and fakes.
pub fn gradient_gap(d: &MlpParams, reals: &Array, fakes: &Array) -> Result<f64, DynamicsError> {
    let mut tape = Tape::new();
    let nodes = d.register(&mut tape);
    let nr = input_grad_norms(&mut tape, &nodes, reals)?;
    let nf = input_grad_norms(&mut tape, &nodes, fakes)?;
    Ok((mean(tape.value(nr).values()) - mean(tape.value(nf).values())).abs())
}

/// Trains the discriminator alone, with the generator frozen, on the
/// configured regularized objective until the parameter gradient's L∞ norm
/// drops below `optimality_tol` or `optimality_max_steps` updates were made.
pub fn train_discriminator_to_optimality(
    config: &GanConfig,
    dataset: &Dataset,
    fixed_g: &MlpParams,
    init_d: &MlpParams,
) -> Result<OptimalityOutcome, DynamicsError> {
    config.validate()?;
    dataset.check_against(config)?;
    let mut d = init_d.clone();
    let mut opt = optimizer(config, &d);
    let mut ema = EmaState::new(config.alpha)?;
    let mut latents = LatentSampler::new(config);
    let mut reg_rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, Stream::Regularizer));
    let mut initial_objective = None;
    let mut steps = 0;
    let (stop, final_objective, final_grad_linf) = loop {
        let fakes = generate(fixed_g, &latents.next_batch());
        let step = discriminator_step(config, dataset, &d, &fakes, &ema, &mut reg_rng, false)?;
        initial_objective.get_or_insert(step.objective);
        let linf = step.grads.max_abs();
        if !step.objective.is_finite() || !step.grads.is_finite() {
            break (StopRule::Diverged, step.objective, linf);
        }
        if linf < config.optimality_tol {
            break (StopRule::GradientTolerance, step.objective, linf);
        }
        if steps >= config.optimality_max_steps {
            break (StopRule::StepCap, step.objective, linf);
        }
        opt.step(&mut d, &step.grads, config.learning_rate)?;
        ema = step.ema;
        steps += 1;
        if check_params(config, "discriminator", &d).is_some() {
            break (StopRule::Diverged, f64::NAN, f64::NAN);
        }
    };
    let mut latents = LatentSampler::new(config);
    let fakes = generate(fixed_g, &latents.next_batch());
    let gap = gradient_gap(&d, &dataset.points, &fakes)?;
    Ok(OptimalityOutcome {
        discriminator: d,
        steps,
        stop,
        initial_objective: initial_objective.unwrap_or(f64::NAN),
        final_objective,
        final_grad_linf,
        gap,
    })
}
