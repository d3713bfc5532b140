use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EmaState, GanRegError};
use crate::autodiff::{Array, NodeId, Tape};
use crate::nn::MlpNodes;

/// Anything that maps a `[batch, dim]` node to one score per sample.
pub trait Critic {
    fn score(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, GanRegError>;
}

impl Critic for MlpNodes {
    fn score(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, GanRegError> {
        if self.config.output_width() != 1 {
            return Err(GanRegError::CriticWidth(self.config.output_width()));
        }
        let out = self.forward(tape, x)?;
        let batch = tape.value(out).shape()[0];
        Ok(tape.reshape(out, &[batch])?)
    }
}

/// `D(x) = w·x + b` with fixed coefficients. Its input gradient is `w`
/// everywhere, which makes penalty values available in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCritic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl AffineCritic {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self::new(vec![0.0; dim], value)
    }
}

impl Critic for AffineCritic {
    fn score(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId, GanRegError> {
        let w = tape.leaf(Array::column(self.weights.clone()));
        let out = tape.matmul(x, w)?;
        let batch = tape.value(out).shape()[0];
        let flat = tape.reshape(out, &[batch])?;
        Ok(tape.add_scalar(flat, self.bias)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    None,
    Dig,
    Gp1,
    R1,
    R2,
    Dragan,
}

impl RegularizerKind {
    pub const ALL: [RegularizerKind; 6] = [
        RegularizerKind::None,
        RegularizerKind::Dig,
        RegularizerKind::Gp1,
        RegularizerKind::R1,
        RegularizerKind::R2,
        RegularizerKind::Dragan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegularizerKind::None => "none",
            RegularizerKind::Dig => "dig",
            RegularizerKind::Gp1 => "gp1",
            RegularizerKind::R1 => "r1",
            RegularizerKind::R2 => "r2",
            RegularizerKind::Dragan => "dragan",
        }
    }
}

impl std::str::FromStr for RegularizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RegularizerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown regularizer `{s}` (expected none, dig, gp1, r1, r2 or dragan)"))
    }
}

/// How the gap regularizer combines per-pair norms with the running averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DigMode {
    /// Blend each paired norm with the running average, square the per-pair
    /// difference, and average over pairs.
    BlendThenGap,
    /// Square the difference of the two blended batch-mean norms.
    GapOfMeans,
}

impl DigMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DigMode::BlendThenGap => "blend_then_gap",
            DigMode::GapOfMeans => "gap_of_means",
        }
    }
}

impl std::str::FromStr for DigMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blend_then_gap" => Ok(DigMode::BlendThenGap),
            "gap_of_means" => Ok(DigMode::GapOfMeans),
            other => Err(format!("unknown dig mode `{other}` (expected blend_then_gap or gap_of_means)")),
        }
    }
}

/// Per-sample `‖∂D(x_i)/∂x_i‖₂` as a `[batch]` node.
///
/// The input gradient stays on the tape, so the norms can be differentiated
/// with respect to the critic's parameters.
pub fn input_grad_norms(tape: &mut Tape, critic: &dyn Critic, x: &Array) -> Result<NodeId, GanRegError> {
    if x.shape().len() != 2 || x.shape()[0] == 0 {
        return Err(GanRegError::EmptyBatch);
    }
    let input = tape.leaf(x.clone());
    let scores = critic.score(tape, input)?;
    // Samples do not interact, so row i of d(sum D)/dx is dD(x_i)/dx_i.
    let total = tape.sum(scores)?;
    let grad = tape.grad(total, &[input])?[0];
    Ok(tape.l2_norm(grad)?)
}

fn blend_node(tape: &mut Tape, ema: &EmaState, prev: f64, observed: NodeId) -> Result<NodeId, GanRegError> {
    if !ema.is_initialized() || ema.alpha == 1.0 {
        return Ok(observed);
    }
    // prev + α (obs - prev); the history term is a constant.
    let centered = tape.add_scalar(observed, -prev)?;
    let scaled = tape.scalar_mul(centered, ema.alpha)?;
    Ok(tape.add_scalar(scaled, prev)?)
}

fn mean_value(tape: &Tape, id: NodeId) -> f64 {
    let v = tape.value(id).values();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Gradient-gap penalty with running averages.
///
/// Returns the penalty node and the updated averages, which absorb the
/// batch-mean norm of each side.
pub fn dig_penalty(
    tape: &mut Tape,
    norms_real: NodeId,
    norms_fake: NodeId,
    pairs: &[(usize, usize)],
    ema: &EmaState,
    mode: DigMode,
) -> Result<(NodeId, EmaState), GanRegError> {
    if !(ema.alpha > 0.0 && ema.alpha <= 1.0) {
        return Err(GanRegError::InvalidAlpha(ema.alpha));
    }
    if !tape.value(norms_real).is_finite() || !tape.value(norms_fake).is_finite() {
        return Err(GanRegError::NonFiniteNorm);
    }
    if pairs.is_empty() {
        return Err(GanRegError::EmptyBatch);
    }
    let next = ema.update(mean_value(tape, norms_real), mean_value(tape, norms_fake))?;
    let penalty = match mode {
        DigMode::BlendThenGap => {
            let (ri, fi): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
            let r = tape.gather(norms_real, &ri)?;
            let f = tape.gather(norms_fake, &fi)?;
            let r = blend_node(tape, ema, ema.g_real, r)?;
            let f = blend_node(tape, ema, ema.g_fake, f)?;
            let d = tape.sub(r, f)?;
            let sq = tape.square(d)?;
            tape.mean(sq)?
        }
        DigMode::GapOfMeans => {
            let r = tape.mean(norms_real)?;
            let f = tape.mean(norms_fake)?;
            let r = blend_node(tape, ema, ema.g_real, r)?;
            let f = blend_node(tape, ema, ema.g_fake, f)?;
            let d = tape.sub(r, f)?;
            tape.square(d)?
        }
    };
    Ok((penalty, next))
}

fn unit_target_penalty(tape: &mut Tape, norms: NodeId) -> Result<NodeId, GanRegError> {
    let shifted = tape.add_scalar(norms, -1.0)?;
    let sq = tape.square(shifted)?;
    Ok(tape.mean(sq)?)
}

/// Mean of `(‖∂D(x̂)/∂x̂‖₂ − 1)²` on random interpolates of paired reals and fakes.
pub fn gp1_penalty<R: Rng + ?Sized>(
    tape: &mut Tape,
    critic: &dyn Critic,
    reals: &Array,
    fakes: &Array,
    rng: &mut R,
) -> Result<NodeId, GanRegError> {
    if reals.shape() != fakes.shape() {
        return Err(GanRegError::BatchMismatch {
            real: reals.shape().first().copied().unwrap_or(0),
            fake: fakes.shape().first().copied().unwrap_or(0),
        });
    }
    let dim = reals.shape().get(1).copied().unwrap_or(1);
    let mut mixed = reals.clone();
    for (row, fake_row) in mixed.values_mut().chunks_mut(dim).zip(fakes.values().chunks(dim)) {
        let u: f64 = rng.random();
        for (x, f) in row.iter_mut().zip(fake_row) {
            *x = u * *x + (1.0 - u) * f;
        }
    }
    let norms = input_grad_norms(tape, critic, &mixed)?;
    unit_target_penalty(tape, norms)
}

/// Mean squared input-gradient norm over the batch (R1 on reals, R2 on fakes).
pub fn squared_grad_penalty(tape: &mut Tape, critic: &dyn Critic, batch: &Array) -> Result<NodeId, GanRegError> {
    let norms = input_grad_norms(tape, critic, batch)?;
    let sq = tape.square(norms)?;
    Ok(tape.mean(sq)?)
}

pub fn r1_penalty(tape: &mut Tape, critic: &dyn Critic, reals: &Array) -> Result<NodeId, GanRegError> {
    squared_grad_penalty(tape, critic, reals)
}

pub fn r2_penalty(tape: &mut Tape, critic: &dyn Critic, fakes: &Array) -> Result<NodeId, GanRegError> {
    squared_grad_penalty(tape, critic, fakes)
}

/// Unit-norm penalty on Gaussian perturbations of the reals.
pub fn dragan_penalty<R: Rng + ?Sized>(
    tape: &mut Tape,
    critic: &dyn Critic,
    reals: &Array,
    noise_std: f64,
    rng: &mut R,
) -> Result<NodeId, GanRegError> {
    if !(noise_std > 0.0 && noise_std.is_finite()) {
        return Err(GanRegError::InvalidNoise(noise_std));
    }
    let normal = Normal::new(0.0, noise_std).map_err(|_| GanRegError::InvalidNoise(noise_std))?;
    let mut noisy = reals.clone();
    for v in noisy.values_mut() {
        *v += normal.sample(rng);
    }
    let norms = input_grad_norms(tape, critic, &noisy)?;
    unit_target_penalty(tape, norms)
}

/// Half the average per-coordinate standard deviation of a `[n, dim]` batch.
pub fn default_dragan_noise_std(reals: &Array) -> f64 {
    let n = reals.shape()[0] as f64;
    let dim = reals.shape().get(1).copied().unwrap_or(1);
    let mut total = 0.0;
    for c in 0..dim {
        let col: Vec<f64> = reals.values().iter().skip(c).step_by(dim).copied().collect();
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        total += var.sqrt();
    }
    0.5 * total / dim as f64
}

/// `L_D + λ R`. With `λ == 0` the discriminator loss node itself is returned.
pub fn regularized_d_loss(tape: &mut Tape, d_loss: NodeId, penalty: Option<NodeId>, lambda: f64) -> Result<NodeId, GanRegError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(GanRegError::InvalidLambda(lambda));
    }
    match penalty {
        Some(r) if lambda != 0.0 => {
            let weighted = tape.scalar_mul(r, lambda)?;
            Ok(tape.add(d_loss, weighted)?)
        }
        _ => Ok(d_loss),
    }
}
