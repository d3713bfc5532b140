//! GAN objectives, the discriminator gradient-gap regularizer, comparison
//! penalties and real/fake pairing.

mod ema;
mod loss;
mod pairing;
mod penalty;

pub use ema::EmaState;
pub use loss::{discriminator_loss, generator_loss, LossFamily};
pub use pairing::{pair_samples, PairingStrategy};
pub use penalty::{
    default_dragan_noise_std, dig_penalty, dragan_penalty, gp1_penalty, input_grad_norms, r1_penalty, r2_penalty,
    regularized_d_loss, squared_grad_penalty, AffineCritic, Critic, DigMode, RegularizerKind,
};

use thiserror::Error;

use crate::autodiff::AutodiffError;
use crate::nn::NnError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GanRegError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("real batch has {real} samples but fake batch has {fake}")]
    BatchMismatch { real: usize, fake: usize },
    #[error("same-class pairing needs labels for both reals and fakes")]
    MissingLabels,
    #[error("gradient-magnitude pairing needs norms for both reals and fakes")]
    MissingNorms,
    #[error("class counts differ: {}", format_deficits(.0))]
    ClassDeficit(Vec<(usize, usize, usize)>),
    #[error("non-finite gradient norm")]
    NonFiniteNorm,
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("lambda must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("noise std must be positive, got {0}")]
    InvalidNoise(f64),
    #[error("critic must output one score per sample, network output width is {0}")]
    CriticWidth(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

fn format_deficits(d: &[(usize, usize, usize)]) -> String {
    d.iter()
        .map(|(c, r, f)| format!("class {c}: {r} real vs {f} fake"))
        .collect::<Vec<_>>()
        .join("; ")
}
