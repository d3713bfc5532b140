use serde::{Deserialize, Serialize};

use super::GanRegError;
use crate::autodiff::{NodeId, Tape};

/// Instantiation of the per-sample losses ℓ_G and ℓ_D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossFamily {
    /// ℓ_G(t) = ℓ_D(t) = log(1 + exp(t)).
    NonsaturatingJs,
    /// ℓ_G(t) = t, ℓ_D(t) = max(0, 1 + t).
    Hinge,
}

impl LossFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            LossFamily::NonsaturatingJs => "nonsaturating_js",
            LossFamily::Hinge => "hinge",
        }
    }

    fn generator_term(self, tape: &mut Tape, t: NodeId) -> Result<NodeId, GanRegError> {
        Ok(match self {
            LossFamily::NonsaturatingJs => tape.softplus(t)?,
            LossFamily::Hinge => t,
        })
    }

    fn discriminator_term(self, tape: &mut Tape, t: NodeId) -> Result<NodeId, GanRegError> {
        Ok(match self {
            LossFamily::NonsaturatingJs => tape.softplus(t)?,
            LossFamily::Hinge => {
                let shifted = tape.add_scalar(t, 1.0)?;
                tape.max_with_constant(shifted, 0.0)?
            }
        })
    }
}

impl std::str::FromStr for LossFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nonsaturating_js" | "js" => Ok(LossFamily::NonsaturatingJs),
            "hinge" => Ok(LossFamily::Hinge),
            other => Err(format!("unknown loss family `{other}` (expected nonsaturating_js or hinge)")),
        }
    }
}

fn check_batch(tape: &Tape, scores: NodeId) -> Result<(), GanRegError> {
    if tape.value(scores).is_empty() {
        Err(GanRegError::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Mean over the batch of ℓ_G(−D(G(z))).
pub fn generator_loss(tape: &mut Tape, family: LossFamily, d_fake: NodeId) -> Result<NodeId, GanRegError> {
    check_batch(tape, d_fake)?;
    let neg = tape.neg(d_fake)?;
    let per_sample = family.generator_term(tape, neg)?;
    Ok(tape.mean(per_sample)?)
}

/// Mean ℓ_D(−D(x_R)) plus mean ℓ_D(D(x_F)); the two batches may differ in size.
pub fn discriminator_loss(
    tape: &mut Tape,
    family: LossFamily,
    d_real: NodeId,
    d_fake: NodeId,
) -> Result<NodeId, GanRegError> {
    check_batch(tape, d_real)?;
    check_batch(tape, d_fake)?;
    let neg_real = tape.neg(d_real)?;
    let real_terms = family.discriminator_term(tape, neg_real)?;
    let fake_terms = family.discriminator_term(tape, d_fake)?;
    let real_mean = tape.mean(real_terms)?;
    let fake_mean = tape.mean(fake_terms)?;
    Ok(tape.add(real_mean, fake_mean)?)
}
