use serde::{Deserialize, Serialize};

use super::GanRegError;

/// Running per-side gradient-norm averages used by the gap regularizer.
///
/// At `t == 0` the state is uninitialized and the first update adopts the
/// observed norms exactly. Afterwards each side follows
/// `g_t = (1 - α) g_{t-1} + α n_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    pub g_real: f64,
    pub g_fake: f64,
    pub t: u64,
    pub alpha: f64,
}

impl EmaState {
    pub fn new(alpha: f64) -> Result<Self, GanRegError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(GanRegError::InvalidAlpha(alpha));
        }
        Ok(Self {
            g_real: 0.0,
            g_fake: 0.0,
            t: 0,
            alpha,
        })
    }

    pub fn is_initialized(&self) -> bool {
        self.t > 0
    }

    /// Blends one side's previous average with a fresh observation.
    ///
    /// Written as `prev + α (obs - prev)` so a constant observation is a
    /// fixed point in floating point for every α.
    pub fn blend(&self, prev: f64, observed: f64) -> f64 {
        if !self.is_initialized() || self.alpha == 1.0 {
            observed
        } else {
            prev + self.alpha * (observed - prev)
        }
    }

    /// State after observing the given per-side batch-mean norms.
    pub fn update(&self, real_norm: f64, fake_norm: f64) -> Result<Self, GanRegError> {
        if !real_norm.is_finite() || !fake_norm.is_finite() {
            return Err(GanRegError::NonFiniteNorm);
        }
        Ok(Self {
            g_real: self.blend(self.g_real, real_norm),
            g_fake: self.blend(self.g_fake, fake_norm),
            t: self.t + 1,
            alpha: self.alpha,
        })
    }
}
