use serde::{Deserialize, Serialize};

/// Which data modes a set of generated samples sits on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Distance from each mode to its nearest generated sample.
    pub nearest: Vec<f64>,
    pub covered_modes: usize,
    /// Set when every sample lies within `eps` of the same single mode.
    pub trapped_mode: Option<usize>,
}

impl Coverage {
    pub fn all_covered(&self) -> bool {
        self.covered_modes == self.nearest.len()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A mode is covered when some sample is within `eps` of it.
pub fn coverage(samples: &[Vec<f64>], modes: &[Vec<f64>], eps: f64) -> Coverage {
    let nearest: Vec<f64> = modes
        .iter()
        .map(|m| samples.iter().map(|s| dist(s, m)).fold(f64::INFINITY, f64::min))
        .collect();
    let covered_modes = nearest.iter().filter(|&&d| d <= eps).count();
    let trapped_mode = if modes.len() > 1 {
        (0..modes.len()).find(|&k| !samples.is_empty() && samples.iter().all(|s| dist(s, &modes[k]) <= eps))
    } else {
        None
    };
    Coverage {
        nearest,
        covered_modes,
        trapped_mode,
    }
}

/// One-dimensional convenience wrapper.
pub fn coverage_1d(samples: &[f64], modes: &[f64], eps: f64) -> Coverage {
    let wrap = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    coverage(&wrap(samples), &wrap(modes), eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_covered() {
        let c = coverage_1d(&[0.1, 3.9], &[0.0, 4.0], 0.25);
        assert_eq!(c.covered_modes, 2);
        assert!(c.all_covered());
        assert_eq!(c.trapped_mode, None);
    }

    #[test]
    fn trapped_at_zero() {
        let c = coverage_1d(&[0.05, -0.2], &[0.0, 4.0], 0.25);
        assert_eq!(c.covered_modes, 1);
        assert_eq!(c.trapped_mode, Some(0));
    }

    #[test]
    fn stray_sample_is_neither() {
        let c = coverage_1d(&[0.0, 2.0], &[0.0, 4.0], 0.25);
        assert_eq!(c.covered_modes, 1);
        assert_eq!(c.trapped_mode, None);
        assert!((c.nearest[1] - 2.0).abs() < 1e-12);
    }
}
