use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GanRegError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingStrategy {
    /// Uniformly random bijection, ignoring labels.
    Random,
    /// Random bijection within each class.
    SameClass,
    /// i-th smallest real norm paired with the i-th smallest fake norm.
    GradientMagnitude,
}

impl PairingStrategy {
    pub fn as_str(self) -> &'static str {
        match self {
            PairingStrategy::Random => "random",
            PairingStrategy::SameClass => "same_class",
            PairingStrategy::GradientMagnitude => "gradient_magnitude",
        }
    }
}

impl std::str::FromStr for PairingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(PairingStrategy::Random),
            "same_class" => Ok(PairingStrategy::SameClass),
            "gradient_magnitude" => Ok(PairingStrategy::GradientMagnitude),
            other => Err(format!(
                "unknown pairing `{other}` (expected random, same_class or gradient_magnitude)"
            )),
        }
    }
}

/// Matches real to fake samples; returns `(real index, fake index)` pairs.
///
/// `labels` is `(real labels, fake labels)` and is required for
/// `SameClass`; `norms` is `(real norms, fake norms)` and is required for
/// `GradientMagnitude`.
pub fn pair_samples<R: Rng + ?Sized>(
    strategy: PairingStrategy,
    n_real: usize,
    n_fake: usize,
    labels: Option<(&[usize], &[usize])>,
    norms: Option<(&[f64], &[f64])>,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>, GanRegError> {
    if n_real != n_fake {
        return Err(GanRegError::BatchMismatch {
            real: n_real,
            fake: n_fake,
        });
    }
    if n_real == 0 {
        return Err(GanRegError::EmptyBatch);
    }
    match strategy {
        PairingStrategy::Random => {
            let mut fakes: Vec<usize> = (0..n_fake).collect();
            fakes.shuffle(rng);
            Ok((0..n_real).zip(fakes).collect())
        }
        PairingStrategy::SameClass => {
            let (real_labels, fake_labels) = labels.ok_or(GanRegError::MissingLabels)?;
            if real_labels.len() != n_real || fake_labels.len() != n_fake {
                return Err(GanRegError::MissingLabels);
            }
            let mut by_class: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
            for (i, &l) in real_labels.iter().enumerate() {
                by_class.entry(l).or_default().0.push(i);
            }
            for (i, &l) in fake_labels.iter().enumerate() {
                by_class.entry(l).or_default().1.push(i);
            }
            let deficits: Vec<(usize, usize, usize)> = by_class
                .iter()
                .filter(|(_, (r, f))| r.len() != f.len())
                .map(|(&c, (r, f))| (c, r.len(), f.len()))
                .collect();
            if !deficits.is_empty() {
                return Err(GanRegError::ClassDeficit(deficits));
            }
            let mut pairs = Vec::with_capacity(n_real);
            for (reals, mut fakes) in by_class.into_values() {
                fakes.shuffle(rng);
                pairs.extend(reals.into_iter().zip(fakes));
            }
            pairs.sort_unstable();
            Ok(pairs)
        }
        PairingStrategy::GradientMagnitude => {
            let (real_norms, fake_norms) = norms.ok_or(GanRegError::MissingNorms)?;
            if real_norms.len() != n_real || fake_norms.len() != n_fake {
                return Err(GanRegError::MissingNorms);
            }
            let order = |v: &[f64]| {
                let mut idx: Vec<usize> = (0..v.len()).collect();
                idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
                idx
            };
            Ok(order(real_norms).into_iter().zip(order(fake_norms)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn single_sample_pairs_with_itself() {
        for s in [
            PairingStrategy::Random,
            PairingStrategy::SameClass,
            PairingStrategy::GradientMagnitude,
        ] {
            let pairs = pair_samples(s, 1, 1, Some((&[3], &[3])), Some((&[1.0], &[2.0])), &mut rng()).unwrap();
            assert_eq!(pairs, vec![(0, 0)]);
        }
    }

    #[test]
    fn gradient_magnitude_sorts_ascending() {
        let pairs = pair_samples(
            PairingStrategy::GradientMagnitude,
            2,
            2,
            None,
            Some((&[5.0, 1.0], &[2.0, 9.0])),
            &mut rng(),
        )
        .unwrap();
        assert_eq!(pairs, vec![(1, 0), (0, 1)]);
    }

    #[test]
    fn random_is_reproducible_bijection() {
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = pair_samples(PairingStrategy::Random, 7, 7, None, None, &mut a).unwrap();
            let q = pair_samples(PairingStrategy::Random, 7, 7, None, None, &mut b).unwrap();
            assert_eq!(p, q);
            let mut reals: Vec<_> = p.iter().map(|x| x.0).collect();
            let mut fakes: Vec<_> = p.iter().map(|x| x.1).collect();
            reals.sort_unstable();
            fakes.sort_unstable();
            assert_eq!(reals, (0..7).collect::<Vec<_>>());
            assert_eq!(fakes, (0..7).collect::<Vec<_>>());
        }
    }

    #[test]
    fn same_class_stays_within_class() {
        let real = [0, 1, 0, 2, 1];
        let fake = [1, 0, 2, 1, 0];
        let pairs = pair_samples(PairingStrategy::SameClass, 5, 5, Some((&real, &fake)), None, &mut rng()).unwrap();
        assert_eq!(pairs.len(), 5);
        for (r, f) in pairs {
            assert_eq!(real[r], fake[f]);
        }
    }

    #[test]
    fn same_class_reports_deficits() {
        let err = pair_samples(
            PairingStrategy::SameClass,
            3,
            3,
            Some((&[0, 0, 1], &[0, 1, 1])),
            None,
            &mut rng(),
        )
        .unwrap_err();
        assert_eq!(err, GanRegError::ClassDeficit(vec![(0, 2, 1), (1, 1, 2)]));
        assert!(err.to_string().contains("class 0"));
    }

    #[test]
    fn missing_inputs_rejected() {
        assert_eq!(
            pair_samples(PairingStrategy::SameClass, 2, 2, None, None, &mut rng()),
            Err(GanRegError::MissingLabels)
        );
        assert_eq!(
            pair_samples(PairingStrategy::GradientMagnitude, 2, 2, None, None, &mut rng()),
            Err(GanRegError::MissingNorms)
        );
        assert!(matches!(
            pair_samples(PairingStrategy::Random, 2, 3, None, None, &mut rng()),
            Err(GanRegError::BatchMismatch { .. })
        ));
    }
}
