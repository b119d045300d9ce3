//! Synthetic binary-feature corpora for tests and benchmarks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;
use crate::rng::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthSpec {
    pub docs: usize,
    pub dim: u32,
    /// Probability that any given feature is present.
    pub density: f64,
    /// Probability of flipping each planted label. Zero keeps the corpus
    /// linearly separable.
    pub flip: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn separable(docs: usize, dim: u32, seed: u64) -> Self {
        SynthSpec {
            docs,
            dim,
            density: 0.2,
            flip: 0.0,
            seed,
        }
    }
}

/// A corpus labeled by a hidden Gaussian weight vector: `y = sign(w*.x)`,
/// ties going to the positive class. Returns the data and `w*`.
pub fn planted(spec: &SynthSpec) -> Result<(LabeledDataset, Vec<f64>)> {
    if spec.dim == 0 {
        return Err(Error::InvalidArgument("dim must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.density) || !(0.0..=1.0).contains(&spec.flip) {
        return Err(Error::InvalidArgument("density and flip must lie in [0, 1]".into()));
    }
    let mut rng = derive_rng(spec.seed, "synth-planted");
    let w: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut data = LabeledDataset::new(spec.dim);
    for _ in 0..spec.docs {
        let idx: Vec<u32> = (0..spec.dim).filter(|_| rng.random_bool(spec.density)).collect();
        let x = SparseBinaryVector::new(idx, spec.dim)?;
        let mut y = if x.dot(&w) >= 0.0 { Label::Positive } else { Label::Negative };
        if rng.random_bool(spec.flip) {
            y = if y == Label::Positive { Label::Negative } else { Label::Positive };
        }
        data.push(x, y)?;
    }
    Ok((data, w))
}

/// Random features with fair-coin labels: the "random matrix" shape used to
/// exercise the protocol without caring about accuracy.
pub fn random_matrix(docs: usize, dim: u32, density: f64, seed: u64) -> Result<LabeledDataset> {
    let mut rng = derive_rng(seed, "synth-random");
    let mut data = LabeledDataset::new(dim);
    for _ in 0..docs {
        let idx: Vec<u32> = (0..dim).filter(|_| rng.random_bool(density)).collect();
        let y = if rng.random_bool(0.5) { Label::Positive } else { Label::Negative };
        data.push(SparseBinaryVector::new(idx, dim)?, y)?;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_labels_follow_the_hidden_model() {
        let (data, w) = planted(&SynthSpec::separable(300, 15, 4)).unwrap();
        assert_eq!(data.len(), 300);
        for (x, y) in data.iter() {
            assert_eq!(*y == Label::Positive, x.dot(&w) >= 0.0);
        }
        assert!(data.positives() > 50 && data.positives() < 250);
    }

    #[test]
    fn deterministic_in_seed() {
        let a = random_matrix(20, 8, 0.3, 1).unwrap();
        assert_eq!(a, random_matrix(20, 8, 0.3, 1).unwrap());
        assert_ne!(a, random_matrix(20, 8, 0.3, 2).unwrap());
    }
}
