//! Feature selection by document frequency, uniform sampling, or sampling
//! proportional to document frequency.

use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{Method, ReductionSpec};
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;
use crate::rng::derive_rng;

/// Number of documents containing each feature.
pub fn document_frequencies(docs: &[&SparseBinaryVector], dim: u32) -> Result<Vec<u32>> {
    let mut df = vec![0u32; dim as usize];
    for doc in docs {
        for &i in doc.indices() {
            *df.get_mut(i as usize)
                .ok_or_else(|| Error::Dimension(format!("feature {i} >= {dim}")))? += 1;
        }
    }
    Ok(df)
}

/// Draws feature indices with probability proportional to document frequency.
pub struct DfSampler {
    features: Vec<u32>,
    dist: WeightedIndex<u32>,
}

impl DfSampler {
    pub fn new(df: &[u32]) -> Result<Self> {
        let features: Vec<u32> = (0..df.len() as u32).filter(|&i| df[i as usize] > 0).collect();
        let weights: Vec<u32> = features.iter().map(|&i| df[i as usize]).collect();
        let dist = WeightedIndex::new(weights)
            .map_err(|e| Error::InvalidArgument(format!("no feature has nonzero frequency: {e}")))?;
        Ok(DfSampler { features, dist })
    }

    /// Number of features with nonzero mass.
    pub fn support(&self) -> usize {
        self.features.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.features[self.dist.sample(rng)]
    }
}

/// Fits the kept index set for `dfprune`, `uniform` or `multinomial`.
///
/// `uniform` and `multinomial` draw with replacement until `target_dim`
/// distinct features are collected.
pub fn fit_selection(spec: &ReductionSpec, docs: &[&SparseBinaryVector]) -> Result<Vec<u32>> {
    let k = spec.target_dim as usize;
    let mut rng = derive_rng(spec.seed, spec.method.name());
    match spec.method {
        Method::DfPrune => {
            if docs.is_empty() {
                return Err(Error::InvalidArgument("dfprune needs a nonempty corpus".into()));
            }
            let df = document_frequencies(docs, spec.source_dim)?;
            Ok((0..spec.source_dim)
                .filter(|&i| df[i as usize] >= spec.df_threshold)
                .collect())
        }
        Method::Uniform => {
            let mut kept = BTreeSet::new();
            while kept.len() < k {
                kept.insert(rng.random_range(0..spec.source_dim));
            }
            Ok(kept.into_iter().collect())
        }
        Method::Multinomial => {
            if docs.is_empty() {
                return Err(Error::InvalidArgument("multinomial needs a nonempty corpus".into()));
            }
            let df = document_frequencies(docs, spec.source_dim)?;
            let sampler = DfSampler::new(&df)?;
            if sampler.support() < k {
                return Err(Error::InvalidArgument(format!(
                    "only {} features have nonzero frequency, {k} requested",
                    sampler.support()
                )));
            }
            let mut kept = BTreeSet::new();
            while kept.len() < k {
                kept.insert(sampler.sample(&mut rng));
            }
            Ok(kept.into_iter().collect())
        }
        other => Err(Error::InvalidArgument(format!("{other} is not a selection method"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs() -> Vec<SparseBinaryVector> {
        vec![
            SparseBinaryVector::new(vec![0, 1, 2], 6).unwrap(),
            SparseBinaryVector::new(vec![1, 2], 6).unwrap(),
            SparseBinaryVector::new(vec![2, 4], 6).unwrap(),
        ]
    }

    fn spec(method: Method, k: u32, threshold: u32) -> ReductionSpec {
        let mut s = ReductionSpec::new(method, 6, k, 11).unwrap();
        s.df_threshold = threshold;
        s
    }

    #[test]
    fn dfprune_thresholds() {
        let d = docs();
        let refs: Vec<&SparseBinaryVector> = d.iter().collect();
        assert_eq!(fit_selection(&spec(Method::DfPrune, 6, 1), &refs).unwrap(), vec![0, 1, 2, 4]);
        assert_eq!(fit_selection(&spec(Method::DfPrune, 6, 2), &refs).unwrap(), vec![1, 2]);
        assert_eq!(fit_selection(&spec(Method::DfPrune, 6, 3), &refs).unwrap(), vec![2]);
        assert!(fit_selection(&spec(Method::DfPrune, 6, 1), &[]).is_err());
    }

    #[test]
    fn multinomial_never_picks_zero_frequency() {
        let d = docs();
        let refs: Vec<&SparseBinaryVector> = d.iter().collect();
        for seed in 0..50 {
            let mut s = spec(Method::Multinomial, 3, 1);
            s.seed = seed;
            let kept = fit_selection(&s, &refs).unwrap();
            assert_eq!(kept.len(), 3);
            assert!(!kept.contains(&3) && !kept.contains(&5));
        }
        assert!(fit_selection(&spec(Method::Multinomial, 5, 1), &refs).is_err());
    }

    #[test]
    fn uniform_is_seeded_and_sized() {
        let a = fit_selection(&spec(Method::Uniform, 4, 1), &[]).unwrap();
        let b = fit_selection(&spec(Method::Uniform, 4, 1), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }
}
