//! Random-hyperplane signatures.
//!
//! Hyperplane `j` has i.i.d. standard normal entries that are recomputed on
//! demand from `(seed, j, i)` by a counter-based generator, so no `d x k`
//! matrix is ever stored.

use std::f64::consts::PI;

use super::{Method, ReductionSpec};
use crate::error::{Error, Result};
use crate::features::SparseBinaryVector;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Entry `i` of hyperplane `j`, a standard normal draw (Box-Muller).
pub fn hyperplane_entry(seed: u64, j: u32, i: u32) -> f64 {
    let key = mix(seed ^ 0x6c73_685f_7631);
    let counter = ((j as u64) << 32) | i as u64;
    let a = mix(key ^ mix(counter.wrapping_mul(2)));
    let b = mix(key ^ mix(counter.wrapping_mul(2).wrapping_add(1)));
    (-2.0 * unit_open(a).ln()).sqrt() * (2.0 * PI * unit_open(b)).cos()
}

/// Bit `j` is set when `h_j . x >= 0`.
pub fn lsh_signature(spec: &ReductionSpec, x: &SparseBinaryVector) -> Result<Vec<bool>> {
    if spec.method != Method::Lsh {
        return Err(Error::InvalidArgument("spec is not an lsh spec".into()));
    }
    Ok((0..spec.target_dim)
        .map(|j| {
            let dot: f64 = x
                .indices()
                .iter()
                .map(|&i| hyperplane_entry(spec.seed, j, i))
                .sum();
            dot >= 0.0
        })
        .collect())
}

/// The signature as a sparse binary vector over `k` features.
pub fn lsh_project(spec: &ReductionSpec, x: &SparseBinaryVector) -> Result<SparseBinaryVector> {
    let bits = lsh_signature(spec, x)?;
    let ones = bits
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(j, _)| j as u32)
        .collect();
    SparseBinaryVector::new(ones, spec.target_dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_signature_for_zero_k() {
        let spec = ReductionSpec::new(Method::Lsh, 50, 0, 1).unwrap();
        let x = SparseBinaryVector::new(vec![3, 7], 50).unwrap();
        assert!(lsh_signature(&spec, &x).unwrap().is_empty());
    }

    #[test]
    fn empty_document_sets_every_bit() {
        let spec = ReductionSpec::new(Method::Lsh, 50, 8, 1).unwrap();
        let x = SparseBinaryVector::new(vec![], 50).unwrap();
        assert_eq!(lsh_signature(&spec, &x).unwrap(), vec![true; 8]);
    }

    #[test]
    fn entries_look_standard_normal() {
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|i| hyperplane_entry(5, (i % 7) as u32, i as u32)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert_eq!(hyperplane_entry(5, 1, 2), hyperplane_entry(5, 1, 2));
        assert_ne!(hyperplane_entry(5, 1, 2), hyperplane_entry(6, 1, 2));
    }
}
