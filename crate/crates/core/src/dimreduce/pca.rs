//! Principal components by orthogonal iteration with Rayleigh-Ritz
//! refinement on the sample covariance `X_c^T X_c / (n - 1)`.
//!
//! Meant for desk-scale dimensions; the covariance is formed densely.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::derive_rng;

pub const PCA_TOL: f64 = 1e-8;
pub const PCA_MAX_ITERS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct PcaState {
    pub mean: Vec<f64>,
    /// `k` orthonormal rows of length `d`, by decreasing eigenvalue.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

impl PcaState {
    /// Sum of the captured eigenvalues.
    pub fn captured_variance(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

type Mat = Vec<Vec<f64>>;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Modified Gram-Schmidt over columns stored as rows of `cols`. Columns that
/// collapse are replaced by fresh random directions.
fn orthonormalize<R: Rng>(cols: &mut [Vec<f64>], rng: &mut R) {
    for i in 0..cols.len() {
        for attempt in 0..8 {
            for j in 0..i {
                let (done, rest) = cols.split_at_mut(i);
                let p = dot(&rest[0], &done[j]);
                for (x, q) in rest[0].iter_mut().zip(&done[j]) {
                    *x -= p * q;
                }
            }
            let norm = dot(&cols[i], &cols[i]).sqrt();
            if norm > 1e-10 || attempt == 7 {
                for x in cols[i].iter_mut() {
                    *x /= norm.max(f64::MIN_POSITIVE);
                }
                break;
            }
            for x in cols[i].iter_mut() {
                *x = rng.random_range(-1.0..1.0);
            }
        }
    }
}

/// Eigen-decomposition of a small symmetric matrix by cyclic Jacobi
/// rotations. Returns eigenvalues (descending) and eigenvectors as rows.
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    let mut a: Mat = matrix.to_vec();
    let mut v: Mat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|r| v[r][i]).collect())
        .collect();
    (values, vectors)
}

/// Top-`k` principal subspace of `rows` (each of length `d`).
pub fn pca_fit(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<PcaState> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged PCA input".into()));
    }
    if k > n.min(d) {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds min(n, d) = {}", n.min(d))));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov: Mat = vec![vec![0.0; d]; d];
    for r in rows {
        let c: Vec<f64> = r.iter().zip(&mean).map(|(x, m)| x - m).collect();
        for i in 0..d {
            for j in i..d {
                cov[i][j] += c[i] * c[j];
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    if k == 0 {
        return Ok(PcaState {
            mean,
            basis: Vec::new(),
            eigenvalues: Vec::new(),
        });
    }
    let norm: f64 = cov.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();

    let mut rng = derive_rng(seed, "pca-init");
    let mut q: Mat = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut q, &mut rng);

    for _ in 0..PCA_MAX_ITERS {
        let mut z: Mat = q.iter().map(|col| mat_vec(&cov, col)).collect();
        orthonormalize(&mut z, &mut rng);
        // Rayleigh-Ritz on span(z).
        let az: Mat = z.iter().map(|col| mat_vec(&cov, col)).collect();
        let h: Mat = (0..k)
            .map(|i| (0..k).map(|j| dot(&z[i], &az[j])).collect())
            .collect();
        let (values, vectors) = jacobi_eigen(&h);
        let ritz: Mat = vectors
            .iter()
            .map(|y| (0..d).map(|r| (0..k).map(|c| y[c] * z[c][r]).sum()).collect())
            .collect();
        let mut residual = 0.0f64;
        for (vec, &lambda) in ritz.iter().zip(&values) {
            let av = mat_vec(&cov, vec);
            let r: f64 = av.iter().zip(vec).map(|(a, x)| (a - lambda * x).powi(2)).sum();
            residual = residual.max(r.sqrt());
        }
        q = ritz;
        if residual <= PCA_TOL * norm.max(f64::MIN_POSITIVE) || norm == 0.0 {
            return Ok(PcaState {
                mean,
                basis: q,
                eigenvalues: values,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "orthogonal iteration did not reach {PCA_TOL} in {PCA_MAX_ITERS} iterations"
    )))
}

/// `basis . (x - mean)`.
pub fn pca_project(state: &PcaState, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != state.mean.len() {
        return Err(Error::Dimension(format!(
            "input has {} entries, PCA expects {}",
            x.len(),
            state.mean.len()
        )));
    }
    let centered: Vec<f64> = x.iter().zip(&state.mean).map(|(a, m)| a - m).collect();
    Ok(state.basis.iter().map(|b| dot(b, &centered)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_data_is_reconstructed() {
        let dir = [0.6, -0.8, 0.0];
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| dir.iter().map(|d| 1.0 + d * (i as f64 - 4.5)).collect())
            .collect();
        let state = pca_fit(&rows, 1, 0).unwrap();
        for r in &rows {
            let z = pca_project(&state, r).unwrap();
            let back: Vec<f64> = (0..3).map(|j| state.mean[j] + z[0] * state.basis[0][j]).collect();
            for (a, b) in back.iter().zip(r) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mean_projects_to_zero_and_basis_is_orthonormal() {
        let mut rng = derive_rng(1, "pca-test");
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let state = pca_fit(&rows, 4, 3).unwrap();
        for z in pca_project(&state, &state.mean).unwrap() {
            assert!(z.abs() < 1e-8);
        }
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&state.basis[i], &state.basis[j]) - expect).abs() < 1e-6);
            }
        }
        assert!(pca_fit(&rows, 9, 0).is_err());
        assert!(pca_project(&state, &[0.0; 3]).is_err());
    }

    #[test]
    fn jacobi_diagonalizes() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (values, vectors) = jacobi_eigen(&m);
        assert!((values[0] - 3.0).abs() < 1e-12 && (values[1] - 1.0).abs() < 1e-12);
        assert!((vectors[0][0].abs() - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
