//! Spectra of centered Gram matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Largest n for which the automatic solver uses a dense decomposition.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EigenSolver {
    /// Dense for n ≤ 2000 or a full spectrum, Lanczos otherwise.
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// λ̂_k = ν_k / n for the kept eigenvalues, descending.
    pub lambda_hat: Vec<f64>,
    pub kept_count: usize,
    /// Computed eigenvalues below −tol.
    pub dropped_negative_count: usize,
    /// Computed eigenvalues within ±tol of zero, tol = n·ε·max|ν|.
    pub numerical_zero_count: usize,
}

impl EigenSpectrum {
    pub fn is_empty(&self) -> bool {
        self.lambda_hat.is_empty()
    }

    /// Every λ̂ multiplied by `c`.
    pub fn scaled(&self, c: f64) -> EigenSpectrum {
        EigenSpectrum {
            lambda_hat: self.lambda_hat.iter().map(|l| l * c).collect(),
            ..self.clone()
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::InvalidConfig(format!(
                    "centered matrix not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Eigenvalues of the symmetric matrix `m`, descending; `top` limits the
/// count to the largest ones.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>, top: Option<usize>, solver: EigenSolver) -> Result<Vec<f64>> {
    let n = m.nrows();
    let use_dense = match solver {
        EigenSolver::Dense => true,
        EigenSolver::Lanczos => false,
        EigenSolver::Auto => n <= DENSE_LIMIT || top.is_none_or(|k| k * 4 >= n),
    };
    let mut values = if use_dense {
        let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        if let Some(k) = top {
            v.truncate(k);
        }
        v
    } else {
        lanczos_top(m, top.unwrap_or(n), RngSeed::new(0x1a2c_2051))?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigensolverFailure("non-finite eigenvalue".into()));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Spectrum of a centered Gram matrix: top `top` eigenvalues (all when
/// `None`), negatives and numerical zeros dropped, divided by n.
pub fn eigen_spectrum(centered: &DMatrix<f64>, top: Option<usize>) -> Result<EigenSpectrum> {
    eigen_spectrum_with(centered, top, EigenSolver::Auto)
}

pub fn eigen_spectrum_with(centered: &DMatrix<f64>, top: Option<usize>, solver: EigenSolver) -> Result<EigenSpectrum> {
    check_symmetric(centered)?;
    let n = centered.nrows();
    if n == 0 {
        return Ok(EigenSpectrum::default());
    }
    let nu = symmetric_eigenvalues(centered, top, solver)?;
    // Solvers resolve eigenvalues only to about n·ε·‖G‖.
    let max_abs = nu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = n as f64 * f64::EPSILON * max_abs;
    let mut spec = EigenSpectrum::default();
    for v in nu {
        if v > tol {
            spec.lambda_hat.push(v / n as f64);
        } else if v < -tol {
            spec.dropped_negative_count += 1;
        } else {
            spec.numerical_zero_count += 1;
        }
    }
    spec.kept_count = spec.lambda_hat.len();
    Ok(spec)
}

/// Largest `k` eigenvalues by Lanczos with full reorthogonalization.
///
/// The Krylov dimension doubles until the top-k Ritz residuals fall below
/// 1e-12·‖A‖. Invariant subspaces are continued from a fresh random vector
/// so repeated eigenvalues keep their multiplicity.
pub fn lanczos_top(a: &DMatrix<f64>, k: usize, seed: RngSeed) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n == 0 || k == 0 {
        return Ok(Vec::new());
    }
    let k = k.min(n);
    let anorm = a.amax() * n as f64;
    if anorm == 0.0 {
        return Ok(vec![0.0; k]);
    }
    let mut rng = seed.rng();
    let mut random_unit = |basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
            for _ in 0..2 {
                for q in basis {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
            }
            let norm = v.norm();
            if norm > 1e-8 {
                return Some(v / norm);
            }
        }
        None
    };

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new(); // beta[j] couples basis[j] and basis[j+1]
    let mut m = (2 * k + 20).max(60).min(n);
    let mut q = random_unit(&basis).ok_or_else(|| Error::EigensolverFailure("no start vector".into()))?;
    loop {
        while basis.len() < m {
            let mut w = a * &q;
            let aj = q.dot(&w);
            w.axpy(-aj, &q, 1.0);
            if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
                w.axpy(-b, prev, 1.0);
            }
            basis.push(q.clone());
            alpha.push(aj);
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for v in &basis {
                    let c = v.dot(&w);
                    w.axpy(-c, v, 1.0);
                }
            }
            let b = w.norm();
            if basis.len() == n {
                break;
            }
            if b <= 1e-10 * anorm {
                // Invariant subspace: restart with a new direction; the
                // tridiagonal matrix decouples here.
                beta.push(0.0);
                match random_unit(&basis) {
                    Some(v) => q = v,
                    None => break,
                }
            } else {
                beta.push(b);
                q = w / b;
            }
        }
        let dim = basis.len();
        let t = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(t, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigensolverFailure("tridiagonal eigenproblem did not converge".into()))?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let last_beta = if dim < n { beta.get(dim - 1).copied().unwrap_or(0.0) } else { 0.0 };
        let converged = order
            .iter()
            .take(k)
            .all(|&i| (last_beta * eig.eigenvectors[(dim - 1, i)]).abs() <= 1e-12 * anorm);
        if converged || dim >= n {
            return Ok(order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect());
        }
        // `q` already holds the next Lanczos vector.
        m = (2 * m).min(n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngSeed::new(seed).rng();
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn zero_matrix_empty_spectrum() {
        let s = eigen_spectrum(&DMatrix::zeros(5, 5), None).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.numerical_zero_count, 5);
    }

    #[test]
    fn rank_one_single_eigenvalue() {
        let d = [0.3, -1.2, 0.5, 2.0, 0.1, -0.7];
        let n = d.len();
        let mean = d.iter().sum::<f64>() / n as f64;
        let c: Vec<f64> = d.iter().map(|v| v - mean).collect();
        let g = DMatrix::from_fn(n, n, |i, j| 2.0 * c[i] * c[j]);
        let s = eigen_spectrum(&g, None).unwrap();
        assert_eq!(s.kept_count, 1);
        let expect = 2.0 / n as f64 * c.iter().map(|v| v * v).sum::<f64>();
        assert!((s.lambda_hat[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn diagonal_dominant_matches_reference() {
        let n = 40;
        let mut m = random_symmetric(n, 3) * 0.1;
        for i in 0..n {
            m[(i, i)] += i as f64;
        }
        let ours = symmetric_eigenvalues(&m, None, EigenSolver::Dense).unwrap();
        let reference = SymmetricEigen::new(m.clone());
        let mut r: Vec<f64> = reference.eigenvalues.iter().copied().collect();
        r.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.iter().zip(&r) {
            assert!((a - b).abs() < 1e-8);
        }
        // Reconstruction check of the reference itself.
        let rec = &reference.eigenvectors
            * DMatrix::from_diagonal(&reference.eigenvalues)
            * reference.eigenvectors.transpose();
        assert!((rec - m).amax() < 1e-10);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        for (n, k, seed) in [(300, 20, 1), (120, 120, 2), (257, 5, 3)] {
            let m = random_symmetric(n, seed);
            let dense = symmetric_eigenvalues(&m, Some(k), EigenSolver::Dense).unwrap();
            let lanczos = symmetric_eigenvalues(&m, Some(k), EigenSolver::Lanczos).unwrap();
            assert_eq!(dense.len(), lanczos.len());
            for (a, b) in dense.iter().zip(&lanczos) {
                assert!((a - b).abs() < 1e-6, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn lanczos_keeps_multiplicity() {
        // Low-rank with a repeated eigenvalue: diag(3, 3, 1, 0, ...).
        let n = 50;
        let mut d = DMatrix::zeros(n, n);
        d[(0, 0)] = 3.0;
        d[(1, 1)] = 3.0;
        d[(2, 2)] = 1.0;
        let q = random_symmetric(n, 9).symmetric_eigen().eigenvectors;
        let m = &q * d * q.transpose();
        let top = lanczos_top(&m, 4, RngSeed::new(1)).unwrap();
        assert!((top[0] - 3.0).abs() < 1e-9 && (top[1] - 3.0).abs() < 1e-9);
        assert!((top[2] - 1.0).abs() < 1e-9 && top[3].abs() < 1e-9);
    }

    #[test]
    fn spectrum_counts_negatives() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0, 4.0]));
        let s = eigen_spectrum(&m, None).unwrap();
        assert_eq!(s.lambda_hat, vec![1.0, 0.5]);
        assert_eq!(s.dropped_negative_count, 1);
        assert_eq!(s.numerical_zero_count, 1);
        let top = eigen_spectrum(&m, Some(1)).unwrap();
        assert_eq!(top.lambda_hat, vec![1.0]);
    }
}
