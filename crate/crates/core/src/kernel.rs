//! The second-order kernel Γ built from functional evaluations.
//!
//! For mappings T, U with conditional gradients D^T, D^U, the pairwise kernel
//! is
//!
//! ```text
//! Γ^{TU}(o1, o2) = [ 2δ'(D^U(o2) − D^T(o1)) + 1
//!                    − 2 D^T(o1)'(2δδ' − I) D^U(o2) ] · exp(−‖δ‖²),
//! δ = T(o1) − U(o2),
//! ```
//!
//! and the test kernel is Γ = Γ^{RR} − Γ^{RS} − Γ^{SR} + Γ^{SS}. The
//! vector form is the only implementation; for d = 1 it coincides with the
//! scalar expression `[2δ(du − dt) + 1 − (4δ² − 2)·dt·du]·exp(−δ²)`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Signature of a pairwise kernel `(t1, u2, dt1, du2) -> Γ^{TU}`. The oracle
/// suite accepts any such function so it can be run against mutants.
pub type TuKernel = dyn Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Sync;

/// Per-observation values of R, S and their conditional gradients.
///
/// All four blocks are row-major n×d.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalEvaluations {
    n: usize,
    d: usize,
    r: Vec<f64>,
    s: Vec<f64>,
    dr: Vec<f64>,
    ds: Vec<f64>,
    bound_b: f64,
}

impl FunctionalEvaluations {
    pub fn new(
        n: usize,
        d: usize,
        r: Vec<f64>,
        s: Vec<f64>,
        dr: Vec<f64>,
        ds: Vec<f64>,
        bound_b: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for block in [&r, &s, &dr, &ds] {
            if block.len() != n * d {
                return Err(Error::DimensionMismatch {
                    expected: n * d,
                    found: block.len(),
                });
            }
        }
        if !(bound_b > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "range bound must be positive, got {bound_b}"
            )));
        }
        for (name, block) in [("r", &r), ("s", &s), ("dr", &dr), ("ds", &ds)] {
            if let Some(k) = block.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    row: k / d,
                    column: name.to_string(),
                    value: block[k].to_string(),
                });
            }
        }
        for (name, block) in [("r", &r), ("s", &s)] {
            if let Some(k) = block.iter().position(|v| v.abs() > bound_b) {
                return Err(Error::InvalidConfig(format!(
                    "{name}[{}] = {} exceeds range bound {bound_b}",
                    k / d,
                    block[k]
                )));
            }
        }
        Ok(FunctionalEvaluations {
            n,
            d,
            r,
            s,
            dr,
            ds,
            bound_b,
        })
    }

    /// Scalar (d = 1) evaluations.
    pub fn scalar(
        r: Vec<f64>,
        s: Vec<f64>,
        dr: Vec<f64>,
        ds: Vec<f64>,
        bound_b: f64,
    ) -> Result<Self> {
        let n = r.len();
        Self::new(n, 1, r, s, dr, ds, bound_b)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn bound_b(&self) -> f64 {
        self.bound_b
    }

    pub fn r(&self, i: usize) -> &[f64] {
        &self.r[i * self.d..(i + 1) * self.d]
    }

    pub fn s(&self, i: usize) -> &[f64] {
        &self.s[i * self.d..(i + 1) * self.d]
    }

    pub fn dr(&self, i: usize) -> &[f64] {
        &self.dr[i * self.d..(i + 1) * self.d]
    }

    pub fn ds(&self, i: usize) -> &[f64] {
        &self.ds[i * self.d..(i + 1) * self.d]
    }

    pub fn r_values(&self) -> &[f64] {
        &self.r
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s
    }

    pub fn dr_values(&self) -> &[f64] {
        &self.dr
    }

    pub fn ds_values(&self) -> &[f64] {
        &self.ds
    }

    /// S ≡ 0 and D^S ≡ 0.
    pub fn is_degenerate_s(&self) -> bool {
        self.s.iter().chain(&self.ds).all(|&v| v == 0.0)
    }

    /// Evaluations of R/h and S/h; gradients scale with their mappings.
    pub fn rescaled(&self, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {bandwidth}"
            )));
        }
        let f = 1.0 / bandwidth;
        let scale = |v: &[f64]| v.iter().map(|x| x * f).collect::<Vec<_>>();
        Ok(FunctionalEvaluations {
            n: self.n,
            d: self.d,
            r: scale(&self.r),
            s: scale(&self.s),
            dr: scale(&self.dr),
            ds: scale(&self.ds),
            bound_b: self.bound_b * f,
        })
    }
}

/// Γ^{TU} without dimension checks. Slices must share one length.
#[inline]
pub fn gamma_tu_unchecked(t1: &[f64], u2: &[f64], dt1: &[f64], du2: &[f64]) -> f64 {
    let mut dist_sq = 0.0;
    let mut cross = 0.0; // δ'(du2 − dt1)
    let mut dt_delta = 0.0; // dt1'δ
    let mut du_delta = 0.0; // du2'δ
    let mut dt_du = 0.0; // dt1'du2
    for k in 0..t1.len() {
        let delta = t1[k] - u2[k];
        dist_sq += delta * delta;
        cross += delta * (du2[k] - dt1[k]);
        dt_delta += dt1[k] * delta;
        du_delta += du2[k] * delta;
        dt_du += dt1[k] * du2[k];
    }
    // dt'(2δδ' − I)du = 2(dt'δ)(δ'du) − dt'du
    let bracket = 2.0 * cross + 1.0 - 2.0 * (2.0 * dt_delta * du_delta - dt_du);
    bracket * (-dist_sq).exp()
}

/// Γ^{TU}(o1, o2) from the values T(o1), U(o2), D^T(o1), D^U(o2).
pub fn gamma_tu(t1: &[f64], u2: &[f64], dt1: &[f64], du2: &[f64]) -> Result<f64> {
    let d = t1.len();
    for v in [u2, dt1, du2] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
    }
    if d == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: 0,
        });
    }
    Ok(gamma_tu_unchecked(t1, u2, dt1, du2))
}

#[inline]
pub fn combine_with<K: Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + ?Sized>(
    kernel: &K,
    (r1, s1, dr1, ds1): (&[f64], &[f64], &[f64], &[f64]),
    (r2, s2, dr2, ds2): (&[f64], &[f64], &[f64], &[f64]),
) -> f64 {
    kernel(r1, r2, dr1, dr2) - kernel(r1, s2, dr1, ds2) - kernel(s1, r2, ds1, dr2)
        + kernel(s1, s2, ds1, ds2)
}

#[inline]
fn combined_unchecked(fe: &FunctionalEvaluations, i: usize, j: usize) -> f64 {
    combine_with(
        &gamma_tu_unchecked,
        (fe.r(i), fe.s(i), fe.dr(i), fe.ds(i)),
        (fe.r(j), fe.s(j), fe.dr(j), fe.ds(j)),
    )
}

/// Γ(O_i, O_j) = Γ^{RR} − Γ^{RS} − Γ^{SR} + Γ^{SS}.
pub fn gamma_combined(fe: &FunctionalEvaluations, i: usize, j: usize) -> Result<f64> {
    if i >= fe.n || j >= fe.n {
        return Err(Error::IndexOutOfRange(i, j, fe.n));
    }
    Ok(combined_unchecked(fe, i, j))
}

/// Symmetric n×n matrix of Γ_n(O_i, O_j), diagonal included.
///
/// U-statistics skip the diagonal; it is kept for V-statistic conversions.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    values: DMatrix<f64>,
}

impl GammaMatrix {
    /// Wraps a square matrix, checking symmetry to 1e-12 (relative to the
    /// largest entry) and finiteness.
    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: values.ncols(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("Γ matrix has non-finite entries".into()));
        }
        let scale = values.amax().max(1.0);
        for i in 0..n {
            for j in (i + 1)..n {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidConfig(format!(
                        "Γ matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(GammaMatrix { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.values.diagonal().iter().copied().collect()
    }

    /// Debug dump: n as little-endian u64, then n² row-major f64 values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.n();
        out.write_all(&(n as u64).to_le_bytes())?;
        for i in 0..n {
            for j in 0..n {
                out.write_all(&self.values[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }
}

/// Evaluates Γ_n over all pairs. Rows of the upper triangle are computed in
/// parallel and mirrored, so the result is exactly symmetric.
pub fn gamma_matrix(fe: &FunctionalEvaluations) -> Result<GammaMatrix> {
    let n = fe.n;
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 2, have: n });
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| combined_unchecked(fe, i, j)).collect())
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("Γ matrix has non-finite entries".into()));
    }
    Ok(GammaMatrix { values })
}

/// Double-centered Gram matrix
/// G_ij = Γ_ij − mean_k Γ_kj − mean_l Γ_il + mean_kl Γ_kl.
pub fn centered_gram(g: &GammaMatrix) -> DMatrix<f64> {
    let n = g.n();
    let m = g.values();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| m.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| m.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] - col_means[j] - row_means[i] + grand)
}
