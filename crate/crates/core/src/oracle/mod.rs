//! Exact reference computations on finite-support distributions.
//!
//! Everything here is a plain double sum over atoms, so these functions are
//! the ground truth that the sample-based code is checked against.

pub mod fixtures;
pub mod law;
pub mod suite;

use serde::Serialize;

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::kernel::{combine_with, gamma_tu_unchecked, TuKernel};

pub use fixtures::{fixtures, random_fixture, Fixture};
pub use law::{Cell, DiscreteLaw, WorkingModel};
pub use suite::{gamma_tu_variant, run_identity_suite, IdentityCheck};

/// Atoms with probabilities and the (scalar) R, S, D^R, D^S values at each.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDgp {
    pub atoms: Vec<Observation>,
    pub probs: Vec<f64>,
    pub r: Vec<f64>,
    pub s: Vec<f64>,
    pub dr: Vec<f64>,
    pub ds: Vec<f64>,
    /// Partition of atoms by the value of x^R.
    pub groups_r: Vec<usize>,
    /// Partition of atoms by the value of x^S.
    pub groups_s: Vec<usize>,
    pub rem_r: Vec<f64>,
    pub rem_s: Vec<f64>,
}

impl DiscreteDgp {
    /// Fixture given directly by values. Each atom is its own conditioning
    /// group, so nonzero gradients are only meaningful for the kernel sums.
    pub fn from_values(probs: Vec<f64>, r: Vec<f64>, s: Vec<f64>, dr: Vec<f64>, ds: Vec<f64>) -> Result<Self> {
        let m = probs.len();
        for v in [&r, &s, &dr, &ds] {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        let atoms = (0..m).map(|i| Observation::new(vec![i as f64], None, vec![0.0])).collect();
        Ok(DiscreteDgp {
            atoms,
            probs,
            r,
            s,
            dr,
            ds,
            groups_r: (0..m).collect(),
            groups_s: (0..m).collect(),
            rem_r: vec![0.0; m],
            rem_s: vec![0.0; m],
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn gamma(&self, kernel: &TuKernel, i: usize, j: usize) -> f64 {
        let at = |k: usize| {
            (
                std::slice::from_ref(&self.r[k]),
                std::slice::from_ref(&self.s[k]),
                std::slice::from_ref(&self.dr[k]),
                std::slice::from_ref(&self.ds[k]),
            )
        };
        combine_with(kernel, at(i), at(j))
    }

    /// Largest |E[D^T ∣ x^T]| over groups, for T = R and S.
    pub fn conditional_gradient_means(&self) -> (f64, f64) {
        let worst = |grad: &[f64], groups: &[usize]| {
            let ng = groups.iter().max().map_or(0, |g| g + 1);
            let mut mass = vec![0.0; ng];
            let mut total = vec![0.0; ng];
            for i in 0..self.len() {
                mass[groups[i]] += self.probs[i];
                total[groups[i]] += self.probs[i] * grad[i];
            }
            mass.iter()
                .zip(&total)
                .filter(|(m, _)| **m > 0.0)
                .map(|(m, t)| (t / m).abs())
                .fold(0.0, f64::max)
        };
        (worst(&self.dr, &self.groups_r), worst(&self.ds, &self.groups_s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pair {
    RR,
    RS,
    SR,
    SS,
}

/// Φ^{TU} = Σ_i Σ_j p_i p_j exp(−(t_i − u_j)²).
pub fn exact_phi(dgp: &DiscreteDgp, which: Pair) -> f64 {
    let (t, u) = match which {
        Pair::RR => (&dgp.r, &dgp.r),
        Pair::RS => (&dgp.r, &dgp.s),
        Pair::SR => (&dgp.s, &dgp.r),
        Pair::SS => (&dgp.s, &dgp.s),
    };
    let mut total = 0.0;
    for (ti, pi) in t.iter().zip(&dgp.probs) {
        let row: f64 = u
            .iter()
            .zip(&dgp.probs)
            .map(|(uj, pj)| pj * (-(ti - uj) * (ti - uj)).exp())
            .sum();
        total += pi * row;
    }
    total
}

/// Ψ = Φ^{RR} − 2Φ^{RS} + Φ^{SS}.
pub fn exact_psi(dgp: &DiscreteDgp) -> f64 {
    exact_phi(dgp, Pair::RR) - 2.0 * exact_phi(dgp, Pair::RS) + exact_phi(dgp, Pair::SS)
}

/// Row means Σ_j p_j Γ(o_i, o_j) and their p-weighted total.
pub fn exact_gamma_mean(dgp: &DiscreteDgp) -> (Vec<f64>, f64) {
    exact_gamma_mean_with(dgp, &gamma_tu_unchecked)
}

pub fn exact_gamma_mean_with(dgp: &DiscreteDgp, kernel: &TuKernel) -> (Vec<f64>, f64) {
    let m = dgp.len();
    let rowwise: Vec<f64> = (0..m)
        .map(|i| (0..m).map(|j| dgp.probs[j] * dgp.gamma(kernel, i, j)).sum())
        .collect();
    let total = rowwise.iter().zip(&dgp.probs).map(|(r, p)| r * p).sum();
    (rowwise, total)
}

/// Γ evaluated at every pair of atoms.
pub fn exact_gamma_table(dgp: &DiscreteDgp, kernel: &TuKernel) -> Vec<Vec<f64>> {
    let m = dgp.len();
    (0..m).map(|i| (0..m).map(|j| dgp.gamma(kernel, i, j)).collect()).collect()
}

/// First-order gradient 2(rowwise − Ψ) at each atom.
pub fn first_order_gradient(dgp: &DiscreteDgp) -> Vec<f64> {
    let (rowwise, total) = exact_gamma_mean(dgp);
    rowwise.iter().map(|r| 2.0 * (r - total)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderBounds {
    /// P0²Γ_P − Ψ(P0).
    pub rem_psi: f64,
    /// ‖L‖₂‖M‖₂ + ‖L‖₁² + ‖M‖₄⁴.
    pub k0: f64,
    /// ‖L‖₁ + ‖M‖₂².
    pub k1: f64,
}

/// Remainder of the second-order expansion and its two bounds, with norms
/// taken under `dgp0`'s probabilities.
pub fn exact_remainder_bounds(dgp0: &DiscreteDgp, dgp_p: &DiscreteDgp) -> Result<RemainderBounds> {
    if dgp0.atoms != dgp_p.atoms || dgp0.probs != dgp_p.probs {
        return Err(Error::MismatchedSupport);
    }
    let (_, p0_gamma_p) = exact_gamma_mean(dgp_p);
    let rem_psi = p0_gamma_p - exact_psi(dgp0);
    let p = &dgp0.probs;
    let l: Vec<f64> = dgp_p.rem_r.iter().zip(&dgp_p.rem_s).map(|(a, b)| a.abs().max(b.abs())).collect();
    let mm: Vec<f64> = (0..dgp0.len())
        .map(|i| (dgp_p.r[i] - dgp0.r[i]).abs().max((dgp_p.s[i] - dgp0.s[i]).abs()))
        .collect();
    let norm = |v: &[f64], q: i32| -> f64 {
        v.iter().zip(p).map(|(x, p)| p * x.powi(q)).sum::<f64>().powf(1.0 / q as f64)
    };
    let (l1, l2) = (norm(&l, 1), norm(&l, 2));
    let (m2, m4) = (norm(&mm, 2), norm(&mm, 4));
    Ok(RemainderBounds {
        rem_psi,
        k0: l2 * m2 + l1 * l1 + m4.powi(4),
        k1: l1 + m2 * m2,
    })
}
