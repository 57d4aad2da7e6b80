//! The estimator ψ_n = 𝕌_n Γ_n, its null calibrations and the decision.

pub mod calibration;
pub mod eigen;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Calibration, TestConfig};
use crate::error::Result;
use crate::kernel::{centered_gram, gamma_matrix, FunctionalEvaluations, GammaMatrix};
use crate::rng::{streams, RngSeed};

pub use calibration::{
    cutoff_chebyshev, cutoff_degenerate_s, empirical_quantile, p_value_degenerate_s, quantile_mc, simulate_null,
    tail_fraction, DegenerateCutoff,
};
pub use eigen::{eigen_spectrum, eigen_spectrum_with, EigenSolver, EigenSpectrum};

/// Neumaier's compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::default();
        iter.into_iter().for_each(|x| s.add(x));
        s
    }
}

/// Compensated sum of f(Γ_ij) over i ≠ j; rows in parallel, reduced in
/// row order.
fn off_diagonal_sum(g: &GammaMatrix, f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let n = g.n();
    let m = g.values();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j| {
            // Column j of a symmetric matrix is contiguous in nalgebra.
            let col = m.column(j);
            (0..n)
                .filter(|&i| i != j)
                .map(|i| f(col[i]))
                .collect::<CompensatedSum>()
                .value()
        })
        .collect();
    rows.into_iter().collect::<CompensatedSum>().value()
}

/// 𝕌_n Γ = (1 / n(n − 1)) Σ_{i≠j} Γ(i, j).
pub fn u_statistic(g: &GammaMatrix) -> f64 {
    let n = g.n() as f64;
    off_diagonal_sum(g, |v| v) / (n * (n - 1.0))
}

/// 𝕌_n Γ² over i ≠ j.
pub fn second_moment(g: &GammaMatrix) -> f64 {
    let n = g.n() as f64;
    off_diagonal_sum(g, |v| v * v) / (n * (n - 1.0))
}

/// Mean over all n² entries.
pub fn v_statistic(g: &GammaMatrix) -> f64 {
    let n = g.n() as f64;
    g.values().iter().copied().collect::<CompensatedSum>().value() / (n * n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub psi_n: f64,
    pub n_psi_n: f64,
    pub cutoff: f64,
    pub method: Calibration,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub reject: bool,
    pub second_moment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<EigenSpectrum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r_sq_hat: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub zero_variance: bool,
    pub seed: RngSeed,
    pub bandwidth: f64,
    pub n: usize,
}

/// Rescales by the bandwidth, builds Γ_n, and calibrates per `config`.
pub fn run_test(fe: &FunctionalEvaluations, config: &TestConfig) -> Result<TestResult> {
    config.validate_for(fe.n())?;
    let fe = fe.rescaled(config.bandwidth)?;
    let g = gamma_matrix(&fe)?;
    let n = fe.n();
    let psi_n = u_statistic(&g);
    let n_psi_n = n as f64 * psi_n;
    let second = second_moment(&g);
    let mut result = TestResult {
        psi_n,
        n_psi_n,
        cutoff: 0.0,
        method: config.calibration,
        alpha: config.alpha,
        p_value: None,
        reject: false,
        second_moment: second,
        spectrum: None,
        sigma_r_sq_hat: None,
        zero_variance: false,
        seed: config.seed,
        bandwidth: config.bandwidth,
        n,
    };
    match config.calibration {
        Calibration::DegenerateS => {
            let c = cutoff_degenerate_s(&fe, config.alpha)?;
            result.cutoff = c.cutoff;
            result.sigma_r_sq_hat = Some(c.sigma_r_sq_hat);
            result.zero_variance = c.zero_variance;
            result.p_value = Some(p_value_degenerate_s(n_psi_n, c.sigma_r_sq_hat));
        }
        Calibration::GramEigen => {
            let spectrum = eigen_spectrum(&centered_gram(&g), config.eigen_count.resolve(n))?;
            let draws = simulate_null(
                &spectrum,
                config.mc_draws,
                config.seed.with_stream(streams::NULL_SIMULATION),
            );
            result.cutoff = empirical_quantile(&draws, config.alpha);
            result.p_value = Some(tail_fraction(&draws, n_psi_n));
            result.spectrum = Some(spectrum);
        }
        Calibration::Chebyshev => {
            result.cutoff = cutoff_chebyshev(second, config.alpha)?;
        }
    }
    result.reject = n_psi_n > result.cutoff;
    Ok(result)
}
