//! Null cutoffs for nψ_n.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::eigen::EigenSpectrum;
use crate::error::{Error, Result};
use crate::kernel::FunctionalEvaluations;
use crate::rng::RngSeed;

const BLOCK: usize = 4096;

/// The only level at which the Chebyshev constant applies.
pub const CHEBYSHEV_ALPHA: f64 = 0.05;
pub const CHEBYSHEV_CONSTANT: f64 = 6.2;

/// `draws` replicates of Σ_k λ̂_k (Z_k² − 1), sorted ascending. Blocks of
/// draws use child seeds, so the result does not depend on thread count.
pub fn simulate_null(spectrum: &EigenSpectrum, draws: usize, seed: RngSeed) -> Vec<f64> {
    let lambda = &spectrum.lambda_hat;
    let blocks = draws.div_ceil(BLOCK);
    let mut out: Vec<f64> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let len = BLOCK.min(draws - b * BLOCK);
            let mut rng = seed.child(b as u64).rng();
            (0..len)
                .map(|_| {
                    lambda
                        .iter()
                        .map(|l| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            l * (z * z - 1.0)
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Empirical (1 − α) quantile: the ⌈(1 − α)B⌉-th order statistic.
pub fn empirical_quantile(sorted: &[f64], alpha: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let b = sorted.len();
    let rank = ((1.0 - alpha) * b as f64).ceil() as usize;
    sorted[rank.clamp(1, b) - 1]
}

/// Fraction of null draws at or above `stat`.
pub fn tail_fraction(sorted: &[f64], stat: f64) -> f64 {
    if sorted.is_empty() {
        return if stat <= 0.0 { 1.0 } else { 0.0 };
    }
    let below = sorted.partition_point(|&v| v < stat);
    (sorted.len() - below) as f64 / sorted.len() as f64
}

/// Monte Carlo (1 − α) quantile of Σ λ̂_k (Z_k² − 1); 0 for an empty
/// spectrum.
pub fn quantile_mc(spectrum: &EigenSpectrum, alpha: f64, mc_draws: usize, seed: RngSeed) -> f64 {
    if spectrum.is_empty() {
        return 0.0;
    }
    empirical_quantile(&simulate_null(spectrum, mc_draws, seed), alpha)
}

/// z_{1−α/2}.
pub fn normal_critical(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateCutoff {
    pub cutoff: f64,
    pub sigma_r_sq_hat: f64,
    /// σ̂_R² = 0: the cutoff collapses to 0.
    pub zero_variance: bool,
}

/// 2(z²_{1−α/2} − 1)·mean(dr²), valid when S ≡ 0 and the outcome is scalar.
pub fn cutoff_degenerate_s(fe: &FunctionalEvaluations, alpha: f64) -> Result<DegenerateCutoff> {
    if fe.dim() != 1 || !fe.is_degenerate_s() {
        return Err(Error::NotDegenerateS);
    }
    let sigma = fe.dr_values().iter().map(|v| v * v).sum::<f64>() / fe.n() as f64;
    let z = normal_critical(alpha);
    Ok(DegenerateCutoff {
        cutoff: 2.0 * (z * z - 1.0) * sigma,
        sigma_r_sq_hat: sigma,
        zero_variance: sigma == 0.0,
    })
}

/// P(Z² − 1 ≥ nψ_n / (2σ̂²)).
pub fn p_value_degenerate_s(n_psi_n: f64, sigma_r_sq_hat: f64) -> f64 {
    if sigma_r_sq_hat <= 0.0 {
        return if n_psi_n <= 0.0 { 1.0 } else { 0.0 };
    }
    let x = 1.0 + n_psi_n / (2.0 * sigma_r_sq_hat);
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(1.0).expect("one degree of freedom").sf(x)
}

/// 6.2·(𝕌_n Γ²)^{1/2}, available only at α = 0.05.
pub fn cutoff_chebyshev(second_moment: f64, alpha: f64) -> Result<f64> {
    if (alpha - CHEBYSHEV_ALPHA).abs() > 1e-12 {
        return Err(Error::UnsupportedAlpha(alpha));
    }
    Ok(CHEBYSHEV_CONSTANT * second_moment.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(l: Vec<f64>) -> EigenSpectrum {
        EigenSpectrum {
            kept_count: l.len(),
            lambda_hat: l,
            ..Default::default()
        }
    }

    #[test]
    fn empty_spectrum_zero_quantile() {
        assert_eq!(quantile_mc(&EigenSpectrum::default(), 0.05, 1000, RngSeed::new(1)), 0.0);
    }

    #[test]
    fn single_unit_eigenvalue_matches_chi_square() {
        let q = quantile_mc(&spectrum(vec![1.0]), 0.05, 100_000, RngSeed::new(2));
        // χ²₁ 0.95 quantile minus one.
        let exact = ChiSquared::new(1.0).unwrap().inverse_cdf(0.95) - 1.0;
        assert!((exact - 2.841_458_8).abs() < 1e-6);
        assert!((q - exact).abs() < 0.05, "{q}");
    }

    #[test]
    fn quantile_scales_linearly() {
        let s = spectrum(vec![0.7, 0.2, 0.05]);
        let seed = RngSeed::new(3);
        let q = quantile_mc(&s, 0.1, 20_000, seed);
        let q2 = quantile_mc(&s.scaled(2.0), 0.1, 20_000, seed);
        assert_eq!(q2, 2.0 * q);
        let q3 = quantile_mc(&s.scaled(0.37), 0.1, 20_000, seed);
        assert!((q3 - 0.37 * q).abs() < 1e-12 * q.abs());
    }

    #[test]
    fn quantile_and_tail_conventions() {
        let sorted: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        assert_eq!(empirical_quantile(&sorted, 0.05), 95.0);
        assert_eq!(tail_fraction(&sorted, 95.0), 0.06);
        assert_eq!(tail_fraction(&sorted, 95.5), 0.05);
        assert_eq!(tail_fraction(&sorted, 0.0), 1.0);
    }

    #[test]
    fn degenerate_s_constant() {
        let fe = FunctionalEvaluations::scalar(vec![0.0; 2], vec![0.0; 2], vec![1.0, -1.0], vec![0.0; 2], 1.0).unwrap();
        let c = cutoff_degenerate_s(&fe, 0.05).unwrap();
        assert_eq!(c.sigma_r_sq_hat, 1.0);
        let z: f64 = 1.959_963_984_540_054;
        assert!((normal_critical(0.05) - z).abs() < 1e-9);
        assert!((c.cutoff - 2.0 * (z * z - 1.0)).abs() < 1e-8);
        assert!((c.cutoff - 5.682_917_9).abs() < 1e-6);
        // The 1.96 rounding gives 5.6832.
        assert!((2.0 * (1.96f64 * 1.96 - 1.0) - 5.6832).abs() < 1e-12);
    }

    #[test]
    fn degenerate_s_scale_and_zero_variance() {
        let dr = vec![0.3, -0.8, 1.1];
        let fe = FunctionalEvaluations::scalar(vec![0.0; 3], vec![0.0; 3], dr.clone(), vec![0.0; 3], 1.0).unwrap();
        let fe2 = FunctionalEvaluations::scalar(
            vec![0.0; 3],
            vec![0.0; 3],
            dr.iter().map(|v| v * 2f64.sqrt()).collect(),
            vec![0.0; 3],
            1.0,
        )
        .unwrap();
        let a = cutoff_degenerate_s(&fe, 0.05).unwrap().cutoff;
        let b = cutoff_degenerate_s(&fe2, 0.05).unwrap().cutoff;
        assert!((b - 2.0 * a).abs() < 1e-12);
        let zero = FunctionalEvaluations::scalar(vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], vec![0.0; 3], 1.0).unwrap();
        let c = cutoff_degenerate_s(&zero, 0.05).unwrap();
        assert!(c.zero_variance && c.cutoff == 0.0);
        let not = FunctionalEvaluations::scalar(vec![0.0; 3], vec![0.1; 3], vec![0.0; 3], vec![0.0; 3], 1.0).unwrap();
        assert!(matches!(cutoff_degenerate_s(&not, 0.05), Err(Error::NotDegenerateS)));
    }

    #[test]
    fn degenerate_p_value_matches_cutoff() {
        let c = 2.0 * (normal_critical(0.05).powi(2) - 1.0);
        assert!((p_value_degenerate_s(c, 1.0) - 0.05).abs() < 1e-9);
        assert_eq!(p_value_degenerate_s(-5.0, 1.0), 1.0);
    }

    #[test]
    fn chebyshev_bound() {
        assert_eq!(cutoff_chebyshev(0.0, 0.05).unwrap(), 0.0);
        assert_eq!(cutoff_chebyshev(1.0, 0.05).unwrap(), 6.2);
        assert!(matches!(cutoff_chebyshev(1.0, 0.1), Err(Error::UnsupportedAlpha(_))));
        // One-sided Chebyshev at 0.05 needs t = √19 standard deviations of
        // a variate with variance 2·P²Γ².
        assert!(CHEBYSHEV_CONSTANT >= 2f64.sqrt() * 19f64.sqrt());
        assert!((38f64.sqrt() - 6.164_414).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn chebyshev_monotone(a in 0.0f64..100.0, b in 0.0f64..100.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(cutoff_chebyshev(lo, 0.05).unwrap() <= cutoff_chebyshev(hi, 0.05).unwrap());
        }
    }
}
