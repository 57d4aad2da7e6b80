//! Exact remainder of the treatment-effect functional on a discrete law.

use crate::oracle::DiscreteLaw;

/// Rem^R at the covariate value of each atom of `law`, for the working
/// outcome regression `mu_hat(a, w)` and propensity `pi1_hat(w)`:
///
/// ```text
/// Σ_ã (−1)^ã [1 − P0(A=ã∣w)/P(A=ã∣w)] [μ_P(ã, w) − μ_0(ã, w)]
/// ```
///
/// Zero whenever either nuisance is correct.
pub fn remainder_ex1(
    law: &DiscreteLaw,
    mu_hat: &dyn Fn(u8, &[f64]) -> f64,
    pi1_hat: &dyn Fn(&[f64]) -> f64,
) -> Vec<f64> {
    law.atoms()
        .iter()
        .map(|o| {
            let w = &o.w;
            let pi0_1 = law.prob_treated(w);
            let pi_1 = pi1_hat(w);
            [0u8, 1]
                .into_iter()
                .map(|a| {
                    let (p0, p) = if a == 1 { (pi0_1, pi_1) } else { (1.0 - pi0_1, 1.0 - pi_1) };
                    let sign = if a == 0 { 1.0 } else { -1.0 };
                    sign * (1.0 - p0 / p) * (mu_hat(a, w) - law.mean(Some(a), w))
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::Example;
    use crate::oracle::fixtures::ex1_law;
    use crate::oracle::WorkingModel;

    #[test]
    fn display_is_negated_generic_remainder() {
        // The generic remainder T_P − T_0 + E0[D_P ∣ x] carries the opposite
        // sign convention; magnitudes must agree.
        let law = ex1_law(false);
        let mu = |a: u8, w: &[f64]| law.mean(Some(a), w) + 0.1 * (1.0 + a as f64) * (w[0] - 0.3);
        let pi = |w: &[f64]| 0.5 + 0.1 * w[0];
        let display = remainder_ex1(&law, &mu, &pi);
        let model = WorkingModel::exact(&law)
            .with_mean(|a, w| mu(a.expect("treatment"), w))
            .with_prob_treated(pi);
        let generic = law.working_dgp(Example::Ex1, &model).unwrap().rem_r;
        for (d, g) in display.iter().zip(&generic) {
            assert!((d + g).abs() < 1e-14, "{d} vs {g}");
        }
        assert!(display.iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn correct_propensity_zero_remainder() {
        let law = ex1_law(true);
        let mu = |a: u8, w: &[f64]| 0.7 * a as f64 - w[0];
        let rem = remainder_ex1(&law, &mu, &|w| law.prob_treated(w));
        assert!(rem.iter().all(|v| v.abs() < 1e-12));
    }
}
