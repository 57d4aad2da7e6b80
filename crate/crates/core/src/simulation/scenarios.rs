//! Data-generating processes for the three simulation scenarios.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, Schema};
use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Outcome coordinates in scenario 3.
pub const SCENARIO3_DIM: usize = 20;
const SCENARIO1_W_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    A,
    B,
    C,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::A => "a",
            Variant::B => "b",
            Variant::C => "c",
        })
    }
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// m(a, w) = 0.2(w1² + w2 − 2 w3 w4).
fn base_mean(w: &[f64]) -> f64 {
    0.2 * (w[0] * w[0] + w[1] - 2.0 * w[2] * w[3])
}

/// μ(a, w) for scenario 1.
pub fn scenario1_mean(variant: Variant, a: u8, w: &[f64]) -> f64 {
    let a = a as f64;
    base_mean(w)
        + match variant {
            Variant::A => 0.0,
            Variant::B => 0.4 * (a * w[2] + (1.0 - a) * w[3]),
            Variant::C => 0.8 * a * w[2],
        }
}

/// μ(1, w) − μ(0, w) for scenario 1.
pub fn scenario1_blip(variant: Variant, w: &[f64]) -> f64 {
    scenario1_mean(variant, 1, w) - scenario1_mean(variant, 0, w)
}

/// Shape parameters (3 expit(a w2), 2 expit((1 − a) w1)) of the noise.
pub fn noise_shapes(a: u8, w: &[f64]) -> (f64, f64) {
    let a = a as f64;
    (3.0 * expit(a * w[1]), 2.0 * expit((1.0 - a) * w[0]))
}

/// One draw of 5ξ(a, w): a Beta variate shifted to mean zero, times 5.
pub fn scaled_noise(a: u8, w: &[f64], rng: &mut ChaCha8Rng) -> f64 {
    let (alpha, beta) = noise_shapes(a, w);
    assert!(alpha > 1e-8 && beta > 1e-8, "degenerate Beta shapes ({alpha}, {beta})");
    let b = Beta::new(alpha, beta).expect("positive shapes").sample(rng);
    let v = 5.0 * (b - alpha / (alpha + beta));
    assert!(v.abs() <= 5.0);
    v
}

fn covariates_and_treatment(rng: &mut ChaCha8Rng) -> (Vec<f64>, u8) {
    let w: Vec<f64> = (0..SCENARIO1_W_DIM).map(|_| StandardNormal.sample(rng)).collect();
    let a = rng.random_bool(0.5) as u8;
    (w, a)
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    }
    Ok(())
}

/// W ~ N(0, I₅), A ~ Bernoulli(1/2), Y = μ(A, W) + 5ξ(A, W).
pub fn draw_scenario1(variant: Variant, n: usize, seed: RngSeed) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = seed.rng();
    let obs: Vec<Observation> = (0..n)
        .map(|_| {
            let (w, a) = covariates_and_treatment(&mut rng);
            let y = scenario1_mean(variant, a, &w) + scaled_noise(a, &w, &mut rng);
            Observation::new(w, Some(a), vec![y])
        })
        .collect();
    Dataset::from_observations(&obs, Schema::generated(SCENARIO1_W_DIM, true, 1))
}

/// μ(a, w) = 1 + βa(1 + w2²) + w1 + w2.
pub fn scenario2_mean(beta: f64, a: u8, w: &[f64]) -> f64 {
    1.0 + beta * a as f64 * (1.0 + w[1] * w[1]) + w[0] + w[1]
}

/// A, W1 ~ Bernoulli(1/2), W2 ~ N(0, 1), Y = μ(A, W) + ε with ε ~ N(0, 1).
pub fn draw_scenario2(beta: f64, n: usize, seed: RngSeed) -> Result<Dataset> {
    check_n(n)?;
    let mut rng = seed.rng();
    let obs: Vec<Observation> = (0..n)
        .map(|_| {
            let a = rng.random_bool(0.5) as u8;
            let w1 = rng.random_bool(0.5) as u8 as f64;
            let w2: f64 = StandardNormal.sample(&mut rng);
            let w = vec![w1, w2];
            let eps: f64 = StandardNormal.sample(&mut rng);
            let y = scenario2_mean(beta, a, &w) + eps;
            Observation::new(w, Some(a), vec![y])
        })
        .collect();
    Dataset::from_observations(&obs, Schema::generated(2, true, 1))
}

/// Twenty outcome coordinates, conditionally independent given (A, W). The
/// first `signal_coords` follow scenario 1c and the rest scenario 1a, each
/// divided by 20.
pub fn draw_scenario3(signal_coords: usize, n: usize, seed: RngSeed) -> Result<Dataset> {
    check_n(n)?;
    if signal_coords > SCENARIO3_DIM {
        return Err(Error::InvalidConfig(format!(
            "signal_coords must lie in 0..={SCENARIO3_DIM}, got {signal_coords}"
        )));
    }
    let scale = 1.0 / SCENARIO3_DIM as f64;
    let mut rng = seed.rng();
    let obs: Vec<Observation> = (0..n)
        .map(|_| {
            let (w, a) = covariates_and_treatment(&mut rng);
            let y = (0..SCENARIO3_DIM)
                .map(|j| {
                    let variant = if j < signal_coords { Variant::C } else { Variant::A };
                    scale * (scenario1_mean(variant, a, &w) + scaled_noise(a, &w, &mut rng))
                })
                .collect();
            Observation::new(w, Some(a), y)
        })
        .collect();
    Dataset::from_observations(&obs, Schema::generated(SCENARIO1_W_DIM, true, SCENARIO3_DIM))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    }

    #[test]
    fn variant_a_has_no_blip() {
        let d = draw_scenario1(Variant::A, 200, RngSeed::new(1)).unwrap();
        for i in 0..d.n() {
            assert_eq!(scenario1_blip(Variant::A, d.w_row(i)), 0.0);
        }
    }

    #[test]
    fn variant_blips() {
        let w = [0.3, -1.2, 0.7, 2.0, 0.1];
        assert!((scenario1_blip(Variant::C, &w) - 0.8 * 0.7).abs() < 1e-15);
        assert!((scenario1_blip(Variant::B, &w) - 0.4 * (0.7 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn noise_centered_and_bounded() {
        let mut rng = RngSeed::new(2).rng();
        for (a, w) in [(1u8, [0.5, -2.0, 0.0, 0.0, 0.0]), (0, [3.0, 1.0, 0.0, 0.0, 0.0])] {
            let draws: Vec<f64> = (0..1_000_000).map(|_| scaled_noise(a, &w, &mut rng)).collect();
            assert!(draws.iter().all(|v| v.abs() <= 5.0));
            let (m, sd) = mean_sd(&draws);
            assert!(m.abs() < 0.02, "{m}");
            assert!(sd < 2.5);
        }
    }

    #[test]
    fn extreme_covariates_keep_shapes_positive() {
        let (a1, b1) = noise_shapes(1, &[-15.0, -15.0, 0.0, 0.0, 0.0]);
        let (a0, b0) = noise_shapes(0, &[-15.0, -15.0, 0.0, 0.0, 0.0]);
        assert!(a1 > 1e-8 && b1 > 1e-8 && a0 > 1e-8 && b0 > 1e-8);
    }

    #[test]
    fn scenario2_null_switch_and_mean() {
        assert_eq!(scenario2_mean(0.0, 1, &[1.0, 0.4]), scenario2_mean(0.0, 0, &[1.0, 0.4]));
        assert!((scenario2_mean(0.5, 1, &[0.0, 0.0]) - scenario2_mean(0.5, 0, &[0.0, 0.0]) - 0.5).abs() < 1e-15);
        assert_ne!(scenario2_mean(-0.2, 1, &[0.0, 1.0]), scenario2_mean(-0.2, 0, &[0.0, 1.0]));
        let d = draw_scenario2(0.0, 1_000_000, RngSeed::new(3)).unwrap();
        let (m, _) = mean_sd(d.outcomes());
        assert!((m - 1.5).abs() < 0.01, "{m}");
    }

    #[test]
    fn scenario3_dimensions_and_scaling() {
        let d = draw_scenario3(20, 20_000, RngSeed::new(4)).unwrap();
        assert_eq!(d.y_dim(), 20);
        assert_eq!(d.w_dim(), 5);
        let s1 = draw_scenario1(Variant::C, 20_000, RngSeed::new(5)).unwrap();
        let (_, sd1) = mean_sd(s1.outcomes());
        let coord: Vec<f64> = (0..d.n()).map(|i| d.y_row(i)[3]).collect();
        let (_, sd3) = mean_sd(&coord);
        assert!((20.0 * sd3 / sd1 - 1.0).abs() < 0.05, "{sd3} vs {sd1}");
        assert!(draw_scenario3(21, 5, RngSeed::new(1)).is_err());
    }

    #[test]
    fn scenario3_slice_matches_scenario1c_moments() {
        let n = 100_000;
        let d3 = draw_scenario3(20, n, RngSeed::new(6)).unwrap();
        let d1 = draw_scenario1(Variant::C, n, RngSeed::new(7)).unwrap();
        let slice = |d: &Dataset, scale: f64| -> Vec<Vec<f64>> {
            // y, a·y, y·w3
            let mut out = vec![Vec::with_capacity(n); 3];
            for i in 0..n {
                let y = scale * d.y_row(i)[0];
                let a = d.treatment().unwrap()[i] as f64;
                out[0].push(y);
                out[1].push(a * y);
                out[2].push(y * d.w_row(i)[2]);
            }
            out
        };
        for (x, y) in slice(&d3, 20.0).iter().zip(slice(&d1, 1.0).iter()) {
            let (mx, sx) = mean_sd(x);
            let (my, sy) = mean_sd(y);
            let se = ((sx * sx + sy * sy) / n as f64).sqrt();
            assert!((mx - my).abs() < 3.0 * se, "{mx} vs {my}");
        }
    }

    #[test]
    fn draws_deterministic() {
        let a = draw_scenario1(Variant::B, 50, RngSeed::new(9)).unwrap();
        let b = draw_scenario1(Variant::B, 50, RngSeed::new(9)).unwrap();
        assert_eq!(a.outcomes(), b.outcomes());
        assert!(draw_scenario1(Variant::A, 0, RngSeed::new(9)).is_err());
    }
}
