//! Acceptance criteria 1–11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::time::Instant;

use eqd_core::config::{Calibration, EigenCount, TestConfig};
use eqd_core::inference::calibration::{empirical_quantile, normal_critical, simulate_null, CHEBYSHEV_CONSTANT};
use eqd_core::inference::eigen_spectrum;
use eqd_core::kernel::{centered_gram, gamma_matrix, gamma_tu, FunctionalEvaluations};
use eqd_core::nuisance::{remainder_ex1, Example};
use eqd_core::oracle::fixtures::ex1_law;
use eqd_core::oracle::suite::remainder_ratio;
use eqd_core::oracle::{exact_gamma_mean, exact_psi, fixtures, random_fixture, Fixture};
use eqd_core::rng::RngSeed;
use eqd_core::simulation::{run_experiment, run_known, KnownDgp, RejectionRow, Scenario, ScenarioSpec, Variant};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const ALPHA: f64 = 0.05;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn all_fixtures() -> Vec<Fixture> {
    let mut fx = fixtures();
    fx.extend((0..200).map(|s| random_fixture(RngSeed::new(9_000 + s))));
    fx
}

fn row_text(r: &RejectionRow) -> String {
    format!("{} n={} rate={:.3} (se {:.3})", r.scenario, r.n, r.rate, r.mc_se)
}

fn criterion_1() -> Outcome {
    let fx = all_fixtures();
    let worst = fx
        .iter()
        .map(|f| (exact_gamma_mean(&f.dgp).1 - exact_psi(&f.dgp)).abs())
        .fold(0.0, f64::max);
    outcome(worst < 1e-12, format!("{} fixtures, max |P²Γ − Ψ| = {worst:.2e}", fx.len()))
}

fn criterion_2() -> Outcome {
    let fx: Vec<Fixture> = all_fixtures().into_iter().filter(|f| f.null).collect();
    let worst = fx
        .iter()
        .flat_map(|f| exact_gamma_mean(&f.dgp).0)
        .map(f64::abs)
        .fold(0.0, f64::max);
    outcome(
        !fx.is_empty() && worst < 1e-10,
        format!("{} null fixtures, max row mean = {worst:.2e}", fx.len()),
    )
}

fn criterion_3() -> Outcome {
    let n = 400;
    let mut rng = RngSeed::new(303).rng();
    let mut dr: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let fe0 = FunctionalEvaluations::scalar(vec![0.0; n], vec![0.0; n], dr.clone(), vec![0.0; n], 1.0).unwrap();
    let g = gamma_matrix(&fe0).unwrap();
    let mut elem = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            elem = elem.max((g.get(i, j) - 2.0 * dr[i] * dr[j]).abs());
        }
    }
    let mean = dr.iter().sum::<f64>() / n as f64;
    let expected = 2.0 / n as f64 * dr.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>();
    let spec = eigen_spectrum(&centered_gram(&g), None).unwrap();
    let eig_ok = spec.kept_count == 1 && (spec.lambda_hat[0] - expected).abs() < 1e-8;

    // Centered gradients make σ̂² = mean(dr²) equal to λ̂ / 2.
    dr.iter_mut().for_each(|d| *d -= mean);
    let fe = FunctionalEvaluations::scalar(vec![0.0; n], vec![0.0; n], dr.clone(), vec![0.0; n], 1.0).unwrap();
    let spec_c = eigen_spectrum(&centered_gram(&gamma_matrix(&fe).unwrap()), None).unwrap();
    let sigma = dr.iter().map(|d| d * d).sum::<f64>() / n as f64;
    let z = normal_critical(ALPHA);
    let closed = 2.0 * sigma * (z * z - 1.0);
    let q = empirical_quantile(&simulate_null(&spec_c, 100_000, RngSeed::new(304)), ALPHA);
    let rel = (q / closed - 1.0).abs();
    let chi = ChiSquared::new(1.0).unwrap().inverse_cdf(1.0 - ALPHA);
    let constant_ok = ((z * z - 1.0) * 2.0 - 2.0 * (chi - 1.0)).abs() < 1e-9;
    outcome(
        elem < 1e-12 && eig_ok && rel < 0.02 && constant_ok,
        format!(
            "max |Γ − 2 dr dr| = {elem:.1e}; kept {} eigenvalue(s), λ̂ = {:.10} vs {expected:.10}; \
             MC quantile {q:.4} vs 2σ̂²(z²−1) = {closed:.4} (rel {rel:.4}); 2(z²−1) = {:.7}",
            spec.kept_count,
            spec.lambda_hat.first().copied().unwrap_or(f64::NAN),
            2.0 * (z * z - 1.0)
        ),
    )
}

fn known_null(calibration: Calibration, seed: u64) -> RejectionRow {
    let cfg = TestConfig {
        calibration,
        alpha: ALPHA,
        ..TestConfig::default()
    };
    run_known(KnownDgp::Null, 500, 2000, &cfg, RngSeed::new(seed)).unwrap().row
}

fn criterion_4() -> Outcome {
    let r = known_null(Calibration::GramEigen, 404);
    outcome(
        (0.03..=0.07).contains(&r.rate) && r.failures == 0,
        format!("{} reps={}, band [0.03, 0.07]", row_text(&r), r.reps),
    )
}

fn criterion_5() -> Outcome {
    let r = known_null(Calibration::Chebyshev, 505);
    let constant_ok = CHEBYSHEV_CONSTANT >= 38f64.sqrt();
    outcome(
        r.rate <= ALPHA + 0.015 && constant_ok && r.failures == 0,
        format!(
            "{} reps={}, bound 0.065; 6.2 ≥ √38 = {:.4}",
            row_text(&r),
            r.reps,
            38f64.sqrt()
        ),
    )
}

fn scenario_row(scenario: Scenario, n: usize, reps: usize, calibration: Calibration, seed: u64) -> RejectionRow {
    let spec = ScenarioSpec::new(scenario, n, Example::Ex1, reps, RngSeed::new(seed));
    let cfg = TestConfig {
        calibration,
        alpha: ALPHA,
        ..TestConfig::default()
    };
    run_experiment(&spec, &cfg).unwrap().row
}

fn criterion_6() -> Outcome {
    let s = Scenario::S1 { variant: Variant::A };
    let small = scenario_row(s, 250, 500, Calibration::DegenerateS, 606);
    let large = scenario_row(s, 1000, 500, Calibration::DegenerateS, 607);
    outcome(
        large.rate <= 0.10 && large.rate <= small.rate + 2.0 * small.mc_se,
        format!("{}; {}", row_text(&small), row_text(&large)),
    )
}

fn criterion_7() -> Outcome {
    let s = Scenario::S1 { variant: Variant::C };
    let rows: Vec<RejectionRow> = [250, 500, 1000]
        .iter()
        .enumerate()
        .map(|(k, &n)| scenario_row(s, n, 500, Calibration::DegenerateS, 700 + k as u64))
        .collect();
    let increasing = rows.windows(2).all(|w| w[1].rate > w[0].rate);
    let powerful = rows[2].rate > 0.5;
    let text: Vec<String> = rows.iter().map(row_text).collect();
    outcome(increasing && powerful, text.join("; "))
}

fn criterion_8() -> Outcome {
    let mut rng = RngSeed::new(808).rng();
    let mut worst = 0.0f64;
    let mut largest_wrong = 0.0f64;
    for k in 0..100 {
        let law = ex1_law(k % 2 == 0);
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mu_hat = move |a: u8, w: &[f64]| c[0] + c[1] * w[0] + c[2] * w[0] * w[0] + a as f64 * (c[3] + c[4] * w[0]);
        let truth = law.clone();
        let rem = remainder_ex1(&law, &mu_hat, &|w| truth.prob_treated(w));
        worst = rem.iter().map(|v| v.abs()).fold(worst, f64::max);
        // Sanity: a wrong propensity leaves a visible remainder.
        let wrong = remainder_ex1(&law, &mu_hat, &|_| 0.5);
        largest_wrong = wrong.iter().map(|v| v.abs()).fold(largest_wrong, f64::max);
    }
    outcome(
        worst < 1e-10 && largest_wrong > 1e-3,
        format!("100 outcome regressions, max |Rem| = {worst:.2e} (wrong propensity: {largest_wrong:.3})"),
    )
}

fn criterion_9() -> Outcome {
    let fourth = remainder_ratio(true);
    let second = remainder_ratio(false);
    outcome(
        (fourth - 16.0).abs() <= 1.6 && (second - 4.0).abs() <= 0.4,
        format!("null ratio {fourth:.3} (16 ± 1.6), alternative ratio {second:.3} (4 ± 0.4)"),
    )
}

/// Γ^{TU} for scalars, written in the unexpanded form
/// [1 + 2BD^U]e^{−B²} − 2[B + (2B² − 1)D^U]D^T e^{−B²}, B = T − U.
fn gamma_scalar(t: f64, u: f64, dt: f64, du: f64) -> f64 {
    let b = t - u;
    let e = (-b * b).exp();
    (1.0 + 2.0 * b * du) * e - 2.0 * (b + (2.0 * b * b - 1.0) * du) * dt * e
}

fn criterion_10() -> Outcome {
    let mut rng = RngSeed::new(1010).rng();
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let v: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let multi = gamma_tu(&v[0..1], &v[1..2], &v[2..3], &v[3..4]).unwrap();
        worst = worst.max((multi - gamma_scalar(v[0], v[1], v[2], v[3])).abs());
    }
    let null = scenario_row(Scenario::S3 { signal_coords: 0 }, 1000, 200, Calibration::GramEigen, 1011);
    let signal = scenario_row(Scenario::S3 { signal_coords: 20 }, 1000, 200, Calibration::GramEigen, 1012);
    outcome(
        worst < 1e-14 && null.rate <= 0.10 && signal.rate >= null.rate,
        format!(
            "max |Γ_d − Γ| at d=1 over 10^4 inputs = {worst:.1e}; {}; {}",
            row_text(&null),
            row_text(&signal)
        ),
    )
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn criterion_11() -> Outcome {
    let cfg = TestConfig {
        calibration: Calibration::Chebyshev,
        eigen_count: EigenCount::Auto,
        ..TestConfig::default()
    };
    let small = run_known(KnownDgp::Alternative, 500, 500, &cfg, RngSeed::new(1111)).unwrap();
    let large = run_known(KnownDgp::Alternative, 2000, 500, &cfg, RngSeed::new(1112)).unwrap();
    let (s1, s2) = (sd(&small.psi_values()), sd(&large.psi_values()));
    let ratio = s1 / s2;
    outcome(
        (ratio - 2.0).abs() <= 0.5,
        format!("sd(ψ_n) {s1:.5} at n=500, {s2:.5} at n=2000, ratio {ratio:.3} (2 ± 0.5)"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("mean of Γ equals Ψ on discrete laws", criterion_1),
        ("Γ one-degenerate under the null", criterion_2),
        ("rank-one kernel and closed-form cutoff when S ≡ 0", criterion_3),
        ("null level with known nuisances, gram-eigen", criterion_4),
        ("Chebyshev bound is conservative", criterion_5),
        ("scenario 1a type I error", criterion_6),
        ("scenario 1c power grows with n", criterion_7),
        ("double robustness of the blip remainder", criterion_8),
        ("remainder orders under null and alternative", criterion_9),
        ("multivariate kernel reduction and scenario 3", criterion_10),
        ("root-n concentration under a fixed alternative", criterion_11),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            k + 1,
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
