//! Identity checks run by the `oracle-check` command and the test suite.

use rand::Rng;
use serde::Serialize;

use crate::kernel::TuKernel;
use crate::nuisance::{remainder_ex1, Example};
use crate::rng::RngSeed;

use super::fixtures::{ex1_law, ex3_law, fixtures, random_fixture, Fixture};
use super::law::{DiscreteLaw, WorkingModel};
use super::{exact_gamma_mean_with, exact_gamma_table, exact_psi, exact_remainder_bounds, DiscreteDgp};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    /// Worst deviation observed (or the tested ratio for order checks).
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn at_most(name: &'static str, value: f64, tolerance: f64) -> Self {
        IdentityCheck {
            name,
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

impl std::fmt::Display for IdentityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<34} value = {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Γ^{TU} with the δδ' coefficient 4 replaced by `c`; `c = 4` is the true
/// kernel. Used to confirm the suite catches formula mutations.
pub fn gamma_tu_variant(c: f64) -> impl Fn(&[f64], &[f64], &[f64], &[f64]) -> f64 + Sync + Copy {
    move |t1, u2, dt1, du2| {
        let (mut dist_sq, mut cross, mut dt_delta, mut du_delta, mut dt_du) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..t1.len() {
            let delta = t1[k] - u2[k];
            dist_sq += delta * delta;
            cross += delta * (du2[k] - dt1[k]);
            dt_delta += dt1[k] * delta;
            du_delta += du2[k] * delta;
            dt_du += dt1[k] * du2[k];
        }
        (2.0 * cross + 1.0 - (c * dt_delta * du_delta - 2.0 * dt_du)) * (-dist_sq).exp()
    }
}

const RANDOM_FIXTURES: u64 = 200;

fn all_law_fixtures() -> Vec<Fixture> {
    let mut out: Vec<Fixture> = fixtures().into_iter().filter(|f| f.law.is_some()).collect();
    out.extend((0..RANDOM_FIXTURES).map(|i| random_fixture(RngSeed::new(7).child(i))));
    out
}

/// Centered direction sin(i + 1) − mean; |h| ≤ 2.
fn direction(law: &DiscreteLaw) -> Vec<f64> {
    let raw: Vec<f64> = (0..law.len()).map(|i| ((i + 1) as f64).sin()).collect();
    let mean: f64 = raw.iter().zip(law.probs()).map(|(h, p)| h * p).sum();
    raw.iter().map(|h| h - mean).collect()
}

fn psi_along(law: &DiscreteLaw, example: Example, h: &[f64], t: f64) -> f64 {
    exact_psi(&law.perturbed(h, t).expect("small step").dgp(example).expect("fixture law"))
}

/// Pathwise derivative of Ψ against the first-order gradient 2(Γ̄_i − Ψ).
fn first_order_error(f: &Fixture, kernel: &TuKernel) -> f64 {
    let (law, ex) = (f.law.as_ref().unwrap(), f.example.unwrap());
    let h = direction(law);
    let t = 1e-4;
    let fd = (psi_along(law, ex, &h, t) - psi_along(law, ex, &h, -t)) / (2.0 * t);
    let (rowwise, total) = exact_gamma_mean_with(&f.dgp, kernel);
    let pred: f64 = (0..law.len())
        .map(|i| law.probs()[i] * 2.0 * (rowwise[i] - total) * h[i])
        .sum();
    (fd - pred).abs() / (1.0 + pred.abs())
}

/// Under the null, Ψ(P_t) = t²·P0²(Γ0 h⊗h) + O(t⁴) along symmetric steps.
fn second_order_error(f: &Fixture, kernel: &TuKernel) -> f64 {
    let (law, ex) = (f.law.as_ref().unwrap(), f.example.unwrap());
    let h = direction(law);
    let t = 1e-3;
    let fd = (psi_along(law, ex, &h, t) + psi_along(law, ex, &h, -t)) / (2.0 * t * t);
    let table = exact_gamma_table(&f.dgp, kernel);
    let p = law.probs();
    let mut pred = 0.0;
    for i in 0..law.len() {
        for j in 0..law.len() {
            pred += p[i] * p[j] * table[i][j] * h[i] * h[j];
        }
    }
    (fd - pred).abs() / (1.0 + pred.abs())
}

/// Sorted (value, mass) law of a scalar functional, merging equal values.
fn distribution(values: &[f64], probs: &[f64]) -> Vec<(f64, f64)> {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (v, p) in pairs {
        match merged.last_mut() {
            Some(last) if last.0 == v => last.1 += p,
            _ => merged.push((v, p)),
        }
    }
    merged.retain(|(_, p)| *p > 0.0);
    merged
}

fn same_distribution(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.0 == y.0 && (x.1 - y.1).abs() < 1e-12)
}

/// Ψ ≥ 0 always and Ψ = 0 exactly when R and S share a law; returns the
/// number of violations over `count` random value fixtures.
fn psi_characterization_violations(count: u64) -> f64 {
    let grid = [-0.5, 0.0, 0.5, 1.0];
    let mut violations = 0;
    for i in 0..count {
        let mut rng = RngSeed::new(11).child(i).rng();
        let m = rng.random_range(1..=4);
        let mut probs: Vec<f64> = (0..m).map(|_| rng.random_range(1..=3) as f64).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let r: Vec<f64> = (0..m).map(|_| grid[rng.random_range(0..grid.len())]).collect();
        // Half the fixtures permute r onto atoms of equal mass.
        let s: Vec<f64> = if rng.random_bool(0.5) {
            let mut s = r.clone();
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| probs[a].total_cmp(&probs[b]));
            for group in idx.chunk_by(|&a, &b| probs[a] == probs[b]) {
                for (k, &i) in group.iter().enumerate() {
                    s[i] = r[group[(k + 1) % group.len()]];
                }
            }
            s
        } else {
            (0..m).map(|_| grid[rng.random_range(0..grid.len())]).collect()
        };
        let dgp = DiscreteDgp::from_values(probs.clone(), r.clone(), s.clone(), vec![0.0; m], vec![0.0; m])
            .expect("sized");
        let psi = exact_psi(&dgp);
        let equal = same_distribution(&distribution(&r, &probs), &distribution(&s, &probs));
        let ok = psi >= -1e-15 && if equal { psi.abs() <= 1e-12 } else { psi > 1e-12 };
        if !ok {
            violations += 1;
        }
    }
    violations as f64
}

fn double_robustness_error() -> (f64, f64) {
    let law = ex1_law(false);
    let mut worst = 0.0f64;
    let mut rng = RngSeed::new(21).rng();
    for _ in 0..100 {
        let table: Vec<[f64; 2]> = (0..3).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let mu_hat = |a: u8, w: &[f64]| table[(w[0] + 1.0) as usize][a as usize];
        let pi_true = |w: &[f64]| law.prob_treated(w);
        let rem = remainder_ex1(&law, &mu_hat, &pi_true);
        worst = worst.max(rem.iter().fold(0.0, |m, v| m.max(v.abs())));

        let pis: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let pi_hat = |w: &[f64]| pis[(w[0] + 1.0) as usize];
        let mu_true = |a: u8, w: &[f64]| law.mean(Some(a), w);
        let rem = remainder_ex1(&law, &mu_true, &pi_hat);
        worst = worst.max(rem.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    // Both wrong: the remainder should be visibly nonzero.
    let mu_bad = |a: u8, w: &[f64]| law.mean(Some(a), w) + 0.2 * (a as f64 + w[0]);
    let pi_bad = |_: &[f64]| 0.5;
    let both = remainder_ex1(&law, &mu_bad, &pi_bad)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    (worst, both)
}

/// rem(0.04)/rem(0.02) for a mean shift of the working regression.
pub fn remainder_ratio(null: bool) -> f64 {
    let law = ex3_law(null);
    let dgp0 = law.dgp(Example::Ex3).expect("fixture");
    let rem = |eps: f64| {
        let shift = |w: &[f64]| eps * [0.5, -1.0, 0.8][(w[0] + 1.0) as usize];
        let model = WorkingModel::exact(&law).with_mean(|a, w| law.mean(a, w) + shift(w));
        let dgp_p = law.working_dgp(Example::Ex3, &model).expect("fixture");
        exact_remainder_bounds(&dgp0, &dgp_p).expect("shared support").rem_psi
    };
    rem(0.04) / rem(0.02)
}

/// Runs every identity with `kernel` standing in for Γ^{TU}.
pub fn run_identity_suite(kernel: &TuKernel) -> Vec<IdentityCheck> {
    let laws = all_law_fixtures();
    let mut every: Vec<&DiscreteDgp> = laws.iter().map(|f| &f.dgp).collect();
    let swap = super::fixtures::swap_fixture();
    every.push(&swap);
    let mut checks = Vec::new();

    let eq3 = every
        .iter()
        .map(|d| (exact_gamma_mean_with(d, kernel).1 - exact_psi(d)).abs())
        .fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("mean-of-gamma-equals-psi", eq3, 1e-12));

    let nulls: Vec<&Fixture> = laws.iter().filter(|f| f.null).collect();
    let degeneracy = nulls
        .iter()
        .map(|f| &f.dgp)
        .chain(std::iter::once(&swap))
        .map(|d| exact_gamma_mean_with(d, kernel).0.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("one-degenerate-under-null", degeneracy, 1e-10));

    let alt_strength = laws
        .iter()
        .filter(|f| !f.null)
        .map(|f| exact_gamma_mean_with(&f.dgp, kernel).0.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    checks.push(IdentityCheck {
        name: "not-degenerate-under-alternative",
        value: alt_strength,
        tolerance: 1e-6,
        passed: alt_strength > 1e-6,
    });

    let cond_mean = laws
        .iter()
        .map(|f| {
            let (r, s) = f.dgp.conditional_gradient_means();
            r.max(s)
        })
        .fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("gradients-conditionally-centered", cond_mean, 1e-10));

    let first = laws
        .iter()
        .filter(|f| !f.null)
        .map(|f| first_order_error(f, kernel))
        .fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("first-order-gradient", first, 1e-6));

    let second = nulls.iter().map(|f| second_order_error(f, kernel)).fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("second-order-gradient-under-null", second, 1e-5));

    let rank_one = laws
        .iter()
        .filter(|f| f.null && matches!(f.example, Some(Example::Ex1 | Example::Ex3)))
        .map(|f| {
            let table = exact_gamma_table(&f.dgp, kernel);
            let dr = &f.dgp.dr;
            let mut worst = 0.0f64;
            for i in 0..dr.len() {
                for j in 0..dr.len() {
                    worst = worst.max((table[i][j] - 2.0 * dr[i] * dr[j]).abs());
                }
            }
            worst
        })
        .fold(0.0, f64::max);
    checks.push(IdentityCheck::at_most("rank-one-kernel-when-s-zero", rank_one, 1e-12));

    // Constant R and S with equal, centered gradients: D_1 vanishes.
    let ex3 = laws.iter().find(|f| f.name == "ex3-null").expect("fixture present");
    let m = ex3.dgp.len();
    let constant = DiscreteDgp {
        r: vec![0.4; m],
        s: vec![-0.3; m],
        ds: ex3.dgp.dr.clone(),
        ..ex3.dgp.clone()
    };
    let (rowwise, total) = exact_gamma_mean_with(&constant, kernel);
    let d1 = rowwise.iter().fold(0.0, |acc: f64, r| acc.max((2.0 * (r - total)).abs()));
    checks.push(IdentityCheck::at_most("constant-functionals-no-first-order", d1, 1e-12));

    checks.push(IdentityCheck::at_most(
        "psi-characterizes-equal-laws",
        psi_characterization_violations(1000),
        0.0,
    ));

    let (dr_err, both) = double_robustness_error();
    checks.push(IdentityCheck::at_most("double-robust-remainder", dr_err, 1e-10));
    checks.push(IdentityCheck {
        name: "remainder-nonzero-when-both-wrong",
        value: both,
        tolerance: 1e-6,
        passed: both > 1e-6,
    });

    let r0 = remainder_ratio(true);
    checks.push(IdentityCheck {
        name: "fourth-order-remainder-under-null",
        value: r0,
        tolerance: 1.6,
        passed: (r0 - 16.0).abs() <= 1.6,
    });
    let r1 = remainder_ratio(false);
    checks.push(IdentityCheck {
        name: "second-order-remainder-otherwise",
        value: r1,
        tolerance: 0.4,
        passed: (r1 - 4.0).abs() <= 0.4,
    });
    checks
}
