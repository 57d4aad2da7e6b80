//! Enumerated oracle fixtures. Laws are built in code so a failing identity
//! points straight at a formula.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::nuisance::Example;
use crate::rng::RngSeed;

use super::law::{Cell, DiscreteLaw};
use super::DiscreteDgp;

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    /// True when R_0(O) and S_0(O) are equal in distribution.
    pub null: bool,
    pub example: Option<Example>,
    pub law: Option<DiscreteLaw>,
    pub dgp: DiscreteDgp,
}

/// Two-point law for Y with mean `mu`: Y ∈ {mu − lo, mu + hi}.
fn two_point(mu: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    vec![(mu - lo, hi / (lo + hi)), (mu + hi, lo / (lo + hi))]
}

const W3: [f64; 3] = [-1.0, 0.0, 1.0];
const PW3: [f64; 3] = [0.3, 0.4, 0.3];

/// Treatment-effect law on W ∈ {−1, 0, 1}; the effect 0.3w vanishes when
/// `null`.
pub fn ex1_law(null: bool) -> DiscreteLaw {
    let pi1 = [0.3, 0.5, 0.7];
    let mut cells = Vec::new();
    for ((&w, &pw), &p1) in W3.iter().zip(&PW3).zip(&pi1) {
        let base = 0.2 * w + 0.1;
        let effect = if null { 0.0 } else { 0.3 * w };
        cells.push(Cell {
            w: vec![w],
            a: Some(1),
            prob: pw * p1,
            outcomes: two_point(base + effect, 0.4, 0.2),
        });
        cells.push(Cell {
            w: vec![w],
            a: Some(0),
            prob: pw * (1.0 - p1),
            outcomes: two_point(base, 0.3, 0.3),
        });
    }
    DiscreteLaw::from_cells(&cells).expect("valid fixture")
}

/// Two populations on W ∈ {0, 1}. Under the null μ(1, ·) = (0.3, −0.2) and
/// μ(0, ·) = (−0.2, 0.3): equal in distribution, different pointwise.
pub fn ex2_law(null: bool) -> DiscreteLaw {
    let mu1 = if null { [0.3, -0.2] } else { [0.3, 0.2] };
    let mu0 = [-0.2, 0.3];
    let mut cells = Vec::new();
    for (k, w) in [0.0, 1.0].into_iter().enumerate() {
        cells.push(Cell {
            w: vec![w],
            a: Some(1),
            prob: 0.25,
            outcomes: two_point(mu1[k], 0.25, 0.35),
        });
        cells.push(Cell {
            w: vec![w],
            a: Some(0),
            prob: 0.25,
            outcomes: two_point(mu0[k], 0.3, 0.2),
        });
    }
    DiscreteLaw::from_cells(&cells).expect("valid fixture")
}

/// Conditional-mean law on W ∈ {−1, 0, 1}; E(Y ∣ W) ≡ 0 when `null`.
pub fn ex3_law(null: bool) -> DiscreteLaw {
    let cells: Vec<Cell> = W3
        .iter()
        .zip(&PW3)
        .map(|(&w, &pw)| Cell {
            w: vec![w],
            a: None,
            prob: pw,
            outcomes: two_point(if null { 0.0 } else { 0.3 * w + 0.1 }, 0.4, 0.2),
        })
        .collect();
    DiscreteLaw::from_cells(&cells).expect("valid fixture")
}

pub const EX4_EXAMPLE: Example = Example::Ex4 { k: 1, p: 0.4 };

/// Variable-importance law on W ∈ {0, 1}² with an independent artificial
/// A ~ Bernoulli(0.4); W_2 is irrelevant when `null`.
pub fn ex4_law(null: bool) -> DiscreteLaw {
    let mut cells = Vec::new();
    for w1 in [0.0, 1.0] {
        for w2 in [0.0, 1.0] {
            let mu = 0.3 * w1 - 0.1 + if null { 0.0 } else { 0.2 * w2 };
            for (a, pa) in [(1u8, 0.4), (0u8, 0.6)] {
                cells.push(Cell {
                    w: vec![w1, w2],
                    a: Some(a),
                    prob: 0.25 * pa,
                    outcomes: two_point(mu, 0.2, 0.3),
                });
            }
        }
    }
    DiscreteLaw::from_cells(&cells).expect("valid fixture")
}

/// r = (0, 1), s = (1, 0) on two equiprobable atoms.
pub fn swap_fixture() -> DiscreteDgp {
    DiscreteDgp::from_values(vec![0.5, 0.5], vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0; 2], vec![0.0; 2])
        .expect("valid fixture")
}

fn law_fixture(name: &str, example: Example, law: DiscreteLaw, null: bool) -> Fixture {
    let dgp = law.dgp(example).expect("fixture law matches example");
    Fixture {
        name: name.to_string(),
        null,
        example: Some(example),
        law: Some(law),
        dgp,
    }
}

/// The deterministic fixture set.
pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "swap".into(),
            null: true,
            example: None,
            law: None,
            dgp: swap_fixture(),
        },
        law_fixture("ex1-null", Example::Ex1, ex1_law(true), true),
        law_fixture("ex1-alt", Example::Ex1, ex1_law(false), false),
        law_fixture("ex2-null", Example::Ex2, ex2_law(true), true),
        law_fixture("ex2-alt", Example::Ex2, ex2_law(false), false),
        law_fixture("ex3-null", Example::Ex3, ex3_law(true), true),
        law_fixture("ex3-alt", Example::Ex3, ex3_law(false), false),
        law_fixture("ex4-null", EX4_EXAMPLE, ex4_law(true), true),
        law_fixture("ex4-alt", EX4_EXAMPLE, ex4_law(false), false),
    ]
}

/// A random small law for one of the four examples, null or not.
pub fn random_fixture(seed: RngSeed) -> Fixture {
    let mut rng = seed.rng();
    let null = rng.random_bool(0.5);
    let which = rng.random_range(0..4);
    let m = rng.random_range(2..=4);
    let mut pw: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..1.0)).collect();
    if which == 1 && null {
        // Equal distribution via permutation needs equal covariate masses.
        pw = vec![1.0; m];
    }
    let total: f64 = pw.iter().sum();
    pw.iter_mut().for_each(|p| *p /= total);
    let noise = |rng: &mut rand_chacha::ChaCha8Rng, mu: f64| {
        two_point(mu, rng.random_range(0.05..0.4), rng.random_range(0.05..0.4))
    };
    let means: Vec<f64> = (0..m).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut cells = Vec::new();
    let example = match which {
        0 | 1 => {
            let mu1 = means.clone();
            let mu0: Vec<f64> = if !null {
                (0..m).map(|_| rng.random_range(-0.5..0.5)).collect()
            } else if which == 0 {
                means.clone()
            } else {
                let mut perm = means.clone();
                perm.shuffle(&mut rng);
                perm
            };
            for k in 0..m {
                let p1 = rng.random_range(0.2..0.8);
                let w = vec![k as f64];
                cells.push(Cell {
                    w: w.clone(),
                    a: Some(1),
                    prob: pw[k] * p1,
                    outcomes: noise(&mut rng, mu1[k]),
                });
                cells.push(Cell {
                    w,
                    a: Some(0),
                    prob: pw[k] * (1.0 - p1),
                    outcomes: noise(&mut rng, mu0[k]),
                });
            }
            if which == 0 {
                Example::Ex1
            } else {
                Example::Ex2
            }
        }
        2 => {
            for k in 0..m {
                let mu = if null { 0.0 } else { means[k] };
                cells.push(Cell {
                    w: vec![k as f64],
                    a: None,
                    prob: pw[k],
                    outcomes: noise(&mut rng, mu),
                });
            }
            Example::Ex3
        }
        _ => {
            let p = rng.random_range(0.2..0.8);
            for k in 0..m {
                for w2 in [0.0, 1.0] {
                    let mu = means[k] + if null { 0.0 } else { 0.3 * w2 - 0.1 };
                    let y = noise(&mut rng, mu);
                    for (a, pa) in [(1u8, p), (0u8, 1.0 - p)] {
                        cells.push(Cell {
                            w: vec![k as f64, w2],
                            a: Some(a),
                            prob: pw[k] * 0.5 * pa,
                            outcomes: y.clone(),
                        });
                    }
                }
            }
            Example::Ex4 { k: 1, p }
        }
    };
    let law = DiscreteLaw::from_cells(&cells).expect("valid random law");
    let name = format!("random-{}-{}", example, if null { "null" } else { "alt" });
    law_fixture(&name, example, law, null)
}
