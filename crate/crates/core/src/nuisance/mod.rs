//! Nuisance estimation: fitted regressions and propensities wired into the
//! functional evaluations of each supported hypothesis.
//!
//! | example | R | S |
//! |---|---|---|
//! | `Ex1` | μ(1,w) − μ(0,w) | 0 |
//! | `Ex2` | μ(1,w) | μ(0,w) |
//! | `Ex3` | E(Y∣W=w) | 0 |
//! | `Ex4` | E(Y∣W=w) | E(Y∣W(−k)=w(−k)), artificial A ~ Bernoulli(p) |

pub mod propensity;
pub mod regression;
pub mod remainder;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::FunctionalEvaluations;
use crate::rng::{streams, RngSeed};

pub use propensity::{fit_propensity, FittedPropensity, PropensityKind, PropensityModel, PropensitySummary};
pub use regression::{
    fit_regression, FittedRegression, ModelSummary, NwBandwidth, RegressionKind, Rows, DEFAULT_SCOTT_FACTOR,
};
pub use remainder::remainder_ex1;

/// Column name used for the artificial treatment of `Ex4`.
pub const ARTIFICIAL_TREATMENT_COLUMN: &str = "a_artificial";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Example {
    /// Conditional average treatment effect is zero almost surely.
    Ex1,
    /// μ(1, W) and μ(0, W) are equal in distribution.
    Ex2,
    /// E(Y ∣ W) is zero almost surely.
    Ex3,
    /// Covariate `k` (0-based) does not affect E(Y ∣ W).
    Ex4 { k: usize, p: f64 },
}

impl Example {
    pub fn needs_treatment(&self) -> bool {
        matches!(self, Example::Ex1 | Example::Ex2)
    }

    /// S ≡ 0 by construction.
    pub fn has_degenerate_s(&self) -> bool {
        matches!(self, Example::Ex1 | Example::Ex3)
    }
}

impl std::fmt::Display for Example {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Example::Ex1 => f.write_str("ex1"),
            Example::Ex2 => f.write_str("ex2"),
            Example::Ex3 => f.write_str("ex3"),
            Example::Ex4 { k, p } => write!(f, "ex4(k={k}, p={p})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleSpec {
    pub example: Example,
    pub outcome_model: RegressionKind,
    pub propensity_model: PropensityModel,
    /// R and S are clipped to [−clip_b, clip_b] on the scale of the raw
    /// predictions. Set to `bandwidth` for the [−1, 1] range after rescaling.
    pub clip_b: f64,
}

impl ExampleSpec {
    pub fn new(example: Example) -> Self {
        ExampleSpec {
            example,
            outcome_model: RegressionKind::default(),
            propensity_model: PropensityModel::default(),
            clip_b: 1.0,
        }
    }

    fn check(&self, data: &Dataset) -> Result<()> {
        if !(self.clip_b > 0.0 && self.clip_b.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "clip_b must be positive, got {}",
                self.clip_b
            )));
        }
        if self.example.needs_treatment() && data.treatment().is_none() {
            return Err(Error::MissingTreatmentColumn);
        }
        if let Example::Ex4 { k, p } = self.example {
            let dim = data.w_dim();
            if dim < 2 || k >= dim {
                return Err(Error::InvalidCoordinate { k, dim });
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::PropensityOutOfRange(p));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Outcome {
    PerArm {
        control: FittedRegression,
        treated: FittedRegression,
    },
    Pooled(FittedRegression),
    Importance {
        full: FittedRegression,
        reduced: FittedRegression,
    },
}

/// Nuisance functions fitted on one dataset, ready to evaluate on another.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedNuisance {
    spec: ExampleSpec,
    outcome: Outcome,
    propensity: Option<FittedPropensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSummary {
    pub example: Example,
    pub clip_b: f64,
    pub outcome: Vec<ModelSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub propensity: Option<PropensitySummary>,
}

/// Evaluations plus the fitted-model record.
#[derive(Debug, Clone)]
pub struct NuisanceOutput {
    pub evaluations: FunctionalEvaluations,
    pub summary: NuisanceSummary,
    /// Rows of the input dataset that the evaluations refer to, when the
    /// sample was split.
    pub evaluated_rows: Option<Vec<usize>>,
}

fn drop_coordinate(w: &[f64], q: usize, k: usize) -> Vec<f64> {
    w.chunks(q)
        .flat_map(|row| row.iter().enumerate().filter(|(c, _)| *c != k).map(|(_, v)| *v))
        .collect()
}

fn fit_arm(kind: RegressionKind, data: &Dataset, a: &[u8], arm: u8) -> Result<FittedRegression> {
    let rows: Vec<usize> = (0..data.n()).filter(|&i| a[i] == arm).collect();
    if rows.is_empty() {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    }
    let sub = data.subset(&rows);
    fit_regression(
        kind,
        Rows::new(sub.covariates(), sub.n(), sub.w_dim())?,
        Rows::new(sub.outcomes(), sub.n(), sub.y_dim())?,
    )
}

/// Fits the outcome regression(s) and propensity required by `spec`.
pub fn fit_nuisance(spec: &ExampleSpec, data: &Dataset) -> Result<FittedNuisance> {
    spec.check(data)?;
    let (n, q, d) = (data.n(), data.w_dim(), data.y_dim());
    let x = Rows::new(data.covariates(), n, q)?;
    let y = Rows::new(data.outcomes(), n, d)?;
    let (outcome, propensity) = match spec.example {
        Example::Ex1 | Example::Ex2 => {
            let a = data.treatment().ok_or(Error::MissingTreatmentColumn)?;
            let outcome = Outcome::PerArm {
                control: fit_arm(spec.outcome_model, data, a, 0)?,
                treated: fit_arm(spec.outcome_model, data, a, 1)?,
            };
            (outcome, Some(fit_propensity(spec.propensity_model, x, Some(a))?))
        }
        Example::Ex3 => (Outcome::Pooled(fit_regression(spec.outcome_model, x, y)?), None),
        Example::Ex4 { k, .. } => {
            let reduced_w = drop_coordinate(data.covariates(), q, k);
            let outcome = Outcome::Importance {
                full: fit_regression(spec.outcome_model, x, y)?,
                reduced: fit_regression(spec.outcome_model, Rows::new(&reduced_w, n, q - 1)?, y)?,
            };
            (outcome, None)
        }
    };
    Ok(FittedNuisance {
        spec: *spec,
        outcome,
        propensity,
    })
}

impl FittedNuisance {
    pub fn spec(&self) -> &ExampleSpec {
        &self.spec
    }

    pub fn summary(&self) -> NuisanceSummary {
        let outcome = match &self.outcome {
            Outcome::PerArm { control, treated } => vec![control.summary(), treated.summary()],
            Outcome::Pooled(m) => vec![m.summary()],
            Outcome::Importance { full, reduced } => vec![full.summary(), reduced.summary()],
        };
        NuisanceSummary {
            example: self.spec.example,
            clip_b: self.spec.clip_b,
            outcome,
            propensity: self.propensity.as_ref().map(FittedPropensity::summary),
        }
    }

    /// Evaluates R, S, D^R, D^S at every row of `data`. `Ex4` draws its
    /// artificial treatment from the `ARTIFICIAL_TREATMENT` stream of `seed`.
    pub fn evaluate(&self, data: &Dataset, seed: RngSeed) -> Result<FunctionalEvaluations> {
        self.spec.check(data)?;
        let (n, q, d) = (data.n(), data.w_dim(), data.y_dim());
        let b = self.spec.clip_b;
        let artificial: Option<Vec<u8>> = match self.spec.example {
            Example::Ex4 { p, .. } => {
                let mut rng = seed.with_stream(streams::ARTIFICIAL_TREATMENT).rng();
                Some((0..n).map(|_| rng.random_bool(p) as u8).collect())
            }
            _ => None,
        };
        let treatment = data.treatment();

        // One (r, s, dr, ds) tuple of d-vectors per observation.
        let rows: Vec<[Vec<f64>; 4]> = (0..n)
            .into_par_iter()
            .map(|i| -> Result<[Vec<f64>; 4]> {
                let w = data.w_row(i);
                let y = data.y_row(i);
                let clip = |v: f64| v.clamp(-b, b);
                let zeros = vec![0.0; d];
                Ok(match (&self.outcome, self.spec.example) {
                    (Outcome::PerArm { control, treated }, ex) => {
                        let a = treatment.ok_or(Error::MissingTreatmentColumn)?[i];
                        let prop = self.propensity.as_ref().expect("fitted with treatment");
                        let mu1 = treated.predict(w);
                        let mu0 = control.predict(w);
                        let pi_a = prop.prob(a, w)?;
                        let mu_a = if a == 1 { &mu1 } else { &mu0 };
                        let resid: Vec<f64> = y.iter().zip(mu_a).map(|(y, m)| (y - m) / pi_a).collect();
                        if ex == Example::Ex1 {
                            let sign = if a == 1 { 1.0 } else { -1.0 };
                            [
                                mu1.iter().zip(&mu0).map(|(m1, m0)| clip(m1 - m0)).collect(),
                                zeros.clone(),
                                resid.iter().map(|v| sign * v).collect(),
                                zeros,
                            ]
                        } else {
                            let (dr, ds) = if a == 1 {
                                (resid, zeros)
                            } else {
                                (zeros, resid)
                            };
                            [
                                mu1.iter().map(|&v| clip(v)).collect(),
                                mu0.iter().map(|&v| clip(v)).collect(),
                                dr,
                                ds,
                            ]
                        }
                    }
                    (Outcome::Pooled(m), _) => {
                        let mu = m.predict(w);
                        [
                            mu.iter().map(|&v| clip(v)).collect(),
                            zeros.clone(),
                            y.iter().zip(&mu).map(|(y, m)| y - m).collect(),
                            zeros,
                        ]
                    }
                    (Outcome::Importance { full, reduced }, Example::Ex4 { k, p }) => {
                        let mu = full.predict(w);
                        let reduced_w = drop_coordinate(w, q, k);
                        let mu_k = reduced.predict(&reduced_w);
                        let a = artificial.as_ref().expect("drawn for Ex4")[i] as f64;
                        [
                            mu.iter().map(|&v| clip(v)).collect(),
                            mu_k.iter().map(|&v| clip(v)).collect(),
                            y.iter().zip(&mu).map(|(y, m)| y - m).collect(),
                            y.iter().zip(&mu_k).map(|(y, m)| a / p * (y - m)).collect(),
                        ]
                    }
                    (Outcome::Importance { .. }, _) => unreachable!("importance fit only for Ex4"),
                })
            })
            .collect::<Result<_>>()?;

        let mut blocks: [Vec<f64>; 4] = Default::default();
        for block in blocks.iter_mut() {
            block.reserve(n * d);
        }
        for row in rows {
            for (block, part) in blocks.iter_mut().zip(row) {
                block.extend(part);
            }
        }
        let [r, s, dr, ds] = blocks;
        FunctionalEvaluations::new(n, d, r, s, dr, ds, b)
    }
}

/// Fits and evaluates on the same sample.
pub fn evaluate_example(spec: &ExampleSpec, data: &Dataset, seed: RngSeed) -> Result<NuisanceOutput> {
    let fitted = fit_nuisance(spec, data)?;
    Ok(NuisanceOutput {
        evaluations: fitted.evaluate(data, seed)?,
        summary: fitted.summary(),
        evaluated_rows: None,
    })
}

/// Random halves (fit, evaluate) drawn from the `SPLIT` stream of `seed`.
/// The evaluation half gets the extra row when n is odd.
pub fn split_indices(n: usize, seed: RngSeed) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.with_stream(streams::SPLIT).rng());
    let eval = idx.split_off(n / 2);
    (idx, eval)
}

/// Fits on one random half and evaluates on the other. Outcomes of the
/// evaluation half never enter the fit.
pub fn split_fit(spec: &ExampleSpec, data: &Dataset, seed: RngSeed) -> Result<NuisanceOutput> {
    if data.n() < 4 {
        return Err(Error::TooFewObservations {
            needed: 4,
            have: data.n(),
        });
    }
    let (fit_rows, eval_rows) = split_indices(data.n(), seed);
    let fitted = fit_nuisance(spec, &data.subset(&fit_rows))?;
    let evaluations = fitted.evaluate(&data.subset(&eval_rows), seed)?;
    Ok(NuisanceOutput {
        evaluations,
        summary: fitted.summary(),
        evaluated_rows: Some(eval_rows),
    })
}
