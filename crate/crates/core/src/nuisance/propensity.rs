//! Treatment probabilities P(A = 1 | W).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::regression::Rows;
use crate::error::{Error, Result};

pub const DEFAULT_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "p")]
pub enum PropensityKind {
    KnownConstant(f64),
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    #[serde(flatten)]
    pub kind: PropensityKind,
    /// Emitted probabilities are clamped to [floor, 1 − floor].
    pub floor: f64,
}

impl PropensityModel {
    pub fn known(p: f64) -> Self {
        PropensityModel {
            kind: PropensityKind::KnownConstant(p),
            floor: DEFAULT_FLOOR,
        }
    }

    pub fn logistic() -> Self {
        PropensityModel {
            kind: PropensityKind::Logistic,
            floor: DEFAULT_FLOOR,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.floor < 0.5) {
            return Err(Error::InvalidModel(format!(
                "propensity floor must lie in (0, 0.5), got {}",
                self.floor
            )));
        }
        if let PropensityKind::KnownConstant(p) = self.kind {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::PropensityOutOfRange(p));
            }
        }
        Ok(())
    }
}

impl Default for PropensityModel {
    fn default() -> Self {
        PropensityModel::known(0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPropensity {
    model: PropensityModel,
    /// Intercept first; empty for a known constant.
    coef: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensitySummary {
    pub kind: String,
    pub floor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

const IRLS_MAX_ITER: usize = 100;
// Tiny ridge keeps IRLS finite under (quasi-)separation.
const IRLS_RIDGE: f64 = 1e-6;

fn fit_logistic(x: Rows<'_>, a: &[u8]) -> Result<Vec<f64>> {
    let n = x.n();
    let p = x.width() + 1;
    let design = DMatrix::from_fn(n, p, |i, c| if c == 0 { 1.0 } else { x.row(i)[c - 1] });
    let target = DVector::from_iterator(n, a.iter().map(|&v| v as f64));
    let mut beta = DVector::zeros(p);
    for _ in 0..IRLS_MAX_ITER {
        let eta = &design * &beta;
        let mu = eta.map(expit);
        let wts = mu.map(|m| (m * (1.0 - m)).max(1e-10));
        let mut xtwx = design.transpose() * DMatrix::from_diagonal(&wts) * &design;
        for k in 1..p {
            xtwx[(k, k)] += IRLS_RIDGE * n as f64;
        }
        let mut grad = design.transpose() * (&target - &mu);
        for k in 1..p {
            grad[k] -= IRLS_RIDGE * n as f64 * beta[k];
        }
        let step = xtwx
            .cholesky()
            .ok_or_else(|| Error::InvalidModel("logistic information matrix is singular".into()))?
            .solve(&grad);
        beta += &step;
        if step.amax() < 1e-10 * (1.0 + beta.amax()) {
            break;
        }
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidModel("logistic fit diverged".into()));
    }
    Ok(beta.iter().copied().collect())
}

/// Fits the propensity model. `a` is required only for logistic regression.
pub fn fit_propensity(model: PropensityModel, x: Rows<'_>, a: Option<&[u8]>) -> Result<FittedPropensity> {
    model.check()?;
    let coef = match model.kind {
        PropensityKind::KnownConstant(_) => Vec::new(),
        PropensityKind::Logistic => {
            let a = a.ok_or(Error::MissingTreatmentColumn)?;
            if a.len() != x.n() {
                return Err(Error::DimensionMismatch {
                    expected: x.n(),
                    found: a.len(),
                });
            }
            fit_logistic(x, a)?
        }
    };
    Ok(FittedPropensity { model, coef })
}

impl FittedPropensity {
    /// Clamped P(A = 1 | W = w).
    pub fn prob_treated(&self, w: &[f64]) -> Result<f64> {
        let raw = match self.model.kind {
            PropensityKind::KnownConstant(p) => p,
            PropensityKind::Logistic => {
                let eta = self.coef[0]
                    + w.iter().zip(&self.coef[1..]).map(|(x, b)| x * b).sum::<f64>();
                expit(eta)
            }
        };
        // expit can round to exactly 0 or 1; only values outside [0, 1] are
        // genuine contract violations.
        if !(0.0..=1.0).contains(&raw) {
            return Err(Error::PropensityOutOfRange(raw));
        }
        let f = self.model.floor;
        Ok(raw.clamp(f, 1.0 - f))
    }

    /// Clamped P(A = a | W = w).
    pub fn prob(&self, a: u8, w: &[f64]) -> Result<f64> {
        let p1 = self.prob_treated(w)?;
        Ok(if a == 1 { p1 } else { 1.0 - p1 })
    }

    pub fn summary(&self) -> PropensitySummary {
        match self.model.kind {
            PropensityKind::KnownConstant(p) => PropensitySummary {
                kind: "known-constant".into(),
                floor: self.model.floor,
                p: Some(p),
                coefficients: None,
            },
            PropensityKind::Logistic => PropensitySummary {
                kind: "logistic".into(),
                floor: self.model.floor,
                p: None,
                coefficients: Some(self.coef.clone()),
            },
        }
    }
}
