//! Outcome regressions: ordinary least squares, Nadaraya–Watson and k-NN.
//!
//! All three accept multi-output responses (n×d, row-major) and predict each
//! column independently. Nadaraya–Watson and k-NN share their weights across
//! columns.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Borrowed row-major matrix.
#[derive(Debug, Clone, Copy)]
pub struct Rows<'a> {
    data: &'a [f64],
    n: usize,
    width: usize,
}

impl<'a> Rows<'a> {
    pub fn new(data: &'a [f64], n: usize, width: usize) -> Result<Self> {
        if data.len() != n * width {
            return Err(Error::DimensionMismatch {
                expected: n * width,
                found: data.len(),
            });
        }
        Ok(Rows { data, n, width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }
}

/// Bandwidth rule for Nadaraya–Watson.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NwBandwidth {
    Fixed(f64),
    /// Scott's rule: mean covariate sd · n^(−1/(q+4)).
    Scott,
    /// Scott's rule times a factor. Scott's rule is a density rule and
    /// undersmooths noisy regressions badly when predictions are made on the
    /// training sample.
    Scaled(f64),
}

/// Factor on Scott's rule used by the default regression.
pub const DEFAULT_SCOTT_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RegressionKind {
    LinearOls,
    NadarayaWatson { bandwidth: NwBandwidth },
    KNearest { k: usize },
}

impl Default for RegressionKind {
    fn default() -> Self {
        RegressionKind::NadarayaWatson {
            bandwidth: NwBandwidth::Scaled(DEFAULT_SCOTT_FACTOR),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Fitted {
    Ols {
        /// (q+1)×d, intercept first.
        coef: DMatrix<f64>,
    },
    Kernel {
        x: Vec<f64>,
        y: Vec<f64>,
        h: f64,
    },
    Neighbors {
        x: Vec<f64>,
        y: Vec<f64>,
        k: usize,
    },
}

/// A regression after `fit_regression`; immutable and shareable.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedRegression {
    kind: RegressionKind,
    q: usize,
    d: usize,
    n_train: usize,
    rank_deficient: bool,
    state: Fitted,
}

/// Reproducibility record of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: String,
    pub n_train: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub rank_deficient: bool,
}

fn scott_bandwidth(x: Rows<'_>) -> f64 {
    let n = x.n() as f64;
    let q = x.width();
    if q == 0 || x.n() < 2 {
        return 1.0;
    }
    let mut sd_sum = 0.0;
    for c in 0..q {
        let mean = (0..x.n()).map(|i| x.row(i)[c]).sum::<f64>() / n;
        let var = (0..x.n()).map(|i| (x.row(i)[c] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        sd_sum += var.sqrt();
    }
    let sd = sd_sum / q as f64;
    if sd > 0.0 {
        sd * n.powf(-1.0 / (q as f64 + 4.0))
    } else {
        1.0
    }
}

/// Fits `kind` to covariates `x` (n×q) and responses `y` (n×d).
///
/// OLS falls back to the minimum-norm least-squares solution when the design
/// is rank deficient and records that in the summary.
pub fn fit_regression(kind: RegressionKind, x: Rows<'_>, y: Rows<'_>) -> Result<FittedRegression> {
    let n = x.n();
    if y.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.n(),
        });
    }
    if n == 0 {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    }
    let (q, d) = (x.width(), y.width());
    let mut rank_deficient = false;
    let state = match kind {
        RegressionKind::LinearOls => {
            let design = DMatrix::from_fn(n, q + 1, |i, c| if c == 0 { 1.0 } else { x.row(i)[c - 1] });
            let rhs = DMatrix::from_fn(n, d, |i, c| y.row(i)[c]);
            let svd = design.svd(true, true);
            let smax = svd.singular_values.max();
            let eps = smax * 1e-12 * (n.max(q + 1) as f64);
            let full_rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
            rank_deficient = full_rank < q + 1;
            let coef = svd
                .solve(&rhs, eps)
                .map_err(|e| Error::InvalidModel(e.to_string()))?;
            Fitted::Ols { coef }
        }
        RegressionKind::NadarayaWatson { bandwidth } => {
            let h = match bandwidth {
                NwBandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
                NwBandwidth::Fixed(h) => {
                    return Err(Error::InvalidModel(format!("NW bandwidth must be positive, got {h}")))
                }
                NwBandwidth::Scott => scott_bandwidth(x),
                NwBandwidth::Scaled(f) if f > 0.0 && f.is_finite() => f * scott_bandwidth(x),
                NwBandwidth::Scaled(f) => {
                    return Err(Error::InvalidModel(format!("NW bandwidth factor must be positive, got {f}")))
                }
            };
            Fitted::Kernel {
                x: x.data.to_vec(),
                y: y.data.to_vec(),
                h,
            }
        }
        RegressionKind::KNearest { k } => {
            if k == 0 || k > n {
                return Err(Error::InvalidModel(format!(
                    "k = {k} must lie in 1..={n} (training size)"
                )));
            }
            Fitted::Neighbors {
                x: x.data.to_vec(),
                y: y.data.to_vec(),
                k,
            }
        }
    };
    Ok(FittedRegression {
        kind,
        q,
        d,
        n_train: n,
        rank_deficient,
        state,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl FittedRegression {
    pub fn output_dim(&self) -> usize {
        self.d
    }

    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// Writes the d predictions at covariate row `w` into `out`.
    pub fn predict_into(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.q);
        debug_assert_eq!(out.len(), self.d);
        match &self.state {
            Fitted::Ols { coef } => {
                for (c, o) in out.iter_mut().enumerate() {
                    *o = coef[(0, c)] + w.iter().enumerate().map(|(k, v)| coef[(k + 1, c)] * v).sum::<f64>();
                }
            }
            Fitted::Kernel { x, y, h } => {
                let dists: Vec<f64> = (0..self.n_train)
                    .map(|i| sq_dist(w, &x[i * self.q..(i + 1) * self.q]))
                    .collect();
                // Shift by the nearest distance so the largest weight is 1.
                let dmin = dists.iter().copied().fold(f64::INFINITY, f64::min);
                let scale = 1.0 / (2.0 * h * h);
                out.fill(0.0);
                let mut total = 0.0;
                for (i, dist) in dists.iter().enumerate() {
                    let wt = (-(dist - dmin) * scale).exp();
                    total += wt;
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += wt * y[i * self.d + c];
                    }
                }
                out.iter_mut().for_each(|o| *o /= total);
            }
            Fitted::Neighbors { x, y, k } => {
                let mut order: Vec<(f64, usize)> = (0..self.n_train)
                    .map(|i| (sq_dist(w, &x[i * self.q..(i + 1) * self.q]), i))
                    .collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if *k < order.len() {
                    order.select_nth_unstable_by(*k - 1, cmp);
                }
                out.fill(0.0);
                for &(_, i) in &order[..*k] {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += y[i * self.d + c];
                    }
                }
                out.iter_mut().for_each(|o| *o /= *k as f64);
            }
        }
    }

    pub fn predict(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.predict_into(w, &mut out);
        out
    }

    /// Row-major n×d predictions at each row of `x`.
    pub fn predict_rows(&self, x: Rows<'_>) -> Vec<f64> {
        let mut out = vec![0.0; x.n() * self.d];
        for i in 0..x.n() {
            self.predict_into(x.row(i), &mut out[i * self.d..(i + 1) * self.d]);
        }
        out
    }

    pub fn summary(&self) -> ModelSummary {
        let mut s = ModelSummary {
            kind: String::new(),
            n_train: self.n_train,
            coefficients: None,
            bandwidth: None,
            k: None,
            rank_deficient: self.rank_deficient,
        };
        match &self.state {
            Fitted::Ols { coef } => {
                s.kind = "linear-ols".into();
                s.coefficients = Some(
                    (0..coef.ncols())
                        .map(|c| coef.column(c).iter().copied().collect())
                        .collect(),
                );
            }
            Fitted::Kernel { h, .. } => {
                s.kind = "nadaraya-watson".into();
                s.bandwidth = Some(*h);
            }
            Fitted::Neighbors { k, .. } => {
                s.kind = "k-nearest".into();
                s.k = Some(*k);
            }
        }
        s
    }

    pub fn kind(&self) -> RegressionKind {
        self.kind
    }
}
