//! Finite-support laws and the exact functionals they induce.

use crate::data::Observation;
use crate::error::{Error, Result};
use crate::nuisance::Example;

use super::DiscreteDgp;

/// A probability law on finitely many atoms O = (W, A, Y) with scalar Y.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<Observation>,
    probs: Vec<f64>,
}

/// One covariate/treatment cell and the conditional law of Y within it.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub w: Vec<f64>,
    pub a: Option<u8>,
    /// P(W = w, A = a).
    pub prob: f64,
    /// (y, P(Y = y ∣ W = w, A = a)).
    pub outcomes: Vec<(f64, f64)>,
}

fn same_w(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn without(w: &[f64], k: usize) -> Vec<f64> {
    w.iter().enumerate().filter(|(c, _)| *c != k).map(|(_, v)| *v).collect()
}

/// Group ids for a key function; atoms with equal keys share an id.
fn group_by(keys: &[Vec<f64>]) -> Vec<usize> {
    let mut reps: Vec<&Vec<f64>> = Vec::new();
    keys.iter()
        .map(|k| match reps.iter().position(|r| same_w(r, k)) {
            Some(g) => g,
            None => {
                reps.push(k);
                reps.len() - 1
            }
        })
        .collect()
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<Observation>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::InvalidConfig("law needs one probability per atom".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig("law probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("law probabilities sum to {total}")));
        }
        if atoms.iter().any(|o| o.y.len() != 1) {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: atoms.iter().map(|o| o.y.len()).find(|&d| d != 1).unwrap_or(0),
            });
        }
        Ok(DiscreteLaw { atoms, probs })
    }

    pub fn from_cells(cells: &[Cell]) -> Result<Self> {
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for cell in cells {
            let mass: f64 = cell.outcomes.iter().map(|(_, p)| p).sum();
            if (mass - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "conditional outcome law sums to {mass}"
                )));
            }
            for &(y, p) in &cell.outcomes {
                atoms.push(Observation::new(cell.w.clone(), cell.a, vec![y]));
                probs.push(cell.prob * p);
            }
        }
        DiscreteLaw::new(atoms, probs)
    }

    pub fn atoms(&self) -> &[Observation] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn conditional_mean<F: Fn(&Observation) -> bool>(&self, select: F) -> f64 {
        let (mut mass, mut total) = (0.0, 0.0);
        for (o, &p) in self.atoms.iter().zip(&self.probs) {
            if select(o) {
                mass += p;
                total += p * o.y[0];
            }
        }
        if mass > 0.0 {
            total / mass
        } else {
            0.0
        }
    }

    /// E(Y ∣ A = a, W = w), or E(Y ∣ W = w) when `a` is `None`.
    pub fn mean(&self, a: Option<u8>, w: &[f64]) -> f64 {
        self.conditional_mean(|o| same_w(&o.w, w) && (a.is_none() || o.a == a))
    }

    /// E(Y ∣ A = 1, W(−k) = w(−k)), dropping the A condition when the law
    /// has no treatment.
    pub fn reduced_mean(&self, k: usize, w: &[f64]) -> f64 {
        let key = without(w, k);
        self.conditional_mean(|o| same_w(&without(&o.w, k), &key) && o.a.unwrap_or(1) == 1)
    }

    /// P(A = 1 ∣ W = w).
    pub fn prob_treated(&self, w: &[f64]) -> f64 {
        let (mut mass, mut treated) = (0.0, 0.0);
        for (o, &p) in self.atoms.iter().zip(&self.probs) {
            if same_w(&o.w, w) {
                mass += p;
                if o.a == Some(1) {
                    treated += p;
                }
            }
        }
        if mass > 0.0 {
            treated / mass
        } else {
            0.0
        }
    }

    /// The law with probabilities p(1 + t·h). Requires Σ p h = 0 and
    /// 1 + t h ≥ 0 on every atom.
    pub fn perturbed(&self, h: &[f64], t: f64) -> Result<DiscreteLaw> {
        if h.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: h.len(),
            });
        }
        let drift: f64 = self.probs.iter().zip(h).map(|(p, h)| p * h).sum();
        if drift.abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("direction has nonzero mean {drift}")));
        }
        let probs: Vec<f64> = self.probs.iter().zip(h).map(|(p, h)| p * (1.0 + t * h)).collect();
        if probs.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidConfig("perturbation leaves the simplex".into()));
        }
        // Renormalize away rounding only.
        let total: f64 = probs.iter().sum();
        DiscreteLaw::new(self.atoms.clone(), probs.iter().map(|p| p / total).collect())
    }

    /// Exact functionals for `example` with nuisances taken from this law.
    pub fn dgp(&self, example: Example) -> Result<DiscreteDgp> {
        self.working_dgp(example, &WorkingModel::exact(self))
    }

    /// Functionals computed from `model` but remainders measured against
    /// this law as the truth.
    pub fn working_dgp(&self, example: Example, model: &WorkingModel<'_>) -> Result<DiscreteDgp> {
        let m = self.len();
        let truth = WorkingModel::exact(self);
        let mut r = Vec::with_capacity(m);
        let mut s = Vec::with_capacity(m);
        let mut dr = Vec::with_capacity(m);
        let mut ds = Vec::with_capacity(m);
        let mut r0 = Vec::with_capacity(m);
        let mut s0 = Vec::with_capacity(m);
        let mut keys_r = Vec::with_capacity(m);
        let mut keys_s = Vec::with_capacity(m);
        for o in &self.atoms {
            let (w, y) = (&o.w, o.y[0]);
            let eval = |nm: &WorkingModel<'_>| -> Result<[f64; 4]> {
                Ok(match example {
                    Example::Ex1 | Example::Ex2 => {
                        let a = o.a.ok_or(Error::MissingTreatmentColumn)?;
                        let mu1 = (nm.mean)(Some(1), w);
                        let mu0 = (nm.mean)(Some(0), w);
                        let pi1 = (nm.prob_treated)(w);
                        let pi_a = if a == 1 { pi1 } else { 1.0 - pi1 };
                        let mu_a = if a == 1 { mu1 } else { mu0 };
                        let resid = (y - mu_a) / pi_a;
                        if example == Example::Ex1 {
                            let sign = if a == 1 { 1.0 } else { -1.0 };
                            [mu1 - mu0, 0.0, sign * resid, 0.0]
                        } else if a == 1 {
                            [mu1, mu0, resid, 0.0]
                        } else {
                            [mu1, mu0, 0.0, resid]
                        }
                    }
                    Example::Ex3 => {
                        let mu = (nm.mean)(None, w);
                        [mu, 0.0, y - mu, 0.0]
                    }
                    Example::Ex4 { k, p } => {
                        let a = o.a.ok_or(Error::MissingTreatmentColumn)? as f64;
                        let mu = (nm.mean)(None, w);
                        let mu_k = (nm.reduced_mean)(k, w);
                        [mu, mu_k, y - mu, a / p * (y - mu_k)]
                    }
                })
            };
            let [ri, si, dri, dsi] = eval(model)?;
            let [r0i, s0i, _, _] = eval(&truth)?;
            r.push(ri);
            s.push(si);
            dr.push(dri);
            ds.push(dsi);
            r0.push(r0i);
            s0.push(s0i);
            keys_r.push(w.clone());
            keys_s.push(match example {
                Example::Ex4 { k, .. } => without(w, k),
                _ => w.clone(),
            });
        }
        let groups_r = group_by(&keys_r);
        let groups_s = group_by(&keys_s);
        // Rem^T = T_P − T_0 + E_{P0}[D_P^T ∣ x^T].
        let remainder = |t: &[f64], t0: &[f64], grad: &[f64], groups: &[usize]| -> Vec<f64> {
            let ng = groups.iter().max().map_or(0, |g| g + 1);
            let mut mass = vec![0.0; ng];
            let mut total = vec![0.0; ng];
            for i in 0..m {
                mass[groups[i]] += self.probs[i];
                total[groups[i]] += self.probs[i] * grad[i];
            }
            (0..m)
                .map(|i| {
                    let g = groups[i];
                    let cond = if mass[g] > 0.0 { total[g] / mass[g] } else { 0.0 };
                    t[i] - t0[i] + cond
                })
                .collect()
        };
        let rem_r = remainder(&r, &r0, &dr, &groups_r);
        let rem_s = remainder(&s, &s0, &ds, &groups_s);
        Ok(DiscreteDgp {
            atoms: self.atoms.clone(),
            probs: self.probs.clone(),
            r,
            s,
            dr,
            ds,
            groups_r,
            groups_s,
            rem_r,
            rem_s,
        })
    }
}

type MeanFn<'a> = Box<dyn Fn(Option<u8>, &[f64]) -> f64 + 'a>;
type ReducedFn<'a> = Box<dyn Fn(usize, &[f64]) -> f64 + 'a>;
type PropFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// Outcome regressions and propensity of a working distribution P.
pub struct WorkingModel<'a> {
    pub mean: MeanFn<'a>,
    pub reduced_mean: ReducedFn<'a>,
    pub prob_treated: PropFn<'a>,
}

impl<'a> WorkingModel<'a> {
    /// Nuisances of `law` itself.
    pub fn exact(law: &'a DiscreteLaw) -> Self {
        WorkingModel {
            mean: Box::new(move |a, w| law.mean(a, w)),
            reduced_mean: Box::new(move |k, w| law.reduced_mean(k, w)),
            prob_treated: Box::new(move |w| law.prob_treated(w)),
        }
    }

    pub fn with_mean(self, mean: impl Fn(Option<u8>, &[f64]) -> f64 + 'a) -> Self {
        WorkingModel {
            mean: Box::new(mean),
            ..self
        }
    }

    pub fn with_reduced_mean(self, reduced: impl Fn(usize, &[f64]) -> f64 + 'a) -> Self {
        WorkingModel {
            reduced_mean: Box::new(reduced),
            ..self
        }
    }

    pub fn with_prob_treated(self, prob: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        WorkingModel {
            prob_treated: Box::new(prob),
            ..self
        }
    }
}
