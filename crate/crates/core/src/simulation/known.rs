//! Conditional-mean DGPs whose nuisances are known exactly, so the test
//! statistic carries no estimation error.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kernel::FunctionalEvaluations;
use crate::rng::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KnownDgp {
    /// W ~ U(−1, 1), Y = (0.5 + 0.5|W|)ε, so E[Y | W] ≡ 0.
    Null,
    /// W ~ U(−1, 1), Y = 0.8W + 0.5ε.
    Alternative,
}

impl KnownDgp {
    pub fn mean(self, w: f64) -> f64 {
        match self {
            KnownDgp::Null => 0.0,
            KnownDgp::Alternative => 0.8 * w,
        }
    }

    /// R = E[Y | W], S = 0, D^R = Y − E[Y | W], D^S = 0 at `n` fresh draws.
    pub fn evaluations(self, n: usize, seed: RngSeed) -> Result<FunctionalEvaluations> {
        let mut rng = seed.rng();
        let noise = Normal::new(0.0, 0.5).expect("valid sd");
        let mut r = Vec::with_capacity(n);
        let mut dr = Vec::with_capacity(n);
        for _ in 0..n {
            let w: f64 = rng.random_range(-1.0..1.0);
            let eps = match self {
                KnownDgp::Null => {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (0.5 + 0.5 * w.abs()) * z
                }
                KnownDgp::Alternative => noise.sample(&mut rng),
            };
            let m = self.mean(w);
            r.push(m);
            dr.push(eps);
        }
        FunctionalEvaluations::scalar(r, vec![0.0; n], dr, vec![0.0; n], 1.0)
    }
}

impl std::fmt::Display for KnownDgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KnownDgp::Null => "known-null",
            KnownDgp::Alternative => "known-alternative",
        })
    }
}
