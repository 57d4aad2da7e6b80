//! Test configuration and its file/environment sources.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MMD_EQD_SEED";

/// How the null distribution of nψ_n is calibrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Calibration {
    /// Closed-form cutoff 2σ̂²(z²−1), valid when S ≡ 0.
    DegenerateS,
    /// Eigenvalues of the centered Gram matrix plus Monte Carlo.
    GramEigen,
    /// Distribution-free bound 6.2·(U_n Γ²)^{1/2}, alpha = 0.05 only.
    Chebyshev,
}

impl std::str::FromStr for Calibration {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "degenerate-s" => Ok(Calibration::DegenerateS),
            "gram-eigen" => Ok(Calibration::GramEigen),
            "chebyshev" => Ok(Calibration::Chebyshev),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl std::fmt::Display for Calibration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Calibration::DegenerateS => "degenerate-s",
            Calibration::GramEigen => "gram-eigen",
            Calibration::Chebyshev => "chebyshev",
        })
    }
}

/// Number of Gram eigenvalues used for calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "EigenCountRepr", into = "EigenCountRepr")]
pub enum EigenCount {
    /// All eigenvalues for n ≤ 125, the largest 200 otherwise.
    #[default]
    Auto,
    All,
    Top(usize),
}

pub const AUTO_EIGEN_SMALL_N: usize = 125;
pub const AUTO_EIGEN_TOP: usize = 200;

impl EigenCount {
    /// `None` means the full spectrum.
    pub fn resolve(self, n: usize) -> Option<usize> {
        match self {
            EigenCount::All => None,
            EigenCount::Top(k) => Some(k.min(n)),
            EigenCount::Auto if n <= AUTO_EIGEN_SMALL_N => None,
            EigenCount::Auto => Some(AUTO_EIGEN_TOP.min(n)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EigenCountRepr {
    Named(String),
    Count(usize),
}

impl TryFrom<EigenCountRepr> for EigenCount {
    type Error = String;
    fn try_from(r: EigenCountRepr) -> std::result::Result<Self, String> {
        match r {
            EigenCountRepr::Named(s) if s == "all" => Ok(EigenCount::All),
            EigenCountRepr::Named(s) if s == "auto" => Ok(EigenCount::Auto),
            EigenCountRepr::Named(s) => Err(format!("unknown eigen_count `{s}`")),
            EigenCountRepr::Count(0) => Err("eigen_count must be positive".into()),
            EigenCountRepr::Count(k) => Ok(EigenCount::Top(k)),
        }
    }
}

impl From<EigenCount> for EigenCountRepr {
    fn from(e: EigenCount) -> Self {
        match e {
            EigenCount::Auto => EigenCountRepr::Named("auto".into()),
            EigenCount::All => EigenCountRepr::Named("all".into()),
            EigenCount::Top(k) => EigenCountRepr::Count(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSplitting {
    #[default]
    None,
    /// Fit nuisances on one random half, test on the other.
    TwoFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestConfig {
    pub alpha: f64,
    pub calibration: Calibration,
    pub eigen_count: EigenCount,
    pub mc_draws: usize,
    /// Kernel scale; R, S and their gradients are multiplied by 1/bandwidth.
    pub bandwidth: f64,
    pub sample_splitting: SampleSplitting,
    pub seed: RngSeed,
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            alpha: 0.05,
            calibration: Calibration::GramEigen,
            eigen_count: EigenCount::Auto,
            mc_draws: 100_000,
            bandwidth: 1.0,
            sample_splitting: SampleSplitting::None,
            seed: RngSeed::default(),
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if self.mc_draws == 0 {
            return Err(Error::InvalidConfig("mc_draws must be positive".into()));
        }
        if let EigenCount::Top(0) = self.eigen_count {
            return Err(Error::InvalidConfig("eigen_count must be positive".into()));
        }
        Ok(())
    }

    /// Checks the `eigen_count ≤ n` invariant for a concrete sample size.
    pub fn validate_for(&self, n: usize) -> Result<()> {
        self.validate()?;
        match self.eigen_count {
            EigenCount::Top(k) if k > n => Err(Error::InvalidConfig(format!(
                "eigen_count {k} exceeds n = {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Parses TOML, or JSON when the path ends in `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: TestConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `MMD_EQD_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v} is not a u64")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = TestConfig {
            eigen_count: EigenCount::Top(50),
            calibration: Calibration::Chebyshev,
            sample_splitting: SampleSplitting::TwoFold,
            ..TestConfig::default()
        };
        let text = toml::to_string(&cfg).unwrap();
        let back: TestConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<TestConfig>(&json).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg: TestConfig = toml::from_str("alpha = 0.1\neigen_count = \"all\"\n").unwrap();
        assert_eq!(cfg.alpha, 0.1);
        assert_eq!(cfg.eigen_count, EigenCount::All);
        assert_eq!(cfg.mc_draws, 100_000);
    }

    #[test]
    fn auto_eigen_count() {
        assert_eq!(EigenCount::Auto.resolve(125), None);
        assert_eq!(EigenCount::Auto.resolve(126), Some(126.min(200)));
        assert_eq!(EigenCount::Auto.resolve(1000), Some(200));
        assert_eq!(EigenCount::Top(10).resolve(1000), Some(10));
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = TestConfig {
            bandwidth: 0.0,
            ..TestConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TestConfig {
            alpha: 1.0,
            ..TestConfig::default()
        };
        assert!(bad.validate().is_err());
        let cfg = TestConfig {
            eigen_count: EigenCount::Top(20),
            ..TestConfig::default()
        };
        assert!(cfg.validate_for(10).is_err());
        assert!(cfg.validate_for(20).is_ok());
        assert!(toml::from_str::<TestConfig>("eigen_count = 0").is_err());
    }
}
