//! Dataset in, test report out.

use serde::{Deserialize, Serialize};

use crate::config::{SampleSplitting, TestConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::inference::{run_test, TestResult};
use crate::nuisance::{evaluate_example, split_fit, ExampleSpec, NuisanceSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    /// Effective configuration after file, flag and environment overrides.
    pub config: TestConfig,
    pub example: ExampleSpec,
    pub nuisance: NuisanceSummary,
    pub result: TestResult,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub evaluated_rows: Option<Vec<usize>>,
}

impl TestReport {
    pub fn summary_line(&self) -> String {
        format!(
            "reject H0: {} (n psi_n = {:.6}, cutoff = {:.6})",
            if self.result.reject { "yes" } else { "no" },
            self.result.n_psi_n,
            self.result.cutoff
        )
    }
}

/// Fits nuisances (optionally on a held-out half), evaluates the
/// functionals and runs the test.
pub fn test_dataset(data: &Dataset, example: &ExampleSpec, config: &TestConfig) -> Result<TestReport> {
    config.validate()?;
    let out = match config.sample_splitting {
        SampleSplitting::None => evaluate_example(example, data, config.seed)?,
        SampleSplitting::TwoFold => split_fit(example, data, config.seed)?,
    };
    let result = run_test(&out.evaluations, config)?;
    Ok(TestReport {
        config: config.clone(),
        example: *example,
        nuisance: out.summary,
        result,
        evaluated_rows: out.evaluated_rows,
    })
}
