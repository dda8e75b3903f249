//! Evaluation statistics for paired-seed experiments.
//!
//! Everything here is a pure function of its inputs; resampling routines
//! take an explicit seed and are deterministic given `(data, B, seed)`.

mod bootstrap;
mod calibration;
mod ranks;
mod classic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bootstrap::{bca_bootstrap_ci, bootstrap_ci, paired_bootstrap_test, percentile_bootstrap_ci, CiMethod};
pub use calibration::{credit_share, pearson, sign_agreement, transfer_gap};
pub use ranks::{
    hodges_lehmann, walsh_averages, wilcoxon_normal_approx, wilcoxon_signed_rank, wilcoxon_signed_rank_with, Alternative,
    EXACT_MAX_N,
};
pub use classic::{holm_bonferroni, welch_dof, welch_t, wilson_interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("need at least {need} values, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("wins {wins} exceed trials {n}")]
    WinsExceedTrials { wins: u64, n: u64 },
    #[error("confidence must be in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error("probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("all differences are zero")]
    AllZero,
    #[error("resample count must be positive")]
    NoResamples,
    #[error("samples are not paired on the same seeds")]
    Unpaired,
    #[error("non-finite input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, StatError>;

/// Outcome of a hypothesis test. `ci` is an interval for the tested
/// location (mean difference, or the Hodges-Lehmann shift for rank tests).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub ci: (f64, f64),
    pub method: String,
}

/// A list of per-seed values, optionally tagged with the seeds that
/// produced them so paired comparisons can be checked structurally.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub seeds: Option<Vec<u64>>,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Self {
        SampleSet { values, seeds: None }
    }

    pub fn with_seeds(values: Vec<f64>, seeds: Vec<u64>) -> Result<Self> {
        if values.len() != seeds.len() {
            return Err(StatError::LengthMismatch(values.len(), seeds.len()));
        }
        Ok(SampleSet { values, seeds: Some(seeds) })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        mean(&self.values)
    }

    /// Check that both sets were produced on identical seed lists.
    pub fn check_paired(&self, other: &SampleSet) -> Result<()> {
        if self.len() != other.len() {
            return Err(StatError::LengthMismatch(self.len(), other.len()));
        }
        match (&self.seeds, &other.seeds) {
            (Some(a), Some(b)) if a != b => Err(StatError::Unpaired),
            (Some(_), None) | (None, Some(_)) => Err(StatError::Unpaired),
            _ => Ok(()),
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Unbiased sample variance.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs).unwrap_or(0.0);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub(crate) fn check_confidence(c: f64) -> Result<()> {
    if c > 0.0 && c < 1.0 {
        Ok(())
    } else {
        Err(StatError::BadConfidence(c))
    }
}

pub(crate) fn check_finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatError::NonFinite)
    }
}

/// Standard normal quantile.
pub(crate) fn z_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().cdf(x)
}
