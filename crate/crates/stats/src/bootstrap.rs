use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{check_confidence, check_finite, mean, norm_cdf, z_quantile, Result, StatError, TestResult};

/// Which bootstrap interval produced a CI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    #[default]
    Percentile,
    Bca,
}

impl CiMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CiMethod::Percentile => "percentile",
            CiMethod::Bca => "bca",
        }
    }
}

fn validate(values: &[f64], b: usize, confidence: f64) -> Result<()> {
    if values.len() < 2 {
        return Err(StatError::TooFew { need: 2, got: values.len() });
    }
    if b == 0 {
        return Err(StatError::NoResamples);
    }
    check_finite(values)?;
    check_confidence(confidence)
}

/// Sorted means of `b` resamples with replacement.
fn resample_means(values: &[f64], b: usize, seed: u64) -> Vec<f64> {
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<f64> = (0..b)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Linear-interpolated quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let q = q.clamp(0.0, 1.0);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|v| *v == values[0])
}

/// Percentile bootstrap interval for the mean.
pub fn percentile_bootstrap_ci(values: &[f64], b: usize, confidence: f64, seed: u64) -> Result<(f64, f64)> {
    validate(values, b, confidence)?;
    if is_constant(values) {
        return Ok((values[0], values[0]));
    }
    let means = resample_means(values, b, seed);
    let a = (1.0 - confidence) / 2.0;
    Ok((quantile(&means, a), quantile(&means, 1.0 - a)))
}

/// Bias-corrected and accelerated bootstrap interval for the mean, with
/// the acceleration estimated by jackknife.
pub fn bca_bootstrap_ci(values: &[f64], b: usize, confidence: f64, seed: u64) -> Result<(f64, f64)> {
    validate(values, b, confidence)?;
    if is_constant(values) {
        return Ok((values[0], values[0]));
    }
    let n = values.len() as f64;
    let theta = mean(values).unwrap();
    let means = resample_means(values, b, seed);

    let below = means.iter().filter(|m| **m < theta).count() as f64;
    let ties = means.iter().filter(|m| **m == theta).count() as f64;
    let frac = ((below + 0.5 * ties) / b as f64).clamp(0.5 / b as f64, 1.0 - 0.5 / b as f64);
    let z0 = z_quantile(frac);

    let total: f64 = values.iter().sum();
    let jack: Vec<f64> = values.iter().map(|v| (total - v) / (n - 1.0)).collect();
    let jbar = jack.iter().sum::<f64>() / n;
    let num: f64 = jack.iter().map(|j| (jbar - j).powi(3)).sum();
    let den: f64 = jack.iter().map(|j| (jbar - j).powi(2)).sum();
    let accel = if den > 0.0 { num / (6.0 * den.powf(1.5)) } else { 0.0 };

    let adjust = |alpha: f64| {
        let z = z_quantile(alpha);
        norm_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)))
    };
    let a = (1.0 - confidence) / 2.0;
    Ok((quantile(&means, adjust(a)), quantile(&means, adjust(1.0 - a))))
}

pub fn bootstrap_ci(method: CiMethod, values: &[f64], b: usize, confidence: f64, seed: u64) -> Result<(f64, f64)> {
    match method {
        CiMethod::Percentile => percentile_bootstrap_ci(values, b, confidence, seed),
        CiMethod::Bca => bca_bootstrap_ci(values, b, confidence, seed),
    }
}

/// Two-sided paired bootstrap test of `mean(x - y) = 0`.
///
/// Differences are resampled; the null distribution is the resampled mean
/// recentred on zero. `statistic` is the observed mean difference and the
/// CI is its 95% percentile interval. The p-value is floored at `1/B`.
pub fn paired_bootstrap_test(x: &[f64], y: &[f64], b: usize, seed: u64) -> Result<TestResult> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch(x.len(), y.len()));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    validate(&d, b, 0.95)?;
    let obs = mean(&d).unwrap();
    let means = resample_means(&d, b, seed);
    // Small slack so that exactly-equal centred means count as extreme.
    let tol = 1e-12 * obs.abs().max(1.0);
    let extreme = means.iter().filter(|m| (*m - obs).abs() >= obs.abs() - tol).count();
    let p = (extreme as f64 / b as f64).max(1.0 / b as f64).min(1.0);
    Ok(TestResult {
        statistic: obs,
        p_value: p,
        ci: (quantile(&means, 0.025), quantile(&means, 0.975)),
        method: format!("paired_bootstrap(B={b},seed={seed})"),
    })
}
