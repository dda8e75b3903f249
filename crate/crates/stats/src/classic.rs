use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::{check_confidence, check_finite, mean, variance, z_quantile, Result, StatError, TestResult};

/// Wilson score interval for `wins` successes out of `n` trials.
pub fn wilson_interval(wins: u64, n: u64, confidence: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(StatError::TooFew { need: 1, got: 0 });
    }
    if wins > n {
        return Err(StatError::WinsExceedTrials { wins, n });
    }
    check_confidence(confidence)?;
    let z = z_quantile(1.0 - (1.0 - confidence) / 2.0);
    let nf = n as f64;
    let p = wins as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // Boundary cases are exact in closed form; avoid rounding past them.
    let lo = if wins == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if wins == n { 1.0 } else { (center + half).min(1.0) };
    Ok((lo, hi))
}

/// Welch's unequal-variance t test with Satterthwaite degrees of freedom.
/// `statistic` is t; the CI is for `mean(x) - mean(y)` at 95%.
pub fn welch_t(x: &[f64], y: &[f64]) -> Result<TestResult> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatError::TooFew { need: 2, got: s.len() });
        }
        check_finite(s)?;
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (vx, vy) = (variance(x), variance(y));
    if vx == 0.0 && vy == 0.0 {
        return Err(StatError::ZeroVariance);
    }
    let se = (vx / nx + vy / ny).sqrt();
    let diff = mean(x).unwrap() - mean(y).unwrap();
    let t = diff / se;
    let dof = satterthwaite(vx, nx, vy, ny);
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    let q = dist.inverse_cdf(0.975);
    Ok(TestResult { statistic: t, p_value: p, ci: (diff - q * se, diff + q * se), method: format!("welch_t(dof={dof})") })
}

fn satterthwaite(vx: f64, nx: f64, vy: f64, ny: f64) -> f64 {
    let (ax, ay) = (vx / nx, vy / ny);
    (ax + ay).powi(2) / (ax * ax / (nx - 1.0) + ay * ay / (ny - 1.0))
}

/// Welch-Satterthwaite degrees of freedom.
pub fn welch_dof(x: &[f64], y: &[f64]) -> Result<f64> {
    for s in [x, y] {
        if s.len() < 2 {
            return Err(StatError::TooFew { need: 2, got: s.len() });
        }
    }
    let (vx, vy) = (variance(x), variance(y));
    if vx == 0.0 && vy == 0.0 {
        return Err(StatError::ZeroVariance);
    }
    Ok(satterthwaite(vx, x.len() as f64, vy, y.len() as f64))
}

/// Holm step-down adjustment. Output is in input order.
pub fn holm_bonferroni(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(StatError::BadProbability(p));
        }
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let adj = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(adj);
        out[i] = running;
    }
    Ok(out)
}
