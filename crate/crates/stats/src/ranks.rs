use crate::{check_finite, norm_cdf, z_quantile, Result, StatError, TestResult};

/// Alternative hypothesis for the signed-rank test, on the median of the
/// differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

/// Sample sizes (after dropping zeros) up to this use the exact null.
pub const EXACT_MAX_N: usize = 25;

/// Average ranks of `|d|`, doubled so tied ranks stay integral.
fn doubled_ranks(abs: &[f64]) -> Vec<u64> {
    let n = abs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[idx[j + 1]] == abs[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged, times two.
        let r2 = (i + 1 + j + 1) as u64;
        for k in i..=j {
            ranks[idx[k]] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// Null distribution of the doubled W+ given doubled ranks: counts of each
/// sum over all 2^n sign assignments.
fn null_counts(ranks2: &[u64]) -> Vec<f64> {
    let total: u64 = ranks2.iter().sum();
    let mut c = vec![0.0f64; total as usize + 1];
    c[0] = 1.0;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if c[s] != 0.0 {
                c[s + r] += c[s];
            }
        }
        reach += r;
    }
    c
}

/// Two-sided Wilcoxon signed-rank test. See [`wilcoxon_signed_rank_with`].
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<TestResult> {
    wilcoxon_signed_rank_with(diffs, Alternative::TwoSided)
}

/// Wilcoxon signed-rank test on paired differences. Zeros are dropped
/// before ranking; ties in `|d|` get average ranks. Exact null for up to
/// [`EXACT_MAX_N`] nonzero differences, normal approximation with tie and
/// continuity correction beyond. `statistic` is W+ and the CI is a 95%
/// interval for the Hodges-Lehmann shift.
pub fn wilcoxon_signed_rank_with(diffs: &[f64], alt: Alternative) -> Result<TestResult> {
    signed_rank(diffs, alt, false)
}

/// The normal approximation regardless of sample size.
pub fn wilcoxon_normal_approx(diffs: &[f64], alt: Alternative) -> Result<TestResult> {
    signed_rank(diffs, alt, true)
}

fn signed_rank(diffs: &[f64], alt: Alternative, force_normal: bool) -> Result<TestResult> {
    check_finite(diffs)?;
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return Err(StatError::AllZero);
    }
    let n = nz.len();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let r2 = doubled_ranks(&abs);
    let w2: u64 = nz.iter().zip(&r2).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let w = w2 as f64 / 2.0;

    let (p_le, p_ge, method) = if n <= EXACT_MAX_N && !force_normal {
        let counts = null_counts(&r2);
        let total: f64 = counts.iter().sum();
        let le: f64 = counts[..=w2 as usize].iter().sum::<f64>() / total;
        let ge: f64 = counts[w2 as usize..].iter().sum::<f64>() / total;
        (le, ge, "wilcoxon_exact")
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let tie: f64 = tie_sizes(&abs).iter().map(|&t| t * t * t - t).sum();
        let sd = (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie / 48.0).sqrt();
        let le = norm_cdf((w - mu + 0.5) / sd);
        let ge = 1.0 - norm_cdf((w - mu - 0.5) / sd);
        (le, ge, "wilcoxon_normal")
    };
    let p = match alt {
        Alternative::TwoSided => (2.0 * p_le.min(p_ge)).min(1.0),
        Alternative::Greater => p_ge,
        Alternative::Less => p_le,
    };
    Ok(TestResult { statistic: w, p_value: p, ci: shift_ci(&nz, 0.95), method: method.to_string() })
}

fn tie_sizes(abs: &[f64]) -> Vec<f64> {
    let mut s = abs.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        if j > i {
            out.push((j - i + 1) as f64);
        }
        i = j + 1;
    }
    out
}

/// Walsh-average interval for the location shift, using the untied
/// signed-rank null to pick the order statistics.
fn shift_ci(nz: &[f64], confidence: f64) -> (f64, f64) {
    let walsh = walsh_averages(nz);
    let m = walsh.len();
    let n = nz.len();
    let alpha = (1.0 - confidence) / 2.0;
    let k = if n <= EXACT_MAX_N {
        let ranks2: Vec<u64> = (1..=n as u64).map(|r| 2 * r).collect();
        let counts = null_counts(&ranks2);
        let total: f64 = counts.iter().sum();
        // Largest k with P(W+ < k) <= alpha; W+ takes integer values here.
        let mut cum = 0.0;
        let mut k = 0usize;
        for (w, c) in counts.iter().enumerate().step_by(2) {
            if (cum + c) / total > alpha {
                k = w / 2;
                break;
            }
            cum += c;
        }
        k
    } else {
        let nf = n as f64;
        let z = z_quantile(1.0 - alpha);
        let c = nf * (nf + 1.0) / 4.0 - z * (nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0).sqrt();
        c.floor().max(0.0) as usize
    };
    let k = k.min(m - 1);
    (walsh[k], walsh[m - 1 - k])
}

/// All Walsh averages `(x_i + x_j)/2` for `i <= j`, sorted.
pub fn walsh_averages(xs: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(xs.len() * (xs.len() + 1) / 2);
    for i in 0..xs.len() {
        for j in i..xs.len() {
            w.push((xs[i] + xs[j]) / 2.0);
        }
    }
    w.sort_by(f64::total_cmp);
    w
}

/// Hodges-Lehmann location estimate: the median of the Walsh averages.
pub fn hodges_lehmann(diffs: &[f64]) -> Result<f64> {
    if diffs.is_empty() {
        return Err(StatError::TooFew { need: 1, got: 0 });
    }
    check_finite(diffs)?;
    let w = walsh_averages(diffs);
    let m = w.len();
    Ok(if m % 2 == 1 { w[m / 2] } else { (w[m / 2 - 1] + w[m / 2]) / 2.0 })
}
