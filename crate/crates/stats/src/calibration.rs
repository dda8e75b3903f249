use crate::{check_finite, Result, StatError};

/// Pearson correlation. A constant input gives 0 rather than NaN; callers
/// that need a smooth surrogate clamp the standard deviations themselves.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatError::TooFew { need: 2, got: x.len() });
    }
    check_finite(x)?;
    check_finite(y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fraction of pairs with equal sign, over pairs where both are nonzero.
/// `None` when no such pair exists.
pub fn sign_agreement(a: &[f64], e: &[f64]) -> Result<Option<f64>> {
    if a.len() != e.len() {
        return Err(StatError::LengthMismatch(a.len(), e.len()));
    }
    let (mut agree, mut total) = (0usize, 0usize);
    for (x, y) in a.iter().zip(e) {
        if *x != 0.0 && *y != 0.0 {
            total += 1;
            if x.signum() == y.signum() {
                agree += 1;
            }
        }
    }
    Ok((total > 0).then(|| agree as f64 / total as f64))
}

/// Per-factor share `|w_k A_k| / sum_j |w_j A_j|`; `None` if all terms vanish.
pub fn credit_share(weights: &[f64], advantages: &[f64]) -> Result<Option<Vec<f64>>> {
    if weights.len() != advantages.len() {
        return Err(StatError::LengthMismatch(weights.len(), advantages.len()));
    }
    let mags: Vec<f64> = weights.iter().zip(advantages).map(|(w, a)| (w * a).abs()).collect();
    let total: f64 = mags.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Ok(None);
    }
    Ok(Some(mags.into_iter().map(|m| m / total).collect()))
}

/// In-distribution minus held-out rate, in percentage points. Positive
/// means performance dropped on the held-out opponent.
pub fn transfer_gap(in_dist: f64, held_out: f64) -> Result<f64> {
    for r in [in_dist, held_out] {
        if !(0.0..=1.0).contains(&r) {
            return Err(StatError::BadProbability(r));
        }
    }
    Ok(100.0 * (in_dist - held_out))
}
