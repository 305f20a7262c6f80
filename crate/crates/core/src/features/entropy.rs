use super::welch::PsdEstimate;
use crate::error::{Error, Result};

/// Shannon entropy (bits) of a non-negative spectrum normalised to unit sum,
/// with `0·log 0 = 0`. Lies in `[0, log2(len)]`.
pub fn entropy_bits(power: &[f64]) -> Result<f64> {
    if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::data("spectrum must be finite and non-negative"));
    }
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(Error::data("all-zero spectrum has no entropy"));
    }
    let h = power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.log2()
        })
        .sum::<f64>();
    // Rounding can push a flat spectrum a hair past the bounds.
    Ok(h.clamp(0.0, (power.len() as f64).log2()))
}

/// Entropy over the full one-sided PSD grid.
pub fn spectral_entropy(psd: &PsdEstimate) -> Result<f64> {
    entropy_bits(&psd.power)
}
