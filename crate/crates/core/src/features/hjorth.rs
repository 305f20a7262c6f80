use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjorthFeatures {
    pub activity: f64,
    pub mobility: f64,
    pub complexity: f64,
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Activity, mobility and complexity with the unscaled first difference as
/// the derivative. Complexity is reported as 0 when the derivative has zero
/// variance (mobility 0).
pub fn hjorth(signal: &[f64]) -> Result<HjorthFeatures> {
    if signal.len() < 3 {
        return Err(Error::data("Hjorth parameters need at least 3 samples"));
    }
    let var_x = variance(signal);
    if !(var_x > 0.0) {
        return Err(Error::data("degenerate signal: zero variance"));
    }
    let d1 = diff(signal);
    let d2 = diff(&d1);
    let var_d1 = variance(&d1);
    let var_d2 = variance(&d2);
    let mobility = (var_d1 / var_x).sqrt();
    let complexity = if var_d1 > 0.0 {
        (var_d2 / var_d1).sqrt() / mobility
    } else {
        0.0
    };
    Ok(HjorthFeatures {
        activity: var_x,
        mobility,
        complexity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::PI;

    #[test]
    fn constant_is_degenerate() {
        assert!(hjorth(&[1.5; 100]).unwrap_err().to_string().contains("degenerate"));
    }

    #[test]
    fn sinusoid_mobility_matches_difference_identity() {
        let (f, fs) = (10.0, 1000.0);
        let x: Vec<f64> = (0..10_000).map(|i| (2.0 * PI * f * i as f64 / fs).sin()).collect();
        let h = hjorth(&x).unwrap();
        let expected = 2.0 * (PI * f / fs).sin();
        assert!((h.mobility / expected - 1.0).abs() < 0.01, "{} vs {expected}", h.mobility);
        assert!((h.activity - 0.5).abs() < 1e-3);
    }

    #[test]
    fn noise_is_more_complex_than_tone() {
        let mut rng = crate::seed::rng(8);
        let noise: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let tone: Vec<f64> = (0..10_000).map(|i| (2.0 * PI * 10.0 * i as f64 / 1000.0).sin()).collect();
        assert!(hjorth(&noise).unwrap().complexity > hjorth(&tone).unwrap().complexity);
    }

    #[test]
    fn ramp_has_zero_complexity() {
        let x: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let h = hjorth(&x).unwrap();
        assert_eq!(h.complexity, 0.0);
    }

    proptest! {
        #[test]
        fn scale_invariance(x in proptest::collection::vec(-100.0f64..100.0, 3..400), c in 0.01f64..50.0, neg in any::<bool>()) {
            let c = if neg { -c } else { c };
            let h = hjorth(&x);
            prop_assume!(h.is_ok());
            let h = h.unwrap();
            prop_assume!(h.activity > 1e-6);
            let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
            let g = hjorth(&scaled).unwrap();
            prop_assert!((g.mobility - h.mobility).abs() <= 1e-9 * h.mobility.max(1e-300));
            prop_assert!((g.complexity - h.complexity).abs() <= 1e-9 * h.complexity.max(1e-300));
            prop_assert!((g.activity - c * c * h.activity).abs() <= 1e-9 * g.activity);
        }
    }
}
