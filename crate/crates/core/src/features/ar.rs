//! Autoregressive coefficients by Yule–Walker / Levinson–Durbin.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ArFeatures {
    /// `a_1..a_p` in the convention `x[n] = -Σ a_i x[n-i] + e[n]`.
    pub coeffs: Vec<f64>,
    pub residual_variance: f64,
    pub order: usize,
}

/// Biased (divide-by-N) autocovariance of the demeaned signal, lags `0..=max_lag`.
pub fn autocovariance(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    (0..=max_lag)
        .map(|k| {
            if k >= n {
                return 0.0;
            }
            d[k..].iter().zip(&d[..n - k]).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect()
}

/// Solves the Toeplitz system `R a = -r` for the prediction-error filter.
/// Returns `(a_1..a_p, final prediction-error power)`.
pub fn levinson_durbin(r: &[f64], p: usize) -> Result<(Vec<f64>, f64)> {
    if r.len() < p + 1 {
        return Err(Error::config(format!(
            "need {} autocovariance lags, got {}",
            p + 1,
            r.len()
        )));
    }
    if !(r[0] > 0.0) {
        return Err(Error::data("zero variance"));
    }
    let mut a = vec![0.0f64; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for m in 1..=p {
        let acc: f64 = (0..m).map(|i| a[i] * r[m - i]).sum();
        let k = -acc / err;
        let prev = a.clone();
        for i in 1..m {
            a[i] = prev[i] + k * prev[m - i];
        }
        a[m] = k;
        err *= 1.0 - k * k;
        if !(err.is_finite() && err > 0.0) {
            return Err(Error::numeric(format!(
                "Levinson–Durbin breakdown at order {m} (prediction error {err})"
            )));
        }
    }
    Ok((a[1..].to_vec(), err))
}

pub fn yule_walker(signal: &[f64], order: usize) -> Result<ArFeatures> {
    if order == 0 {
        return Err(Error::config("AR order must be positive"));
    }
    if order >= signal.len() {
        return Err(Error::data(format!(
            "AR order {order} needs more than {} samples",
            signal.len()
        )));
    }
    let r = autocovariance(signal, order);
    if !(r[0] > 0.0) || signal.iter().all(|&v| v == signal[0]) {
        return Err(Error::data("zero variance"));
    }
    let (coeffs, residual_variance) = levinson_durbin(&r, order)?;
    Ok(ArFeatures {
        coeffs,
        residual_variance,
        order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    // Dense Gaussian-elimination solve of the Yule–Walker normal equations.
    fn direct_solve(r: &[f64], p: usize) -> Vec<f64> {
        let m = DMatrix::from_fn(p, p, |i, j| r[i.abs_diff(j)]);
        let rhs = DVector::from_fn(p, |i, _| -r[i + 1]);
        m.lu().solve(&rhs).unwrap().iter().copied().collect()
    }

    #[test]
    fn constant_signal_is_zero_variance() {
        let err = yule_walker(&[4.2; 500], 10).unwrap_err();
        assert!(err.to_string().contains("zero variance"));
    }

    #[test]
    fn order_too_large() {
        assert!(yule_walker(&[1.0, 2.0, 3.0], 3).is_err());
        assert!(yule_walker(&[1.0, 2.0, 3.0], 0).is_err());
    }

    #[test]
    fn white_noise_coefficients_near_zero() {
        let mut rng = crate::seed::rng(17);
        let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ar = yule_walker(&x, 10).unwrap();
        assert_eq!(ar.coeffs.len(), 10);
        assert!(ar.coeffs.iter().all(|a| a.abs() < 0.05), "{:?}", ar.coeffs);
        assert!((ar.residual_variance - 1.0).abs() < 0.05);
    }

    #[test]
    fn ar1_sign_convention() {
        // x[n] = 0.8 x[n-1] + e  →  a_1 = -0.8
        let mut rng = crate::seed::rng(3);
        let mut x = vec![0.0f64; 50_000];
        for n in 1..x.len() {
            let e: f64 = StandardNormal.sample(&mut rng);
            x[n] = 0.8 * x[n - 1] + e;
        }
        let ar = yule_walker(&x, 1).unwrap();
        assert!((ar.coeffs[0] + 0.8).abs() < 0.02, "{:?}", ar.coeffs);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn levinson_matches_direct_solve(
            x in proptest::collection::vec(-10.0f64..10.0, 200..600),
            p in 1usize..=10,
        ) {
            let r = autocovariance(&x, p);
            prop_assume!(r[0] > 1e-6);
            let (a, _) = levinson_durbin(&r, p).unwrap();
            let b = direct_solve(&r, p);
            let linf = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            prop_assert!(linf < 1e-8, "L∞ = {linf}");
        }
    }
}
