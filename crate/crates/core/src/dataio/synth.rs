//! Synthetic multi-subject ear-EEG.
//!
//! Each channel is an autoregressive process driven by Gaussian white noise
//! plus a subject-specific sinusoid. Coefficients follow the prediction-error
//! convention `x[n] = -Σ a_i x[n-i] + e[n]`, the same one reported by
//! [`crate::features::yule_walker`].

use std::f64::consts::PI;

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EegRecording, IN_EAR_CHANNELS};
use crate::error::{Error, Result};
use crate::par;
use crate::seed::{self, stream};

/// Samples discarded at the start of each channel so the AR recursion
/// forgets its zero initial state.
const BURN_IN: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubjectSpec {
    pub subject_id: u16,
    /// One AR coefficient vector per channel (may be empty for white noise).
    pub ar_coeffs: Vec<Vec<f64>>,
    pub tone_freq_hz: f64,
    pub tone_amplitude: f64,
    pub noise_std: f64,
    pub rng_seed: u64,
}

impl SyntheticSubjectSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ar_coeffs.is_empty() {
            return Err(Error::config("synthetic subject needs at least one channel"));
        }
        for (c, a) in self.ar_coeffs.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) || !ar_is_stable(a) {
                return Err(Error::config(format!(
                    "unstable AR coefficients for channel {c}: {a:?}"
                )));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise_std must be finite and >= 0"));
        }
        if !(self.tone_amplitude.is_finite() && self.tone_amplitude >= 0.0) {
            return Err(Error::config("tone_amplitude must be finite and >= 0"));
        }
        if !self.tone_freq_hz.is_finite() {
            return Err(Error::config("tone_freq_hz must be finite"));
        }
        Ok(())
    }
}

/// True when every root of `z^p + a_1 z^{p-1} + … + a_p` lies strictly inside
/// the unit circle, checked via step-down to reflection coefficients.
pub fn ar_is_stable(coeffs: &[f64]) -> bool {
    let mut a = coeffs.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < 1.0) {
            return false;
        }
        let p = a.len();
        let denom = 1.0 - k * k;
        let prev: Vec<f64> = (0..p - 1)
            .map(|i| (a[i] - k * a[p - 2 - i]) / denom)
            .collect();
        a = prev;
    }
    true
}

/// Expands `Π (1 - p_k z^-1)` and returns the coefficients after the leading 1.
/// Poles must come in conjugate pairs (or be real) for the result to be real.
pub fn ar_from_poles(poles: &[Complex64]) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &p in poles {
        let mut next = vec![Complex64::new(0.0, 0.0); poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * p;
        }
        poly = next;
    }
    poly[1..].iter().map(|c| c.re).collect()
}

pub fn generate_synthetic_subject(
    spec: &SyntheticSubjectSpec,
    duration_s: f64,
    fs: f64,
) -> Result<EegRecording> {
    spec.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::config("duration must be positive"));
    }
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::config("sampling rate must be positive"));
    }
    let n = (duration_s * fs).floor() as usize;
    if n == 0 {
        return Err(Error::config("duration·fs yields no samples"));
    }

    let channels = par::map_range(spec.ar_coeffs.len(), |c| {
        let a = &spec.ar_coeffs[c];
        let mut rng = seed::derived_rng(spec.rng_seed, stream::CHANNEL, c as u64);
        let p = a.len();
        let mut hist = vec![0.0f64; p.max(1)];
        let mut out = Vec::with_capacity(n);
        for t in 0..BURN_IN + n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let mut x = spec.noise_std * e;
            // hist[(t - 1 - i) mod p] holds x[t-1-i]
            for (i, ai) in a.iter().enumerate() {
                x -= ai * hist[(t + p - 1 - i) % p];
            }
            if p > 0 {
                hist[t % p] = x;
            }
            if t >= BURN_IN {
                let k = (t - BURN_IN) as f64;
                out.push(x + spec.tone_amplitude * (2.0 * PI * spec.tone_freq_hz * k / fs).sin());
            }
        }
        out
    });

    let n_ch = channels.len();
    let labels = (0..n_ch)
        .map(|c| {
            IN_EAR_CHANNELS
                .get(c)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("CH{c}"))
        })
        .collect();
    let flat: Vec<f64> = channels.into_iter().flatten().collect();
    let samples = Array2::from_shape_vec((n_ch, n), flat).expect("shape matches");
    EegRecording::new(spec.subject_id, fs, labels, samples)
}

/// Default synthetic cohort: `n_subjects` subjects with eight channels each.
///
/// Subject `s` uses AR order `2 + s % 3`. The dominant resonant pole pair sits
/// at a subject-specific frequency with a small per-channel offset; order 3
/// adds a real pole, order 4 a second, higher resonance instead. Tone frequencies
/// are spread evenly over 8–14 Hz.
pub fn default_cohort(n_subjects: usize, master_seed: u64, fs: f64) -> Vec<SyntheticSubjectSpec> {
    (0..n_subjects)
        .map(|s| {
            let seed = seed::derive_seed(master_seed, stream::SYNTH, s as u64);
            let order = 2 + s % 3;
            let ar_coeffs = (0..IN_EAR_CHANNELS.len())
                .map(|c| {
                    let f1 = 6.0 + 1.5 * s as f64 + 0.3 * c as f64;
                    let r1 = 0.965 - 0.004 * (c % 4) as f64;
                    let th1 = 2.0 * PI * f1 / fs;
                    let mut poles = vec![
                        Complex64::from_polar(r1, th1),
                        Complex64::from_polar(r1, -th1),
                    ];
                    if order == 3 {
                        poles.push(Complex64::new(0.3 + 0.05 * s as f64, 0.0));
                    }
                    if order >= 4 {
                        let th2 = 2.0 * PI * (28.0 + 3.0 * s as f64 + 0.5 * c as f64) / fs;
                        poles.push(Complex64::from_polar(0.9, th2));
                        poles.push(Complex64::from_polar(0.9, -th2));
                    }
                    ar_from_poles(&poles)
                })
                .collect();
            let tone_freq_hz = if n_subjects > 1 {
                8.0 + 6.0 * s as f64 / (n_subjects - 1) as f64
            } else {
                10.0
            };
            SyntheticSubjectSpec {
                subject_id: s as u16,
                ar_coeffs,
                tone_freq_hz,
                tone_amplitude: 3.0,
                noise_std: 2.0,
                rng_seed: seed,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn white_spec(n_ch: usize) -> SyntheticSubjectSpec {
        SyntheticSubjectSpec {
            subject_id: 0,
            ar_coeffs: vec![vec![0.0; 4]; n_ch],
            tone_freq_hz: 10.0,
            tone_amplitude: 0.0,
            noise_std: 1.0,
            rng_seed: 11,
        }
    }

    #[test]
    fn stability_check() {
        assert!(ar_is_stable(&[]));
        assert!(ar_is_stable(&[-1.0, 0.5]));
        assert!(!ar_is_stable(&[-2.0, 1.0])); // double root at z = 1
        assert!(!ar_is_stable(&[0.0, 1.2]));
        let a = ar_from_poles(&[
            Complex64::from_polar(0.99, 0.3),
            Complex64::from_polar(0.99, -0.3),
            Complex64::new(-0.5, 0.0),
        ]);
        assert!(ar_is_stable(&a));
        let b = ar_from_poles(&[Complex64::new(1.01, 0.0)]);
        assert!(!ar_is_stable(&b));
    }

    #[test]
    fn poles_expand_to_expected_polynomial() {
        // (1 - 0.5z^-1)(1 + 0.25z^-1) = 1 - 0.25z^-1 - 0.125z^-2
        let a = ar_from_poles(&[Complex64::new(0.5, 0.0), Complex64::new(-0.25, 0.0)]);
        assert!((a[0] + 0.25).abs() < 1e-15 && (a[1] + 0.125).abs() < 1e-15);
    }

    #[test]
    fn unstable_rejected() {
        let mut spec = white_spec(2);
        spec.ar_coeffs[1] = vec![-2.5, 1.5];
        assert!(generate_synthetic_subject(&spec, 1.0, 100.0).is_err());
    }

    #[test]
    fn length_and_determinism() {
        let spec = white_spec(3);
        let a = generate_synthetic_subject(&spec, 2.5, 1000.0).unwrap();
        let b = generate_synthetic_subject(&spec, 2.5, 1000.0).unwrap();
        assert_eq!(a.n_samples(), 2500);
        assert_eq!(a.n_channels(), 3);
        assert_eq!(a, b);
        let mut other = spec.clone();
        other.rng_seed += 1;
        assert_ne!(generate_synthetic_subject(&other, 2.5, 1000.0).unwrap(), a);
    }

    #[test]
    fn white_noise_fits_near_zero_ar() {
        let rec = generate_synthetic_subject(&white_spec(1), 100.0, 1000.0).unwrap();
        let x = rec.channel(0).to_vec();
        let ar = crate::features::yule_walker(&x, 10).unwrap();
        assert!(ar.coeffs.iter().all(|a| a.abs() < 0.1), "{:?}", ar.coeffs);
    }

    #[test]
    fn ar2_recovered() {
        let mut spec = white_spec(2);
        spec.ar_coeffs = vec![vec![-1.0, 0.5]; 2];
        let rec = generate_synthetic_subject(&spec, 100.0, 1000.0).unwrap();
        for c in 0..2 {
            let ar = crate::features::yule_walker(&rec.channel(c).to_vec(), 2).unwrap();
            assert!((ar.coeffs[0] + 1.0).abs() < 0.05, "{:?}", ar.coeffs);
            assert!((ar.coeffs[1] - 0.5).abs() < 0.05, "{:?}", ar.coeffs);
        }
    }

    #[test]
    fn default_cohort_is_valid_and_bounded() {
        let cohort = default_cohort(6, 42, 1000.0);
        assert_eq!(cohort.len(), 6);
        for (s, spec) in cohort.iter().enumerate() {
            spec.validate().unwrap();
            assert_eq!(spec.ar_coeffs[0].len(), 2 + s % 3);
            assert!((8.0..=14.0).contains(&spec.tone_freq_hz));
            let rec = generate_synthetic_subject(spec, 5.0, 1000.0).unwrap();
            assert!(rec.samples.iter().all(|v| v.is_finite() && v.abs() < 1e6));
        }
    }
}
