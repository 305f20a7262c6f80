//! Welch power spectral density.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    #[default]
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub nperseg: usize,
    pub noverlap: usize,
    pub window_fn: WindowFn,
    pub fs: f64,
}

impl WelchConfig {
    pub fn new(fs: f64) -> Self {
        WelchConfig {
            nperseg: 256,
            noverlap: 128,
            window_fn: WindowFn::Hann,
            fs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nperseg < 2 {
            return Err(Error::config("WelchConfig: nperseg must be at least 2"));
        }
        if self.noverlap >= self.nperseg {
            return Err(Error::config("WelchConfig: noverlap must be smaller than nperseg"));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::config("WelchConfig: fs must be positive"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.nperseg / 2 + 1
    }
}

/// One-sided power spectral density.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        if self.freqs_hz.len() > 1 {
            self.freqs_hz[1] - self.freqs_hz[0]
        } else {
            0.0
        }
    }
}

/// Welch estimator with a cached window and FFT plan. Shareable across threads.
pub struct Welch {
    cfg: WelchConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Density scaling `1 / (fs · Σ w²)`.
    scale: f64,
}

impl std::fmt::Debug for Welch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Welch").field("cfg", &self.cfg).finish()
    }
}

impl Welch {
    pub fn new(cfg: WelchConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.nperseg;
        // Periodic Hann.
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        let energy: f64 = window.iter().map(|w| w * w).sum();
        let fft = FftPlanner::new().plan_fft_forward(n);
        Ok(Welch {
            cfg,
            window,
            fft,
            scale: 1.0 / (cfg.fs * energy),
        })
    }

    pub fn config(&self) -> &WelchConfig {
        &self.cfg
    }

    /// Number of averaged subsegments for a signal of `len` samples.
    pub fn n_subsegments(&self, len: usize) -> usize {
        if len < self.cfg.nperseg {
            return 0;
        }
        (len - self.cfg.noverlap) / (self.cfg.nperseg - self.cfg.noverlap)
    }

    pub fn estimate(&self, signal: &[f64]) -> Result<PsdEstimate> {
        let n = self.cfg.nperseg;
        if signal.len() < n {
            return Err(Error::data(format!(
                "signal of {} samples is shorter than nperseg = {n}",
                signal.len()
            )));
        }
        let step = n - self.cfg.noverlap;
        let k = self.n_subsegments(signal.len());
        let n_bins = self.cfg.n_bins();
        let mut acc = vec![0.0f64; n_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for seg in 0..k {
            let start = seg * step;
            for (slot, (&x, &w)) in buf
                .iter_mut()
                .zip(signal[start..start + n].iter().zip(&self.window))
            {
                *slot = Complex64::new(x * w, 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (a, c) in acc.iter_mut().zip(&buf) {
                *a += c.norm_sqr();
            }
        }
        let norm = self.scale / k as f64;
        let last_doubled = if n.is_multiple_of(2) { n_bins - 1 } else { n_bins };
        let power: Vec<f64> = acc
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                let one_sided = if i > 0 && i < last_doubled { 2.0 } else { 1.0 };
                a * norm * one_sided
            })
            .collect();
        let df = self.cfg.fs / n as f64;
        Ok(PsdEstimate {
            freqs_hz: (0..n_bins).map(|i| i as f64 * df).collect(),
            power,
        })
    }
}

pub fn welch_psd(signal: &[f64], cfg: &WelchConfig) -> Result<PsdEstimate> {
    Welch::new(*cfg)?.estimate(signal)
}

/// The first `n_keep` PSD bins.
pub fn retain_psd_features(psd: &PsdEstimate, n_keep: usize) -> Result<Vec<f64>> {
    if n_keep == 0 {
        return Err(Error::config("empty feature slice"));
    }
    if psd.power.len() < n_keep {
        return Err(Error::data(format!(
            "PSD has {} bins, cannot keep {n_keep}",
            psd.power.len()
        )));
    }
    Ok(psd.power[..n_keep].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn cfg() -> WelchConfig {
        WelchConfig::new(1000.0)
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0
    }

    #[test]
    fn zero_signal_zero_power() {
        let psd = welch_psd(&[0.0; 2000], &cfg()).unwrap();
        assert_eq!(psd.power.len(), 129);
        assert!(psd.power.iter().all(|&p| p == 0.0));
        assert_eq!(psd.freqs_hz[128], 500.0);
    }

    #[test]
    fn bin_aligned_tone_peaks_at_bin_10() {
        let f = 39.0625; // 10 · 1000 / 256
        let x: Vec<f64> = (0..2000).map(|i| (2.0 * PI * f * i as f64 / 1000.0).sin()).collect();
        let psd = welch_psd(&x, &cfg()).unwrap();
        assert_eq!(argmax(&psd.power), 10);
        let kept = retain_psd_features(&psd, 20).unwrap();
        assert_eq!(argmax(&kept), 10);
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = crate::seed::rng(5);
        let x: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let psd = welch_psd(&x, &cfg()).unwrap();
        let total: f64 = psd.power.iter().sum::<f64>() * psd.bin_width();
        assert!((total / var - 1.0).abs() < 0.05, "{total} vs {var}");
    }

    #[test]
    fn subsegment_count() {
        let w = Welch::new(cfg()).unwrap();
        assert_eq!(w.n_subsegments(2000), 14);
        assert_eq!(w.n_subsegments(256), 1);
        assert!(w.estimate(&[1.0; 255]).is_err());
    }

    #[test]
    fn retain_slices_and_errors() {
        let psd = PsdEstimate {
            freqs_hz: (0..129).map(|i| i as f64).collect(),
            power: (0..129).map(|i| i as f64 * 2.0).collect(),
        };
        assert_eq!(retain_psd_features(&psd, 20).unwrap(), psd.power[..20].to_vec());
        assert_eq!(
            retain_psd_features(&psd, 0).unwrap_err().to_string(),
            "empty feature slice"
        );
        assert!(retain_psd_features(&psd, 130).is_err());
    }

    #[test]
    fn invalid_config() {
        let mut c = cfg();
        c.noverlap = 256;
        assert!(Welch::new(c).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn power_is_non_negative(x in proptest::collection::vec(-1e3f64..1e3, 256..1200)) {
            let psd = welch_psd(&x, &cfg()).unwrap();
            prop_assert!(psd.power.iter().all(|p| *p >= 0.0 && p.is_finite()));
        }
    }
}
