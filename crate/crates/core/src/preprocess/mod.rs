//! Channel selection, bandpass and notch filtering, and windowing.

mod filter;
pub(crate) mod segment;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataio::{EegRecording, IN_EAR_CHANNELS};
use crate::error::{Error, Result};
use crate::par;

pub use filter::{apply_filter, Biquad, FilterSpec, Sos};
pub use segment::{segment_offsets, segment_recording, segment_refs, Segment, SegmentRef};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub channels: Vec<String>,
    pub bandpass: FilterSpec,
    pub notch: FilterSpec,
    /// Window length in samples (2 s at 1 kHz).
    pub window_len: usize,
    pub hop: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            channels: IN_EAR_CHANNELS.iter().map(|s| s.to_string()).collect(),
            bandpass: FilterSpec::default_bandpass(),
            notch: FilterSpec::default_notch(),
            window_len: 2000,
            hop: 1000,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::config("PreprocessConfig: channel list is empty"));
        }
        if !matches!(self.bandpass, FilterSpec::Bandpass { .. }) {
            return Err(Error::config("PreprocessConfig: `bandpass` must be a bandpass filter"));
        }
        if !matches!(self.notch, FilterSpec::Notch { .. }) {
            return Err(Error::config("PreprocessConfig: `notch` must be a notch filter"));
        }
        if self.window_len == 0 || self.hop == 0 {
            return Err(Error::config("PreprocessConfig: window_len and hop must be positive"));
        }
        Ok(())
    }
}

/// Keeps exactly the `wanted` channels, in `wanted` order.
pub fn select_channels<S: AsRef<str>>(rec: &EegRecording, wanted: &[S]) -> Result<EegRecording> {
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            rec.channel_index(w.as_ref())
                .ok_or_else(|| Error::data(format!("unknown channel {}", w.as_ref())))
        })
        .collect::<Result<_>>()?;
    let samples = Array2::from_shape_fn((idx.len(), rec.n_samples()), |(r, t)| {
        rec.samples[[idx[r], t]]
    });
    EegRecording::new(
        rec.subject_id,
        rec.sampling_rate_hz,
        wanted.iter().map(|w| w.as_ref().to_owned()).collect(),
        samples,
    )
}

/// Channel selection followed by bandpass then notch on every channel.
pub fn clean_recording(rec: &EegRecording, cfg: &PreprocessConfig) -> Result<EegRecording> {
    cfg.validate()?;
    let selected = select_channels(rec, &cfg.channels)?;
    let fs = rec.sampling_rate_hz;
    let bandpass = cfg.bandpass.design(fs)?;
    let notch = cfg.notch.design(fs)?;
    let rows = par::try_map_range(selected.n_channels(), |c| {
        let x = selected.channel(c).to_vec();
        let y = filter::apply_sos(&x, &bandpass, cfg.bandpass.zero_phase())?;
        filter::apply_sos(&y, &notch, cfg.notch.zero_phase())
    })?;
    let n = selected.n_samples();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let samples = Array2::from_shape_vec((selected.n_channels(), n), flat).expect("shape");
    EegRecording::new(rec.subject_id, fs, selected.channel_labels, samples)
        .map_err(|e| Error::numeric(format!("filtering produced invalid output: {e}")))
}

/// select → bandpass → notch → segment.
pub fn preprocess_pipeline(rec: &EegRecording, cfg: &PreprocessConfig) -> Result<Vec<Segment>> {
    let clean = clean_recording(rec, cfg)?;
    segment_recording(&clean, cfg.window_len, cfg.hop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{default_cohort, generate_synthetic_subject};
    use proptest::prelude::*;

    fn rec8(n: usize) -> EegRecording {
        let samples = Array2::from_shape_fn((8, n), |(c, i)| (c as f64 + 1.0) * ((i as f64) * 0.07).sin());
        EegRecording::new(
            2,
            1000.0,
            IN_EAR_CHANNELS.iter().map(|s| s.to_string()).collect(),
            samples,
        )
        .unwrap()
    }

    #[test]
    fn select_identity_projection_and_unknown() {
        let rec = rec8(100);
        assert_eq!(select_channels(&rec, &IN_EAR_CHANNELS).unwrap(), rec);
        let two = select_channels(&rec, &["LF", "RF"]).unwrap();
        assert_eq!(two.n_channels(), 2);
        assert_eq!(two.channel(1), rec.channel(4));
        let err = select_channels(&rec, &["LF", "XX"]).unwrap_err();
        assert_eq!(err.to_string(), "unknown channel XX");
    }

    #[test]
    fn sixty_second_recording_gives_59_segments() {
        let spec = &default_cohort(1, 3, 1000.0)[0];
        let rec = generate_synthetic_subject(spec, 60.0, 1000.0).unwrap();
        let segs = preprocess_pipeline(&rec, &PreprocessConfig::default()).unwrap();
        assert_eq!(segs.len(), 59);
        assert!(segs.iter().all(|s| s.channels.dim() == (8, 2000)));
    }

    #[test]
    fn missing_channel_fails() {
        let rec = select_channels(&rec8(5000), &["LF", "LB", "LOU", "LOD", "RF", "RB", "ROU"]).unwrap();
        let err = preprocess_pipeline(&rec, &PreprocessConfig::default()).unwrap_err();
        assert!(err.to_string().contains("unknown channel ROD"));
    }

    #[test]
    fn zero_in_zero_out() {
        let labels = IN_EAR_CHANNELS.iter().map(|s| s.to_string()).collect();
        let rec = EegRecording::new(0, 1000.0, labels, Array2::zeros((8, 4000))).unwrap();
        let segs = preprocess_pipeline(&rec, &PreprocessConfig::default()).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.channels.iter().all(|&v| v == 0.0)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn filtering_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            use rand::Rng;
            let mut rng = crate::seed::rng(seed);
            let x: Vec<f64> = (0..800).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..800).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            for spec in [FilterSpec::default_bandpass(), FilterSpec::default_notch()] {
                let fx = apply_filter(&x, &spec, 1000.0).unwrap();
                let fy = apply_filter(&y, &spec, 1000.0).unwrap();
                let fm = apply_filter(&mix, &spec, 1000.0).unwrap();
                let scale = fm.iter().map(|v| v.abs()).fold(1e-12, f64::max);
                for i in 0..fm.len() {
                    let expect = a * fx[i] + b * fy[i];
                    prop_assert!((fm[i] - expect).abs() <= 1e-9 * scale);
                }
            }
        }
    }
}
