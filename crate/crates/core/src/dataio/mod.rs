//! Recordings, the `.earg` container, CSV import and the synthetic cohort.

mod container;
mod csv_import;
mod synth;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub use container::{load_recording, save_recording, FORMAT_VERSION, MAGIC};
pub use csv_import::load_recording_csv;
pub use synth::{
    ar_from_poles, ar_is_stable, default_cohort, generate_synthetic_subject, SyntheticSubjectSpec,
};

/// The eight in-ear electrode labels, in montage order.
pub const IN_EAR_CHANNELS: [&str; 8] = ["LF", "LB", "LOU", "LOD", "RF", "RB", "ROU", "ROD"];

/// Multi-channel raw signal in microvolts, channel-major (C rows × N samples).
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub subject_id: u16,
    pub sampling_rate_hz: f64,
    pub channel_labels: Vec<String>,
    pub samples: Array2<f64>,
}

impl EegRecording {
    pub fn new(
        subject_id: u16,
        sampling_rate_hz: f64,
        channel_labels: Vec<String>,
        samples: Array2<f64>,
    ) -> Result<Self> {
        let rec = EegRecording {
            subject_id,
            sampling_rate_hz,
            channel_labels,
            samples,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.nrows() != self.channel_labels.len() {
            return Err(Error::data(format!(
                "channel count mismatch: {} sample rows for {} labels",
                self.samples.nrows(),
                self.channel_labels.len()
            )));
        }
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::data(format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate_hz
            )));
        }
        if self.samples.ncols() == 0 {
            return Err(Error::data("recording has no samples"));
        }
        if let Some(pos) = self.samples.iter().position(|v| !v.is_finite()) {
            let (c, n) = (pos / self.samples.ncols(), pos % self.samples.ncols());
            return Err(Error::data(format!(
                "non-finite sample at channel {c}, index {n}"
            )));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn channel(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.samples.row(idx)
    }

    pub fn channel_index(&self, label: &str) -> Option<usize> {
        self.channel_labels.iter().position(|l| l == label)
    }
}
