use std::path::Path;

use ndarray::Array2;

use super::EegRecording;
use crate::error::{Error, Result};

/// Reads a column-per-channel CSV (header row of labels, one row per sample).
/// The file carries no sampling rate, so `fs` is mandatory.
pub fn load_recording_csv(path: impl AsRef<Path>, fs: f64, subject_id: u16) -> Result<EegRecording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let labels: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if labels.is_empty() {
        return Err(Error::data("CSV has no channel columns"));
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != labels.len() {
            return Err(Error::data(format!(
                "channel count mismatch: row {} has {} fields, header has {}",
                row_idx + 1,
                record.len(),
                labels.len()
            )));
        }
        for (col, field) in columns.iter_mut().zip(record.iter()) {
            let v: f64 = field.parse().map_err(|_| {
                Error::data(format!("row {}: cannot parse {field:?}", row_idx + 1))
            })?;
            col.push(v);
        }
    }
    let n = columns[0].len();
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let samples = Array2::from_shape_vec((labels.len(), n), flat)
        .map_err(|e| Error::data(format!("CSV shape: {e}")))?;
    EegRecording::new(subject_id, fs, labels, samples)
}
