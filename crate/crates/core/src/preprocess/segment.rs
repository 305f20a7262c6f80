use ndarray::{s, Array2};

use crate::dataio::EegRecording;
use crate::error::{Error, Result};

/// One fixed-length window of a recording, all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub subject_id: u16,
    /// Index of the parent recording in the list it was cut from.
    pub recording: usize,
    pub source_offset: usize,
    /// C × N samples.
    pub channels: Array2<f64>,
}

impl Segment {
    pub fn window_len(&self) -> usize {
        self.channels.ncols()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.nrows()
    }
}

/// Location of a segment without its samples. Pipelines hold these and
/// materialise [`Segment`]s on demand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentRef {
    pub subject_id: u16,
    pub recording: usize,
    pub source_offset: usize,
    pub window_len: usize,
}

impl SegmentRef {
    pub fn materialize(&self, parents: &[EegRecording]) -> Result<Segment> {
        let parent = parents.get(self.recording).ok_or_else(|| {
            Error::data(format!("segment refers to missing recording {}", self.recording))
        })?;
        cut(parent, self.recording, self.source_offset, self.window_len)
    }
}

pub(crate) fn cut(
    parent: &EegRecording,
    recording: usize,
    offset: usize,
    window_len: usize,
) -> Result<Segment> {
    if offset + window_len > parent.n_samples() {
        return Err(Error::data(format!(
            "window [{offset}, {}) exceeds recording length {}",
            offset + window_len,
            parent.n_samples()
        )));
    }
    Ok(Segment {
        subject_id: parent.subject_id,
        recording,
        source_offset: offset,
        channels: parent
            .samples
            .slice(s![.., offset..offset + window_len])
            .to_owned(),
    })
}

/// Window start offsets `0, hop, 2·hop, …` with `offset + window_len ≤ n_total`.
pub fn segment_offsets(n_total: usize, window_len: usize, hop: usize) -> Result<Vec<usize>> {
    if window_len == 0 || hop == 0 {
        return Err(Error::config("window length and hop must be positive"));
    }
    if window_len > n_total {
        return Err(Error::data(format!(
            "no segments: window of {window_len} samples exceeds recording length {n_total}"
        )));
    }
    let count = (n_total - window_len) / hop + 1;
    Ok((0..count).map(|i| i * hop).collect())
}

pub fn segment_recording(rec: &EegRecording, window_len: usize, hop: usize) -> Result<Vec<Segment>> {
    segment_offsets(rec.n_samples(), window_len, hop)?
        .into_iter()
        .map(|off| cut(rec, 0, off, window_len))
        .collect()
}

/// Segment locations for every recording in `recs`, in recording then time order.
pub fn segment_refs(recs: &[EegRecording], window_len: usize, hop: usize) -> Result<Vec<SegmentRef>> {
    let mut out = Vec::new();
    for (idx, rec) in recs.iter().enumerate() {
        for off in segment_offsets(rec.n_samples(), window_len, hop)? {
            out.push(SegmentRef {
                subject_id: rec.subject_id,
                recording: idx,
                source_offset: off,
                window_len,
            });
        }
    }
    Ok(out)
}
