//! Binary `.earg` container.
//!
//! Layout (all integers and floats little-endian):
//!
//! | field            | type          |
//! |------------------|---------------|
//! | magic            | `b"EARG"`     |
//! | format version   | u16 (= 1)     |
//! | subject id       | u16           |
//! | sampling rate Hz | f64           |
//! | channel count C  | u16           |
//! | sample count N   | u64           |
//! | C labels         | u16 length + UTF-8 bytes each |
//! | payload          | C·N f32, channel-major |

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::EegRecording;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EARG";
pub const FORMAT_VERSION: u16 = 1;

pub fn save_recording(rec: &EegRecording, path: impl AsRef<Path>) -> Result<()> {
    rec.validate()?;
    if rec.n_channels() > u16::MAX as usize {
        return Err(Error::data("too many channels for container"));
    }
    // Values that overflow f32 would be written as infinities.
    if rec.samples.iter().any(|&v| !(v as f32).is_finite()) {
        return Err(Error::data("non-finite sample after f32 conversion"));
    }

    let mut out = BufWriter::new(fs::File::create(path.as_ref())?);
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&rec.subject_id.to_le_bytes())?;
    out.write_all(&rec.sampling_rate_hz.to_le_bytes())?;
    out.write_all(&(rec.n_channels() as u16).to_le_bytes())?;
    out.write_all(&(rec.n_samples() as u64).to_le_bytes())?;
    for label in &rec.channel_labels {
        let bytes = label.as_bytes();
        let len = u16::try_from(bytes.len())
            .map_err(|_| Error::data(format!("channel label too long: {label}")))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(bytes)?;
    }
    for row in rec.samples.rows() {
        for &v in row {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::data(format!("truncated header: {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn load_recording(path: impl AsRef<Path>) -> Result<EegRecording> {
    let buf = fs::read(path.as_ref())?;
    parse(&buf)
}

fn parse(buf: &[u8]) -> Result<EegRecording> {
    let mut cur = Cursor { buf, pos: 0 };
    if cur.take(4, "magic").map_err(|_| Error::data("bad magic"))? != MAGIC {
        return Err(Error::data("bad magic"));
    }
    let version = cur.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::data(format!("unsupported format version {version}")));
    }
    let subject_id = cur.u16("subject id")?;
    let fs = cur.f64("sampling rate")?;
    let n_channels = cur.u16("channel count")? as usize;
    let n_samples = usize::try_from(cur.u64("sample count")?)
        .map_err(|_| Error::data("sample count overflows usize"))?;
    let payload_len = n_channels
        .checked_mul(n_samples)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| Error::data("payload size overflows"))?;

    let mut labels = Vec::with_capacity(n_channels);
    for _ in 0..n_channels {
        // Fewer labels than declared: the payload starts where the next label
        // length should be.
        if !labels.is_empty() && cur.remaining() == payload_len {
            return Err(Error::data(format!(
                "channel count mismatch: header declares {n_channels} channels, found {} labels",
                labels.len()
            )));
        }
        let len = cur.u16("label length")? as usize;
        let bytes = cur.take(len, "label")?;
        let label = std::str::from_utf8(bytes)
            .map_err(|_| Error::data("channel label is not valid UTF-8"))?;
        labels.push(label.to_owned());
    }

    match cur.remaining().cmp(&payload_len) {
        std::cmp::Ordering::Less => {
            return Err(Error::data(format!(
                "truncated payload: expected {payload_len} bytes, found {}",
                cur.remaining()
            )))
        }
        std::cmp::Ordering::Greater => {
            return Err(Error::data(format!(
                "trailing bytes after payload: expected {payload_len}, found {}",
                cur.remaining()
            )))
        }
        std::cmp::Ordering::Equal => {}
    }

    let payload = cur.take(payload_len, "payload")?;
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    let samples = Array2::from_shape_vec((n_channels, n_samples), values)
        .map_err(|e| Error::data(format!("payload shape: {e}")))?;
    EegRecording::new(subject_id, fs, labels, samples)
}
