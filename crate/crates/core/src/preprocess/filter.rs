//! IIR filter design and application as cascaded second-order sections.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterSpec {
    /// Butterworth bandpass. `order` is the order of the resulting digital
    /// filter (even; `order / 2` second-order sections).
    Bandpass {
        low_hz: f64,
        high_hz: f64,
        order: usize,
        zero_phase: bool,
    },
    /// Second-order IIR notch with quality factor `q_factor`.
    Notch {
        center_hz: f64,
        q_factor: f64,
        zero_phase: bool,
    },
}

impl FilterSpec {
    pub fn default_bandpass() -> Self {
        FilterSpec::Bandpass {
            low_hz: 0.5,
            high_hz: 100.0,
            order: 4,
            zero_phase: true,
        }
    }

    pub fn default_notch() -> Self {
        FilterSpec::Notch {
            center_hz: 50.0,
            q_factor: 30.0,
            zero_phase: true,
        }
    }

    pub fn zero_phase(&self) -> bool {
        match *self {
            FilterSpec::Bandpass { zero_phase, .. } | FilterSpec::Notch { zero_phase, .. } => {
                zero_phase
            }
        }
    }

    pub fn design(&self, fs: f64) -> Result<Sos> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::config("sampling rate must be positive"));
        }
        let nyq = fs / 2.0;
        let sos = match *self {
            FilterSpec::Bandpass {
                low_hz,
                high_hz,
                order,
                ..
            } => {
                if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyq) {
                    return Err(Error::config(format!(
                        "bandpass requires 0 < low < high < fs/2, got {low_hz}..{high_hz} at fs {fs}"
                    )));
                }
                if order == 0 || order % 2 != 0 {
                    return Err(Error::config(format!(
                        "bandpass order must be even and positive, got {order}"
                    )));
                }
                butterworth_bandpass(order / 2, low_hz, high_hz, fs)
            }
            FilterSpec::Notch {
                center_hz,
                q_factor,
                ..
            } => {
                if !(center_hz > 0.0 && center_hz < nyq) {
                    return Err(Error::config(format!(
                        "notch requires 0 < center < fs/2, got {center_hz} at fs {fs}"
                    )));
                }
                if !(q_factor.is_finite() && q_factor > 0.0) {
                    return Err(Error::config("notch Q must be positive"));
                }
                Sos {
                    sections: vec![iir_notch(center_hz, q_factor, fs)],
                }
            }
        };
        sos.check_stable()?;
        Ok(sos)
    }
}

/// One biquad, `a[0]` normalised to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[1], self.a[2]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            ((-a1 + s) / 2.0).abs().max(((-a1 - s) / 2.0).abs())
        } else {
            a2.sqrt()
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Transposed direct-form II state for a unit step in steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        let z2 = self.b[2] - self.a[2] * g;
        let z1 = self.b[1] - self.a[1] * g + z2;
        [z1, z2]
    }
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<Biquad>,
}

impl Sos {
    pub fn order(&self) -> usize {
        2 * self.sections.len()
    }

    pub fn check_stable(&self) -> Result<()> {
        for (i, s) in self.sections.iter().enumerate() {
            let r = s.pole_radius();
            if !(r < 1.0) {
                return Err(Error::numeric(format!(
                    "unstable filter design: section {i} pole radius {r}"
                )));
            }
        }
        Ok(())
    }

    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64, fs: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / fs;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
            let num = s.b[0] + z1 * s.b[1] + z2 * s.b[2];
            let den = s.a[0] + z1 * s.a[1] + z2 * s.a[2];
            acc * num / den
        })
    }

    /// Initial states making the cascade's step response start in steady state.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let zi = [z1 * scale, z2 * scale];
                scale *= s.dc_gain();
                zi
            })
            .collect()
    }

    /// Causal filtering with states initialised to the steady state of a
    /// step of height `x[0]`.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.filter_in_place(&mut y);
        y
    }

    fn filter_in_place(&self, x: &mut [f64]) {
        let Some(&x0) = x.first() else { return };
        for (s, zi) in self.sections.iter().zip(self.step_states()) {
            let [mut z1, mut z2] = [zi[0] * x0, zi[1] * x0];
            let [b0, b1, b2] = s.b;
            let [_, a1, a2] = s.a;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z1;
                z1 = b1 * xin - a1 * y + z2;
                z2 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Forward–backward filtering with odd reflection padding of `padlen`
    /// samples on each side. Zero net phase, squared magnitude response.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Result<Vec<f64>> {
        let n = x.len();
        if n <= padlen {
            return Err(Error::data(format!(
                "signal too short: {n} samples, need more than {padlen}"
            )));
        }
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        self.filter_in_place(&mut ext);
        ext.reverse();
        self.filter_in_place(&mut ext);
        ext.reverse();
        Ok(ext[padlen..padlen + n].to_vec())
    }
}

/// Digital Butterworth bandpass from an analog prototype of order
/// `proto_order`, via lowpass→bandpass transform and the bilinear transform
/// with prewarped band edges. Unit gain at the band centre.
fn butterworth_bandpass(proto_order: usize, low_hz: f64, high_hz: f64, fs: f64) -> Sos {
    let n = proto_order as f64;
    let fs2 = 2.0 * fs;
    let w_lo = fs2 * (PI * low_hz / fs).tan();
    let w_hi = fs2 * (PI * high_hz / fs).tan();
    let bw = w_hi - w_lo;
    let w0 = (w_lo * w_hi).sqrt();

    let mut analog = Vec::with_capacity(2 * proto_order);
    for k in 0..proto_order {
        let m = -(n - 1.0) + 2.0 * k as f64;
        let p = -Complex64::from_polar(1.0, PI * m / (2.0 * n));
        let half = p * bw / 2.0;
        let root = (half * half - w0 * w0).sqrt();
        analog.push(half + root);
        analog.push(half - root);
    }
    let digital: Vec<Complex64> = analog
        .iter()
        .map(|&s| (fs2 + s) / (fs2 - s))
        .collect();

    let mut complex_poles: Vec<Complex64> = digital.iter().copied().filter(|p| p.im > 1e-12).collect();
    complex_poles.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut real_poles: Vec<f64> = digital
        .iter()
        .filter(|p| p.im.abs() <= 1e-12)
        .map(|p| p.re)
        .collect();
    real_poles.sort_by(|a, b| a.total_cmp(b));

    let mut sections: Vec<Biquad> = complex_poles
        .iter()
        .map(|p| Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -2.0 * p.re, p.norm_sqr()],
        })
        .collect();
    for pair in real_poles.chunks(2) {
        let (p1, p2) = (pair[0], *pair.get(1).unwrap_or(&0.0));
        sections.push(Biquad {
            b: [1.0, 0.0, -1.0],
            a: [1.0, -(p1 + p2), p1 * p2],
        });
    }

    let mut sos = Sos { sections };
    let centre_hz = fs / PI * (w0 / fs2).atan();
    let gain = sos.response(centre_hz, fs).norm();
    for v in sos.sections[0].b.iter_mut() {
        *v /= gain;
    }
    sos
}

/// Second-order notch with zeros on the unit circle at `center_hz` and
/// -3 dB bandwidth `center_hz / q`.
fn iir_notch(center_hz: f64, q: f64, fs: f64) -> Biquad {
    let w0 = 2.0 * PI * center_hz / fs;
    let bw = w0 / q;
    let beta = (bw / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Biquad {
        b: [gain, -2.0 * gain * c, gain],
        a: [1.0, -2.0 * gain * c, 2.0 * gain - 1.0],
    }
}

/// Filters one channel according to `spec`. Zero-phase filtering pads
/// `3 × order` reflected samples at each end, so the signal must be longer
/// than that.
pub fn apply_filter(signal: &[f64], spec: &FilterSpec, fs: f64) -> Result<Vec<f64>> {
    let sos = spec.design(fs)?;
    apply_sos(signal, &sos, spec.zero_phase())
}

pub(crate) fn apply_sos(signal: &[f64], sos: &Sos, zero_phase: bool) -> Result<Vec<f64>> {
    let padlen = 3 * sos.order();
    if signal.len() <= padlen {
        return Err(Error::data(format!(
            "signal too short: {} samples, filter of order {} needs more than {padlen}",
            signal.len(),
            sos.order()
        )));
    }
    if zero_phase {
        sos.filtfilt(signal, padlen)
    } else {
        Ok(sos.filter(signal))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 1000.0;

    fn tone(f: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    // Independent response evaluation: direct polynomial ratio on the unit
    // circle, no use of Sos::response.
    fn gain_direct(b: [f64; 3], a: [f64; 3], f: f64) -> f64 {
        let w = 2.0 * PI * f / FS;
        let re = |c: [f64; 3]| c[0] + c[1] * w.cos() + c[2] * (2.0 * w).cos();
        let im = |c: [f64; 3]| -(c[1] * w.sin() + c[2] * (2.0 * w).sin());
        ((re(b).powi(2) + im(b).powi(2)) / (re(a).powi(2) + im(a).powi(2))).sqrt()
    }

    #[test]
    fn default_designs_are_stable() {
        let bp = FilterSpec::default_bandpass().design(FS).unwrap();
        assert_eq!(bp.sections.len(), 2);
        assert!(bp.sections.iter().all(|s| s.pole_radius() < 1.0));
        let notch = FilterSpec::default_notch().design(FS).unwrap();
        assert!(notch.sections[0].pole_radius() < 1.0);
    }

    #[test]
    fn bandpass_response_shape() {
        let bp = FilterSpec::default_bandpass().design(FS).unwrap();
        let g = |f: f64| {
            bp.sections
                .iter()
                .map(|s| gain_direct(s.b, s.a, f))
                .product::<f64>()
        };
        assert!(g(1e-9) < 1e-6);
        assert!((g(10.0) - 1.0).abs() < 0.01);
        // -3 dB at the band edges for Butterworth
        assert!((g(0.5) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{}", g(0.5));
        assert!((g(100.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6, "{}", g(100.0));
        assert!(g(400.0) < 0.1);
    }

    #[test]
    fn odd_prototype_order_designs() {
        let spec = FilterSpec::Bandpass {
            low_hz: 1.0,
            high_hz: 40.0,
            order: 6,
            zero_phase: false,
        };
        let sos = spec.design(FS).unwrap();
        assert_eq!(sos.sections.len(), 3);
        assert!((sos.response(1.0, FS).norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn invalid_designs_rejected() {
        let bad = FilterSpec::Bandpass {
            low_hz: 10.0,
            high_hz: 600.0,
            order: 4,
            zero_phase: true,
        };
        assert!(bad.design(FS).is_err());
        let odd = FilterSpec::Bandpass {
            low_hz: 1.0,
            high_hz: 10.0,
            order: 3,
            zero_phase: true,
        };
        assert!(odd.design(FS).is_err());
        let notch = FilterSpec::Notch {
            center_hz: 500.0,
            q_factor: 30.0,
            zero_phase: true,
        };
        assert!(notch.design(FS).is_err());
    }

    #[test]
    fn dc_is_rejected() {
        let x = vec![3.0; 6000];
        let y = apply_filter(&x, &FilterSpec::default_bandpass(), FS).unwrap();
        let mean = y[500..y.len() - 500].iter().map(|v| v.abs()).sum::<f64>() / (y.len() - 1000) as f64;
        assert!(mean < 1e-3 * 3.0, "mean |y| = {mean}");
    }

    #[test]
    fn passband_gain_at_10hz() {
        let x = tone(10.0, 10_000);
        let y = apply_filter(&x, &FilterSpec::default_bandpass(), FS).unwrap();
        let g = rms(&y[2000..8000]) / rms(&x[2000..8000]);
        assert!((0.95..=1.05).contains(&g), "gain {g}");
    }

    #[test]
    fn notch_attenuates_50hz() {
        let spec = FilterSpec::default_notch();
        let sos = spec.design(FS).unwrap();
        let s = sos.sections[0];
        let analytic = gain_direct(s.b, s.a, 50.0).powi(2);
        assert!(analytic < 1e-4, "|H|^2 = {analytic}");
        let x = tone(50.0, 10_000);
        let y = apply_filter(&x, &spec, FS).unwrap();
        let att_db = 20.0 * (rms(&x[3000..7000]) / rms(&y[3000..7000])).log10();
        assert!(att_db >= 40.0, "attenuation {att_db} dB");
    }

    #[test]
    fn too_short_signal() {
        let err = apply_filter(&[1.0; 12], &FilterSpec::default_bandpass(), FS).unwrap_err();
        assert!(err.to_string().contains("too short"));
    }

    #[test]
    fn symmetric_pulse_stays_symmetric() {
        let n = 4001;
        let x: Vec<f64> = (0..n)
            .map(|i| {
                let t = (i as f64 - 2000.0) / 30.0;
                (-t * t).exp()
            })
            .collect();
        for spec in [FilterSpec::default_bandpass(), FilterSpec::default_notch()] {
            let y = apply_filter(&x, &spec, FS).unwrap();
            let peak = y
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert!((peak as i64 - 2000).abs() <= 1, "peak at {peak}");
        }
    }

    #[test]
    fn causal_mode_keeps_length() {
        let spec = FilterSpec::Notch {
            center_hz: 50.0,
            q_factor: 30.0,
            zero_phase: false,
        };
        let x = tone(10.0, 500);
        assert_eq!(apply_filter(&x, &spec, FS).unwrap().len(), 500);
    }
}
