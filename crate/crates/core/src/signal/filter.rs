//! Butterworth high-pass design and zero-phase (forward-backward) filtering.
//!
//! The filter is a cascade of second-order sections in transposed direct form
//! II. Bidirectional filtering pads both edges with an odd reflection of
//! length `3 * (order + 1)` and starts each pass from the steady-state section
//! state scaled by the first input sample, so constant inputs produce no
//! startup transient.

use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// One biquad: `b = [b0, b1, b2]`, `a = [1, a1, a2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }

    /// Complex response at `z = exp(j * omega)`.
    fn response(&self, omega: f64) -> C64 {
        let z1 = C64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = re(self.b[0]) + z1 * self.b[1] + z2 * self.b[2];
        let den = re(self.a[0]) + z1 * self.a[1] + z2 * self.a[2];
        num / den
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Highpass {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    pub sections: Vec<Section>,
    /// Steady-state TDF-II states for a unit step, per section.
    zi: Vec<[f64; 2]>,
}

impl Highpass {
    /// Digital Butterworth high-pass via the bilinear transform with prewarping.
    pub fn butterworth(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("filter order must be >= 1".into()));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {})",
                sample_rate_hz / 2.0
            )));
        }
        let fs2 = 2.0 * sample_rate_hz;
        let warped = fs2 * (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        let n = order as f64;

        // Upper-half-plane prototype poles plus the real pole for odd orders.
        let mut sections = Vec::new();
        for k in 1..=order {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + n - 1.0) / (2.0 * n);
            let p = C64::from_polar(1.0, theta);
            if p.im < -1e-12 {
                continue;
            }
            // Low-pass to high-pass (s -> wc / s), then bilinear.
            let s = re(warped) / p;
            let z = (re(fs2) + s) / (re(fs2) - s);
            if p.im.abs() <= 1e-12 {
                sections.push(Section {
                    b: [1.0, -1.0, 0.0],
                    a: [1.0, -z.re, 0.0],
                });
            } else {
                sections.push(Section {
                    b: [1.0, -2.0, 1.0],
                    a: [1.0, -2.0 * z.re, z.norm_sqr()],
                });
            }
        }
        // Unit gain at Nyquist.
        let nyq: f64 = sections
            .iter()
            .map(|s| s.response(std::f64::consts::PI).norm())
            .product();
        for b in sections[0].b.iter_mut() {
            *b /= nyq;
        }
        let zi = steady_state(&sections);
        Ok(Self {
            order,
            cutoff_hz,
            sample_rate_hz,
            sections,
            zi,
        })
    }

    /// The default preprocessing filter: 3rd order, 3 Hz at 2000 Hz.
    pub fn preprocessing() -> Self {
        Self::preprocessing_at(2000.0).expect("valid design")
    }

    /// The preprocessing design (3rd order, 3 Hz) at another sample rate.
    pub fn preprocessing_at(sample_rate_hz: f64) -> Result<Self> {
        Self::butterworth(3, 3.0, sample_rate_hz)
    }

    pub fn pad_len(&self) -> usize {
        3 * (self.order + 1)
    }

    /// Magnitude of the one-directional response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.sample_rate_hz;
        self.sections.iter().map(|s| s.response(w).norm()).product()
    }

    /// Causal pass starting from the unit-step steady state scaled by `scale`.
    fn run(&self, x: &mut [f64], scale: f64) {
        for (sec, zi) in self.sections.iter().zip(&self.zi) {
            let [b0, b1, b2] = sec.b;
            let [_, a1, a2] = sec.a;
            let mut z0 = zi[0] * scale;
            let mut z1 = zi[1] * scale;
            for v in x.iter_mut() {
                let xin = *v;
                let y = b0 * xin + z0;
                z0 = b1 * xin - a1 * y + z1;
                z1 = b2 * xin - a2 * y;
                *v = y;
            }
        }
    }

    /// Zero-phase filtering of a single channel.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = x.len();
        let pad = self.pad_len();
        if n <= pad {
            return Err(Error::WindowTooShort { needed: pad, have: n });
        }
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let s = ext[0];
        self.run(&mut ext, s);
        ext.reverse();
        let s = ext[0];
        self.run(&mut ext, s);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    /// Zero-phase filtering of a row-major `n x channels` block, per channel.
    pub fn filtfilt_block(&self, data: &[f64], channels: usize) -> Result<Vec<f64>> {
        if channels == 0 || !data.len().is_multiple_of(channels) {
            return Err(Error::ShapeMismatch(format!(
                "{} values do not form rows of {channels} channels",
                data.len()
            )));
        }
        let n = data.len() / channels;
        let mut out = vec![0.0; data.len()];
        let mut col = vec![0.0; n];
        for c in 0..channels {
            for (t, v) in col.iter_mut().enumerate() {
                *v = data[t * channels + c];
            }
            let y = self.filtfilt(&col)?;
            for (t, v) in y.into_iter().enumerate() {
                out[t * channels + c] = v;
            }
        }
        Ok(out)
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn steady_state(sections: &[Section]) -> Vec<[f64; 2]> {
    let mut level = 1.0;
    sections
        .iter()
        .map(|s| {
            let y = s.dc_gain() * level;
            let z1 = s.b[2] * level - s.a[2] * y;
            let z0 = y - s.b[0] * level;
            level = y;
            [z0, z1]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Squared magnitude of the digital Butterworth high-pass, from its closed form.
    fn oracle_sq(f: f64, fc: f64, fs: f64, order: i32) -> f64 {
        let pi = std::f64::consts::PI;
        let r = (pi * fc / fs).tan() / (pi * f / fs).tan();
        1.0 / (1.0 + r.powi(2 * order))
    }

    #[test]
    fn design_matches_closed_form_magnitude() {
        let hp = Highpass::preprocessing();
        assert_eq!(hp.sections.len(), 2);
        for f in [0.5, 1.0, 3.0, 10.0, 100.0, 900.0] {
            let got = hp.magnitude(f).powi(2);
            let want = oracle_sq(f, 3.0, 2000.0, 3);
            assert!((got - want).abs() <= 1e-9 * want.max(1e-12), "{f}: {got} vs {want}");
        }
        assert!((hp.magnitude(3.0) - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn even_order_design() {
        let hp = Highpass::butterworth(4, 10.0, 1000.0).unwrap();
        assert_eq!(hp.sections.len(), 2);
        let got = hp.magnitude(5.0).powi(2);
        assert!((got - oracle_sq(5.0, 10.0, 1000.0, 4)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_design() {
        assert!(Highpass::butterworth(0, 3.0, 2000.0).is_err());
        assert!(Highpass::butterworth(3, 1000.0, 2000.0).is_err());
        assert!(Highpass::butterworth(3, 0.0, 2000.0).is_err());
    }

    #[test]
    fn constant_input_is_rejected_completely() {
        let hp = Highpass::preprocessing();
        let y = hp.filtfilt(&vec![1241.0; 100]).unwrap();
        let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 1e-6 * 1241.0, "{peak}");
    }

    #[test]
    fn too_short_window_errors() {
        let hp = Highpass::preprocessing();
        assert!(matches!(
            hp.filtfilt(&[0.0; 12]),
            Err(Error::WindowTooShort { needed: 12, have: 12 })
        ));
        assert!(hp.filtfilt(&[0.0; 13]).is_ok());
    }

    #[test]
    fn block_filter_is_per_channel() {
        let hp = Highpass::preprocessing();
        let n = 200;
        let mut block = vec![0.0; n * 2];
        for t in 0..n {
            block[2 * t] = 1200.0 + (t as f64 * 0.3).sin();
            block[2 * t + 1] = 1300.0 + (t as f64 * 0.3).sin();
        }
        let y = hp.filtfilt_block(&block, 2).unwrap();
        for t in 0..n {
            assert!((y[2 * t] - y[2 * t + 1]).abs() < 1e-9);
        }
        assert!(hp.filtfilt_block(&block[..5], 2).is_err());
    }
}
