//! Butterworth IIR design as cascaded second-order sections, causal and
//! zero-phase application, and frequency-response evaluation.
//!
//! Designs go through the analog prototype and the bilinear transform with
//! pre-warped corners, so the -3 dB points land on the requested digital
//! frequencies.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Lowpass,
    Highpass,
    Bandpass,
    /// Band-stop, used as a notch.
    Notch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Number of poles of the digital filter. Band filters need a multiple
    /// of two (two poles per prototype pole).
    pub order: usize,
    /// One corner for low/highpass, `[low, high]` for band filters, Hz.
    pub corners_hz: [f64; 2],
    pub sample_rate_hz: f64,
    /// Forward-backward application (doubles the effective order).
    pub zero_phase: bool,
}

impl FilterSpec {
    pub fn lowpass(order: usize, corner_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Lowpass,
            order,
            corners_hz: [corner_hz, corner_hz],
            sample_rate_hz,
            zero_phase: true,
        }
    }

    pub fn highpass(order: usize, corner_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Highpass,
            ..FilterSpec::lowpass(order, corner_hz, sample_rate_hz)
        }
    }

    pub fn bandpass(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Bandpass,
            order,
            corners_hz: [low_hz, high_hz],
            sample_rate_hz,
            zero_phase: true,
        }
    }

    pub fn notch(order: usize, low_hz: f64, high_hz: f64, sample_rate_hz: f64) -> Self {
        FilterSpec {
            kind: FilterKind::Notch,
            ..FilterSpec::bandpass(order, low_hz, high_hz, sample_rate_hz)
        }
    }

    fn is_band(&self) -> bool {
        matches!(self.kind, FilterKind::Bandpass | FilterKind::Notch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample_rate_hz", "must be positive"));
        }
        if self.order < 2 || !self.order.is_multiple_of(2) {
            return Err(Error::invalid(
                "order",
                format!("must be an even integer >= 2, got {}", self.order),
            ));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        let corners: &[f64] = if self.is_band() {
            &self.corners_hz
        } else {
            &self.corners_hz[..1]
        };
        for &c in corners {
            if !(c > 0.0 && c < nyquist) {
                return Err(Error::CornerAboveNyquist {
                    corner_hz: c,
                    nyquist_hz: nyquist,
                });
            }
        }
        if self.is_band() && !(self.corners_hz[0] < self.corners_hz[1]) {
            return Err(Error::invalid("corners_hz", "band corners must be increasing"));
        }
        Ok(())
    }
}

/// One biquad `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    /// `[1, a1, a2]`
    pub a: [f64; 3],
}

impl Sos {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b[0] + self.b[1] * z_inv + self.b[2] * z2) / (self.a[0] + self.a[1] * z_inv + self.a[2] * z2)
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (self.a[0] + self.a[1] + self.a[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosFilter {
    pub spec: FilterSpec,
    pub sections: Vec<Sos>,
}

impl SosFilter {
    /// Complex response of one causal pass at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.spec.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections.iter().map(|s| s.response(z_inv)).product()
    }

    /// Magnitude of the filter as applied: squared for zero-phase filtering.
    pub fn magnitude(&self, freq_hz: f64) -> f64 {
        let m = self.response(freq_hz).norm();
        if self.spec.zero_phase {
            m * m
        } else {
            m
        }
    }

    /// Filter `x` according to `spec.zero_phase`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.spec.zero_phase {
            filtfilt(&self.sections, x)
        } else {
            sosfilt(&self.sections, x)
        }
    }
}

/// Butterworth second-order sections for `spec`.
pub fn design_filter(spec: &FilterSpec) -> Result<SosFilter> {
    spec.validate()?;
    let fs = spec.sample_rate_hz;
    let warp = |f: f64| 2.0 * fs * (PI * f / fs).tan();
    let n = if spec.is_band() { spec.order / 2 } else { spec.order };
    let proto: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, PI * (2 * k + n + 1) as f64 / (2 * n) as f64))
        .collect();

    // Analog poles and zeros after the frequency transformation.
    // `None` stands for a zero at infinity.
    let mut poles = Vec::new();
    let mut zeros: Vec<Option<Complex64>> = Vec::new();
    let gain_freq;
    match spec.kind {
        FilterKind::Lowpass => {
            let wc = warp(spec.corners_hz[0]);
            poles.extend(proto.iter().map(|p| p * wc));
            zeros.extend(std::iter::repeat_n(None, n));
            gain_freq = 0.0;
        }
        FilterKind::Highpass => {
            let wc = warp(spec.corners_hz[0]);
            poles.extend(proto.iter().map(|p| wc / p));
            zeros.extend(std::iter::repeat_n(Some(Complex64::new(0.0, 0.0)), n));
            gain_freq = fs / 2.0;
        }
        FilterKind::Bandpass | FilterKind::Notch => {
            let (w1, w2) = (warp(spec.corners_hz[0]), warp(spec.corners_hz[1]));
            let bw = w2 - w1;
            let w0 = (w1 * w2).sqrt();
            for p in &proto {
                let half = if spec.kind == FilterKind::Bandpass {
                    p * (bw / 2.0)
                } else {
                    (bw / 2.0) / p
                };
                let disc = (half * half - w0 * w0).sqrt();
                poles.push(half + disc);
                poles.push(half - disc);
            }
            if spec.kind == FilterKind::Bandpass {
                zeros.extend(std::iter::repeat_n(Some(Complex64::new(0.0, 0.0)), n));
                zeros.extend(std::iter::repeat_n(None, n));
                gain_freq = fs / PI * (w0 / (2.0 * fs)).atan();
            } else {
                for _ in 0..n {
                    zeros.push(Some(Complex64::new(0.0, w0)));
                    zeros.push(Some(Complex64::new(0.0, -w0)));
                }
                gain_freq = 0.0;
            }
        }
    }

    let bilinear = |s: Complex64| (2.0 * fs + s) / (2.0 * fs - s);
    let zp: Vec<Complex64> = poles.iter().map(|&p| bilinear(p)).collect();
    let zz: Vec<Complex64> = zeros
        .iter()
        .map(|z| z.map_or(Complex64::new(-1.0, 0.0), bilinear))
        .collect();

    let pole_pairs = pair_conjugates(zp);
    let zero_pairs = pair_conjugates(zz);
    let mut sections: Vec<Sos> = pole_pairs
        .iter()
        .zip(&zero_pairs)
        .map(|(p, z)| Sos {
            b: quadratic(z),
            a: quadratic(p),
        })
        .collect();

    let mut filter = SosFilter {
        spec: *spec,
        sections: sections.clone(),
    };
    let g = filter.response(gain_freq).norm();
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid("filter", "degenerate design"));
    }
    for b in sections[0].b.iter_mut() {
        *b /= g;
    }
    filter.sections = sections;
    Ok(filter)
}

/// Group roots into conjugate pairs (real roots are paired with each other).
fn pair_conjugates(mut roots: Vec<Complex64>) -> Vec<[Complex64; 2]> {
    let tol = 1e-9;
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let (mut real, mut complex): (Vec<Complex64>, Vec<Complex64>) = roots.into_iter().partition(|r| r.im.abs() < tol);
    let mut pairs = Vec::new();
    complex.retain(|r| r.im > 0.0);
    for r in complex {
        pairs.push([r, r.conj()]);
    }
    while real.len() >= 2 {
        let b = real.pop().expect("len >= 2");
        let a = real.pop().expect("len >= 2");
        pairs.push([Complex64::new(a.re, 0.0), Complex64::new(b.re, 0.0)]);
    }
    pairs
}

/// Coefficients of `(1 - r0 z^-1)(1 - r1 z^-1)`.
fn quadratic(r: &[Complex64; 2]) -> [f64; 3] {
    [1.0, -(r[0] + r[1]).re, (r[0] * r[1]).re]
}

/// Causal filtering, direct form II transposed, zero initial state.
pub fn sosfilt(sections: &[Sos], x: &[f64]) -> Vec<f64> {
    let mut zi = vec![[0.0; 2]; sections.len()];
    sosfilt_with_state(sections, x, &mut zi)
}

fn sosfilt_with_state(sections: &[Sos], x: &[f64], zi: &mut [[f64; 2]]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (s, z) in sections.iter().zip(zi.iter_mut()) {
        for v in y.iter_mut() {
            let xin = *v;
            let out = s.b[0] * xin + z[0];
            z[0] = s.b[1] * xin - s.a[1] * out + z[1];
            z[1] = s.b[2] * xin - s.a[2] * out;
            *v = out;
        }
    }
    y
}

/// Section states that make a constant unit input a steady state.
fn steady_state(sections: &[Sos]) -> Vec<[f64; 2]> {
    let mut gain = 1.0;
    sections
        .iter()
        .map(|s| {
            let g = s.dc_gain();
            // y = g x; z1 = y - b0 x; z2 = b2 x - a2 y, with x = incoming level.
            let z = [gain * (g - s.b[0]), gain * (s.b[2] - s.a[2] * g)];
            gain *= g;
            z
        })
        .collect()
}

/// Zero-phase forward-backward filtering with odd-reflection padding and
/// steady-state initial conditions.
pub fn filtfilt(sections: &[Sos], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = (3 * (2 * sections.len() + 1)).min(n - 1);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let zi = steady_state(sections);
    let mut z: Vec<[f64; 2]> = zi.iter().map(|s| [s[0] * ext[0], s[1] * ext[0]]).collect();
    let mut y = sosfilt_with_state(sections, &ext, &mut z);
    y.reverse();
    let mut z: Vec<[f64; 2]> = zi.iter().map(|s| [s[0] * y[0], s[1] * y[0]]).collect();
    let mut y = sosfilt_with_state(sections, &y, &mut z);
    y.reverse();
    y[pad..pad + n].to_vec()
}
