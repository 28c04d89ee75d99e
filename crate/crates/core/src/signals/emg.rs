//! Surface EMG envelope: bandpass, mains notch, full-wave rectification,
//! lowpass.

use serde::{Deserialize, Serialize};

use super::filter::{design_filter, FilterSpec};
use super::TimeSeries;
use crate::error::{Error, Result};

/// Upper bandpass corners at or above this fraction of the sample rate are
/// pulled down to it.
pub const MAX_CORNER_FRACTION: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmgPipeline {
    pub band_hz: [f64; 2],
    pub band_order: usize,
    pub notch_hz: [f64; 2],
    pub notch_order: usize,
    pub lowpass_hz: f64,
    pub lowpass_order: usize,
    pub zero_phase: bool,
}

impl Default for EmgPipeline {
    fn default() -> Self {
        EmgPipeline {
            band_hz: [20.0, 500.0],
            band_order: 6,
            notch_hz: [59.0, 61.0],
            notch_order: 4,
            lowpass_hz: 5.0,
            lowpass_order: 4,
            zero_phase: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum Stage {
    Bandpass { low_hz: f64, high_hz: f64, order: usize },
    Notch { low_hz: f64, high_hz: f64, order: usize },
    Rectify,
    Lowpass { corner_hz: f64, order: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub series: TimeSeries,
    /// Stages in the order they were applied.
    pub stages: Vec<Stage>,
    /// Set when the upper band corner had to be lowered.
    pub clipped_band: bool,
}

/// Envelope with the default pipeline.
pub fn emg_envelope(raw: &TimeSeries) -> Result<Envelope> {
    emg_envelope_with(raw, &EmgPipeline::default())
}

pub fn emg_envelope_with(raw: &TimeSeries, p: &EmgPipeline) -> Result<Envelope> {
    if raw.samples.is_empty() {
        return Err(Error::Empty("EMG series"));
    }
    let fs = raw.sample_rate_hz;
    let mut high = p.band_hz[1];
    let clipped_band = high >= MAX_CORNER_FRACTION * fs;
    if clipped_band {
        high = MAX_CORNER_FRACTION * fs;
        log::warn!(
            "{}: bandpass upper corner {} Hz clipped to {high} Hz at {fs} Hz sampling",
            raw.channel_label,
            p.band_hz[1]
        );
    }
    let with_phase = |mut s: FilterSpec| {
        s.zero_phase = p.zero_phase;
        s
    };
    let band = design_filter(&with_phase(FilterSpec::bandpass(p.band_order, p.band_hz[0], high, fs)))?;
    let notch = design_filter(&with_phase(FilterSpec::notch(
        p.notch_order,
        p.notch_hz[0],
        p.notch_hz[1],
        fs,
    )))?;
    let low = design_filter(&with_phase(FilterSpec::lowpass(p.lowpass_order, p.lowpass_hz, fs)))?;

    let mut stages = Vec::with_capacity(4);
    let x = band.apply(&raw.samples);
    stages.push(Stage::Bandpass {
        low_hz: p.band_hz[0],
        high_hz: high,
        order: p.band_order,
    });
    let x = notch.apply(&x);
    stages.push(Stage::Notch {
        low_hz: p.notch_hz[0],
        high_hz: p.notch_hz[1],
        order: p.notch_order,
    });
    let x: Vec<f64> = x.into_iter().map(f64::abs).collect();
    stages.push(Stage::Rectify);
    let x = low.apply(&x);
    stages.push(Stage::Lowpass {
        corner_hz: p.lowpass_hz,
        order: p.lowpass_order,
    });
    Ok(Envelope {
        series: TimeSeries {
            sample_rate_hz: fs,
            samples: x,
            channel_label: format!("{}_envelope", raw.channel_label),
        },
        stages,
        clipped_band,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_2_PI, TAU};

    fn sine(freq: f64, amp: f64, fs: f64, seconds: f64) -> TimeSeries {
        let n = (fs * seconds) as usize;
        TimeSeries::new(
            fs,
            (0..n).map(|i| amp * (TAU * freq * i as f64 / fs).sin()).collect(),
            "test",
        )
        .unwrap()
    }

    fn settled(x: &[f64], fs: f64) -> &[f64] {
        let skip = (1.5 * fs) as usize;
        &x[skip..x.len() - skip]
    }

    #[test]
    fn zero_in_zero_out() {
        let e = emg_envelope(&TimeSeries::new(1000.0, vec![0.0; 3000], "z").unwrap()).unwrap();
        assert!(e.series.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stage_order() {
        let e = emg_envelope(&sine(100.0, 1.0, 1000.0, 2.0)).unwrap();
        let kinds: Vec<&str> = e
            .stages
            .iter()
            .map(|s| match s {
                Stage::Bandpass { .. } => "bandpass",
                Stage::Notch { .. } => "notch",
                Stage::Rectify => "rectify",
                Stage::Lowpass { .. } => "lowpass",
            })
            .collect();
        assert_eq!(kinds, ["bandpass", "notch", "rectify", "lowpass"]);
        assert!(e.clipped_band);
        assert_eq!(
            e.stages[0],
            Stage::Bandpass {
                low_hz: 20.0,
                high_hz: 450.0,
                order: 6
            }
        );
    }

    #[test]
    fn hundred_hz_envelope_is_mean_rectified_sine() {
        // At 1 kHz a 100 Hz sine has ten samples per period and the mean of
        // the sampled |sin| depends on the sampling phase (0.616..0.647);
        // 2 kHz keeps that discretisation effect below 1%.
        for amp in [1.0, 0.3] {
            let e = emg_envelope(&sine(100.0, amp, 2000.0, 6.0)).unwrap();
            let s = settled(&e.series.samples, 2000.0);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            assert!((mean / (FRAC_2_PI * amp) - 1.0).abs() < 0.03, "{mean}");
            for v in s {
                assert!((v / (FRAC_2_PI * amp) - 1.0).abs() < 0.03);
            }
        }
    }

    #[test]
    fn mains_is_removed() {
        let e = emg_envelope(&sine(60.0, 1.0, 1000.0, 6.0)).unwrap();
        let s = settled(&e.series.samples, 1000.0);
        assert!(s.iter().sum::<f64>() / (s.len() as f64) < 0.01);
    }

    #[test]
    fn envelope_is_non_negative() {
        let mut state = 12345u64;
        let noise: Vec<f64> = (0..4000)
            .map(|_| {
                state = state
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let e = emg_envelope(&TimeSeries::new(1000.0, noise, "n").unwrap()).unwrap();
        assert!(e.series.samples.iter().all(|&v| v >= -1e-9));
    }

    #[test]
    fn empty_is_error() {
        let ts = TimeSeries {
            sample_rate_hz: 1000.0,
            samples: vec![],
            channel_label: "e".into(),
        };
        assert!(matches!(emg_envelope(&ts), Err(Error::Empty(_))));
    }
}
