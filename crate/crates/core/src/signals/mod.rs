//! Offline processing of sampled channels: filters, the EMG envelope,
//! stride windowing and time normalisation.
//!
//! Channel files are CSV with a `# sample_rate_hz=<fs>` comment line ahead
//! of the header. The first column is time in seconds; each further column
//! is one channel.

pub mod emg;
pub mod filter;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use emg::{emg_envelope, emg_envelope_with, EmgPipeline, Envelope, Stage};
pub use filter::{design_filter, filtfilt, sosfilt, FilterKind, FilterSpec, Sos, SosFilter};

/// Default number of samples in a time-normalised stride.
pub const STRIDE_SAMPLES: usize = 100;
/// Seconds dropped at each end of a block before stride extraction.
pub const EDGE_TRIM_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    pub channel_label: String,
}

impl TimeSeries {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>, channel_label: impl Into<String>) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample_rate_hz", "must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series sample"));
        }
        Ok(TimeSeries {
            sample_rate_hz,
            samples,
            channel_label: channel_label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean(&self) -> Option<f64> {
        (!self.samples.is_empty()).then(|| self.samples.iter().sum::<f64>() / self.samples.len() as f64)
    }
}

/// Read every channel of a channel CSV.
pub fn read_channels(path: &Path) -> Result<Vec<TimeSeries>> {
    let malformed = |row: usize, message: String| Error::Malformed {
        path: path.to_owned(),
        row,
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut fs = None;
    let mut line = String::new();
    let mut comment_lines = 0;
    loop {
        line.clear();
        let before = reader.fill_buf().map_err(|e| Error::io(path, e))?;
        if !before.starts_with(b"#") {
            break;
        }
        reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        comment_lines += 1;
        if let Some(v) = line.trim_start_matches('#').trim().strip_prefix("sample_rate_hz=") {
            fs = Some(
                v.trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(comment_lines, format!("sample_rate_hz: {e}")))?,
            );
        }
    }
    let fs = fs.ok_or_else(|| malformed(1, "missing `# sample_rate_hz=` header".into()))?;
    let mut csv = csv::Reader::from_reader(reader);
    let header: Vec<String> = csv.headers()?.iter().map(String::from).collect();
    if header.len() < 2 || header[0] != "time" {
        return Err(malformed(
            comment_lines + 1,
            "expected columns `time,<channel>...`".into(),
        ));
    }
    let mut columns = vec![Vec::new(); header.len() - 1];
    for (i, rec) in csv.records().enumerate() {
        let row = comment_lines + i + 2;
        let rec = rec.map_err(|e| malformed(row, e.to_string()))?;
        if rec.len() != header.len() {
            return Err(malformed(
                row,
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        for (c, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| malformed(row, format!("{}: {e}", header[c])))?;
            if !v.is_finite() {
                return Err(malformed(row, format!("{}: non-finite value", header[c])));
            }
            columns[c - 1].push(v);
        }
    }
    Ok(header[1..]
        .iter()
        .zip(columns)
        .map(|(label, samples)| TimeSeries {
            sample_rate_hz: fs,
            samples,
            channel_label: label.clone(),
        })
        .collect())
}

/// Write channels sharing one sample rate and length.
pub fn write_channels(path: &Path, channels: &[&TimeSeries]) -> Result<()> {
    let first = channels.first().ok_or(Error::Empty("channel list"))?;
    let n = first.len();
    if channels
        .iter()
        .any(|c| c.len() != n || c.sample_rate_hz != first.sample_rate_hz)
    {
        return Err(Error::invalid("channels", "must share sample rate and length"));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# sample_rate_hz={}", first.sample_rate_hz).map_err(io)?;
    let labels: Vec<&str> = channels.iter().map(|c| c.channel_label.as_str()).collect();
    writeln!(w, "time,{}", labels.join(",")).map_err(io)?;
    for i in 0..n {
        write!(w, "{}", i as f64 / first.sample_rate_hz).map_err(io)?;
        for c in channels {
            write!(w, ",{}", c.samples[i]).map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One gait cycle resampled onto a fixed number of phase points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideSeries {
    pub samples: Vec<f64>,
    /// s
    pub source_stride_duration: f64,
}

impl StrideSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Linear interpolation of `samples[start..=end]` onto `n` equally spaced
/// phase points; the first and last points are the heel-strike samples.
pub fn resample_stride(samples: &[f64], start: usize, end: usize, n: usize) -> Result<Vec<f64>> {
    if end <= start || end >= samples.len() {
        return Err(Error::BoundsOutOfRange {
            start,
            end,
            len: samples.len(),
        });
    }
    if n < 2 {
        return Err(Error::invalid("n", "need at least two points"));
    }
    let span = (end - start) as f64;
    Ok((0..n)
        .map(|k| {
            if k == n - 1 {
                return samples[end];
            }
            let pos = start as f64 + span * k as f64 / (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if frac == 0.0 {
                samples[i]
            } else {
                samples[i] + (samples[i + 1] - samples[i]) * frac
            }
        })
        .collect())
}

pub fn time_normalize(series: &TimeSeries, bounds: (usize, usize), n: usize) -> Result<StrideSeries> {
    let samples = resample_stride(&series.samples, bounds.0, bounds.1, n)?;
    Ok(StrideSeries {
        samples,
        source_stride_duration: (bounds.1 - bounds.0) as f64 / series.sample_rate_hz,
    })
}

/// Stride bounds that lie entirely outside the trimmed block edges.
pub fn trim_strides(strides: &[(usize, usize)], len: usize, sample_rate_hz: f64, trim_s: f64) -> Vec<(usize, usize)> {
    let margin = (trim_s * sample_rate_hz).round() as usize;
    strides
        .iter()
        .copied()
        .filter(|&(s, e)| s >= margin && e + margin < len)
        .collect()
}

/// Activation as a percentage of the free-walking baseline.
pub fn normalize_to_baseline(activation_mean: f64, baseline_mean: f64) -> Result<f64> {
    if !(baseline_mean > 0.0) {
        return Err(Error::UndefinedBaseline(baseline_mean));
    }
    Ok(100.0 * activation_mean / baseline_mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_stride() {
        let ts = TimeSeries::new(333.0, vec![0.7; 500], "c").unwrap();
        let s = time_normalize(&ts, (10, 400), STRIDE_SAMPLES).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.samples.iter().all(|&v| v == 0.7));
        assert!((s.source_stride_duration - 390.0 / 333.0).abs() < 1e-12);
    }

    #[test]
    fn sine_resampling_error() {
        let fs = 333.0;
        let period = 1000;
        let ts = TimeSeries::new(
            fs,
            (0..=period).map(|i| (TAU * i as f64 / period as f64).sin()).collect(),
            "s",
        )
        .unwrap();
        let s = time_normalize(&ts, (0, period), 100).unwrap();
        for (k, v) in s.samples.iter().enumerate() {
            assert!((v - (TAU * k as f64 / 99.0).sin()).abs() < 1e-3);
        }
    }

    #[test]
    fn out_of_range_bounds() {
        let ts = TimeSeries::new(100.0, vec![0.0; 10], "x").unwrap();
        assert!(matches!(
            time_normalize(&ts, (2, 10), 100),
            Err(Error::BoundsOutOfRange { .. })
        ));
        assert!(time_normalize(&ts, (5, 5), 100).is_err());
    }

    #[test]
    fn baseline() {
        assert_eq!(normalize_to_baseline(3.0, 3.0).unwrap(), 100.0);
        assert_eq!(normalize_to_baseline(0.0, 3.0).unwrap(), 0.0);
        assert!((normalize_to_baseline(2.617, 1.0).unwrap() - 261.7).abs() < 1e-9);
        assert!(matches!(
            normalize_to_baseline(1.0, 0.0),
            Err(Error::UndefinedBaseline(_))
        ));
    }

    #[test]
    fn trimming() {
        let strides = [(0, 300), (300, 700), (700, 1000)];
        assert_eq!(trim_strides(&strides, 1101, 100.0, 1.0), vec![(300, 700), (700, 1000)]);
        assert_eq!(trim_strides(&strides, 1100, 100.0, 1.0), vec![(300, 700)]);
    }

    #[test]
    fn channel_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emg.csv");
        let a = TimeSeries::new(1000.0, vec![0.1, -0.25, 1.0 / 3.0], "ta").unwrap();
        let b = TimeSeries::new(1000.0, vec![2.0, 0.0, 1e-7], "mg").unwrap();
        write_channels(&p, &[&a, &b]).unwrap();
        assert_eq!(read_channels(&p).unwrap(), vec![a, b]);
    }

    #[test]
    fn channel_csv_errors_name_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "# sample_rate_hz=100\ntime,x\n0,1\n0.01,oops\n").unwrap();
        assert!(matches!(read_channels(&p), Err(Error::Malformed { row: 4, .. })));
        std::fs::write(&p, "time,x\n0,1\n").unwrap();
        assert!(matches!(read_channels(&p), Err(Error::Malformed { .. })));
    }

    proptest! {
        #[test]
        fn affine_signals_resample_exactly(a in -5.0..5.0f64, b in -1.0..1.0f64, start in 0usize..50, len in 5usize..400, n in 2usize..150) {
            let x: Vec<f64> = (0..start + len + 1).map(|i| a + b * i as f64).collect();
            let r = resample_stride(&x, start, start + len, n).unwrap();
            prop_assert_eq!(r[0], x[start]);
            prop_assert_eq!(r[n - 1], x[start + len]);
            for (k, v) in r.iter().enumerate() {
                let pos = start as f64 + len as f64 * k as f64 / (n - 1) as f64;
                prop_assert!((v - (a + b * pos)).abs() < 1e-9);
            }
        }
    }
}
