//! Therapist-patient deviation split into a spatial part (RMSE after
//! warping) and a temporal part (lag along the warp path).

use serde::{Deserialize, Serialize};

use super::dtw::{dtw_align, WarpPath};
use crate::error::{Error, Result};

/// RMSE of `a_i - b_j` over the path pairs, in degrees for inputs in radians.
pub fn spatial_deviation(a: &[f64], b: &[f64], path: &WarpPath) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Empty("warp path"));
    }
    if !path.is_valid(a.len(), b.len()) {
        return Err(Error::Validation("warp path does not fit the series".into()));
    }
    let ss: f64 = path.pairs.iter().map(|&(i, j)| (a[i] - b[j]).powi(2)).sum();
    Ok((ss / path.len() as f64).sqrt().to_degrees())
}

/// Mean of `j - i` along the path as a percentage of `n` samples per cycle.
/// Positive when `b` lags `a`.
pub fn temporal_deviation(path: &WarpPath, n: usize) -> Result<f64> {
    if path.is_empty() || n == 0 {
        return Err(Error::Empty("warp path"));
    }
    let sum: f64 = path.pairs.iter().map(|&(i, j)| j as f64 - i as f64).sum();
    Ok(100.0 * sum / path.len() as f64 / n as f64)
}

/// Mean of `|j - i|` along the path, percent of cycle.
pub fn absolute_temporal_deviation(path: &WarpPath, n: usize) -> Result<f64> {
    if path.is_empty() || n == 0 {
        return Err(Error::Empty("warp path"));
    }
    let sum: f64 = path.pairs.iter().map(|&(i, j)| (j as f64 - i as f64).abs()).sum();
    Ok(100.0 * sum / path.len() as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideDeviation {
    /// deg
    pub spatial_rmse: f64,
    /// % of gait cycle, positive when the patient lags.
    pub signed_lag: f64,
    /// % of gait cycle
    pub abs_lag: f64,
}

/// Deviation of one pair of normalised strides, `a` the therapist (leader)
/// and `b` the patient, both in radians.
pub fn stride_deviation(a: &[f64], b: &[f64]) -> Result<StrideDeviation> {
    let al = dtw_align(a, b)?;
    Ok(StrideDeviation {
        spatial_rmse: spatial_deviation(a, b, &al.path)?,
        signed_lag: temporal_deviation(&al.path, a.len())?,
        abs_lag: absolute_temporal_deviation(&al.path, a.len())?,
    })
}
