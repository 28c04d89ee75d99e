//! Heel-strike detection.
//!
//! Simulated logs carry ground-truth events (the leg's reference phase
//! wrapping through zero). Recorded data is segmented from the ankle
//! trajectory: a heel strike is a prominent maximum of forward ankle
//! position.

use crate::error::{Error, Result};

/// Minimum peak prominence of the forward ankle position, metres.
pub const MIN_PROMINENCE_M: f64 = 0.02;
/// Minimum spacing between events as a fraction of the nominal cycle.
pub const MIN_SPACING_CYCLES: f64 = 0.5;

/// Ticks at which a phase signal in `[0, 1)` wraps back through zero.
pub fn phase_wraps(phase: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if phase.first() == Some(&0.0) {
        out.push(0);
    }
    out.extend(
        phase
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] < w[0])
            .map(|(i, _)| i + 1),
    );
    out
}

/// Indices of local maxima with at least `min_prominence`, no two closer
/// than `min_distance` samples (taller peaks win).
pub fn find_peaks(x: &[f64], min_prominence: f64, min_distance: usize) -> Vec<usize> {
    let n = x.len();
    let mut candidates = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i] > x[i - 1] {
            // Walk across a plateau.
            let mut j = i;
            while j + 1 < n && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < n && x[j + 1] < x[i] {
                candidates.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }

    let prominent: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| {
            let h = x[p];
            let mut left_min = h;
            for k in (0..p).rev() {
                if x[k] > h {
                    break;
                }
                left_min = left_min.min(x[k]);
            }
            let mut right_min = h;
            for &v in &x[p + 1..] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            h - left_min.max(right_min) >= min_prominence
        })
        .collect();

    let mut by_height = prominent.clone();
    by_height.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for p in by_height {
        if kept.iter().all(|&k| k.abs_diff(p) >= min_distance) {
            kept.push(p);
        }
    }
    kept.sort_unstable();
    kept
}

/// Heel strikes from a forward ankle trajectory sampled at `sample_rate_hz`.
pub fn detect_heel_strikes(forward: &[f64], sample_rate_hz: f64, nominal_cycle_s: f64) -> Result<Vec<usize>> {
    if !(sample_rate_hz > 0.0 && nominal_cycle_s > 0.0) {
        return Err(Error::invalid("detect_heel_strikes", "rates must be positive"));
    }
    let spacing = (MIN_SPACING_CYCLES * nominal_cycle_s * sample_rate_hz).round() as usize;
    let events = find_peaks(forward, MIN_PROMINENCE_M, spacing.max(1));
    if events.len() < 2 {
        return Err(Error::NoStrides);
    }
    Ok(events)
}

/// Consecutive event pairs as `(start, end)` stride bounds.
pub fn strides_from_events(events: &[usize]) -> Vec<(usize, usize)> {
    events.windows(2).map(|w| (w[0], w[1])).collect()
}
