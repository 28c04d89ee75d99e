//! Align a lagging knee trajectory to a reference stride and report the
//! spatial and temporal deviation.
//!
//! ```bash
//! cargo run --example gait_deviation
//! ```

use std::f64::consts::TAU;

use exo_dyad::metrics::{dtw_align, stride_deviation};
use exo_dyad::signals::STRIDE_SAMPLES;

fn knee(phase: f64) -> f64 {
    0.35 + 0.3 * (TAU * phase).sin() + 0.12 * (2.0 * TAU * phase).cos()
}

fn main() -> exo_dyad::Result<()> {
    let n = STRIDE_SAMPLES;
    let reference: Vec<f64> = (0..n).map(|i| knee(i as f64 / n as f64)).collect();
    for lag in [0.0, 0.03, 0.06, 0.1] {
        let follower: Vec<f64> = (0..n).map(|i| knee(i as f64 / n as f64 - lag)).collect();
        let dev = stride_deviation(&reference, &follower)?;
        let path = dtw_align(&reference, &follower)?.path;
        println!(
            "lag {:>4.1}% -> spatial {:.2} deg, signed lag {:+.1}%, |lag| {:.1}%, path length {}",
            100.0 * lag,
            dev.spatial_rmse,
            dev.signed_lag,
            dev.abs_lag,
            path.len()
        );
    }
    Ok(())
}
