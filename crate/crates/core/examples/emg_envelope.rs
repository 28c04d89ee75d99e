//! Envelope of a synthetic EMG burst contaminated with 60 Hz mains hum.
//!
//! ```bash
//! cargo run --example emg_envelope
//! ```

use std::f64::consts::TAU;

use exo_dyad::signals::{emg_envelope, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> exo_dyad::Result<()> {
    let fs = 2000.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples: Vec<f64> = (0..(4.0 * fs) as usize)
        .map(|i| {
            let t = i as f64 / fs;
            // Active between 1 s and 3 s.
            let burst = if (1.0..3.0).contains(&t) { 1.0 } else { 0.05 };
            burst * rng.random_range(-1.0..1.0) + 0.5 * (TAU * 60.0 * t).sin()
        })
        .collect();
    let raw = TimeSeries::new(fs, samples, "right_vastus_lateralis")?;
    let env = emg_envelope(&raw)?;

    for stage in &env.stages {
        println!("{stage:?}");
    }
    for t in [0.5, 1.5, 2.5, 3.5] {
        println!("t = {t:.1} s: envelope {:.3}", env.series.samples[(t * fs) as usize]);
    }
    Ok(())
}
