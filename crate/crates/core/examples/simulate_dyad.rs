//! Simulate the default dyad for 30 s and print per-joint tracking error.
//!
//! ```bash
//! cargo run --example simulate_dyad
//! ```

use exo_dyad::config::parse_config;
use exo_dyad::coupling::mirror_joint;
use exo_dyad::model::{JointId, User};
use exo_dyad::plant::run;

fn main() -> exo_dyad::Result<()> {
    let config = parse_config("duration = 30.0\n", None, &[], None)?;
    let settle = (5.0 / config.dt) as usize;
    let out = run(config)?;

    println!(
        "{} ticks, energy residual {:.2e} of injected work",
        out.log.len(),
        out.audit.relative_residual()
    );
    for id in JointId::of_user(User::Patient) {
        let patient = out.log.angles(id);
        let therapist = out.log.angles(mirror_joint(id));
        let n = (patient.len() - settle) as f64;
        let rms = (patient[settle..]
            .iter()
            .zip(&therapist[settle..])
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        println!("{id}: RMS offset from therapist {:.2} deg", rms.to_degrees());
    }
    Ok(())
}
