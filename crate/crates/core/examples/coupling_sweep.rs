//! Sweep the coupling stiffness and report how closely a fully passive
//! patient follows the therapist.
//!
//! ```bash
//! cargo run --release --example coupling_sweep
//! ```

use exo_dyad::config::parse_config;
use exo_dyad::coupling::mirror_joint;
use exo_dyad::model::{JointId, User};
use exo_dyad::plant::run;

fn main() -> exo_dyad::Result<()> {
    println!("{:>8} {:>12} {:>12}", "K", "hip RMS", "knee RMS");
    for k in [0.0, 25.0, 49.0, 100.0, 250.0, 500.0] {
        let overrides = [
            format!("coupling.K_p={k}"),
            format!("coupling.K_t={k}"),
            "coupling.stiffness_ceiling=1000".to_string(),
            "patient.weakness=1".to_string(),
            "duration=30".to_string(),
        ];
        let config = parse_config("", None, &overrides, None)?;
        let settle = (5.0 / config.dt) as usize;
        let log = run(config)?.log;
        let mut rms = [0.0; 2];
        for id in JointId::of_user(User::Patient) {
            let p = log.angles(id);
            let t = log.angles(mirror_joint(id));
            let e = (p[settle..]
                .iter()
                .zip(&t[settle..])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / (p.len() - settle) as f64)
                .sqrt();
            rms[id.joint.index()] += e.to_degrees() / 2.0;
        }
        println!("{k:>8.0} {:>10.2}° {:>10.2}°", rms[0], rms[1]);
    }
    Ok(())
}
