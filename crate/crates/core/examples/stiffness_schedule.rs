//! Deployed per-patient stiffness schedules and the gain ramp at a block
//! boundary.
//!
//! ```bash
//! cargo run --example stiffness_schedule
//! ```

use exo_dyad::coupling::{scheduled_config, DyadCouplingConfig, StiffnessSchedule};
use exo_dyad::model::{Joint, Side, User};

fn main() -> exo_dyad::Result<()> {
    for id in ["U1", "U2", "U3", "U4", "U5", "U6", "U7", "U8"] {
        let s = StiffnessSchedule::deployed(id).expect("known patient");
        let blocks: Vec<String> = s
            .blocks
            .iter()
            .map(|b| format!("{}/{}", b.k_patient, b.k_therapist))
            .collect();
        println!("{id}: {}", blocks.join("  "));
    }

    let schedule = StiffnessSchedule::deployed("U3").expect("known patient");
    let base = DyadCouplingConfig::from_stiffness(49.0, 49.0)?;
    let block_s = 60.0;
    for t in [59.9, 60.0, 60.25, 60.5, 61.0] {
        let c = scheduled_config(&schedule, block_s, t, &base)?;
        let g = c.gains(User::Patient).get(Side::Left, Joint::Hip);
        println!(
            "t = {t:>5.2} s: K_p = {:.1} N·m/rad, B_p = {:.2} N·m·s/rad",
            g.stiffness, g.damping
        );
    }
    Ok(())
}
