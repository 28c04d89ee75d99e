//! One user's controller driven by hand: render the coupling torque, feed a
//! cuff reading, and inspect the allocated motor torques.
//!
//! ```bash
//! cargo run --example controller_loop
//! ```

use exo_dyad::controller::{controller_step, AdmittanceParams, ControllerContext};
use exo_dyad::coupling::{render_interaction_torques, DyadCouplingConfig};
use exo_dyad::model::{DyadState, ExoskeletonModel, JointId, JointState, User};

fn main() -> exo_dyad::Result<()> {
    let coupling = DyadCouplingConfig::from_stiffness(49.0, 49.0)?;
    let dt = 1.0 / 333.0;
    let mut ctx = ControllerContext::new(
        User::Patient,
        ExoskeletonModel::default(),
        AdmittanceParams::default(),
        dt,
    );

    // Therapist flexed 0.02 rad further than the patient at every joint.
    let state = DyadState::with_all(0.0, |id: JointId| {
        let offset = if id.user == User::Therapist { 0.02 } else { 0.0 };
        JointState::new(0.05 + offset, 0.0)
    });
    ctx.reset(&state)?;
    let desired = render_interaction_torques(&state, &coupling)?;
    for k in 0..5 {
        let measured = [[0.0; 2]; 2];
        let out = controller_step(&mut ctx, &state, &desired, measured, state.time)?;
        println!(
            "tick {k}: left hip desired accel {:.2} rad/s², motor torque {:.2} N·m",
            out.desired_accel[0][0], out.motor_torque[0][0]
        );
    }
    Ok(())
}
