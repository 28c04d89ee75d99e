//! Workspace area and step geometry of a simulated paretic ankle under the
//! three area conventions.
//!
//! ```bash
//! cargo run --release --example workspace_area
//! ```

use exo_dyad::config::parse_config;
use exo_dyad::metrics::{step_height, step_length, workspace_area, AreaMode};
use exo_dyad::model::{Side, User};
use exo_dyad::plant::{run, strides_from_events};

fn main() -> exo_dyad::Result<()> {
    let config = parse_config(
        "duration = 30.0\n[patient]\nparetic_side = \"right\"\n",
        None,
        &[],
        None,
    )?;
    let log = run(config)?.log;
    let ankle = log.ankle(User::Patient, Side::Right);
    let other = log.ankle(User::Patient, Side::Left);
    let strides = strides_from_events(&log.heel_strikes(User::Patient, Side::Right));
    println!("{} strides", strides.len());

    for mode in [AreaMode::Hull, AreaMode::Shoelace, AreaMode::Pooled] {
        println!("{mode:?}: {:.1} cm²", workspace_area(&ankle, &strides, mode)?);
    }
    let (s, e) = strides[strides.len() / 2];
    let swing_y: Vec<f64> = ankle[s..=e].iter().map(|p| p[1]).collect();
    let stance_y: Vec<f64> = other[s..=e].iter().map(|p| p[1]).collect();
    println!("step length {:.1} cm", step_length(ankle[e], other[e]));
    println!("step height {:.1} cm", step_height(&swing_y, &stance_y)?);
    Ok(())
}
