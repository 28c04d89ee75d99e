//! Heart-rate effort and a paired comparison between two conditions.
//!
//! ```bash
//! cargo run --example effort_statistics
//! ```

use exo_dyad::metrics::{age_predicted_max_hr, hr_percent_max, paired_t_test, BorgRpe};

fn main() -> exo_dyad::Result<()> {
    let ages = [76.0, 64.0, 58.0, 71.0, 49.0];
    let coupled = [96.0, 101.0, 92.0, 88.0, 110.0];
    let free = [104.0, 112.0, 95.0, 97.0, 118.0];

    let mut pct_coupled = Vec::new();
    let mut pct_free = Vec::new();
    for ((age, c), f) in ages.iter().zip(coupled).zip(free) {
        pct_coupled.push(hr_percent_max(c, *age)?);
        pct_free.push(hr_percent_max(f, *age)?);
        println!(
            "age {age}: max {:.1} bpm, coupled {:.1}%, free {:.1}%",
            age_predicted_max_hr(*age),
            pct_coupled.last().unwrap(),
            pct_free.last().unwrap()
        );
    }
    let r = paired_t_test(&pct_coupled, &pct_free)?;
    println!(
        "coupled - free: {:+.2} points, t({}) = {:.3}, p = {:.4}",
        r.mean_difference, r.degrees_of_freedom, r.t_statistic, r.p_value
    );
    println!(
        "RPE {} accepted, 21 rejected: {}",
        BorgRpe::new(13)?.value(),
        BorgRpe::new(21).is_err()
    );
    Ok(())
}
