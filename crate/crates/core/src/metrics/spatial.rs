//! Ankle-trajectory metrics: workspace area, step length and step height.
//! Positions are in metres on input, results in cm / cm².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaMode {
    /// Convex hull of each stride, averaged over strides.
    #[default]
    Hull,
    /// Shoelace area of the mean stride loop.
    Shoelace,
    /// Convex hull of the whole block's trajectory.
    Pooled,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order (Andrew's monotone chain).
/// Collinear points are dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Signed shoelace area of a closed polygon (positive when counter-clockwise).
pub fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice
}

/// Area of the convex hull, m². Degenerate input gives 0 with a warning.
pub fn hull_area(points: &[[f64; 2]]) -> f64 {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        log::warn!("degenerate stride: ankle trajectory is collinear, area set to 0");
        return 0.0;
    }
    shoelace(&hull)
}

/// Block workspace area in cm² from the block's ankle trajectory and its
/// stride bounds `(start, end)`, both heel-strike samples included.
pub fn workspace_area(ankle: &[[f64; 2]], strides: &[(usize, usize)], mode: AreaMode) -> Result<f64> {
    if strides.is_empty() {
        return Err(Error::NoStrides);
    }
    for &(s, e) in strides {
        if !(s < e && e < ankle.len()) {
            return Err(Error::BoundsOutOfRange {
                start: s,
                end: e,
                len: ankle.len(),
            });
        }
    }
    let m2 = match mode {
        AreaMode::Hull => strides.iter().map(|&(s, e)| hull_area(&ankle[s..=e])).sum::<f64>() / strides.len() as f64,
        AreaMode::Pooled => {
            let lo = strides.iter().map(|s| s.0).min().expect("non-empty");
            let hi = strides.iter().map(|s| s.1).max().expect("non-empty");
            hull_area(&ankle[lo..=hi])
        }
        AreaMode::Shoelace => {
            let mean = mean_loop(ankle, strides)?;
            shoelace(&mean).abs()
        }
    };
    Ok(m2 * 1e4)
}

/// Mean stride loop: each stride resampled to 100 points, then averaged.
fn mean_loop(ankle: &[[f64; 2]], strides: &[(usize, usize)]) -> Result<Vec<[f64; 2]>> {
    let n = crate::signals::STRIDE_SAMPLES;
    let mut acc = vec![[0.0; 2]; n];
    for &(s, e) in strides {
        for c in 0..2 {
            let axis: Vec<f64> = ankle.iter().map(|p| p[c]).collect();
            let r = crate::signals::resample_stride(&axis, s, e, n)?;
            for (a, v) in acc.iter_mut().zip(r) {
                a[c] += v;
            }
        }
    }
    let k = strides.len() as f64;
    Ok(acc.into_iter().map(|[x, y]| [x / k, y / k]).collect())
}

/// Horizontal distance between the landing and stance ankles at heel
/// strike, cm.
pub fn step_length(landing: [f64; 2], stance: [f64; 2]) -> f64 {
    (landing[0] - stance[0]).abs() * 100.0
}

/// Peak height of the swing ankle above the stance ankle over a stride, cm.
/// Never negative.
pub fn step_height(swing_y: &[f64], stance_y: &[f64]) -> Result<f64> {
    if swing_y.is_empty() || swing_y.len() != stance_y.len() {
        return Err(Error::Empty("step height stride"));
    }
    let peak = swing_y
        .iter()
        .zip(stance_y)
        .map(|(s, t)| s - t)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(peak.max(0.0) * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn ellipse(a: f64, b: f64, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                [a * t.cos(), b * t.sin()]
            })
            .collect()
    }

    #[test]
    fn unit_circle() {
        let c = ellipse(1.0, 1.0, 500);
        assert!((hull_area(&c) - PI).abs() / PI < 0.005);
    }

    #[test]
    fn rectangle_is_exact() {
        let mut pts = Vec::new();
        for i in 0..=30 {
            let x = i as f64 * 0.01;
            pts.push([x, 0.0]);
            pts.push([x, 0.05]);
        }
        let a = workspace_area(&pts, &[(0, pts.len() - 1)], AreaMode::Hull).unwrap();
        assert!((a - 150.0).abs() < 1e-9, "{a}");
    }

    #[test]
    fn ellipse_area() {
        let e = ellipse(0.15, 0.05, 1000);
        let a = workspace_area(&e, &[(0, 999)], AreaMode::Hull).unwrap();
        let exact = PI * 15.0 * 5.0;
        assert!((a - exact).abs() / exact < 0.005);
        let s = workspace_area(&e, &[(0, 999)], AreaMode::Shoelace).unwrap();
        assert!((s - exact).abs() / exact < 0.005, "{s}");
    }

    #[test]
    fn stride_average_vs_pooled() {
        let mut traj = ellipse(0.1, 0.05, 200);
        traj.extend(ellipse(0.2, 0.05, 200));
        let strides = [(0, 199), (200, 399)];
        let hull = workspace_area(&traj, &strides, AreaMode::Hull).unwrap();
        let pooled = workspace_area(&traj, &strides, AreaMode::Pooled).unwrap();
        let (a1, a2) = (hull_area(&traj[..200]), hull_area(&traj[200..]));
        assert!((hull - (a1 + a2) / 2.0 * 1e4).abs() < 1e-9);
        assert!((pooled - a2 * 1e4).abs() < 1e-9);
    }

    #[test]
    fn collinear_is_zero() {
        let line: Vec<[f64; 2]> = (0..50).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert_eq!(hull_area(&line), 0.0);
        assert!(workspace_area(&line, &[], AreaMode::Hull).is_err());
    }

    #[test]
    fn step_examples() {
        assert_eq!(step_length([0.1, -0.8], [0.1, -0.9]), 0.0);
        assert!((step_length([0.20, -0.9], [-0.10, -0.9]) - 30.0).abs() < 1e-12);
        assert_eq!(step_height(&[-0.9, -0.95], &[-0.8, -0.8]).unwrap(), 0.0);
        assert!((step_height(&[-0.9, -0.78, -0.9], &[-0.9; 3]).unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_apex() {
        let apex = 0.0731;
        let n = 41;
        let swing: Vec<f64> = (0..n).map(|i| apex * (1.0 - (i as f64 - 20.0).abs() / 20.0)).collect();
        let h = step_height(&swing, &vec![0.0; n]).unwrap();
        assert_eq!(h, apex * 100.0);
    }

    proptest! {
        #[test]
        fn adding_outside_point_never_shrinks(
            pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..40),
            r in 1.5..5.0f64, ang in 0.0..TAU,
        ) {
            let mut p: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let before = hull_area(&p);
            p.push([r * ang.cos(), r * ang.sin()]);
            prop_assert!(hull_area(&p) >= before);
        }

        #[test]
        fn hull_contains_all_points(pts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3..40)) {
            let p: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let h = convex_hull(&p);
            if h.len() >= 3 {
                for q in &p {
                    for i in 0..h.len() {
                        prop_assert!(cross(h[i], h[(i + 1) % h.len()], *q) >= -1e-12);
                    }
                }
            }
        }
    }
}
