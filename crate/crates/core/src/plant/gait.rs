use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    /// rad
    pub amplitude: f64,
    /// rad
    pub phase: f64,
}

/// `mean + sum_n amplitude_n * cos(2 pi n phi + phase_n)` for `phi` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierSeries {
    pub mean: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl FourierSeries {
    pub fn constant(mean: f64) -> Self {
        FourierSeries {
            mean,
            harmonics: Vec::new(),
        }
    }

    fn from_table(mean: f64, table: &[(f64, f64)]) -> Self {
        FourierSeries {
            mean,
            harmonics: table
                .iter()
                .map(|&(amplitude, phase)| Harmonic { amplitude, phase })
                .collect(),
        }
    }

    pub fn value(&self, phase: f64) -> f64 {
        self.harmonics.iter().enumerate().fold(self.mean, |acc, (i, h)| {
            acc + h.amplitude * (TAU * (i + 1) as f64 * phase + h.phase).cos()
        })
    }

    /// Derivative with respect to phase.
    pub fn slope(&self, phase: f64) -> f64 {
        self.harmonics.iter().enumerate().fold(0.0, |acc, (i, h)| {
            let w = TAU * (i + 1) as f64;
            acc - h.amplitude * w * (w * phase + h.phase).sin()
        })
    }
}

/// Periodic joint-angle reference for one leg, parameterised by gait phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitProfile {
    /// strides per second
    pub cadence: f64,
    pub hip: FourierSeries,
    pub knee: FourierSeries,
}

impl Default for GaitProfile {
    /// Slow treadmill walking. Phase 0 is heel strike, placed at the maximum
    /// forward ankle reach. Hip spans about -10..25 deg, knee 4..59 deg.
    fn default() -> Self {
        GaitProfile {
            cadence: 0.33,
            hip: FourierSeries::from_table(0.132741, &[(0.261091, -0.3133), (0.083217, 1.1735), (0.043459, 2.2933)]),
            knee: FourierSeries::from_table(
                0.372561,
                &[
                    (0.34746, 1.1673),
                    (0.242864, 2.8314),
                    (0.075807, -2.5432),
                    (0.00406, -2.3042),
                ],
            ),
        }
    }
}

impl GaitProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.cadence > 0.0 && self.cadence.is_finite()) {
            return Err(Error::invalid("cadence", "must be positive"));
        }
        Ok(())
    }

    /// Gait phase in `[0, 1)` at time `t` for a leg offset by `offset` cycles.
    pub fn phase_at(&self, t: f64, offset: f64) -> f64 {
        (self.cadence * t + offset).rem_euclid(1.0)
    }

    /// Reference angles and velocities `[hip, knee]` at time `t`.
    pub fn reference_at(&self, t: f64, offset: f64) -> LegReference {
        let phase = self.phase_at(t, offset);
        LegReference {
            angle: [self.hip.value(phase), self.knee.value(phase)],
            velocity: [
                self.cadence * self.hip.slope(phase),
                self.cadence * self.knee.slope(phase),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegReference {
    pub angle: [f64; 2],
    pub velocity: [f64; 2],
}

/// Reference joint angles `[hip, knee]` at gait phase `phase`.
pub fn gait_reference(profile: &GaitProfile, phase: f64) -> Result<[f64; 2]> {
    if !(0.0..1.0).contains(&phase) {
        return Err(Error::invalid("phase", format!("must lie in [0, 1), got {phase}")));
    }
    Ok([profile.hip.value(phase), profile.knee.value(phase)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ankle_position, LegGeometry};

    #[test]
    fn periodic() {
        let p = GaitProfile::default();
        let a = gait_reference(&p, 0.0).unwrap();
        let b = gait_reference(&p, 1.0 - 1e-15).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        assert!(gait_reference(&p, 1.0).is_err());
    }

    #[test]
    fn zero_harmonics_is_constant() {
        let p = GaitProfile {
            cadence: 1.0,
            hip: FourierSeries::constant(0.2),
            knee: FourierSeries::constant(0.4),
        };
        for i in 0..100 {
            assert_eq!(gait_reference(&p, i as f64 / 100.0).unwrap(), [0.2, 0.4]);
        }
    }

    #[test]
    fn default_extrema_by_dense_sampling() {
        let p = GaitProfile::default();
        let n = 100_000;
        let (mut hmin, mut hmax, mut kmin, mut kmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for i in 0..n {
            let [h, k] = gait_reference(&p, i as f64 / n as f64).unwrap();
            hmin = hmin.min(h);
            hmax = hmax.max(h);
            kmin = kmin.min(k);
            kmax = kmax.max(k);
        }
        let deg = f64::to_degrees;
        assert!((deg(hmin) + 10.0).abs() < 1.5, "hip min {}", deg(hmin));
        assert!((deg(hmax) - 25.0).abs() < 1.5, "hip max {}", deg(hmax));
        assert!(deg(kmin) >= 0.0 && deg(kmin) < 6.0, "knee min {}", deg(kmin));
        assert!((deg(kmax) - 60.0).abs() < 2.0, "knee max {}", deg(kmax));
    }

    #[test]
    fn heel_strike_at_maximum_forward_reach() {
        let p = GaitProfile::default();
        let g = LegGeometry::default();
        let n = 10_000;
        let argmax = (0..n)
            .map(|i| {
                let [h, k] = gait_reference(&p, i as f64 / n as f64).unwrap();
                (i, ankle_position(h, k, &g).unwrap()[0])
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        let phase = argmax as f64 / n as f64;
        let dist = phase.min(1.0 - phase);
        assert!(dist < 0.01, "peak at phase {phase}");
    }

    #[test]
    fn slope_matches_finite_difference() {
        let p = GaitProfile::default();
        let h = 1e-6;
        for i in 1..50 {
            let ph = i as f64 / 50.0 - 0.01;
            let fd = (p.knee.value(ph + h) - p.knee.value(ph - h)) / (2.0 * h);
            assert!((fd - p.knee.slope(ph)).abs() < 1e-6);
        }
    }
}
