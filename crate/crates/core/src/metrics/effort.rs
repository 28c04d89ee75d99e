use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Age-predicted maximum heart rate, bpm.
pub fn age_predicted_max_hr(age_years: f64) -> f64 {
    208.0 - 0.7 * age_years
}

/// Mean heart rate as a percentage of the age-predicted maximum.
pub fn hr_percent_max(mean_hr_bpm: f64, age_years: f64) -> Result<f64> {
    if !(10.0..=110.0).contains(&age_years) {
        return Err(Error::invalid("age_years", format!("{age_years} outside [10, 110]")));
    }
    if !(mean_hr_bpm > 0.0 && mean_hr_bpm.is_finite()) {
        return Err(Error::invalid("mean_hr_bpm", "must be positive"));
    }
    Ok(100.0 * mean_hr_bpm / age_predicted_max_hr(age_years))
}

/// Borg rating of perceived exertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct BorgRpe(u8);

impl BorgRpe {
    pub fn new(v: u8) -> Result<Self> {
        if (6..=20).contains(&v) {
            Ok(BorgRpe(v))
        } else {
            Err(Error::invalid("rpe_borg", format!("{v} outside 6-20")))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for BorgRpe {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        BorgRpe::new(v)
    }
}

impl From<BorgRpe> for u8 {
    fn from(r: BorgRpe) -> u8 {
        r.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert!((hr_percent_max(180.0, 40.0).unwrap() - 100.0).abs() < 1e-12);
        assert!((hr_percent_max(77.4, 76.0).unwrap() - 50.0).abs() < 1e-12);
        assert_eq!(age_predicted_max_hr(0.0), 208.0);
        assert!(hr_percent_max(100.0, 0.0).is_err());
        assert!(hr_percent_max(0.0, 50.0).is_err());
    }

    #[test]
    fn borg_range() {
        assert!(BorgRpe::new(5).is_err());
        assert!(BorgRpe::new(21).is_err());
        assert_eq!(BorgRpe::new(13).unwrap().value(), 13);
        assert!(serde_json::from_str::<BorgRpe>("25").is_err());
    }
}
