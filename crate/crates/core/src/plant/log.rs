//! Per-tick simulation log and its CSV form.
//!
//! One row per control tick. Columns, in order:
//!
//! - `tick`, `time` (s), `block` (1-based training block), `phase` (gait
//!   phase of the therapist's left leg, `[0, 1)`)
//! - for each of the eight joints `<user>_<side>_<joint>`: `_angle` (rad),
//!   `_velocity` (rad/s), `_desired_torque`, `_measured_torque`,
//!   `_motor_torque`, `_human_torque` (N·m)
//! - for each leg `<user>_<side>`: `_ankle_x`, `_ankle_y` (m, hip frame),
//!   `_heel_strike` (0/1)
//! - `damper_power` (W), `spring_energy` (J), `stale` (0/1),
//!   `constrained` (0/1)
//!
//! Floats are written in shortest round-trip form, so reading a log back
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{JointId, Side, User};

pub const JOINT_FIELDS: [&str; 6] = [
    "angle",
    "velocity",
    "desired_torque",
    "measured_torque",
    "motor_torque",
    "human_torque",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointRecord {
    pub angle: f64,
    pub velocity: f64,
    pub desired_torque: f64,
    pub measured_torque: f64,
    pub motor_torque: f64,
    pub human_torque: f64,
}

impl JointRecord {
    fn values(&self) -> [f64; 6] {
        [
            self.angle,
            self.velocity,
            self.desired_torque,
            self.measured_torque,
            self.motor_torque,
            self.human_torque,
        ]
    }

    fn from_values(v: [f64; 6]) -> Self {
        JointRecord {
            angle: v[0],
            velocity: v[1],
            desired_torque: v[2],
            measured_torque: v[3],
            motor_torque: v[4],
            human_torque: v[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegRecord {
    pub ankle: [f64; 2],
    pub heel_strike: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogRecord {
    pub tick: usize,
    pub time: f64,
    pub block: usize,
    pub phase: f64,
    /// Indexed by [`JointId::index`].
    pub joints: [JointRecord; 8],
    /// Indexed by [`leg_index`].
    pub legs: [LegRecord; 4],
    pub damper_power: f64,
    pub spring_energy: f64,
    pub stale: bool,
    pub constrained: bool,
}

pub fn leg_index(user: User, side: Side) -> usize {
    user.index() * 2 + side.index()
}

fn legs() -> impl Iterator<Item = (User, Side)> {
    User::ALL
        .into_iter()
        .flat_map(|u| Side::ALL.into_iter().map(move |s| (u, s)))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub records: Vec<LogRecord>,
}

impl SimLog {
    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = ["tick", "time", "block", "phase"].map(String::from).into();
        for id in JointId::all() {
            for f in JOINT_FIELDS {
                h.push(format!("{id}_{f}"));
            }
        }
        for (u, s) in legs() {
            for f in ["ankle_x", "ankle_y", "heel_strike"] {
                h.push(format!("{}_{}_{f}", u.as_str(), s.as_str()));
            }
        }
        h.extend(["damper_power", "spring_energy", "stale", "constrained"].map(String::from));
        h
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn joint(&self, id: JointId) -> impl Iterator<Item = &JointRecord> + '_ {
        self.records.iter().map(move |r| &r.joints[id.index()])
    }

    pub fn angles(&self, id: JointId) -> Vec<f64> {
        self.joint(id).map(|j| j.angle).collect()
    }

    pub fn ankle(&self, user: User, side: Side) -> Vec<[f64; 2]> {
        let i = leg_index(user, side);
        self.records.iter().map(|r| r.legs[i].ankle).collect()
    }

    pub fn heel_strikes(&self, user: User, side: Side) -> Vec<usize> {
        let i = leg_index(user, side);
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.legs[i].heel_strike)
            .map(|(k, _)| k)
            .collect()
    }

    pub fn sample_rate(&self) -> Option<f64> {
        match self.records.as_slice() {
            [a, b, ..] => Some(1.0 / (b.time - a.time)),
            _ => None,
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::header().join(","))?;
        let mut line = String::with_capacity(1024);
        for r in &self.records {
            line.clear();
            let _ = write!(line, "{},{},{},{}", r.tick, r.time, r.block, r.phase);
            for j in &r.joints {
                for v in j.values() {
                    let _ = write!(line, ",{v}");
                }
            }
            for l in &r.legs {
                let _ = write!(line, ",{},{},{}", l.ankle[0], l.ankle[1], u8::from(l.heel_strike));
            }
            let _ = write!(
                line,
                ",{},{},{},{}",
                r.damper_power,
                r.spring_energy,
                u8::from(r.stale),
                u8::from(r.constrained)
            );
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<SimLog> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Malformed {
            path: path.to_owned(),
            row: 0,
            message: e.to_string(),
        })?;
        let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
        let expected = Self::header();
        if header != expected {
            let missing = expected.iter().find(|c| !header.contains(c));
            return Err(Error::Malformed {
                path: path.to_owned(),
                row: 1,
                message: match missing {
                    Some(c) => format!("not a simulation log: missing column `{c}`"),
                    None => "not a simulation log: unexpected column layout".into(),
                },
            });
        }
        let mut records = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row_no = i + 2;
            let malformed = |message: String| Error::Malformed {
                path: path.to_owned(),
                row: row_no,
                message,
            };
            let row = row.map_err(|e| malformed(e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                row.get(k)
                    .ok_or_else(|| malformed(format!("missing field {}", expected[k])))?
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("{}: {e}", expected[k])))
            };
            let int = |k: usize| -> Result<usize> {
                row.get(k)
                    .ok_or_else(|| malformed(format!("missing field {}", expected[k])))?
                    .parse::<usize>()
                    .map_err(|e| malformed(format!("{}: {e}", expected[k])))
            };
            let flag = |k: usize| -> Result<bool> {
                match int(k)? {
                    0 => Ok(false),
                    1 => Ok(true),
                    v => Err(malformed(format!("{}: expected 0 or 1, got {v}", expected[k]))),
                }
            };
            let mut rec = LogRecord {
                tick: int(0)?,
                time: num(1)?,
                block: int(2)?,
                phase: num(3)?,
                ..LogRecord::default()
            };
            let mut k = 4;
            for j in rec.joints.iter_mut() {
                let mut v = [0.0; 6];
                for slot in v.iter_mut() {
                    *slot = num(k)?;
                    k += 1;
                }
                *j = JointRecord::from_values(v);
            }
            for l in rec.legs.iter_mut() {
                l.ankle = [num(k)?, num(k + 1)?];
                l.heel_strike = flag(k + 2)?;
                k += 3;
            }
            rec.damper_power = num(k)?;
            rec.spring_energy = num(k + 1)?;
            rec.stale = flag(k + 2)?;
            rec.constrained = flag(k + 3)?;
            if let Some(prev) = records.last() {
                let prev: &LogRecord = prev;
                if rec.time < prev.time {
                    return Err(malformed("time is not monotone".into()));
                }
            }
            records.push(rec);
        }
        Ok(SimLog { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_roundtrip_is_bit_exact(vals in prop::collection::vec(-1e3..1e3f64, 48), t in 0.0..100.0f64) {
            let mut r = LogRecord { tick: 3, time: t, block: 2, phase: 0.25, ..LogRecord::default() };
            for (i, j) in r.joints.iter_mut().enumerate() {
                let v: [f64; 6] = vals[i * 6..i * 6 + 6].try_into().unwrap();
                *j = JointRecord::from_values(v);
            }
            r.legs[1] = LegRecord { ankle: [vals[0] / 7.0, -vals[1] / 3.0], heel_strike: true };
            r.damper_power = -vals[2].abs();
            let log = SimLog { records: vec![r] };
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("log.csv");
            log.write_csv(&p).unwrap();
            prop_assert_eq!(SimLog::read_csv(&p).unwrap(), log);
        }
    }

    #[test]
    fn header_width() {
        assert_eq!(SimLog::header().len(), 4 + 48 + 12 + 4);
    }

    #[test]
    fn rejects_foreign_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(SimLog::read_csv(&p), Err(Error::Malformed { row: 1, .. })));
    }
}
