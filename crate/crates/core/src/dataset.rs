//! Recorded-session directory layout.
//!
//! ```text
//! <root>/manifest.toml                 patient table
//! <root>/<patient>/<condition>/rpe.csv optional, columns `block,rpe`
//! <root>/<patient>/<condition>/block<k>/kinematics.csv
//! <root>/<patient>/<condition>/block<k>/emg.csv        optional
//! <root>/<patient>/<condition>/block<k>/hr.csv         optional
//! ```
//!
//! Channel files start with `# sample_rate_hz=<fs>` followed by a
//! `time,<channel>...` header. Kinematic channels are joint angles in rad
//! named `<user>_<side>_<hip|knee>` (patient joints required, therapist
//! joints optional) plus optional `<user>_<side>_heel_strike` 0/1 force-plate
//! channels. EMG channels are raw signals named `<side>_<muscle>`. The heart
//! rate file carries a `heart_rate` channel in bpm.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{ActivationChannel, BlockData};
use crate::error::{Error, Result};
use crate::metrics::BorgRpe;
use crate::model::{ankle_position, Joint, JointId, LegGeometry, Side, User};
use crate::plant::log::leg_index;
use crate::signals::emg::emg_envelope;
use crate::signals::{read_channels, TimeSeries};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatientEntry {
    pub id: String,
    /// years
    pub age: f64,
    pub paretic_side: Side,
    /// m, used to reconstruct ankle positions from joint angles
    #[serde(default = "default_thigh")]
    pub thigh_length: f64,
    #[serde(default = "default_shank")]
    pub shank_length: f64,
}

fn default_thigh() -> f64 {
    LegGeometry::default().thigh_length
}

fn default_shank() -> f64 {
    LegGeometry::default().shank_length
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub patients: Vec<PatientEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

#[derive(Debug, Deserialize)]
struct RpeRow {
    block: usize,
    rpe: u8,
}

impl DatasetLayout {
    pub fn is_dataset(path: &Path) -> bool {
        path.join(MANIFEST_FILE).is_file()
    }

    pub fn open(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Malformed {
            path: path.clone(),
            row: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            message: e.message().to_string(),
        })?;
        if manifest.patients.is_empty() {
            return Err(Error::Validation(format!("{}: no patients listed", path.display())));
        }
        for p in &manifest.patients {
            if !(10.0..=110.0).contains(&p.age) {
                return Err(Error::Validation(format!(
                    "patient {}: age {} outside [10, 110]",
                    p.id, p.age
                )));
            }
        }
        Ok(DatasetLayout {
            root: root.to_owned(),
            manifest,
        })
    }

    /// Every block of every patient and condition, in sorted order.
    pub fn load_blocks(&self) -> Result<Vec<BlockData>> {
        let mut out = Vec::new();
        for p in &self.manifest.patients {
            let pdir = self.root.join(&p.id);
            for condition in subdirs(&pdir)? {
                let cdir = pdir.join(&condition);
                let rpe = read_rpe(&cdir.join("rpe.csv"))?;
                let mut blocks: Vec<(usize, String)> = subdirs(&cdir)?
                    .into_iter()
                    .filter_map(|n| n.strip_prefix("block").and_then(|k| k.parse().ok()).map(|k| (k, n)))
                    .collect();
                blocks.sort();
                if blocks.is_empty() {
                    return Err(Error::Validation(format!(
                        "{}: no block<k> directories",
                        cdir.display()
                    )));
                }
                for (k, name) in blocks {
                    let mut d = load_block(&cdir.join(name), p, &condition, k)?;
                    d.rpe = rpe.get(&k).copied();
                    out.push(d);
                }
            }
        }
        Ok(out)
    }
}

fn subdirs(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    names.sort();
    Ok(names)
}

fn read_rpe(path: &Path) -> Result<BTreeMap<usize, BorgRpe>> {
    if !path.is_file() {
        return Ok(BTreeMap::new());
    }
    let rows: Vec<RpeRow> = crate::metrics::report::read_rows(path)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            BorgRpe::new(r.rpe).map(|v| (r.block, v)).map_err(|e| Error::Malformed {
                path: path.to_owned(),
                row: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

fn load_block(dir: &Path, p: &PatientEntry, condition: &str, block: usize) -> Result<BlockData> {
    let kin_path = dir.join("kinematics.csv");
    let channels = read_channels(&kin_path)?;
    let fs = channels
        .first()
        .map(|c| c.sample_rate_hz)
        .ok_or(Error::Empty("kinematics"))?;
    let by_name: BTreeMap<&str, &TimeSeries> = channels.iter().map(|c| (c.channel_label.as_str(), c)).collect();
    let mut d = BlockData::new(&p.id, condition, block, fs, p.paretic_side);
    let geom = LegGeometry {
        thigh_length: p.thigh_length,
        shank_length: p.shank_length,
        ..LegGeometry::default()
    };

    for id in JointId::all() {
        match by_name.get(id.to_string().as_str()) {
            Some(c) => d.angles[id.index()] = Some(c.samples.clone()),
            None if id.user == User::Patient => {
                return Err(Error::Malformed {
                    path: kin_path.clone(),
                    row: 2,
                    message: format!("missing channel `{id}`"),
                })
            }
            None => {}
        }
    }
    for user in User::ALL {
        for side in Side::ALL {
            let li = leg_index(user, side);
            let hip = &d.angles[JointId::new(user, side, Joint::Hip).index()];
            let knee = &d.angles[JointId::new(user, side, Joint::Knee).index()];
            if let (Some(h), Some(k)) = (hip, knee) {
                let ankle: Result<Vec<[f64; 2]>> =
                    h.iter().zip(k).map(|(&a, &b)| ankle_position(a, b, &geom)).collect();
                d.ankles[li] = Some(ankle?);
            }
            let name = format!("{}_{}_heel_strike", user.as_str(), side.as_str());
            if let Some(c) = by_name.get(name.as_str()) {
                d.heel_strikes[li] = Some(rising_edges(&c.samples));
            }
        }
    }

    let emg_path = dir.join("emg.csv");
    if emg_path.is_file() {
        for raw in read_channels(&emg_path)? {
            let (side, muscle) = split_side(&raw.channel_label).ok_or_else(|| Error::Malformed {
                path: emg_path.clone(),
                row: 2,
                message: format!(
                    "EMG channel `{}` must be named <left|right>_<muscle>",
                    raw.channel_label
                ),
            })?;
            let env = emg_envelope(&raw)?;
            d.activation.push(ActivationChannel {
                side,
                name: muscle.to_string(),
                unit: "V".into(),
                sample_rate_hz: env.series.sample_rate_hz,
                series: env.series.samples,
            });
        }
    }

    let hr_path = dir.join("hr.csv");
    if hr_path.is_file() {
        let hr = read_channels(&hr_path)?;
        let c = hr
            .iter()
            .find(|c| c.channel_label == "heart_rate")
            .ok_or_else(|| Error::Malformed {
                path: hr_path.clone(),
                row: 2,
                message: "missing channel `heart_rate`".into(),
            })?;
        d.heart_rate_bpm = c.mean();
        d.age_years = Some(p.age);
    }
    Ok(d)
}

fn split_side(label: &str) -> Option<(Side, &str)> {
    let (s, rest) = label.split_once('_')?;
    let side = match s {
        "left" => Side::Left,
        "right" => Side::Right,
        _ => return None,
    };
    (!rest.is_empty()).then_some((side, rest))
}

/// Sample indices where a 0/1 contact channel switches on.
pub fn rising_edges(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    if x.first().is_some_and(|&v| v > 0.5) {
        out.push(0);
    }
    out.extend(
        x.windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] <= 0.5 && w[1] > 0.5)
            .map(|(i, _)| i + 1),
    );
    out
}
