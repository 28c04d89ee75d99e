//! Block-level gait analysis shared by simulated logs and recorded sessions.
//!
//! Each training block is reduced to per-stride values (step geometry,
//! workspace, therapist-patient deviation) and block values (stride means,
//! activation, heart rate, exertion), then aggregated across blocks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coupling::mirror_joint;
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate_blocks, hr_percent_max, hull_area, step_height, step_length, stride_deviation, workspace_area, AreaMode,
    BorgRpe, MetricsReport, MEAN_BLOCK,
};
use crate::model::{Joint, JointId, Side, User};
use crate::plant::events::{detect_heel_strikes, strides_from_events};
use crate::plant::log::{leg_index, SimLog};
use crate::signals::{normalize_to_baseline, resample_stride, trim_strides, EDGE_TRIM_S, STRIDE_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagKind {
    #[default]
    Signed,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub area_mode: AreaMode,
    pub lag: LagKind,
    /// Segment strides from the ankle trajectory when no heel-strike
    /// events are recorded.
    pub detect_strikes: bool,
    /// s, used only by the detector
    pub nominal_cycle_s: f64,
    /// s discarded at each block edge
    pub edge_trim_s: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            area_mode: AreaMode::Hull,
            lag: LagKind::Signed,
            detect_strikes: false,
            nominal_cycle_s: 3.0,
            edge_trim_s: EDGE_TRIM_S,
        }
    }
}

/// A muscle-activation series (an EMG envelope, or a torque-effort proxy).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationChannel {
    pub side: Side,
    pub name: String,
    pub unit: String,
    pub sample_rate_hz: f64,
    pub series: Vec<f64>,
}

impl ActivationChannel {
    /// Mean over the block with `trim_s` removed from both ends (the whole
    /// block when that leaves nothing).
    pub fn block_mean(&self, trim_s: f64) -> Option<f64> {
        let m = (trim_s * self.sample_rate_hz).round() as usize;
        let s = &self.series;
        let slice = if 2 * m < s.len() { &s[m..s.len() - m] } else { &s[..] };
        (!slice.is_empty()).then(|| slice.iter().sum::<f64>() / slice.len() as f64)
    }
}

/// Everything recorded for one training block of one patient.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockData {
    pub patient: String,
    pub condition: String,
    /// 1-based
    pub block: usize,
    pub sample_rate_hz: f64,
    pub paretic_side: Side,
    /// Joint angles in rad, indexed by [`JointId::index`]. Therapist joints
    /// may be absent.
    pub angles: [Option<Vec<f64>>; 8],
    /// Ankle positions in m, indexed by [`leg_index`].
    pub ankles: [Option<Vec<[f64; 2]>>; 4],
    /// Heel-strike sample indices, indexed by [`leg_index`].
    pub heel_strikes: [Option<Vec<usize>>; 4],
    pub activation: Vec<ActivationChannel>,
    pub heart_rate_bpm: Option<f64>,
    pub age_years: Option<f64>,
    pub rpe: Option<BorgRpe>,
}

impl BlockData {
    pub fn new(patient: &str, condition: &str, block: usize, sample_rate_hz: f64, paretic_side: Side) -> Self {
        BlockData {
            patient: patient.into(),
            condition: condition.into(),
            block,
            sample_rate_hz,
            paretic_side,
            angles: Default::default(),
            ankles: Default::default(),
            heel_strikes: Default::default(),
            activation: Vec::new(),
            heart_rate_bpm: None,
            age_years: None,
            rpe: None,
        }
    }

    pub fn leg_label(&self, side: Side) -> &'static str {
        if side == self.paretic_side {
            "paretic"
        } else {
            "non_paretic"
        }
    }

    fn len(&self) -> usize {
        self.ankles
            .iter()
            .flatten()
            .map(Vec::len)
            .chain(self.angles.iter().flatten().map(Vec::len))
            .max()
            .unwrap_or(0)
    }
}

/// Free-walking activation levels to normalise against. Lookups fall back
/// from the exact `(patient, condition, block, channel)` to the patient's
/// mean for the channel over every baseline block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Baseline {
    exact: BTreeMap<(String, String, usize, String), f64>,
    pooled: BTreeMap<(String, String), (f64, usize)>,
}

impl Baseline {
    pub fn from_blocks(blocks: &[BlockData], trim_s: f64) -> Self {
        let mut b = Baseline::default();
        for d in blocks {
            for ch in &d.activation {
                if let Some(m) = ch.block_mean(trim_s) {
                    let name = channel_key(ch);
                    b.exact
                        .insert((d.patient.clone(), d.condition.clone(), d.block, name.clone()), m);
                    let e = b.pooled.entry((d.patient.clone(), name)).or_insert((0.0, 0));
                    e.0 += m;
                    e.1 += 1;
                }
            }
        }
        b
    }

    pub fn lookup(&self, d: &BlockData, ch: &ActivationChannel) -> Option<f64> {
        let name = channel_key(ch);
        self.exact
            .get(&(d.patient.clone(), d.condition.clone(), d.block, name.clone()))
            .copied()
            .or_else(|| self.pooled.get(&(d.patient.clone(), name)).map(|(s, n)| s / *n as f64))
    }
}

fn channel_key(ch: &ActivationChannel) -> String {
    format!("{}_{}", ch.side.as_str(), ch.name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrideRow {
    pub patient: String,
    pub condition: String,
    pub block: usize,
    pub leg: String,
    pub stride: usize,
    pub metric: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BlockAnalysis {
    pub strides: Vec<StrideRow>,
    pub report: MetricsReport,
}

fn joint_metric(prefix: &str, joint: Joint) -> String {
    format!("{prefix}_{}", joint.as_str())
}

/// Stride bounds for one leg, trimmed away from the block edges.
pub fn leg_strides(d: &BlockData, user: User, side: Side, opts: &AnalysisOptions) -> Result<Vec<(usize, usize)>> {
    let li = leg_index(user, side);
    let events = match (&d.heel_strikes[li], opts.detect_strikes) {
        (Some(ev), _) if ev.len() >= 2 => ev.clone(),
        (_, true) => {
            let ankle = d.ankles[li].as_ref().ok_or(Error::Empty("ankle trajectory"))?;
            let forward: Vec<f64> = ankle.iter().map(|p| p[0]).collect();
            detect_heel_strikes(&forward, d.sample_rate_hz, opts.nominal_cycle_s)?
        }
        (Some(_), false) => return Err(Error::NoStrides),
        (None, false) => {
            return Err(Error::Validation(format!(
                "{} {} block {}: no heel-strike events for the {} leg; \
                 pass --detect-strikes to segment from the ankle trajectory",
                d.patient,
                d.condition,
                d.block,
                side.as_str()
            )))
        }
    };
    let all = strides_from_events(&events);
    let kept = trim_strides(&all, d.len(), d.sample_rate_hz, opts.edge_trim_s);
    if kept.is_empty() {
        log::warn!(
            "{} {} block {}: every stride touches the block edges; using untrimmed strides",
            d.patient,
            d.condition,
            d.block
        );
        return Ok(all);
    }
    Ok(kept)
}

/// Per-stride and block values for one block.
pub fn analyze_block(d: &BlockData, opts: &AnalysisOptions, baseline: Option<&Baseline>) -> Result<BlockAnalysis> {
    let mut out = BlockAnalysis::default();
    let mut push_stride = |leg: &str, stride: usize, metric: String, value: f64, unit: &str| {
        out.strides.push(StrideRow {
            patient: d.patient.clone(),
            condition: d.condition.clone(),
            block: d.block,
            leg: leg.into(),
            stride,
            metric,
            value,
            unit: unit.into(),
        });
    };
    let mut block_values: Vec<(String, String, f64, String)> = Vec::new();

    for side in Side::ALL {
        let leg = d.leg_label(side);
        let li = leg_index(User::Patient, side);
        let other = leg_index(User::Patient, side.opposite());
        let Some(ankle) = d.ankles[li].as_ref() else { continue };
        let strides = leg_strides(d, User::Patient, side, opts)?;
        let stance = d.ankles[other].as_ref();

        let mut acc: BTreeMap<String, (Vec<f64>, &'static str)> = BTreeMap::new();
        let mut record = |metric: String, value: f64, unit: &'static str, k: usize| {
            push_stride(leg, k, metric.clone(), value, unit);
            acc.entry(metric).or_insert_with(|| (Vec::new(), unit)).0.push(value);
        };

        for (k, &(s, e)) in strides.iter().enumerate() {
            let k = k + 1;
            if opts.area_mode == AreaMode::Hull {
                record("workspace_area".into(), hull_area(&ankle[s..=e]) * 1e4, "cm2", k);
            }
            if let Some(stance) = stance {
                record("step_length".into(), step_length(ankle[s], stance[s]), "cm", k);
                let swing_y: Vec<f64> = ankle[s..=e].iter().map(|p| p[1]).collect();
                let stance_y: Vec<f64> = stance[s..=e].iter().map(|p| p[1]).collect();
                record("step_height".into(), step_height(&swing_y, &stance_y)?, "cm", k);
            }
            for joint in Joint::ALL {
                let pid = JointId::new(User::Patient, side, joint);
                let tid = mirror_joint(pid);
                let (Some(p), Some(t)) = (&d.angles[pid.index()], &d.angles[tid.index()]) else {
                    continue;
                };
                let a = resample_stride(t, s, e, STRIDE_SAMPLES)?;
                let b = resample_stride(p, s, e, STRIDE_SAMPLES)?;
                let dev = stride_deviation(&a, &b)?;
                record(joint_metric("spatial_rmse", joint), dev.spatial_rmse, "deg", k);
                let lag = match opts.lag {
                    LagKind::Signed => dev.signed_lag,
                    LagKind::Absolute => dev.abs_lag,
                };
                record(joint_metric("temporal_lag", joint), lag, "%cycle", k);
            }
        }

        if opts.area_mode != AreaMode::Hull {
            let area = workspace_area(ankle, &strides, opts.area_mode)?;
            acc.insert("workspace_area".into(), (vec![area], "cm2"));
        }
        for (metric, (vals, unit)) in acc {
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            block_values.push((leg.into(), metric, mean, unit.into()));
        }
    }

    for ch in &d.activation {
        let Some(mean) = ch.block_mean(opts.edge_trim_s) else {
            continue;
        };
        let leg = d.leg_label(ch.side).to_string();
        match baseline {
            Some(b) => {
                let base = b.lookup(d, ch).ok_or_else(|| {
                    Error::Validation(format!(
                        "baseline has no activation channel {} for patient {}",
                        channel_key(ch),
                        d.patient
                    ))
                })?;
                let pct = normalize_to_baseline(mean, base)?;
                block_values.push((leg, format!("activation_percent_{}", ch.name), pct, "%".into()));
            }
            None => block_values.push((leg, format!("activation_{}", ch.name), mean, ch.unit.clone())),
        }
    }

    if let (Some(hr), Some(age)) = (d.heart_rate_bpm, d.age_years) {
        block_values.push((
            "both".into(),
            "hr_percent_max".into(),
            hr_percent_max(hr, age)?,
            "%".into(),
        ));
    }
    if let Some(rpe) = d.rpe {
        block_values.push(("both".into(), "rpe_borg".into(), f64::from(rpe.value()), "borg".into()));
    }

    for (leg, metric, value, unit) in block_values {
        if !value.is_finite() {
            return Err(Error::NonFinite("block metric"));
        }
        out.report
            .push(&d.patient, &d.condition, d.block, &leg, &metric, value, &unit);
    }
    Ok(out)
}

/// Analyse every block and append cross-block means.
pub fn analyze_blocks(
    blocks: &[BlockData],
    opts: &AnalysisOptions,
    baseline: Option<&Baseline>,
) -> Result<BlockAnalysis> {
    let mut all = BlockAnalysis::default();
    for d in blocks {
        let a = analyze_block(d, opts, baseline)?;
        all.strides.extend(a.strides);
        all.report.extend(a.report);
    }

    type Key = (String, String, String, String);
    let mut grouped: BTreeMap<Key, (BTreeMap<usize, f64>, String)> = BTreeMap::new();
    for r in &all.report.rows {
        let block: usize = r.block.parse().expect("block rows carry an index");
        grouped
            .entry((r.patient.clone(), r.condition.clone(), r.leg.clone(), r.metric.clone()))
            .or_insert_with(|| (BTreeMap::new(), r.unit.clone()))
            .0
            .insert(block, r.value);
    }
    for ((patient, condition, leg, metric), (values, unit)) in grouped {
        let n = *values.keys().max().expect("non-empty");
        let slots: Vec<Option<f64>> = (1..=n).map(|b| values.get(&b).copied()).collect();
        let agg = aggregate_blocks(&slots)?;
        all.report
            .push(&patient, &condition, MEAN_BLOCK, &leg, &metric, agg.mean, &unit);
    }
    Ok(all)
}

/// Split a simulation log into training blocks. Heel strikes are the
/// logged ground-truth events; activation is proxied by the patient's mean
/// absolute joint torque.
pub fn blocks_from_log(log: &SimLog, patient: &str, condition: &str, paretic_side: Side) -> Result<Vec<BlockData>> {
    let fs = log.sample_rate().ok_or(Error::Empty("simulation log"))?;
    let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
    for (i, r) in log.records.iter().enumerate() {
        match ranges.last_mut() {
            Some((b, _, end)) if *b == r.block => *end = i + 1,
            _ => ranges.push((r.block, i, i + 1)),
        }
    }
    let mut out = Vec::new();
    for (block, lo, hi) in ranges {
        let recs = &log.records[lo..hi];
        let mut d = BlockData::new(patient, condition, block, fs, paretic_side);
        for id in JointId::all() {
            d.angles[id.index()] = Some(recs.iter().map(|r| r.joints[id.index()].angle).collect());
        }
        for user in User::ALL {
            for side in Side::ALL {
                let li = leg_index(user, side);
                d.ankles[li] = Some(recs.iter().map(|r| r.legs[li].ankle).collect());
                d.heel_strikes[li] = Some(
                    recs.iter()
                        .enumerate()
                        .filter(|(_, r)| r.legs[li].heel_strike)
                        .map(|(k, _)| k)
                        .collect(),
                );
            }
        }
        for side in Side::ALL {
            for joint in Joint::ALL {
                let id = JointId::new(User::Patient, side, joint);
                d.activation.push(ActivationChannel {
                    side,
                    name: format!("{}_effort", joint.as_str()),
                    unit: "N*m".into(),
                    sample_rate_hz: fs,
                    series: recs.iter().map(|r| r.joints[id.index()].human_torque.abs()).collect(),
                });
            }
        }
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// Synthetic patient block: elliptical ankle loops, one stride per
    /// `period` samples.
    fn synthetic(period: usize, strides: usize) -> BlockData {
        let n = period * strides + 1;
        let mut d = BlockData::new("P", "C", 1, 100.0, Side::Right);
        for side in Side::ALL {
            let off = if side == Side::Right { 0.0 } else { 0.5 };
            let ankle: Vec<[f64; 2]> = (0..n)
                .map(|i| {
                    let ph = TAU * (i as f64 / period as f64 + off);
                    [0.15 * ph.cos(), -0.85 + 0.05 * ph.sin()]
                })
                .collect();
            d.ankles[leg_index(User::Patient, side)] = Some(ankle);
            let ev: Vec<usize> = (0..=strides).map(|k| k * period).collect();
            d.heel_strikes[leg_index(User::Patient, side)] = Some(ev);
        }
        d
    }

    #[test]
    fn single_stride_block_equals_stride() {
        let d = synthetic(300, 1);
        let a = analyze_blocks(&[d], &AnalysisOptions::default(), None).unwrap();
        for row in a.strides.iter() {
            let block = a
                .report
                .rows
                .iter()
                .filter(|r| r.leg == row.leg && r.metric == row.metric)
                .collect::<Vec<_>>();
            assert_eq!(block.len(), 2);
            assert!(block.iter().all(|r| r.value == row.value));
        }
        assert!(a.strides.iter().any(|r| r.metric == "step_length"));
    }

    #[test]
    fn synthetic_geometry() {
        let d = synthetic(400, 6);
        let a = analyze_block(&d, &AnalysisOptions::default(), None).unwrap();
        let get = |leg: &str, m: &str| {
            a.report
                .rows
                .iter()
                .find(|r| r.leg == leg && r.metric == m)
                .unwrap()
                .value
        };
        let area = std::f64::consts::PI * 15.0 * 5.0;
        assert!((get("paretic", "workspace_area") - area).abs() / area < 0.005);
        // At heel strike one ankle is at +15 cm, the other at -15 cm.
        assert!((get("paretic", "step_length") - 30.0).abs() < 1e-9);
        assert!(get("paretic", "step_height") <= 10.0 + 1e-9);
    }

    #[test]
    fn missing_events_name_the_flag() {
        let mut d = synthetic(300, 4);
        d.heel_strikes = Default::default();
        let err = analyze_block(&d, &AnalysisOptions::default(), None).unwrap_err();
        assert!(err.to_string().contains("--detect-strikes"), "{err}");
        let opts = AnalysisOptions {
            detect_strikes: true,
            nominal_cycle_s: 3.0,
            ..AnalysisOptions::default()
        };
        assert!(analyze_block(&d, &opts, None).is_ok());
    }

    #[test]
    fn self_baseline_is_one_hundred_percent() {
        let mut d = synthetic(300, 4);
        d.activation.push(ActivationChannel {
            side: Side::Left,
            name: "vastus".into(),
            unit: "V".into(),
            sample_rate_hz: 1000.0,
            series: (0..5000).map(|i| 1.0 + (i as f64 * 0.01).sin().abs()).collect(),
        });
        let base = Baseline::from_blocks(std::slice::from_ref(&d), EDGE_TRIM_S);
        let a = analyze_block(&d, &AnalysisOptions::default(), Some(&base)).unwrap();
        let row = a
            .report
            .rows
            .iter()
            .find(|r| r.metric == "activation_percent_vastus")
            .unwrap();
        assert_eq!(row.value, 100.0);
        assert_eq!(row.leg, "non_paretic");
    }
}
