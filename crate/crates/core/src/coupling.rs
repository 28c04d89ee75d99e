//! Virtual spring-damper medium between the two exoskeletons.
//!
//! The users face each other, so the therapist's left leg is tied to the
//! patient's right leg and vice versa. Each user has its own stiffness and
//! damping, which sets how strongly that user feels the partner.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DyadState, Joint, JointId, Side, User};

/// Safety ceiling on any rendered stiffness unless configured otherwise.
pub const DEFAULT_STIFFNESS_CEILING: f64 = 100.0;
pub const DEFAULT_DAMPING_RATIO: f64 = 0.25;
/// Nominal joint inertia used by the damping rule (kg·m²). The same value is
/// used at hip and knee so that both joints receive identical damping.
pub const DEFAULT_NOMINAL_INERTIA: f64 = 1.0;
/// Duration of the linear gain ramp applied at block transitions.
pub const GAIN_RAMP_SECONDS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingGains {
    /// N·m/rad
    pub stiffness: f64,
    /// N·m·s/rad
    pub damping: f64,
}

impl CouplingGains {
    pub fn new(stiffness: f64, damping: f64) -> Self {
        CouplingGains { stiffness, damping }
    }

    fn scaled(self, factor: f64) -> Self {
        CouplingGains::new(self.stiffness * factor, self.damping * factor)
    }
}

/// Gains of one user's four coupling elements, indexed `[side][joint]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserGains {
    pub left_hip: CouplingGains,
    pub left_knee: CouplingGains,
    pub right_hip: CouplingGains,
    pub right_knee: CouplingGains,
}

impl UserGains {
    pub fn uniform(gains: CouplingGains) -> Self {
        UserGains {
            left_hip: gains,
            left_knee: gains,
            right_hip: gains,
            right_knee: gains,
        }
    }

    pub fn get(&self, side: Side, joint: Joint) -> CouplingGains {
        match (side, joint) {
            (Side::Left, Joint::Hip) => self.left_hip,
            (Side::Left, Joint::Knee) => self.left_knee,
            (Side::Right, Joint::Hip) => self.right_hip,
            (Side::Right, Joint::Knee) => self.right_knee,
        }
    }

    pub fn get_mut(&mut self, side: Side, joint: Joint) -> &mut CouplingGains {
        match (side, joint) {
            (Side::Left, Joint::Hip) => &mut self.left_hip,
            (Side::Left, Joint::Knee) => &mut self.left_knee,
            (Side::Right, Joint::Hip) => &mut self.right_hip,
            (Side::Right, Joint::Knee) => &mut self.right_knee,
        }
    }

    fn iter(&self) -> impl Iterator<Item = CouplingGains> + '_ {
        Side::ALL
            .into_iter()
            .flat_map(move |s| Joint::ALL.into_iter().map(move |j| self.get(s, j)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NominalInertia {
    pub hip: f64,
    pub knee: f64,
}

impl NominalInertia {
    pub fn get(&self, joint: Joint) -> f64 {
        match joint {
            Joint::Hip => self.hip,
            Joint::Knee => self.knee,
        }
    }
}

impl Default for NominalInertia {
    fn default() -> Self {
        NominalInertia {
            hip: DEFAULT_NOMINAL_INERTIA,
            knee: DEFAULT_NOMINAL_INERTIA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DyadCouplingConfig {
    pub therapist: UserGains,
    pub patient: UserGains,
    pub damping_ratio: f64,
    pub nominal_inertia: NominalInertia,
    pub stiffness_ceiling: f64,
}

impl DyadCouplingConfig {
    /// Uniform stiffness per user, damping from the constant-damping-ratio rule.
    pub fn from_stiffness(k_patient: f64, k_therapist: f64) -> Result<Self> {
        let mut cfg = DyadCouplingConfig {
            therapist: UserGains::default(),
            patient: UserGains::default(),
            damping_ratio: DEFAULT_DAMPING_RATIO,
            nominal_inertia: NominalInertia::default(),
            stiffness_ceiling: DEFAULT_STIFFNESS_CEILING,
        };
        cfg.set_stiffness(k_patient, k_therapist)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn transparent() -> Self {
        DyadCouplingConfig {
            therapist: UserGains::default(),
            patient: UserGains::default(),
            damping_ratio: DEFAULT_DAMPING_RATIO,
            nominal_inertia: NominalInertia::default(),
            stiffness_ceiling: DEFAULT_STIFFNESS_CEILING,
        }
    }

    pub fn gains(&self, user: User) -> &UserGains {
        match user {
            User::Therapist => &self.therapist,
            User::Patient => &self.patient,
        }
    }

    pub fn gains_mut(&mut self, user: User) -> &mut UserGains {
        match user {
            User::Therapist => &mut self.therapist,
            User::Patient => &mut self.patient,
        }
    }

    /// Replace every stiffness of each user and recompute damping.
    pub fn set_stiffness(&mut self, k_patient: f64, k_therapist: f64) -> Result<()> {
        for (user, k) in [(User::Patient, k_patient), (User::Therapist, k_therapist)] {
            for side in Side::ALL {
                for joint in Joint::ALL {
                    let b = damping_for(k, self.damping_ratio, self.nominal_inertia.get(joint))?;
                    *self.gains_mut(user).get_mut(side, joint) = CouplingGains::new(k, b);
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping_ratio > 0.0 && self.damping_ratio <= 2.0) {
            return Err(Error::invalid(
                "damping_ratio",
                format!("must lie in (0, 2], got {}", self.damping_ratio),
            ));
        }
        if !(self.nominal_inertia.hip > 0.0 && self.nominal_inertia.knee > 0.0) {
            return Err(Error::invalid("nominal_inertia", "must be positive"));
        }
        for user in User::ALL {
            for g in self.gains(user).iter() {
                if !(g.stiffness >= 0.0 && g.damping >= 0.0) {
                    return Err(Error::invalid("gains", "stiffness and damping must be non-negative"));
                }
                if g.stiffness > self.stiffness_ceiling {
                    return Err(Error::invalid(
                        "stiffness",
                        format!("{} exceeds ceiling {}", g.stiffness, self.stiffness_ceiling),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The partner leg a given leg is coupled to.
pub fn mirror_map(user: User, side: Side) -> (User, Side) {
    (user.partner(), side.opposite())
}

pub fn mirror_joint(id: JointId) -> JointId {
    let (user, side) = mirror_map(id.user, id.side);
    JointId::new(user, side, id.joint)
}

/// Damping that keeps the damping ratio constant: `B = 2 ζ sqrt(K I)`.
pub fn damping_for(stiffness: f64, zeta: f64, nominal_inertia: f64) -> Result<f64> {
    if !(stiffness >= 0.0) {
        return Err(Error::invalid(
            "stiffness",
            format!("must be non-negative, got {stiffness}"),
        ));
    }
    if !(zeta > 0.0) {
        return Err(Error::invalid("damping_ratio", "must be positive"));
    }
    if !(nominal_inertia > 0.0) {
        return Err(Error::invalid("nominal_inertia", "must be positive"));
    }
    Ok(2.0 * zeta * (stiffness * nominal_inertia).sqrt())
}

/// Desired interaction torque for every joint of the dyad, N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InteractionTorqueCommand {
    desired: [f64; 8],
}

impl InteractionTorqueCommand {
    pub fn get(&self, id: JointId) -> f64 {
        self.desired[id.index()]
    }

    pub fn set(&mut self, id: JointId, torque: f64) {
        self.desired[id.index()] = torque;
    }

    /// The two joint torques of one leg, `[hip, knee]`.
    pub fn leg(&self, user: User, side: Side) -> [f64; 2] {
        [
            self.get(JointId::new(user, side, Joint::Hip)),
            self.get(JointId::new(user, side, Joint::Knee)),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.desired.iter().all(|v| v.is_finite())
    }
}

/// Spring-damper torque pulling each joint toward its mirrored partner joint.
pub fn render_interaction_torques(state: &DyadState, config: &DyadCouplingConfig) -> Result<InteractionTorqueCommand> {
    let mut cmd = InteractionTorqueCommand::default();
    for id in JointId::all() {
        let own = state.get(id)?;
        let partner = state.get(mirror_joint(id))?;
        let g = config.gains(id.user).get(id.side, id.joint);
        let torque = g.stiffness * (partner.angle - own.angle) + g.damping * (partner.velocity - own.velocity);
        cmd.set(id, torque);
    }
    if !cmd.is_finite() {
        return Err(Error::NonFinite("interaction torque"));
    }
    Ok(cmd)
}

/// Instantaneous power dissipated by each user's damper element, summed
/// over the dyad. Each element sees its own user's velocity against the
/// partner velocity it was given, so the value is never positive.
pub fn damper_power(state: &DyadState, config: &DyadCouplingConfig) -> Result<f64> {
    Ok(user_damper_power(state, config, User::Therapist)? + user_damper_power(state, config, User::Patient)?)
}

/// Power dissipated by the damper elements acting on `user`.
pub fn user_damper_power(state: &DyadState, config: &DyadCouplingConfig, user: User) -> Result<f64> {
    let mut p = 0.0;
    for id in JointId::of_user(user) {
        let dv = state.get(mirror_joint(id))?.velocity - state.get(id)?.velocity;
        p -= config.gains(id.user).get(id.side, id.joint).damping * dv * dv;
    }
    Ok(p)
}

/// Energy stored in each user's spring element, summed over the dyad.
pub fn spring_energy(state: &DyadState, config: &DyadCouplingConfig) -> Result<f64> {
    Ok(user_spring_energy(state, config, User::Therapist)? + user_spring_energy(state, config, User::Patient)?)
}

pub fn user_spring_energy(state: &DyadState, config: &DyadCouplingConfig, user: User) -> Result<f64> {
    let mut e = 0.0;
    for id in JointId::of_user(user) {
        let d = state.get(mirror_joint(id))?.angle - state.get(id)?.angle;
        e += 0.5 * config.gains(id.user).get(id.side, id.joint).stiffness * d * d;
    }
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub block: usize,
    /// Patient stiffness, N·m/rad.
    pub k_patient: f64,
    /// Therapist stiffness, N·m/rad.
    pub k_therapist: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StiffnessSchedule {
    pub blocks: Vec<ScheduleBlock>,
}

impl StiffnessSchedule {
    pub fn new(blocks: Vec<ScheduleBlock>) -> Result<Self> {
        let s = StiffnessSchedule { blocks };
        s.validate(DEFAULT_STIFFNESS_CEILING)?;
        Ok(s)
    }

    pub fn validate(&self, ceiling: f64) -> Result<()> {
        for (i, b) in self.blocks.iter().enumerate() {
            if b.block != i + 1 {
                return Err(Error::invalid(
                    "schedule",
                    format!(
                        "block indices must be consecutive from 1, found {} at position {}",
                        b.block,
                        i + 1
                    ),
                ));
            }
            for k in [b.k_patient, b.k_therapist] {
                if !(0.0..=ceiling).contains(&k) {
                    return Err(Error::invalid(
                        "schedule",
                        format!("stiffness {k} outside [0, {ceiling}]"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn block(&self, index: usize) -> Result<&ScheduleBlock> {
        self.blocks
            .iter()
            .find(|b| b.block == index)
            .ok_or(Error::UnknownBlock(index))
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Stiffness combinations deployed for the eight patients, blocks T1-T3
    /// (`U1`..`U8`). `U2` completed only two blocks.
    pub fn deployed(patient_id: &str) -> Option<Self> {
        let rows: &[(f64, f64)] = match patient_id {
            "U1" => &[(49.0, 49.0), (49.0, 49.0), (49.0, 49.0)],
            "U2" => &[(49.0, 49.0), (49.0, 49.0)],
            "U3" => &[(49.0, 49.0), (58.0, 49.0), (58.0, 49.0)],
            "U4" => &[(64.0, 64.0), (49.0, 49.0), (49.0, 49.0)],
            "U5" => &[(49.0, 49.0), (49.0, 49.0), (49.0, 36.0)],
            "U6" => &[(49.0, 49.0), (49.0, 25.0), (49.0, 25.0)],
            "U7" => &[(60.0, 60.0), (60.0, 60.0), (60.0, 60.0)],
            "U8" => &[(60.0, 60.0), (60.0, 45.0), (60.0, 30.0)],
            _ => return None,
        };
        Some(StiffnessSchedule {
            blocks: rows
                .iter()
                .enumerate()
                .map(|(i, &(k_patient, k_therapist))| ScheduleBlock {
                    block: i + 1,
                    k_patient,
                    k_therapist,
                })
                .collect(),
        })
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct ScheduleRow {
    patient_id: String,
    block: usize,
    #[serde(rename = "K_p")]
    k_patient: f64,
    #[serde(rename = "K_t")]
    k_therapist: f64,
}

/// Load per-patient schedules from CSV with columns
/// `patient_id,block,K_p,K_t`.
pub fn load_schedules_csv(path: &Path) -> Result<BTreeMap<String, StiffnessSchedule>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Malformed {
            path: path.to_owned(),
            row: 0,
            message: e.to_string(),
        },
        _ => Error::Csv(e),
    })?;
    let mut out: BTreeMap<String, StiffnessSchedule> = BTreeMap::new();
    for (i, row) in reader.deserialize::<ScheduleRow>().enumerate() {
        let row = row.map_err(|e| Error::Malformed {
            path: path.to_owned(),
            row: i + 2,
            message: e.to_string(),
        })?;
        out.entry(row.patient_id).or_default().blocks.push(ScheduleBlock {
            block: row.block,
            k_patient: row.k_patient,
            k_therapist: row.k_therapist,
        });
    }
    for s in out.values_mut() {
        s.blocks.sort_by_key(|b| b.block);
        s.validate(DEFAULT_STIFFNESS_CEILING)?;
    }
    Ok(out)
}

pub fn write_schedules_csv<'a>(
    path: &Path,
    schedules: impl IntoIterator<Item = (&'a str, &'a StiffnessSchedule)>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (id, s) in schedules {
        for b in &s.blocks {
            w.serialize(ScheduleRow {
                patient_id: id.to_owned(),
                block: b.block,
                k_patient: b.k_patient,
                k_therapist: b.k_therapist,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Coupling configuration for one block: stiffness from the schedule,
/// damping recomputed by [`damping_for`].
pub fn gains_for_block(
    schedule: &StiffnessSchedule,
    block: usize,
    config: &DyadCouplingConfig,
) -> Result<DyadCouplingConfig> {
    let b = schedule.block(block)?;
    let mut out = *config;
    out.set_stiffness(b.k_patient, b.k_therapist)?;
    out.validate()?;
    Ok(out)
}

/// Block index (1-based) active at time `t` for blocks of equal length.
pub fn block_at(t: f64, block_duration: f64, n_blocks: usize) -> usize {
    if n_blocks == 0 || !(block_duration > 0.0) {
        return 1;
    }
    let i = (t / block_duration).floor().max(0.0) as usize + 1;
    i.min(n_blocks)
}

/// Coupling configuration in force at time `t`. When the schedule changes
/// at a block boundary, stiffness ramps linearly over [`GAIN_RAMP_SECONDS`]
/// and damping follows the ramped stiffness. Depends on `t` only.
pub fn scheduled_config(
    schedule: &StiffnessSchedule,
    block_duration: f64,
    t: f64,
    base: &DyadCouplingConfig,
) -> Result<DyadCouplingConfig> {
    if schedule.is_empty() {
        return Ok(*base);
    }
    let block = block_at(t, block_duration, schedule.len());
    let current = schedule.block(block)?;
    let since = t - (block - 1) as f64 * block_duration;
    if block == 1 || since >= GAIN_RAMP_SECONDS {
        return gains_for_block(schedule, block, base);
    }
    let prev = schedule.block(block - 1)?;
    let w = (since / GAIN_RAMP_SECONDS).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| a + (b - a) * w;
    let mut out = *base;
    out.set_stiffness(
        lerp(prev.k_patient, current.k_patient),
        lerp(prev.k_therapist, current.k_therapist),
    )?;
    Ok(out)
}

/// Scale one user's gains (test and sweep helper).
pub fn scale_user_gains(config: &DyadCouplingConfig, user: User, factor: f64) -> DyadCouplingConfig {
    let mut out = *config;
    let g = out.gains_mut(user);
    for side in Side::ALL {
        for joint in Joint::ALL {
            let v = g.get(side, joint).scaled(factor);
            *g.get_mut(side, joint) = v;
        }
    }
    out
}
