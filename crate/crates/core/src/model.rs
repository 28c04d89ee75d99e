//! Planar two-link leg model and the joint vocabulary shared by the dyad.
//!
//! Angle conventions: the hip angle is measured from the downward vertical,
//! positive forward (flexion); the knee angle is flexion, positive when the
//! shank folds back behind the thigh. The absolute shank angle is therefore
//! `hip - knee`, and `(0, 0)` is upright standing. Points are expressed in a
//! hip-centred frame with `x` forward and `y` up.
//!
//! The trunk is fixed to the treadmill frame, so each leg is an independent
//! fixed-base chain. Human and exoskeleton segments are lumped into one rigid
//! body per segment.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum User {
    Therapist,
    Patient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Joint {
    Hip,
    Knee,
}

impl User {
    pub const ALL: [User; 2] = [User::Therapist, User::Patient];

    pub fn partner(self) -> User {
        match self {
            User::Therapist => User::Patient,
            User::Patient => User::Therapist,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            User::Therapist => "therapist",
            User::Patient => "patient",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Left, Side::Right];

    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Joint {
    pub const ALL: [Joint; 2] = [Joint::Hip, Joint::Knee];

    pub fn as_str(self) -> &'static str {
        match self {
            Joint::Hip => "hip",
            Joint::Knee => "knee",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One actuated joint of the dyad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointId {
    pub user: User,
    pub side: Side,
    pub joint: Joint,
}

impl JointId {
    pub const fn new(user: User, side: Side, joint: Joint) -> Self {
        JointId { user, side, joint }
    }

    /// All eight joints in a stable order: user, then side, then joint.
    pub fn all() -> impl Iterator<Item = JointId> {
        User::ALL.into_iter().flat_map(|u| {
            Side::ALL
                .into_iter()
                .flat_map(move |s| Joint::ALL.into_iter().map(move |j| JointId::new(u, s, j)))
        })
    }

    pub fn of_user(user: User) -> impl Iterator<Item = JointId> {
        Self::all().filter(move |id| id.user == user)
    }

    /// Dense index in `0..8`, matching the order of [`JointId::all`].
    pub fn index(self) -> usize {
        self.user.index() * 4 + self.side.index() * 2 + self.joint.index()
    }
}

impl fmt::Display for JointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}_{}_{}",
            self.user.as_str(),
            self.side.as_str(),
            self.joint.as_str()
        )
    }
}

/// Segment geometry and inertia of one leg (human and device lumped).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegGeometry {
    pub thigh_length: f64,
    pub shank_length: f64,
    pub thigh_mass: f64,
    pub shank_mass: f64,
    /// COM distance from the hip as a fraction of `thigh_length`.
    pub thigh_com_ratio: f64,
    /// COM distance from the knee as a fraction of `shank_length`.
    pub shank_com_ratio: f64,
    /// About the segment COM.
    pub thigh_inertia: f64,
    pub shank_inertia: f64,
}

impl Default for LegGeometry {
    /// Estimated lumped values for an adult wearing a hip-knee exoskeleton.
    /// These are not measured device parameters.
    fn default() -> Self {
        LegGeometry {
            thigh_length: 0.42,
            shank_length: 0.43,
            thigh_mass: 10.5,
            shank_mass: 6.6,
            thigh_com_ratio: 0.43,
            shank_com_ratio: 0.45,
            thigh_inertia: 0.20,
            shank_inertia: 0.12,
        }
    }
}

impl LegGeometry {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("thigh_length", self.thigh_length),
            ("shank_length", self.shank_length),
            ("thigh_mass", self.thigh_mass),
            ("shank_mass", self.shank_mass),
            ("thigh_inertia", self.thigh_inertia),
            ("shank_inertia", self.shank_inertia),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("thigh_com_ratio", self.thigh_com_ratio),
            ("shank_com_ratio", self.shank_com_ratio),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    fn thigh_com(&self) -> f64 {
        self.thigh_com_ratio * self.thigh_length
    }

    fn shank_com(&self) -> f64 {
        self.shank_com_ratio * self.shank_length
    }

    /// Peak static gravity torque at each joint (leg held horizontal).
    pub fn peak_gravity_torque(&self, gravity: f64) -> [f64; 2] {
        let hip =
            gravity * (self.thigh_mass * self.thigh_com() + self.shank_mass * (self.thigh_length + self.shank_com()));
        let knee = gravity * self.shank_mass * self.shank_com();
        [hip, knee]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub angle_min: f64,
    pub angle_max: f64,
    pub velocity_max: f64,
    pub torque_max: f64,
    pub accel_max: f64,
}

impl JointLimits {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_min < self.angle_max) {
            return Err(Error::invalid("angle_min", "must be below angle_max"));
        }
        for (name, v) in [
            ("velocity_max", self.velocity_max),
            ("torque_max", self.torque_max),
            ("accel_max", self.accel_max),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn default_hip() -> Self {
        JointLimits {
            angle_min: -0.70,
            angle_max: 2.0,
            velocity_max: 5.0,
            torque_max: 120.0,
            accel_max: 60.0,
        }
    }

    pub fn default_knee() -> Self {
        JointLimits {
            angle_min: 0.0,
            angle_max: 2.0,
            velocity_max: 6.0,
            torque_max: 120.0,
            accel_max: 80.0,
        }
    }
}

/// Joint limits for the four joints of one exoskeleton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LegLimits {
    pub hip: JointLimits,
    pub knee: JointLimits,
}

impl LegLimits {
    pub fn get(&self, joint: Joint) -> &JointLimits {
        match joint {
            Joint::Hip => &self.hip,
            Joint::Knee => &self.knee,
        }
    }

    pub fn as_array(&self) -> [JointLimits; 2] {
        [self.hip, self.knee]
    }
}

impl Default for LegLimits {
    fn default() -> Self {
        LegLimits {
            hip: JointLimits::default_hip(),
            knee: JointLimits::default_knee(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExoskeletonModel {
    pub left: LegGeometry,
    pub right: LegGeometry,
    pub left_limits: LegLimits,
    pub right_limits: LegLimits,
    pub gravity: f64,
}

impl Default for ExoskeletonModel {
    fn default() -> Self {
        ExoskeletonModel {
            left: LegGeometry::default(),
            right: LegGeometry::default(),
            left_limits: LegLimits::default(),
            right_limits: LegLimits::default(),
            gravity: DEFAULT_GRAVITY,
        }
    }
}

impl ExoskeletonModel {
    pub fn leg(&self, side: Side) -> &LegGeometry {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn limits(&self, side: Side) -> &LegLimits {
        match side {
            Side::Left => &self.left_limits,
            Side::Right => &self.right_limits,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        for limits in [&self.left_limits, &self.right_limits] {
            limits.hip.validate()?;
            limits.knee.validate()?;
        }
        if !(self.gravity > 0.0) {
            return Err(Error::invalid("gravity", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub angle: f64,
    pub velocity: f64,
}

impl JointState {
    pub fn new(angle: f64, velocity: f64) -> Self {
        JointState { angle, velocity }
    }
}

/// Joint states of both users at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DyadState {
    pub time: f64,
    pub states: BTreeMap<JointId, JointState>,
}

impl DyadState {
    pub fn new(time: f64) -> Self {
        DyadState {
            time,
            states: BTreeMap::new(),
        }
    }

    pub fn with_all(time: f64, f: impl Fn(JointId) -> JointState) -> Self {
        DyadState {
            time,
            states: JointId::all().map(|id| (id, f(id))).collect(),
        }
    }

    pub fn get(&self, id: JointId) -> Result<JointState> {
        self.states.get(&id).copied().ok_or(Error::MissingJoint(id))
    }

    pub fn set(&mut self, id: JointId, state: JointState) {
        self.states.insert(id, state);
    }
}

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Ankle position relative to the hip joint, in metres.
pub fn ankle_position(hip_angle: f64, knee_angle: f64, geom: &LegGeometry) -> Result<[f64; 2]> {
    check_finite(&[hip_angle, knee_angle], "joint angle")?;
    let shank = hip_angle - knee_angle;
    let x = geom.thigh_length * hip_angle.sin() + geom.shank_length * shank.sin();
    let y = -geom.thigh_length * hip_angle.cos() - geom.shank_length * shank.cos();
    Ok([x, y])
}

/// Joint-space mass matrix `M(q)` for `q = (hip, knee)`.
pub fn mass_matrix(geom: &LegGeometry, q: [f64; 2]) -> [[f64; 2]; 2] {
    let a2 = geom.shank_com();
    let thigh =
        geom.thigh_mass * geom.thigh_com().powi(2) + geom.thigh_inertia + geom.shank_mass * geom.thigh_length.powi(2);
    let shank = geom.shank_mass * a2 * a2 + geom.shank_inertia;
    let cross = geom.shank_mass * geom.thigh_length * a2 * q[1].cos();
    [
        [thigh + 2.0 * cross + shank, -(cross + shank)],
        [-(cross + shank), shank],
    ]
}

/// Coriolis/centrifugal torques `C(q, qd) qd`.
pub fn coriolis_torques(geom: &LegGeometry, q: [f64; 2], qd: [f64; 2]) -> [f64; 2] {
    // Absolute segment rates.
    let thigh_rate = qd[0];
    let shank_rate = qd[0] - qd[1];
    let d = geom.shank_mass * geom.thigh_length * geom.shank_com() * q[1].sin();
    let h_thigh = d * shank_rate * shank_rate;
    let h_shank = -d * thigh_rate * thigh_rate;
    [h_thigh + h_shank, -h_shank]
}

pub fn gravity_torques(geom: &LegGeometry, q: [f64; 2], gravity: f64) -> [f64; 2] {
    let shank_abs = q[0] - q[1];
    let g_thigh = gravity * (geom.thigh_mass * geom.thigh_com() + geom.shank_mass * geom.thigh_length) * q[0].sin();
    let g_shank = gravity * geom.shank_mass * geom.shank_com() * shank_abs.sin();
    [g_thigh + g_shank, -g_shank]
}

/// `C(q, qd) qd + g(q)`.
pub fn bias_torques(geom: &LegGeometry, q: [f64; 2], qd: [f64; 2], gravity: f64) -> [f64; 2] {
    let c = coriolis_torques(geom, q, qd);
    let g = gravity_torques(geom, q, gravity);
    [c[0] + g[0], c[1] + g[1]]
}

pub(crate) fn mat_vec(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub(crate) fn solve2(m: &[[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([
        (m[1][1] * b[0] - m[0][1] * b[1]) / det,
        (m[0][0] * b[1] - m[1][0] * b[0]) / det,
    ])
}

/// Joint torques realising `(q, qd, qdd)`: `M(q) qdd + C(q, qd) qd + g(q)`.
pub fn inverse_dynamics(
    geom: &LegGeometry,
    q: [f64; 2],
    qd: [f64; 2],
    qdd: [f64; 2],
    gravity: f64,
) -> Result<[f64; 2]> {
    check_finite(&[q[0], q[1], qd[0], qd[1], qdd[0], qdd[1], gravity], "dynamic state")?;
    let m = mass_matrix(geom, q);
    let inertial = mat_vec(&m, qdd);
    let bias = bias_torques(geom, q, qd, gravity);
    Ok([inertial[0] + bias[0], inertial[1] + bias[1]])
}

/// Accelerations produced by joint torques `tau`.
pub fn forward_dynamics(
    geom: &LegGeometry,
    q: [f64; 2],
    qd: [f64; 2],
    tau: [f64; 2],
    gravity: f64,
) -> Option<[f64; 2]> {
    let m = mass_matrix(geom, q);
    let bias = bias_torques(geom, q, qd, gravity);
    solve2(&m, [tau[0] - bias[0], tau[1] - bias[1]])
}

pub fn kinetic_energy(geom: &LegGeometry, q: [f64; 2], qd: [f64; 2]) -> f64 {
    let m = mass_matrix(geom, q);
    let mq = mat_vec(&m, qd);
    0.5 * (qd[0] * mq[0] + qd[1] * mq[1])
}

/// Potential energy relative to the hip height (negative when hanging).
pub fn potential_energy(geom: &LegGeometry, q: [f64; 2], gravity: f64) -> f64 {
    let shank_abs = q[0] - q[1];
    let thigh_com_y = -geom.thigh_com() * q[0].cos();
    let shank_com_y = -geom.thigh_length * q[0].cos() - geom.shank_com() * shank_abs.cos();
    gravity * (geom.thigh_mass * thigh_com_y + geom.shank_mass * shank_com_y)
}
