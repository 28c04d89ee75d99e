//! Closed-loop interaction-torque controller for one exoskeleton.
//!
//! Each tick the controller compares the torque the wearer should feel with
//! the torque measured at the cuffs, feeds the error through a diagonal
//! virtual admittance to obtain desired joint accelerations, and allocates
//! motor torques that realise the closest feasible accelerations under
//! torque, acceleration, velocity and joint-range constraints.
//!
//! Sign convention: the cuff sensor reports the torque the wearer applies to
//! the device. The wearer feels its reaction, so the tracking error is
//! `desired - (-measured)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coupling::InteractionTorqueCommand;
use crate::error::{Error, Result};
use crate::model::{
    bias_torques, inverse_dynamics, mass_matrix, DyadState, ExoskeletonModel, Joint, JointId, LegGeometry, LegLimits,
    Side, User,
};

pub const DEFAULT_CONTROL_RATE_HZ: f64 = 333.0;
/// Partner snapshots older than this many periods beyond the expected bus
/// latency are stale.
pub const STALE_PERIODS: f64 = 3.0;
pub const DEFAULT_VIRTUAL_INERTIA: f64 = 0.05;
pub const DEFAULT_VIRTUAL_DAMPING: f64 = 0.1;
/// Damping used by the safe-stop command, N·m·s/rad.
pub const SAFE_STOP_DAMPING: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceParams {
    /// `[hip, knee]`, kg·m²
    pub virtual_inertia: [f64; 2],
    /// `[hip, knee]`, N·m·s/rad
    pub virtual_damping: [f64; 2],
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        AdmittanceParams {
            virtual_inertia: [DEFAULT_VIRTUAL_INERTIA; 2],
            virtual_damping: [DEFAULT_VIRTUAL_DAMPING; 2],
        }
    }
}

impl AdmittanceParams {
    pub fn validate(&self) -> Result<()> {
        if !self.virtual_inertia.iter().all(|&m| m > 0.0 && m.is_finite()) {
            return Err(Error::invalid("virtual_inertia", "must be positive"));
        }
        if !self.virtual_damping.iter().all(|&b| b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid("virtual_damping", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    /// Integrated admittance velocity, `[side][joint]`.
    pub admittance_velocity: [[f64; 2]; 2],
    pub last_commanded_torque: [[f64; 2]; 2],
}

/// Additive zero-mean Gaussian noise on the cuff torque reading.
#[derive(Debug, Clone)]
pub struct TorqueSensor {
    noise: Option<(Normal<f64>, ChaCha8Rng)>,
}

impl TorqueSensor {
    pub fn ideal() -> Self {
        TorqueSensor { noise: None }
    }

    pub fn noisy(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sensor_noise_sd", "must be non-negative"));
        }
        if sigma == 0.0 {
            return Ok(Self::ideal());
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("sensor_noise_sd", e.to_string()))?;
        Ok(TorqueSensor {
            noise: Some((normal, ChaCha8Rng::seed_from_u64(seed))),
        })
    }

    pub fn measure(&mut self, truth: f64) -> f64 {
        measured_interaction_torque(truth, self)
    }
}

/// Cuff torque reading: ground truth plus optional sensor noise.
pub fn measured_interaction_torque(truth: f64, sensor: &mut TorqueSensor) -> f64 {
    match &mut sensor.noise {
        Some((normal, rng)) => truth + normal.sample(rng),
        None => truth,
    }
}

/// One explicit step of `Mv a + Bv v = e`. Returns the desired
/// accelerations and advances `velocity`.
pub fn admittance_update(
    torque_error: [f64; 2],
    params: &AdmittanceParams,
    velocity: &mut [f64; 2],
    dt: f64,
) -> [f64; 2] {
    let mut accel = [0.0; 2];
    for i in 0..2 {
        accel[i] = (torque_error[i] - params.virtual_damping[i] * velocity[i]) / params.virtual_inertia[i];
        velocity[i] += accel[i] * dt;
    }
    accel
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintFlags {
    pub torque: [bool; 2],
    pub acceleration: [bool; 2],
    pub velocity: [bool; 2],
    pub position: [bool; 2],
}

impl ConstraintFlags {
    pub fn any(&self) -> bool {
        [self.torque, self.acceleration, self.velocity, self.position]
            .iter()
            .any(|f| f[0] || f[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueAllocationResult {
    pub commanded_torque: [f64; 2],
    pub achieved_accel: [f64; 2],
    pub constraint_active: ConstraintFlags,
    /// The constraint set was empty and a damping-only command was issued.
    pub safe_stop: bool,
}

/// Half-plane `a·x <= c`.
#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    a: [f64; 2],
    c: f64,
}

impl HalfPlane {
    fn slack(&self, x: [f64; 2]) -> f64 {
        self.c - (self.a[0] * x[0] + self.a[1] * x[1])
    }
}

fn feasible(planes: &[HalfPlane], x: [f64; 2]) -> bool {
    planes.iter().all(|p| {
        let scale = 1.0 + p.c.abs() + p.a[0].abs() * x[0].abs() + p.a[1].abs() * x[1].abs();
        p.slack(x) >= -1e-10 * scale
    })
}

/// Euclidean projection of `target` onto the polygon `{x : planes}`.
/// The minimiser of a strictly convex quadratic over a 2-D polygon lies at
/// `target`, on one edge (orthogonal projection) or at a vertex, so the
/// candidates are enumerated exhaustively.
fn project_onto_polygon(planes: &[HalfPlane], target: [f64; 2]) -> Option<[f64; 2]> {
    if feasible(planes, target) {
        return Some(target);
    }
    let dist2 = |x: [f64; 2]| (x[0] - target[0]).powi(2) + (x[1] - target[1]).powi(2);
    let mut best: Option<([f64; 2], f64)> = None;
    let mut consider = |x: [f64; 2]| {
        if x[0].is_finite() && x[1].is_finite() && feasible(planes, x) {
            let d = dist2(x);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((x, d));
            }
        }
    };
    for p in planes {
        let n2 = p.a[0] * p.a[0] + p.a[1] * p.a[1];
        if n2 == 0.0 {
            continue;
        }
        let s = -p.slack(target) / n2;
        consider([target[0] - s * p.a[0], target[1] - s * p.a[1]]);
    }
    for (i, p) in planes.iter().enumerate() {
        for q in &planes[i + 1..] {
            let det = p.a[0] * q.a[1] - p.a[1] * q.a[0];
            if det.abs() < 1e-14 * (1.0 + p.a[0].abs() + p.a[1].abs()) * (1.0 + q.a[0].abs() + q.a[1].abs()) {
                continue;
            }
            let x = (p.c * q.a[1] - p.a[1] * q.c) / det;
            let y = (p.a[0] * q.c - p.c * q.a[0]) / det;
            consider([x, y]);
        }
    }
    best.map(|(x, _)| x)
}

/// Interval `[lo, hi]` of admissible accelerations for one joint, built by
/// successively intersecting the acceleration box with the velocity and
/// one-step-lookahead position bounds. When an intersection is empty the
/// interval collapses onto the point closest to the violated bound.
fn acceleration_interval(q: f64, qd: f64, limits: &crate::model::JointLimits, dt: f64) -> (f64, f64) {
    let mut lo = -limits.accel_max;
    let mut hi = limits.accel_max;
    let restrict = |lo: &mut f64, hi: &mut f64, blo: f64, bhi: f64| {
        let (nlo, nhi) = (lo.max(blo), hi.min(bhi));
        if nlo <= nhi {
            *lo = nlo;
            *hi = nhi;
        } else if bhi < *lo {
            *hi = *lo;
        } else {
            *lo = *hi;
        }
    };
    restrict(
        &mut lo,
        &mut hi,
        (-limits.velocity_max - qd) / dt,
        (limits.velocity_max - qd) / dt,
    );
    restrict(
        &mut lo,
        &mut hi,
        (limits.angle_min - q - qd * dt) / (dt * dt),
        (limits.angle_max - q - qd * dt) / (dt * dt),
    );
    (lo, hi)
}

/// Closest feasible accelerations to `qdd_des` and the motor torques that
/// realise them. `wearer_torque` is the measured torque the wearer applies
/// to the device, which the motors must absorb.
#[allow(clippy::too_many_arguments)]
pub fn allocate_torques(
    geom: &LegGeometry,
    limits: &LegLimits,
    gravity: f64,
    q: [f64; 2],
    qd: [f64; 2],
    qdd_des: [f64; 2],
    wearer_torque: [f64; 2],
    dt: f64,
) -> Result<TorqueAllocationResult> {
    let lim = limits.as_array();
    let m = mass_matrix(geom, q);
    let bias = bias_torques(geom, q, qd, gravity);
    let offset = [bias[0] - wearer_torque[0], bias[1] - wearer_torque[1]];

    let mut planes = Vec::with_capacity(8);
    let mut intervals = [(0.0, 0.0); 2];
    for i in 0..2 {
        let (lo, hi) = acceleration_interval(q[i], qd[i], &lim[i], dt);
        intervals[i] = (lo, hi);
        let mut e = [0.0; 2];
        e[i] = 1.0;
        planes.push(HalfPlane { a: e, c: hi });
        planes.push(HalfPlane {
            a: [-e[0], -e[1]],
            c: -lo,
        });
    }
    for i in 0..2 {
        let row = m[i];
        planes.push(HalfPlane {
            a: row,
            c: lim[i].torque_max - offset[i],
        });
        planes.push(HalfPlane {
            a: [-row[0], -row[1]],
            c: lim[i].torque_max + offset[i],
        });
    }

    let Some(accel) = project_onto_polygon(&planes, qdd_des) else {
        let torque = [
            (-SAFE_STOP_DAMPING * qd[0]).clamp(-lim[0].torque_max, lim[0].torque_max),
            (-SAFE_STOP_DAMPING * qd[1]).clamp(-lim[1].torque_max, lim[1].torque_max),
        ];
        return Ok(TorqueAllocationResult {
            commanded_torque: torque,
            achieved_accel: [f64::NAN; 2],
            constraint_active: ConstraintFlags::default(),
            safe_stop: true,
        });
    };

    let id = inverse_dynamics(geom, q, qd, accel, gravity)?;
    let mut torque = [id[0] - wearer_torque[0], id[1] - wearer_torque[1]];
    let mut flags = ConstraintFlags::default();
    for i in 0..2 {
        let tol = 1e-9 * (1.0 + lim[i].torque_max);
        flags.torque[i] = torque[i].abs() >= lim[i].torque_max - tol;
        // Round-off may leave the torque a hair outside the bound.
        torque[i] = torque[i].clamp(-lim[i].torque_max, lim[i].torque_max);
        let (lo, hi) = intervals[i];
        let on_bound = |b: f64| (accel[i] - b).abs() <= 1e-9 * (1.0 + b.abs());
        if on_bound(lo) || on_bound(hi) {
            let vlo = (-lim[i].velocity_max - qd[i]) / dt;
            let vhi = (lim[i].velocity_max - qd[i]) / dt;
            let plo = (lim[i].angle_min - q[i] - qd[i] * dt) / (dt * dt);
            let phi = (lim[i].angle_max - q[i] - qd[i] * dt) / (dt * dt);
            let hits = |a: f64, b: f64| on_bound(a) || on_bound(b);
            flags.position[i] = hits(plo, phi) || accel[i] > phi || accel[i] < plo;
            flags.velocity[i] = hits(vlo, vhi);
            flags.acceleration[i] = hits(-lim[i].accel_max, lim[i].accel_max);
        }
    }
    Ok(TorqueAllocationResult {
        commanded_torque: torque,
        achieved_accel: accel,
        constraint_active: flags,
        safe_stop: false,
    })
}

/// Everything a controller instance owns.
#[derive(Debug, Clone)]
pub struct ControllerContext {
    pub user: User,
    pub model: ExoskeletonModel,
    pub params: AdmittanceParams,
    pub state: ControllerState,
    pub dt: f64,
    /// Nominal bus latency; partner snapshots are judged stale relative to it.
    pub expected_latency: f64,
}

impl ControllerContext {
    pub fn new(user: User, model: ExoskeletonModel, params: AdmittanceParams, dt: f64) -> Self {
        ControllerContext {
            user,
            model,
            params,
            state: ControllerState::default(),
            dt,
            expected_latency: 0.0,
        }
    }

    /// Seed the admittance integrator with the current joint velocities.
    pub fn reset(&mut self, state: &DyadState) -> Result<()> {
        for side in Side::ALL {
            for joint in Joint::ALL {
                let v = state.get(JointId::new(self.user, side, joint))?.velocity;
                self.state.admittance_velocity[side.index()][joint.index()] = v;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerOutput {
    /// `[side][joint]`, N·m
    pub motor_torque: [[f64; 2]; 2],
    pub desired_accel: [[f64; 2]; 2],
    pub achieved_accel: [[f64; 2]; 2],
    pub flags: [ConstraintFlags; 2],
    pub stale: bool,
    pub safe_stop: bool,
}

/// One control period for the exoskeleton of `ctx.user`.
///
/// `state` holds the user's own joints plus the partner snapshot used to
/// render `desired`; its `time` is the timestamp of the oldest snapshot in
/// it. `measured` is the cuff torque reading `[side][joint]`.
pub fn controller_step(
    ctx: &mut ControllerContext,
    state: &DyadState,
    desired: &InteractionTorqueCommand,
    measured: [[f64; 2]; 2],
    now: f64,
) -> Result<ControllerOutput> {
    let age = now - state.time;
    if age > ctx.expected_latency + STALE_PERIODS * ctx.dt + 1e-9 {
        return Ok(ControllerOutput {
            motor_torque: ctx.state.last_commanded_torque,
            desired_accel: [[0.0; 2]; 2],
            achieved_accel: [[f64::NAN; 2]; 2],
            flags: [ConstraintFlags::default(); 2],
            stale: true,
            safe_stop: false,
        });
    }
    let mut out = ControllerOutput {
        motor_torque: [[0.0; 2]; 2],
        desired_accel: [[0.0; 2]; 2],
        achieved_accel: [[0.0; 2]; 2],
        flags: [ConstraintFlags::default(); 2],
        stale: false,
        safe_stop: false,
    };
    for side in Side::ALL {
        let s = side.index();
        let hip = state.get(JointId::new(ctx.user, side, Joint::Hip))?;
        let knee = state.get(JointId::new(ctx.user, side, Joint::Knee))?;
        let q = [hip.angle, knee.angle];
        let qd = [hip.velocity, knee.velocity];
        let target = desired.leg(ctx.user, side);
        let err = [target[0] + measured[s][0], target[1] + measured[s][1]];
        let velocity = &mut ctx.state.admittance_velocity[s];
        let before = *velocity;
        let qdd_des = admittance_update(err, &ctx.params, velocity, ctx.dt);
        let alloc = allocate_torques(
            ctx.model.leg(side),
            ctx.model.limits(side),
            ctx.model.gravity,
            q,
            qd,
            qdd_des,
            measured[s],
            ctx.dt,
        )?;
        if alloc.safe_stop {
            *velocity = qd;
            out.safe_stop = true;
        } else {
            // Keep the integrator consistent with what was actually commanded.
            for i in 0..2 {
                velocity[i] = before[i] + alloc.achieved_accel[i] * ctx.dt;
            }
        }
        out.motor_torque[s] = alloc.commanded_torque;
        out.desired_accel[s] = qdd_des;
        out.achieved_accel[s] = alloc.achieved_accel;
        out.flags[s] = alloc.constraint_active;
    }
    ctx.state.last_commanded_torque = out.motor_torque;
    Ok(out)
}
