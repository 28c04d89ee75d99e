//! Scripted stand-ins for the two humans.

use serde::{Deserialize, Serialize};

use super::gait::{GaitProfile, LegReference};
use crate::error::{Error, Result};
use crate::model::Side;

/// A value per joint for both legs, each as `[hip, knee]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideValues {
    pub left: [f64; 2],
    pub right: [f64; 2],
}

impl SideValues {
    pub fn uniform(hip: f64, knee: f64) -> Self {
        SideValues {
            left: [hip, knee],
            right: [hip, knee],
        }
    }

    pub fn get(&self, side: Side) -> [f64; 2] {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut [f64; 2] {
        match side {
            Side::Left => &mut self.left,
            Side::Right => &mut self.right,
        }
    }
}

/// PD tracking of the gait profile with a finite effort budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TherapistPolicy {
    pub profile: GaitProfile,
    /// N·m/rad
    pub tracking_kp: f64,
    /// N·m·s/rad
    pub tracking_kd: f64,
    /// N·m, per joint
    pub strength_limit: f64,
}

impl Default for TherapistPolicy {
    fn default() -> Self {
        TherapistPolicy {
            profile: GaitProfile::default(),
            tracking_kp: 300.0,
            tracking_kd: 8.0,
            strength_limit: 100.0,
        }
    }
}

impl TherapistPolicy {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.tracking_kp >= 0.0 && self.tracking_kd >= 0.0) {
            return Err(Error::invalid("therapist.tracking", "gains must be non-negative"));
        }
        if !(self.strength_limit > 0.0) {
            return Err(Error::invalid("therapist.strength_limit", "must be positive"));
        }
        Ok(())
    }
}

/// Impaired walker: attenuated, delayed intent plus passive joint resistance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatientModel {
    /// Scales voluntary torque: 0 is a fully passive limb, 1 full effort.
    pub weakness: f64,
    pub tracking_kp: f64,
    pub tracking_kd: f64,
    /// N·m/rad about `rest_angle`
    pub passive_stiffness: SideValues,
    /// N·m·s/rad
    pub passive_damping: SideValues,
    /// `[hip, knee]`, rad
    pub rest_angle: [f64; 2],
    /// Flexion cap per joint, rad. Beyond it a stiff unilateral torque pushes back.
    pub rom_limit: SideValues,
    /// N·m/rad
    pub rom_penalty_stiffness: f64,
    /// s
    pub intent_delay: f64,
    pub paretic_side: Side,
}

impl Default for PatientModel {
    fn default() -> Self {
        PatientModel::mild(Side::Right)
    }
}

impl PatientModel {
    /// Mild unilateral impairment: stiffer, more damped paretic knee with a
    /// reduced flexion range.
    pub fn mild(paretic_side: Side) -> Self {
        let mut stiffness = SideValues::uniform(2.0, 2.0);
        let mut damping = SideValues::uniform(1.0, 1.0);
        let mut rom = SideValues::uniform(1.6, 1.6);
        *stiffness.get_mut(paretic_side) = [4.0, 12.0];
        *damping.get_mut(paretic_side) = [1.5, 4.0];
        *rom.get_mut(paretic_side) = [1.2, 0.9];
        PatientModel {
            weakness: 0.5,
            tracking_kp: 150.0,
            tracking_kd: 6.0,
            passive_stiffness: stiffness,
            passive_damping: damping,
            rest_angle: [0.0, 0.1],
            rom_limit: rom,
            rom_penalty_stiffness: 400.0,
            intent_delay: 0.15,
            paretic_side,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weakness) {
            return Err(Error::invalid("patient.weakness", "must lie in [0, 1]"));
        }
        if !(self.intent_delay >= 0.0) {
            return Err(Error::invalid("patient.intent_delay", "must be non-negative"));
        }
        for v in [self.passive_stiffness, self.passive_damping] {
            if v.left.iter().chain(&v.right).any(|&x| !(x >= 0.0)) {
                return Err(Error::invalid("patient.passive", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn is_paretic(&self, side: Side) -> bool {
        side == self.paretic_side
    }
}

/// Torque a human applies at the joints of one leg.
pub trait HumanAgent {
    /// Time at which the agent samples its reference (intent delay).
    fn reference_time(&self, t: f64) -> f64;

    fn human_torque(&self, side: Side, reference: &LegReference, q: [f64; 2], qd: [f64; 2]) -> [f64; 2];
}

fn pd(kp: f64, kd: f64, reference: &LegReference, q: [f64; 2], qd: [f64; 2]) -> [f64; 2] {
    [
        kp * (reference.angle[0] - q[0]) + kd * (reference.velocity[0] - qd[0]),
        kp * (reference.angle[1] - q[1]) + kd * (reference.velocity[1] - qd[1]),
    ]
}

impl HumanAgent for TherapistPolicy {
    fn reference_time(&self, t: f64) -> f64 {
        t
    }

    fn human_torque(&self, _side: Side, reference: &LegReference, q: [f64; 2], qd: [f64; 2]) -> [f64; 2] {
        let lim = self.strength_limit;
        pd(self.tracking_kp, self.tracking_kd, reference, q, qd).map(|t| t.clamp(-lim, lim))
    }
}

impl HumanAgent for PatientModel {
    fn reference_time(&self, t: f64) -> f64 {
        t - self.intent_delay
    }

    fn human_torque(&self, side: Side, reference: &LegReference, q: [f64; 2], qd: [f64; 2]) -> [f64; 2] {
        let voluntary = pd(self.tracking_kp, self.tracking_kd, reference, q, qd);
        let k = self.passive_stiffness.get(side);
        let c = self.passive_damping.get(side);
        let rom = self.rom_limit.get(side);
        let mut out = [0.0; 2];
        for i in 0..2 {
            let penalty = if q[i] > rom[i] {
                self.rom_penalty_stiffness * (q[i] - rom[i])
            } else {
                0.0
            };
            out[i] = self.weakness * voluntary[i] - k[i] * (q[i] - self.rest_angle[i]) - c[i] * qd[i] - penalty;
        }
        out
    }
}

/// Human torque for whichever agent drives the leg.
pub fn human_torque(
    agent: &dyn HumanAgent,
    side: Side,
    reference: &LegReference,
    q: [f64; 2],
    qd: [f64; 2],
) -> [f64; 2] {
    agent.human_torque(side, reference, q, qd)
}
